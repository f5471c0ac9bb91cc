#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace privnoise {

// Structured text used for manifests, certificates, and configs: one
// `key = value` pair per line, '#' comments, nesting by dotted keys
// (e.g. certificate.crb_floor). Lists are comma-separated values.
class KeyValueDoc {
 public:
  void set(const std::string& key, const std::string& value) { map_[key] = value; }
  void set(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    map_[key] = os.str();
  }
  void set(const std::string& key, long long value) { map_[key] = std::to_string(value); }
  void set(const std::string& key, unsigned long long value) { map_[key] = std::to_string(value); }
  void set_list(const std::string& key, const std::vector<double>& values) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os << ",";
      os << values[i];
    }
    map_[key] = os.str();
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  std::string get(const std::string& key) const {
    const auto it = map_.find(key);
    if (it == map_.end()) throw std::runtime_error("config: missing key '" + key + "'");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    const auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }
  double get_double(const std::string& key) const {
    try {
      return std::stod(get(key));
    } catch (const std::runtime_error&) {
      throw;
    } catch (...) {
      throw std::runtime_error("config: key '" + key + "' is not a number");
    }
  }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  long long get_int(const std::string& key) const {
    try {
      return std::stoll(get(key));
    } catch (const std::runtime_error&) {
      throw;
    } catch (...) {
      throw std::runtime_error("config: key '" + key + "' is not an integer");
    }
  }
  long long get_int_or(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) continue;
      out.push_back(std::stod(cell));
    }
    return out;
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : map_) os << k << " = " << v << "\n";
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    out << serialize();
  }

  static KeyValueDoc parse(std::istream& in) {
    KeyValueDoc doc;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("config: line " + std::to_string(lineno) + " has no '='");
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      doc.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return doc;
  }

  static KeyValueDoc load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    return parse(in);
  }

 private:
  std::map<std::string, std::string> map_;
};

}  // namespace privnoise
