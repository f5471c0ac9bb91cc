#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace privnoise {

// Tabular dataset: q rows of p features plus one label per row. Labels are
// binary (+/-1, never 0/1 internally) or real-valued responses.
struct Dataset {
  Eigen::MatrixXd features;  // q x p, row i is x_i^T
  Eigen::VectorXd labels;    // length q
  std::vector<std::string> feature_names;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }

  bool labels_binary() const {
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels[i] != 1.0 && labels[i] != -1.0) return false;
    }
    return true;
  }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1) {
      throw std::invalid_argument("dataset: need q >= 1 rows and p >= 1 columns");
    }
    if (labels.size() != features.rows()) {
      throw std::invalid_argument("dataset: label count does not match row count");
    }
    if (!features.allFinite()) {
      throw std::invalid_argument("dataset: non-finite feature entry");
    }
  }
};

// Per-column affine scaling fitted by standardize(); kept so a release can be
// mapped back to the original units.
struct ColumnScaling {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;  // standard deviations, floored at tiny
};

inline ColumnScaling standardize(Dataset& data) {
  const Eigen::Index q = data.rows(), p = data.cols();
  ColumnScaling sc;
  sc.means = data.features.colwise().mean();
  sc.scales.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var =
        (data.features.col(j).array() - sc.means[j]).square().sum() / static_cast<double>(q);
    sc.scales[j] = std::max(std::sqrt(var), 1e-12);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    data.features.col(j) = (data.features.col(j).array() - sc.means[j]) / sc.scales[j];
  }
  return sc;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

struct CsvOptions {
  std::string label_column;                             // name, or decimal index if numeric
  std::unordered_map<std::string, double> label_map;    // e.g. {"M",+1},{"B",-1}; empty = parse as real
  bool has_header = true;                               // headerless files use indices f0, f1, ...
  std::vector<Eigen::Index> drop_columns;               // raw column indices to ignore (ids etc.)
};

// First row is the header; every non-label column is parsed as a real number.
inline Dataset read_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
  const std::vector<std::string> first = detail::split_csv_line(line);
  const Eigen::Index ncols = static_cast<Eigen::Index>(first.size());
  std::vector<std::string> header;
  std::string pending_row;  // headerless: the first line is already a data row
  if (opts.has_header) {
    header = first;
  } else {
    for (Eigen::Index j = 0; j < ncols; ++j) header.push_back("f" + std::to_string(j));
    pending_row = line;
  }
  auto dropped = [&opts](Eigen::Index j) {
    return std::find(opts.drop_columns.begin(), opts.drop_columns.end(), j) !=
           opts.drop_columns.end();
  };

  Eigen::Index label_idx = -1;
  for (Eigen::Index j = 0; j < ncols; ++j) {
    if (header[static_cast<std::size_t>(j)] == opts.label_column) label_idx = j;
  }
  if (label_idx < 0) {
    try {
      label_idx = static_cast<Eigen::Index>(std::stol(opts.label_column));
    } catch (...) {
      throw std::runtime_error("csv: label column '" + opts.label_column + "' not found");
    }
    if (label_idx < 0 || label_idx >= ncols) {
      throw std::runtime_error("csv: label column index out of range");
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  std::size_t lineno = opts.has_header ? 1 : 0;
  const auto process = [&](const std::string& raw) {
    if (raw.empty() || raw == "\r") return;
    const auto cells = detail::split_csv_line(raw);
    if (static_cast<Eigen::Index>(cells.size()) != ncols) {
      throw std::runtime_error("csv: line " + std::to_string(lineno) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(ncols));
    }
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(ncols - 1));
    for (Eigen::Index j = 0; j < ncols; ++j) {
      const std::string& cell = cells[static_cast<std::size_t>(j)];
      if (j == label_idx) {
        if (!opts.label_map.empty()) {
          const auto it = opts.label_map.find(cell);
          if (it == opts.label_map.end()) {
            throw std::runtime_error("csv: unmapped label '" + cell + "' at line " +
                                     std::to_string(lineno));
          }
          labels.push_back(it->second);
        } else {
          labels.push_back(std::stod(cell));
        }
      } else if (!dropped(j)) {
        try {
          row.push_back(std::stod(cell));
        } catch (...) {
          throw std::runtime_error("csv: non-numeric cell '" + cell + "' at line " +
                                   std::to_string(lineno));
        }
      }
    }
    rows.push_back(std::move(row));
  };
  if (!pending_row.empty()) {
    ++lineno;
    process(pending_row);
  }
  while (std::getline(in, line)) {
    ++lineno;
    process(line);
  }
  if (rows.empty()) throw std::runtime_error("csv: no data rows in " + path);

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
  data.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    data.labels[static_cast<Eigen::Index>(i)] = labels[i];
  }
  for (Eigen::Index j = 0; j < ncols; ++j) {
    if (j != label_idx && !dropped(j)) {
      data.feature_names.push_back(header[static_cast<std::size_t>(j)]);
    }
  }
  data.validate();
  return data;
}

inline void write_csv(const std::string& path, const Dataset& data,
                      const std::string& label_name = "label") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out.precision(17);
  const Eigen::Index p = data.cols();
  for (Eigen::Index j = 0; j < p; ++j) {
    out << (static_cast<Eigen::Index>(data.feature_names.size()) == p
                ? data.feature_names[static_cast<std::size_t>(j)]
                : "f" + std::to_string(j))
        << ",";
  }
  out << label_name << "\n";
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) out << data.features(i, j) << ",";
    out << data.labels[i] << "\n";
  }
}

}  // namespace privnoise
