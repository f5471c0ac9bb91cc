// Command-line front end: obfuscate / train / certify / eigen / experiment.
//
// Exit codes: 0 success, 2 bad usage, 3 malformed config or bad argument,
// 4 missing or unreadable file, 5 solver failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "privnoise/dataset.hpp"
#include "privnoise/harness.hpp"
#include "privnoise/manifest.hpp"
#include "privnoise/mech_constrained.hpp"
#include "privnoise/mech_correlated.hpp"
#include "privnoise/mech_iid.hpp"
#include "privnoise/privacy_metrics.hpp"
#include "privnoise/svm.hpp"

namespace {

constexpr int kExitBadArgument = 3;
constexpr int kExitMissingFile = 4;
constexpr int kExitSolverFailure = 5;

// "identity:p" or a path to a key-value file with `dim` and `row_k` lists.
privnoise::ScalingMatrix parse_pi(const std::string& spec) {
  if (spec.rfind("identity:", 0) == 0) {
    const long p = std::stol(spec.substr(9));
    if (p < 1) throw std::invalid_argument("pi: identity dimension must be >= 1");
    return privnoise::ScalingMatrix::identity(p);
  }
  if (spec.rfind("diag:", 0) == 0) {
    std::stringstream ss(spec.substr(5));
    std::vector<double> d;
    std::string cell;
    while (std::getline(ss, cell, ',')) d.push_back(std::stod(cell));
    Eigen::VectorXd v =
        Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    return privnoise::ScalingMatrix(Eigen::MatrixXd(v.asDiagonal()));
  }
  const privnoise::KeyValueDoc doc = privnoise::KeyValueDoc::load(spec);
  const long p = doc.get_int("dim");
  Eigen::MatrixXd m(p, p);
  for (long k = 0; k < p; ++k) {
    const std::vector<double> row = doc.get_list("row_" + std::to_string(k));
    if (static_cast<long>(row.size()) != p) throw std::invalid_argument("pi: bad row length");
    for (long j = 0; j < p; ++j) m(k, j) = row[static_cast<std::size_t>(j)];
  }
  return privnoise::ScalingMatrix(m);
}

std::string sha_digest_stub(const Eigen::MatrixXd& m) {
  // Cheap content digest for manifests: FNV over the raw bytes.
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (Eigen::Index i = 0; i < m.size() * static_cast<Eigen::Index>(sizeof(double)); ++i) {
    h = (h ^ bytes[i]) * 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privnoise: privacy-preserving dataset release toolkit"};
  app.require_subcommand(1);

  // ---- obfuscate ----
  auto* obf = app.add_subcommand("obfuscate", "add calibrated noise to a CSV dataset");
  std::string obf_input, obf_output, obf_label = "label", obf_mechanism = "optimal_gaussian";
  std::string obf_pi = "";
  double obf_lambda = 1.0, obf_m = 100.0, obf_theta = 1.0, obf_rho = 1e-2, obf_delta = 0.0;
  std::uint64_t obf_seed = 0;
  bool obf_standardize = false;
  obf->add_option("--input", obf_input, "input CSV")->required();
  obf->add_option("--output", obf_output, "released CSV")->required();
  obf->add_option("--label-column", obf_label, "label column name or index");
  obf->add_option("--mechanism", obf_mechanism,
                  "optimal_gaussian | laplace_matched | correlated");
  obf->add_option("--lambda", obf_lambda, "privacy-utility weight");
  obf->add_option("--m", obf_m, "variance cap for the correlated mechanism");
  obf->add_option("--pi", obf_pi, "scaling matrix: identity:p, diag:..., or file");
  obf->add_option("--seed", obf_seed, "random seed");
  obf->add_option("--delta", obf_delta, "also certify (eps,delta) at this delta");
  obf->add_option("--theta", obf_theta, "SVM slack weight (correlated mechanism)");
  obf->add_option("--rho", obf_rho, "SVM regularizer (correlated mechanism)");
  obf->add_flag("--standardize", obf_standardize, "z-score features first");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train the regularized soft-margin SVM");
  std::string train_input, train_model, train_label = "label";
  double train_theta = 1.0, train_rho = 1e-2;
  train->add_option("--input", train_input, "input CSV")->required();
  train->add_option("--model", train_model, "output model file")->required();
  train->add_option("--label-column", train_label, "label column name or index");
  train->add_option("--theta", train_theta, "slack weight");
  train->add_option("--rho", train_rho, "regularizer");

  // ---- certify ----
  auto* certify = app.add_subcommand("certify", "CRB floors and (eps,delta) certification");
  double cert_lambda = 1.0, cert_delta = 0.05;
  std::string cert_pi = "identity:1";
  certify->add_option("--lambda", cert_lambda, "privacy-utility weight")->required();
  certify->add_option("--pi", cert_pi, "scaling matrix spec");
  certify->add_option("--delta", cert_delta, "DP delta in (0,1)")->required();

  // ---- eigen ----
  auto* eigen = app.add_subcommand("eigen", "constrained-noise 1-D ground-state solve");
  double eig_lambda = 1.0, eig_theta = 1.0, eig_lower = -1.0, eig_upper = 1.0;
  int eig_grid = 1024;
  std::string eig_output;
  eigen->add_option("--lambda", eig_lambda, "privacy-utility weight");
  eigen->add_option("--theta", eig_theta, "diagonal Pi weight");
  eigen->add_option("--lower", eig_lower, "box lower end")->required();
  eigen->add_option("--upper", eig_upper, "box upper end")->required();
  eigen->add_option("--grid-points", eig_grid, "grid resolution");
  eigen->add_option("--output", eig_output, "two-column CSV (grid, u)")->required();

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "run the benchmark protocol from a config file");
  std::string exp_config, exp_output = "metrics.csv", exp_summary;
  exp->add_option("--config", exp_config, "key-value config file")->required();
  exp->add_option("--output", exp_output, "metrics CSV path");
  exp->add_option("--summary", exp_summary, "optional structured-text summary path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*obf) {
      privnoise::CsvOptions opts;
      opts.label_column = obf_label;
      privnoise::Dataset data = privnoise::read_csv(obf_input, opts);
      const Eigen::Index p = data.cols();
      privnoise::ScalingMatrix pi =
          obf_pi.empty() ? privnoise::ScalingMatrix::identity(p) : parse_pi(obf_pi);
      privnoise::KeyValueDoc manifest;
      if (obf_standardize) {
        const privnoise::ColumnScaling sc = privnoise::standardize(data);
        std::vector<double> means(sc.means.data(), sc.means.data() + sc.means.size());
        std::vector<double> scales(sc.scales.data(), sc.scales.data() + sc.scales.size());
        manifest.set_list("standardize.means", means);
        manifest.set_list("standardize.scales", scales);
      }
      privnoise::RandomStream stream(obf_seed, 1);
      privnoise::Dataset released;
      if (obf_mechanism == "correlated") {
        const privnoise::SvmConfig cfg{obf_theta, obf_rho, 1e-8, 200000};
        const privnoise::SvmSolution sol = privnoise::train_svm(data, cfg);
        auto [rel, cert] = privnoise::correlated_obfuscate(data, sol, obf_m, pi, stream);
        released = std::move(rel);
        cert.write_to(manifest);
        manifest.set("mechanism", std::string("correlated"));
        manifest.set("m", obf_m);
      } else {
        const privnoise::GaussianMechanism gauss = privnoise::optimal_iid_mechanism(obf_lambda, pi);
        privnoise::PrivacyCertificate cert;
        if (obf_mechanism == "optimal_gaussian") {
          released = privnoise::obfuscate(data, gauss, stream);
          cert = privnoise::crb_bounds(gauss.fisher_information(), pi);
          if (obf_delta > 0.0) {
            const double eps = privnoise::dp_certify(obf_lambda, pi, obf_delta);
            cert.dp_pairs.emplace_back(eps, obf_delta);
            cert.adversary_floors.push_back(privnoise::adversary_floor(eps, obf_delta, pi));
          }
        } else if (obf_mechanism == "laplace_matched") {
          bool fallback = false;
          const privnoise::LaplaceMechanism lap =
              privnoise::matched_laplace_baseline(gauss, &fallback);
          released = privnoise::obfuscate(data, lap, stream);
          cert = privnoise::crb_bounds(lap.fisher_information(), pi);
          cert.notes = fallback ? "laplace analytic-limit; scalar trace-matching fallback"
                                : "laplace analytic-limit";
        } else {
          std::cerr << "error: unknown mechanism '" << obf_mechanism << "'\n";
          return kExitBadArgument;
        }
        cert.write_to(manifest);
        manifest.set("mechanism", obf_mechanism);
        manifest.set("lambda", obf_lambda);
      }
      manifest.set("seed", static_cast<unsigned long long>(obf_seed));
      manifest.set("pi_digest", sha_digest_stub(pi.matrix()));
      manifest.set("input_digest", sha_digest_stub(data.features));
      privnoise::write_csv(obf_output, released, "label");
      manifest.save(obf_output + ".manifest");
      std::cout << "released " << released.rows() << " rows to " << obf_output << "\n";
      return 0;
    }

    if (*train) {
      privnoise::CsvOptions opts;
      opts.label_column = train_label;
      const privnoise::Dataset data = privnoise::read_csv(train_input, opts);
      const privnoise::SvmConfig cfg{train_theta, train_rho, 1e-8, 200000};
      const privnoise::SvmSolution sol = privnoise::train_svm(data, cfg);
      privnoise::save_model(train_model, sol, cfg);
      std::cout << "trained model written to " << train_model
                << " (kkt residual " << sol.kkt_residual << ")\n";
      return 0;
    }

    if (*certify) {
      const privnoise::ScalingMatrix pi = parse_pi(cert_pi);
      const privnoise::GaussianMechanism gauss =
          privnoise::optimal_iid_mechanism(cert_lambda, pi);
      const privnoise::PrivacyCertificate bounds =
          privnoise::crb_bounds(gauss.fisher_information(), pi);
      const double eps = privnoise::dp_certify(cert_lambda, pi, cert_delta);
      std::cout.precision(12);
      std::cout << "crb_floor = " << bounds.crb_floor << "\n"
                << "weak_floor = " << bounds.weak_floor << "\n"
                << "epsilon_min = " << eps << " (delta = " << cert_delta << ")\n"
                << "adversary_floor = " << privnoise::adversary_floor(eps, cert_delta, pi)
                << "\n";
      return 0;
    }

    if (*eigen) {
      const privnoise::EigenSolution1D sol =
          privnoise::solve_ground_state(eig_lambda, eig_theta, eig_lower, eig_upper, eig_grid);
      std::ofstream out(eig_output);
      if (!out) {
        std::cerr << "error: cannot write " << eig_output << "\n";
        return kExitMissingFile;
      }
      out.precision(17);
      out << "n,u\n";
      for (Eigen::Index k = 0; k < sol.grid.size(); ++k) {
        out << sol.grid[k] << "," << sol.u_values[k] << "\n";
      }
      std::cout << "mu = " << sol.mu << ", ode_residual = " << sol.ode_residual
                << ", normalization_error = " << sol.normalization_error << "\n";
      return 0;
    }

    if (*exp) {
      const privnoise::ExperimentConfig cfg =
          privnoise::ExperimentConfig::from_doc(privnoise::KeyValueDoc::load(exp_config));
      const std::vector<privnoise::MetricsRecord> records = privnoise::run_experiment(cfg);
      std::ofstream out(exp_output);
      if (!out) {
        std::cerr << "error: cannot write " << exp_output << "\n";
        return kExitMissingFile;
      }
      privnoise::write_metrics_csv(out, records);
      if (!exp_summary.empty()) {
        privnoise::KeyValueDoc summary;
        summary.set("records", static_cast<long long>(records.size()));
        summary.set("seed", static_cast<unsigned long long>(cfg.seed));
        summary.set("trials", static_cast<long long>(cfg.trials));
        for (std::size_t i = 0; i < records.size(); ++i) {
          const std::string prefix = "record_" + std::to_string(i);
          summary.set(prefix + ".mechanism", privnoise::mechanism_name(records[i].mechanism));
          summary.set(prefix + ".lambda", records[i].lambda);
          summary.set(prefix + "." + records[i].metric, records[i].value);
          summary.set(prefix + ".privacy_floor", records[i].privacy_floor);
        }
        summary.save(exp_summary);
      }
      std::cout << "wrote " << records.size() << " metric rows to " << exp_output << "\n";
      return 0;
    }
  } catch (const privnoise::SvmSolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadArgument;
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    if (msg.find("cannot open") != std::string::npos ||
        msg.find("cannot write") != std::string::npos) {
      return kExitMissingFile;
    }
    return kExitBadArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
