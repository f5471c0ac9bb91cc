#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "privnoise/dataset.hpp"
#include "privnoise/genml.hpp"
#include "privnoise/manifest.hpp"
#include "privnoise/mech_correlated.hpp"
#include "privnoise/mech_iid.hpp"
#include "privnoise/privacy_metrics.hpp"
#include "privnoise/random_stream.hpp"
#include "privnoise/svm.hpp"

namespace privnoise {

enum class MechanismKind { optimal_gaussian, laplace_matched, constrained, correlated };
enum class LearnerKind { svm, ridge };

inline MechanismKind parse_mechanism(const std::string& name) {
  if (name == "optimal_gaussian") return MechanismKind::optimal_gaussian;
  if (name == "laplace_matched") return MechanismKind::laplace_matched;
  if (name == "constrained") return MechanismKind::constrained;
  if (name == "correlated") return MechanismKind::correlated;
  throw std::invalid_argument("unknown mechanism '" + name + "'");
}

inline std::string mechanism_name(MechanismKind k) {
  switch (k) {
    case MechanismKind::optimal_gaussian: return "optimal_gaussian";
    case MechanismKind::laplace_matched: return "laplace_matched";
    case MechanismKind::constrained: return "constrained";
    case MechanismKind::correlated: return "correlated";
  }
  return "?";
}

struct BlobSpec {
  Eigen::VectorXd center_a;  // label +1
  Eigen::VectorXd center_b;  // label -1
  int count_a = 50;
  int count_b = 50;
  double sigma = 1.0;
};

inline Dataset make_blobs(const BlobSpec& spec, RandomStream stream) {
  const Eigen::Index p = spec.center_a.size();
  if (spec.center_b.size() != p || p < 1 || spec.count_a < 1 || spec.count_b < 1) {
    throw std::invalid_argument("blob spec: inconsistent dimensions or counts");
  }
  Dataset data;
  data.features.resize(spec.count_a + spec.count_b, p);
  data.labels.resize(spec.count_a + spec.count_b);
  for (int i = 0; i < spec.count_a + spec.count_b; ++i) {
    const bool first = i < spec.count_a;
    const Eigen::VectorXd& c = first ? spec.center_a : spec.center_b;
    for (Eigen::Index j = 0; j < p; ++j) {
      data.features(i, j) = c[j] + spec.sigma * stream.next_gaussian();
    }
    data.labels[i] = first ? 1.0 : -1.0;
  }
  return data;
}

struct ExperimentConfig {
  std::string dataset_source = "blobs";  // "blobs" or a CSV path
  std::string label_column;
  BlobSpec blobs;
  std::vector<MechanismKind> mechanisms = {MechanismKind::optimal_gaussian};
  std::vector<double> lambda_grid = {1.0};
  double m = 100.0;
  int trials = 100;
  std::uint64_t seed = 0;
  LearnerKind learner = LearnerKind::svm;
  double theta = 1.0;
  double rho = 1e-2;
  double sigma = 1e-5;  // ridge regularizer
  int workers = 1;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("experiment: trials >= 1");
    if (lambda_grid.empty()) {
      for (const MechanismKind k : mechanisms) {
        if (k != MechanismKind::correlated) {
          throw std::invalid_argument("experiment: lambda_grid must be nonempty");
        }
      }
    }
  }

  static ExperimentConfig from_doc(const KeyValueDoc& doc) {
    ExperimentConfig cfg;
    cfg.dataset_source = doc.get_or("dataset", "blobs");
    cfg.label_column = doc.get_or("label_column", "label");
    auto vec = [&doc](const std::string& key, const Eigen::VectorXd& fallback) {
      if (!doc.has(key)) return fallback;
      const std::vector<double> v = doc.get_list(key);
      return Eigen::VectorXd(
          Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    Eigen::VectorXd ca(2), cb(2);
    ca << 0.0, 0.0;
    cb << 0.0, 5.0;
    cfg.blobs.center_a = vec("blob_center_a", ca);
    cfg.blobs.center_b = vec("blob_center_b", cb);
    cfg.blobs.count_a = static_cast<int>(doc.get_int_or("blob_count_a", 50));
    cfg.blobs.count_b = static_cast<int>(doc.get_int_or("blob_count_b", 50));
    cfg.blobs.sigma = doc.get_double_or("blob_sigma", 1.0);
    if (doc.has("mechanisms")) {
      cfg.mechanisms.clear();
      std::stringstream ss(doc.get("mechanisms"));
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (!name.empty()) cfg.mechanisms.push_back(parse_mechanism(name));
      }
    }
    if (doc.has("lambda_grid")) cfg.lambda_grid = doc.get_list("lambda_grid");
    cfg.m = doc.get_double_or("m", 100.0);
    cfg.trials = static_cast<int>(doc.get_int_or("trials", 100));
    cfg.seed = static_cast<std::uint64_t>(doc.get_int_or("seed", 0));
    const std::string learner = doc.get_or("learner", "svm");
    if (learner == "svm") {
      cfg.learner = LearnerKind::svm;
    } else if (learner == "ridge") {
      cfg.learner = LearnerKind::ridge;
    } else {
      throw std::invalid_argument("experiment: unknown learner '" + learner + "'");
    }
    cfg.theta = doc.get_double_or("theta", 1.0);
    cfg.rho = doc.get_double_or("rho", 1e-2);
    cfg.sigma = doc.get_double_or("sigma", 1e-5);
    cfg.workers = static_cast<int>(doc.get_int_or("workers", 1));
    cfg.validate();
    return cfg;
  }
};

struct MetricsRecord {
  MechanismKind mechanism = MechanismKind::optimal_gaussian;
  double lambda = 0.0;
  std::string metric;  // "success_rate" or "expected_loss"
  double value = 0.0;
  double stderr_value = 0.0;
  double privacy_floor = 0.0;
  int trials = 0;
};

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out.precision(17);
  out << "mechanism,lambda,metric,value,stderr,privacy_floor,trials\n";
  for (const auto& r : records) {
    out << mechanism_name(r.mechanism) << "," << r.lambda << "," << r.metric << "," << r.value
        << "," << r.stderr_value << "," << r.privacy_floor << "," << r.trials << "\n";
  }
}

namespace detail {

// Order-independent fan-out: slot i always holds trial i's result, so the
// aggregate is identical for any worker count.
inline void parallel_trials(int trials, int workers, const std::function<void(int)>& body) {
  if (workers <= 1) {
    for (int t = 0; t < trials; ++t) body(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) body(t);
    });
  }
  for (auto& th : pool) th.join();
}

struct TrialStats {
  double mean = 0.0;
  double stderr_value = 0.0;
};

inline TrialStats summarize(const std::vector<double>& values) {
  TrialStats s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_value = std::sqrt(ss / (n - 1.0) / n);
  }
  return s;
}

}  // namespace detail

// The success-rate metric is always evaluated against the ORIGINAL features
// with the classifier trained on the released (noisy) features.
inline double classification_success_rate(const Dataset& original, const SvmSolution& noisy_model) {
  double hits = 0.0;
  for (Eigen::Index i = 0; i < original.rows(); ++i) {
    if (original.labels[i] * noisy_model.decision(original.features.row(i)) > 0.0) hits += 1.0;
  }
  return hits / static_cast<double>(original.rows());
}

inline Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_source == "blobs") {
    return make_blobs(cfg.blobs, RandomStream(cfg.seed, 0xb10b));
  }
  CsvOptions opts;
  opts.label_column = cfg.label_column;
  return read_csv(cfg.dataset_source, opts);
}

// Per-trial metric for one mechanism at one lambda. Trial streams are forked
// from (seed, mechanism-independent trial id) so mechanisms are seed-paired.
inline std::vector<double> run_trials(const ExperimentConfig& cfg, const Dataset& data,
                                      MechanismKind kind, double lambda, double* floor_out) {
  const ScalingMatrix pi = ScalingMatrix::identity(data.cols());
  const SvmConfig svm_cfg{cfg.theta, cfg.rho, 1e-8, 200000};

  std::unique_ptr<NoiseMechanism> mech;
  double floor = 0.0;
  SvmSolution base_solution;  // for the correlated mechanism
  if (kind == MechanismKind::optimal_gaussian) {
    const GaussianMechanism gaussian = optimal_iid_mechanism(lambda, pi);
    mech = std::make_unique<GaussianMechanism>(gaussian);
    floor = crb_bounds(gaussian.fisher_information(), pi).crb_floor;
  } else if (kind == MechanismKind::laplace_matched) {
    const GaussianMechanism gaussian = optimal_iid_mechanism(lambda, pi);
    mech = std::make_unique<LaplaceMechanism>(matched_laplace_baseline(gaussian));
    floor = crb_bounds(mech->fisher_information(), pi).crb_floor;
  } else if (kind == MechanismKind::correlated) {
    base_solution = train_svm(data, svm_cfg);
  } else {
    throw std::invalid_argument("run_trials: constrained mechanism needs an explicit box; "
                                "use the eigen/obfuscate tools instead");
  }

  std::vector<double> values(static_cast<std::size_t>(cfg.trials), 0.0);
  std::string error;
  std::mutex error_mutex;
  detail::parallel_trials(cfg.trials, cfg.workers, [&](int t) {
    try {
      RandomStream trial = RandomStream(cfg.seed).fork(static_cast<std::uint64_t>(t) + 1);
      Dataset released;
      if (kind == MechanismKind::correlated) {
        auto [rel, cert] = correlated_obfuscate(data, base_solution, cfg.m, pi, trial);
        released = std::move(rel);
        if (t == 0 && floor_out) *floor_out = cert.weak_floor;
      } else {
        released = obfuscate(data, *mech, trial);
      }
      if (cfg.learner == LearnerKind::svm) {
        const SvmSolution noisy = train_svm(released, svm_cfg);
        values[static_cast<std::size_t>(t)] = classification_success_rate(data, noisy);
      } else {
        const Eigen::VectorXd phi = fit_ridge(released, cfg.sigma);
        values[static_cast<std::size_t>(t)] = ridge_loss(phi, data, cfg.sigma);
      }
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (error.empty()) error = "trial " + std::to_string(t) + ": " + e.what();
    }
  });
  if (!error.empty()) throw std::runtime_error("run_trials: " + error);
  if (floor_out && kind != MechanismKind::correlated) *floor_out = floor;
  return values;
}

inline std::vector<MetricsRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = load_experiment_dataset(cfg);
  const std::string metric =
      cfg.learner == LearnerKind::svm ? "success_rate" : "expected_loss";

  std::vector<MetricsRecord> records;
  for (const MechanismKind kind : cfg.mechanisms) {
    const std::vector<double> lambdas =
        kind == MechanismKind::correlated ? std::vector<double>{0.0} : cfg.lambda_grid;
    for (double lambda : lambdas) {
      double floor = 0.0;
      const std::vector<double> values = run_trials(cfg, data, kind, lambda, &floor);
      const detail::TrialStats stats = detail::summarize(values);
      records.push_back(MetricsRecord{kind, lambda, metric, stats.mean, stats.stderr_value, floor,
                                      cfg.trials});
    }
  }
  return records;
}

struct PairedComparison {
  MetricsRecord optimal;
  MetricsRecord laplace;
  double mean_difference = 0.0;   // optimal - laplace, per-trial paired
  double paired_stderr = 0.0;
};

inline std::vector<PairedComparison> compare_mechanisms(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = load_experiment_dataset(cfg);
  const std::string metric =
      cfg.learner == LearnerKind::svm ? "success_rate" : "expected_loss";

  std::vector<PairedComparison> out;
  for (double lambda : cfg.lambda_grid) {
    double floor_g = 0.0, floor_l = 0.0;
    const std::vector<double> vg =
        run_trials(cfg, data, MechanismKind::optimal_gaussian, lambda, &floor_g);
    const std::vector<double> vl =
        run_trials(cfg, data, MechanismKind::laplace_matched, lambda, &floor_l);
    PairedComparison cmp;
    cmp.optimal = MetricsRecord{MechanismKind::optimal_gaussian, lambda, metric,
                                detail::summarize(vg).mean, detail::summarize(vg).stderr_value,
                                floor_g, cfg.trials};
    cmp.laplace = MetricsRecord{MechanismKind::laplace_matched, lambda, metric,
                                detail::summarize(vl).mean, detail::summarize(vl).stderr_value,
                                floor_l, cfg.trials};
    std::vector<double> diff(vg.size());
    for (std::size_t i = 0; i < vg.size(); ++i) diff[i] = vg[i] - vl[i];
    const detail::TrialStats ds = detail::summarize(diff);
    cmp.mean_difference = ds.mean;
    cmp.paired_stderr = ds.stderr_value;
    out.push_back(std::move(cmp));
  }
  return out;
}

}  // namespace privnoise
