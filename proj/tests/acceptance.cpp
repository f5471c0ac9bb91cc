// Acceptance gate: one line per criterion, nonzero exit when any fails.
// Tolerances are pinned here and must not be loosened to make a run green.

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "privnoise/genml.hpp"
#include "privnoise/harness.hpp"
#include "privnoise/mech_constrained.hpp"
#include "privnoise/mech_correlated.hpp"
#include "privnoise/mech_iid.hpp"
#include "privnoise/privacy_metrics.hpp"
#include "privnoise/svm.hpp"

#include "qp_oracle.hpp"

using namespace privnoise;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail = "") {
  std::cout << "criterion " << number << " [" << name << "]: " << (pass ? "PASS" : "FAIL");
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++failures;
}

ScalingMatrix random_spd(Eigen::Index p, RandomStream& rng) {
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
  }
  return ScalingMatrix(a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(p, p));
}

DensityFactor logistic_factor(double variance) {
  const double s = std::sqrt(3.0 * variance) / M_PI;
  DensityFactor f;
  f.pdf = [s](double x) {
    const double c = std::cosh(x / (2.0 * s));
    return 1.0 / (4.0 * s * c * c);
  };
  f.pdf_deriv = [s](double x) {
    const double c = std::cosh(x / (2.0 * s));
    return -std::tanh(x / (2.0 * s)) / (4.0 * s * s * c * c);
  };
  return f;
}

DensityFactor student_t_factor(double nu, double variance) {
  const double sigma = std::sqrt(variance * (nu - 2.0) / nu);
  const double c = std::exp(std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0)) /
                   std::sqrt(nu * M_PI);
  DensityFactor f;
  f.pdf = [nu, sigma, c](double x) {
    const double t = x / sigma;
    return c / sigma * std::pow(1.0 + t * t / nu, -(nu + 1.0) / 2.0);
  };
  f.pdf_deriv = [nu, sigma, c](double x) {
    const double t = x / sigma;
    const double g = c / sigma * std::pow(1.0 + t * t / nu, -(nu + 1.0) / 2.0);
    return -g * (nu + 1.0) * t / (sigma * (nu + t * t));
  };
  return f;
}

Dataset blobs_default(std::uint64_t seed, int per_class = 50) {
  BlobSpec spec;
  spec.center_a = Eigen::VectorXd::Zero(2);
  spec.center_b = Eigen::VectorXd::Zero(2);
  spec.center_b[1] = 5.0;
  spec.count_a = spec.count_b = per_class;
  return make_blobs(spec, RandomStream(seed, 0xb10b));
}

// ---- criterion 1: closed-form CRB floors ----
void criterion_crb_floors() {
  const ScalingMatrix pi = ScalingMatrix::identity(2);
  const std::vector<std::pair<double, double>> cases = {{1e-4, 200.0}, {1e-2, 20.0}, {1.0, 2.0}};
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [lambda, expected] : cases) {
    const GaussianMechanism mech = optimal_iid_mechanism(lambda, pi);
    const double floor = crb_bounds(mech.fisher_information(), pi).crb_floor;
    if (std::abs(floor - expected) > 1e-9) pass = false;
    detail << floor << " ";
  }
  report(1, "crb floors", pass, "floors = " + detail.str() + "expected 200 20 2");
}

// ---- criterion 2: Monte-Carlo tightness of the floor ----
void criterion_crb_tightness() {
  const ScalingMatrix pi = ScalingMatrix::identity(2);
  const double lambda = 1e-2;
  const GaussianMechanism mech = optimal_iid_mechanism(lambda, pi);
  const double floor = crb_bounds(mech.fisher_information(), pi).crb_floor;

  RandomStream rng(20240521);
  const Eigen::Index n = 100000;
  const Eigen::MatrixXd noise = mech.sample(n, rng);
  Eigen::VectorXd weighted(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    weighted[i] = noise.row(i) * pi.matrix() * noise.row(i).transpose();
  }
  const double mean = weighted.mean();
  const double sd = std::sqrt((weighted.array() - mean).square().sum() / (n - 1.0));
  const double se = sd / std::sqrt(static_cast<double>(n));
  const bool pass = std::abs(mean - floor) <= 3.0 * se;
  std::ostringstream d;
  d << "mc " << mean << " vs floor " << floor << ", 3se " << 3.0 * se;
  report(2, "crb tightness", pass, d.str());
}

// ---- criterion 3: no battery density beats the optimal gaussian ----
void criterion_optimality_battery() {
  RandomStream rng(333);
  bool pass = true;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index p = 1 + trial % 3;
    const ScalingMatrix pi = random_spd(p, rng);
    const double lambda = std::pow(10.0, -3.0 * rng.next_uniform());
    const GaussianMechanism best = optimal_iid_mechanism(lambda, pi);
    const double opt = 2.0 * std::sqrt(lambda) * pi.inv_sqrt().trace();
    const Eigen::VectorXd var = best.covariance().diagonal();

    std::vector<std::vector<DensityFactor>> battery;
    std::vector<DensityFactor> logi, t5, t10;
    for (Eigen::Index j = 0; j < p; ++j) {
      logi.push_back(logistic_factor(var[j]));
      t5.push_back(student_t_factor(5.0, var[j]));
      t10.push_back(student_t_factor(10.0, var[j]));
    }
    battery.push_back(std::move(logi));
    battery.push_back(std::move(t5));
    battery.push_back(std::move(t10));
    for (auto& factors : battery) {
      const ProductDensityMechanism mech(std::move(factors));
      const double gap = p_lambda_objective(mech, lambda, pi) - opt;
      worst_gap = std::min(worst_gap, gap);
      if (gap < -1e-6) pass = false;
    }

    // perturbed gaussian covariance, kept positive definite
    Eigen::MatrixXd perturb(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) perturb(i, j) = rng.next_gaussian();
    }
    const Eigen::MatrixXd cov =
        best.covariance() + 0.1 * best.covariance().trace() / static_cast<double>(p) *
                                (perturb * perturb.transpose()) / static_cast<double>(p);
    const GaussianMechanism other(cov, lambda, pi);
    const double gap = p_lambda_objective(other, lambda, pi) - opt;
    worst_gap = std::min(worst_gap, gap);
    if (gap < -1e-6) pass = false;
  }
  std::ostringstream d;
  d << "worst objective gap " << worst_gap;
  report(3, "gaussian optimality battery", pass, d.str());
}

// ---- criterion 4: DP certification values and monotonicity ----
void criterion_dp() {
  const ScalingMatrix i1 = ScalingMatrix::identity(1);
  bool pass = true;
  const double eps = dp_certify(1.0, i1, std::exp(-0.5));
  if (std::abs(eps - 2.0) > 1e-12) pass = false;
  const double floor = adversary_floor(2.0, std::exp(-0.5), i1);
  if (std::abs(floor - 1.0) > 1e-12) pass = false;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) {
      const double lambda = std::pow(10.0, -4.0 + 0.4 * a);
      const double delta = 0.05 + 0.09 * b;
      if (a + 1 < 10 &&
          dp_certify(std::pow(10.0, -4.0 + 0.4 * (a + 1)), i1, delta) <=
              dp_certify(lambda, i1, delta)) {
        pass = false;
      }
      if (b + 1 < 10 &&
          dp_certify(lambda, i1, 0.05 + 0.09 * (b + 1)) >= dp_certify(lambda, i1, delta)) {
        pass = false;
      }
    }
  }
  std::ostringstream d;
  d << "eps " << eps << " floor " << floor << ", 10x10 grid monotone";
  report(4, "dp certification", pass, d.str());
}

// ---- criterion 5: 1-D ground-state solver ----
void criterion_eigen_solver() {
  bool pass = true;
  std::ostringstream d;

  const double L = 2.0;
  const EigenSolution1D box = solve_ground_state(0.0, 1.0, 0.0, L, 1024);
  if (std::abs(box.mu - (M_PI / L) * (M_PI / L)) > 1e-4) pass = false;
  double sup = 0.0;
  for (Eigen::Index k = 0; k < box.grid.size(); ++k) {
    sup = std::max(sup, std::abs(box.u_values[k] -
                                 std::sqrt(2.0 / L) * std::sin(M_PI * box.grid[k] / L)));
  }
  if (sup > 1e-4) pass = false;
  d << "sine sup " << sup;

  const EigenSolution1D harm = solve_ground_state(4.0, 1.0, -8.0, 8.0, 1024);
  if (std::abs(harm.mu - 1.0) > 1e-3) pass = false;
  double gsup = 0.0;
  for (Eigen::Index k = 0; k < harm.grid.size(); ++k) {
    const double x = harm.grid[k];
    gsup = std::max(gsup, std::abs(harm.u_values[k] -
                                   std::pow(M_PI, -0.25) * std::exp(-x * x / 2.0)));
  }
  if (gsup > 1e-3) pass = false;
  if (box.normalization_error > 1e-6 || harm.normalization_error > 1e-6) pass = false;
  d << ", gaussian sup " << gsup << ", mu " << harm.mu;

  // second-order convergence: halving h shrinks the mu error about 4x
  const double mu_ref = solve_ground_state(4.0, 1.0, -8.0, 8.0, 8192).mu;
  const double e1 = std::abs(solve_ground_state(4.0, 1.0, -8.0, 8.0, 512).mu - mu_ref);
  const double e2 = std::abs(solve_ground_state(4.0, 1.0, -8.0, 8.0, 1024).mu - mu_ref);
  const double ratio = e1 / std::max(e2, 1e-300);
  if (ratio < 3.0 || ratio > 6.0) pass = false;
  d << ", refinement ratio " << ratio;
  report(5, "ground-state solver", pass, d.str());
}

// ---- criterion 6: correlated invariance plus dataset-conditional floor ----
void criterion_correlated() {
  const SvmConfig config;
  const double m = 100.0;
  bool pass = true;
  double worst_dev = 0.0, worst_null = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Dataset data = blobs_default(1000 + static_cast<std::uint64_t>(trial), 15);
    const SvmSolution sol = train_svm(data, config);
    const InvarianceOperator op = build_invariance_operator(sol, data);
    const CorrelatedMechanism mech = correlated_mechanism(op, m);
    RandomStream rng(2000 + static_cast<std::uint64_t>(trial));
    const Eigen::VectorXd w = sample_correlated(mech, rng);
    worst_null = std::max(worst_null, (op.omega * w).norm() / std::max(w.norm(), 1e-300));

    Dataset released = data;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      released.features.row(i) += w.segment(i * data.cols(), data.cols()).transpose();
    }
    const SvmSolution retrained = train_svm(released, config);
    double dev = (retrained.alpha - sol.alpha).cwiseAbs().maxCoeff();
    dev = std::max(dev, std::abs(retrained.beta - sol.beta));
    dev = std::max(dev, (retrained.xi - sol.xi).cwiseAbs().maxCoeff());
    worst_dev = std::max(worst_dev, dev);
  }
  if (worst_dev > 10.0 * config.tolerance) pass = false;
  if (worst_null > 1e-8) pass = false;
  std::ostringstream d;
  d << "worst retrain deviation " << worst_dev << " (cap " << 10.0 * config.tolerance
    << "), worst |Omega w|/|w| " << worst_null;

  // dataset-conditional WDBC floor check
  const char* env = std::getenv("PRIVNOISE_WDBC");
  const std::string wdbc = env != nullptr ? env : "data/wdbc.data";
  std::ifstream probe(wdbc);
  if (probe.good()) {
    probe.close();
    CsvOptions opts;
    opts.label_column = "1";  // diagnosis column in the id,diagnosis,30-features layout
    opts.label_map = {{"M", 1.0}, {"B", -1.0}};
    opts.has_header = false;
    opts.drop_columns = {0};  // patient id
    Dataset data = read_csv(wdbc, opts);
    standardize(data);
    const SvmSolution sol = train_svm(data, config);
    const Eigen::VectorXd floors =
        correlated_row_floors(sol, data, m, ScalingMatrix::identity(data.cols()));
    const double min_floor = floors.minCoeff();
    if (min_floor < 0.95 * 28.4 * m) pass = false;
    d << ", wdbc min row floor " << min_floor << " vs 28.4m = " << 28.4 * m;
  } else {
    d << ", wdbc file absent: floor check skipped";
  }
  report(6, "correlated invariance", pass, d.str());
}

// ---- criterion 7: SVM solver correctness ----
void criterion_svm() {
  const SvmConfig config;
  bool pass = true;
  std::ostringstream d;

  // fixtures: separable blobs plus the symmetric pair
  double worst_res = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Dataset data = blobs_default(s, 10);
    worst_res = std::max(worst_res, train_svm(data, config).kkt_residual);
  }
  if (worst_res > 1e-8) pass = false;
  d << "worst fixture residual " << worst_res;

  // oracle agreement on random small instances
  RandomStream rng(777);
  double worst_gap = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index q = 2 + static_cast<Eigen::Index>(rng.next_uniform() * 19.0);
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.next_uniform() * 5.0);
    Dataset data;
    data.features.resize(q, p);
    data.labels.resize(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) data.features(i, j) = 2.0 * rng.next_gaussian();
      data.labels[i] = rng.next_uniform() < 0.5 ? -1.0 : 1.0;
    }
    if (std::abs(data.labels.sum()) == q) data.labels[0] = -data.labels[0];
    const SvmSolution mine = train_svm(data, config);
    const oracle::QpResult ref = oracle::solve_svm_qp(data, config);
    double gap = (mine.alpha - ref.alpha).cwiseAbs().maxCoeff();
    gap = std::max(gap, std::abs(mine.beta - ref.beta));
    worst_gap = std::max(worst_gap, gap);
  }
  if (worst_gap > 1e-6) pass = false;
  d << ", worst oracle gap " << worst_gap;

  // symmetric data: beta = 0
  Dataset sym;
  sym.features.resize(4, 2);
  sym.features << 1.0, 0.5, 2.0, -0.3, -1.0, -0.5, -2.0, 0.3;
  sym.labels.resize(4);
  sym.labels << 1.0, 1.0, -1.0, -1.0;
  const SvmSolution ssol = train_svm(sym, config);
  if (std::abs(ssol.beta) > 1e-8) pass = false;
  d << ", symmetric beta " << ssol.beta;

  // rho-limit: hinge-objective gaps decreasing below 1e-4
  const Dataset sep = blobs_default(99, 12);
  const std::vector<double> gaps = verify_rho_limit(sep, config, {1e-1, 1e-2, 1e-3, 1e-4, 1e-5});
  bool decreasing = true;
  for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
    // Slack covers gaps that have already collapsed to solver accuracy.
    if (gaps[k + 1] > gaps[k] + 1e-9) decreasing = false;
  }
  if (!decreasing || gaps.empty() || gaps[gaps.size() - 2] > 1e-4) pass = false;
  d << ", rho gaps";
  for (double g : gaps) d << " " << g;
  report(7, "svm solver", pass, d.str());
}

// ---- criterion 8: matched-privacy paired comparison ----
void criterion_matched_comparison() {
  bool pass = true;
  std::ostringstream d;

  ExperimentConfig cfg;
  cfg.blobs.center_a = Eigen::VectorXd::Zero(2);
  cfg.blobs.center_b = Eigen::VectorXd::Zero(2);
  cfg.blobs.center_b[1] = 5.0;
  cfg.trials = 100;
  cfg.seed = 4242;
  cfg.workers = 4;
  cfg.lambda_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};

  const std::vector<PairedComparison> svm_cmp = compare_mechanisms(cfg);
  d << "svm gaussian-laplace diffs:";
  for (const auto& c : svm_cmp) {
    d << " " << c.mean_difference;
    if (c.mean_difference < -2.0 * c.paired_stderr) pass = false;
  }
  // success nondecreasing in lambda up to 1 stderr
  for (std::size_t k = 0; k + 1 < svm_cmp.size(); ++k) {
    const double slack = std::max(svm_cmp[k].optimal.stderr_value,
                                  svm_cmp[k + 1].optimal.stderr_value);
    if (svm_cmp[k + 1].optimal.value < svm_cmp[k].optimal.value - slack) pass = false;
  }

  cfg.learner = LearnerKind::ridge;
  const std::vector<PairedComparison> ridge_cmp = compare_mechanisms(cfg);
  d << "; ridge loss diffs:";
  for (const auto& c : ridge_cmp) {
    d << " " << c.mean_difference;
    // expected loss: optimal should not exceed laplace beyond 2 paired stderr
    if (c.mean_difference > 2.0 * c.paired_stderr) pass = false;
  }
  report(8, "matched-privacy comparison", pass, d.str());
}

// ---- criterion 9: utility floors are one-sided valid ----
void criterion_utility_floors() {
  bool pass = true;
  std::ostringstream d;
  const Dataset data = blobs_default(777, 30);
  const Eigen::Index q = data.rows();

  struct Config {
    std::string name;
    Learner learner;
    BoundKind kind;
  };
  SvmConfig svm_cfg;
  const std::vector<Config> learners = {
      {"ridge", ridge_learner(1e-5), BoundKind::general_q_squared},
      {"svm", svm_learner(svm_cfg), BoundKind::svm_q}};

  for (const auto& lc : learners) {
    const UtilityCertificate cert =
        estimate_sensitivity(lc.learner, data, 30, 1e-3, RandomStream(55), lc.kind);
    const Eigen::VectorXd phi0 = lc.learner.fit(data);
    for (double lambda : {1e12, 1e16, 1e20}) {
      const GaussianMechanism mech =
          optimal_iid_mechanism(lambda, ScalingMatrix::identity(data.cols()));
      for (double frac : {0.4, 0.8}) {
        const double eps = frac * cert.epsilon_0_estimate;
        const double floor = utility_floor(cert, mech, eps, q);
        int hits = 0;
        const int trials = 500;
        for (int t = 0; t < trials; ++t) {
          RandomStream rng(static_cast<std::uint64_t>(9000 + t));
          const Dataset released = obfuscate(data, mech, rng);
          if ((lc.learner.fit(released) - phi0).norm() <= eps) ++hits;
        }
        const double empirical = static_cast<double>(hits) / trials;
        if (empirical < floor) pass = false;
        d << " " << lc.name << "/" << lambda << "/" << frac << ": " << empirical
          << ">=" << floor << ";";
      }
    }
  }
  report(9, "utility floors one-sided", pass, d.str());
}

// ---- criterion 10: byte-identical experiment output ----
void criterion_determinism() {
  ExperimentConfig cfg;
  cfg.blobs.center_a = Eigen::VectorXd::Zero(2);
  cfg.blobs.center_b = Eigen::VectorXd::Zero(2);
  cfg.blobs.center_b[1] = 5.0;
  cfg.blobs.count_a = cfg.blobs.count_b = 25;
  cfg.mechanisms = {MechanismKind::optimal_gaussian, MechanismKind::laplace_matched,
                    MechanismKind::correlated};
  cfg.lambda_grid = {1e-2, 1.0};
  cfg.trials = 40;
  cfg.seed = 31337;

  auto render = [&cfg]() {
    std::ostringstream out;
    write_metrics_csv(out, run_experiment(cfg));
    return out.str();
  };
  cfg.workers = 1;
  const std::string serial_a = render();
  const std::string serial_b = render();
  cfg.workers = 4;
  const std::string parallel = render();
  cfg.workers = 7;
  const std::string parallel_b = render();
  const bool pass =
      serial_a == serial_b && serial_a == parallel && serial_a == parallel_b && !serial_a.empty();
  report(10, "deterministic experiments", pass,
         "4 runs, workers {1,1,4,7}, " + std::to_string(serial_a.size()) + " bytes each");
}

}  // namespace

int main() {
  criterion_crb_floors();
  criterion_crb_tightness();
  criterion_optimality_battery();
  criterion_dp();
  criterion_eigen_solver();
  criterion_correlated();
  criterion_svm();
  criterion_matched_comparison();
  criterion_utility_floors();
  criterion_determinism();
  if (failures == 0) {
    std::cout << "acceptance: all criteria passed" << std::endl;
    return 0;
  }
  std::cout << "acceptance: " << failures << " criteria failed" << std::endl;
  return 1;
}
