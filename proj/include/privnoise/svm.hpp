#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "privnoise/dataset.hpp"
#include "privnoise/manifest.hpp"

namespace privnoise {

struct SvmConfig {
  double theta = 1.0;        // slack weight
  double rho = 1e-2;         // regularization on beta and xi
  double tolerance = 1e-8;   // KKT residual target
  int max_iterations = 200000;

  void validate() const {
    if (theta <= 0.0 || rho <= 0.0 || tolerance <= 0.0 || max_iterations < 1) {
      throw std::invalid_argument("svm config: theta, rho, tolerance must be positive");
    }
  }
};

// Solution of the regularized soft-margin problem
//   min 1/2 a'a + rho/2 (b^2 + xi'xi) + theta 1'xi
//   s.t. y_i (a'x_i + b) >= 1 - xi_i,  xi_i >= 0,
// together with the margin multipliers omega and nonnegativity multipliers
// sigma_mult from its KKT system.
struct SvmSolution {
  Eigen::VectorXd alpha;
  double beta = 0.0;
  Eigen::VectorXd xi;
  Eigen::VectorXd omega;
  Eigen::VectorXd sigma_mult;
  double kkt_residual = 0.0;

  double decision(const Eigen::VectorXd& x) const { return alpha.dot(x) + beta; }

  double objective(const SvmConfig& config) const {
    return 0.5 * alpha.squaredNorm() +
           0.5 * config.rho * (beta * beta + xi.squaredNorm()) + config.theta * xi.sum();
  }

  // Hinge objective without the rho terms (the unregularized problem).
  double hinge_objective(const Dataset& data, double theta) const {
    double obj = 0.5 * alpha.squaredNorm();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      obj += theta * std::max(0.0, 1.0 - data.labels[i] * decision(data.features.row(i)));
    }
    return obj;
  }
};

// Max-norm residual over the full KKT system: stationarity in alpha, beta and
// xi, primal and dual feasibility, and both complementarity products.
inline double kkt_residual(const Dataset& data, const SvmConfig& config,
                           const SvmSolution& candidate) {
  const Eigen::Index q = data.rows(), p = data.cols();
  if (candidate.alpha.size() != p || candidate.xi.size() != q || candidate.omega.size() != q ||
      candidate.sigma_mult.size() != q) {
    throw std::invalid_argument("kkt_residual: dimension mismatch");
  }
  double res = 0.0;
  Eigen::VectorXd alpha_stat = candidate.alpha;
  double beta_stat = config.rho * candidate.beta;
  for (Eigen::Index i = 0; i < q; ++i) {
    alpha_stat -= candidate.omega[i] * data.labels[i] * data.features.row(i).transpose();
    beta_stat -= candidate.omega[i] * data.labels[i];
  }
  res = std::max(res, alpha_stat.cwiseAbs().maxCoeff());
  res = std::max(res, std::abs(beta_stat));
  for (Eigen::Index i = 0; i < q; ++i) {
    const double margin = data.labels[i] * candidate.decision(data.features.row(i));
    // stationarity in xi_i: rho xi + theta - omega - sigma = 0
    res = std::max(res, std::abs(config.rho * candidate.xi[i] + config.theta -
                                 candidate.omega[i] - candidate.sigma_mult[i]));
    res = std::max(res, std::max(0.0, 1.0 - candidate.xi[i] - margin));  // primal margin
    res = std::max(res, std::max(0.0, -candidate.xi[i]));                // primal xi >= 0
    res = std::max(res, std::max(0.0, -candidate.omega[i]));             // dual
    res = std::max(res, std::max(0.0, -candidate.sigma_mult[i]));
    res = std::max(res, std::abs(candidate.omega[i] * (margin - 1.0 + candidate.xi[i])));
    res = std::max(res, std::abs(candidate.xi[i] * candidate.sigma_mult[i]));
  }
  return res;
}

struct SvmSolverError : std::runtime_error {
  SvmSolverError(const std::string& msg, SvmSolution best, double residual)
      : std::runtime_error(msg), best_iterate(std::move(best)), best_residual(residual) {}
  SvmSolution best_iterate;
  double best_residual;
};

// Dual coordinate ascent. Eliminating (alpha, beta, xi) against the KKT
// stationarity conditions leaves a smooth piecewise-quadratic concave dual in
// omega >= 0:
//   max  sum omega_i - 1/2 ||sum omega_i y_i x_i||^2
//        - 1/(2 rho) (y'omega)^2 - 1/(2 rho) sum max(omega_i - theta, 0)^2.
// Each coordinate maximization is exact (two quadratic pieces split at theta),
// so the iteration is monotone and every limit point satisfies the full KKT
// system. The primal triple is recovered from the stationarity identities.
inline SvmSolution train_svm(const Dataset& data, const SvmConfig& config,
                             const Eigen::VectorXd* warm_start = nullptr) {
  data.validate();
  config.validate();
  if (!data.labels_binary()) {
    throw std::invalid_argument("train_svm: labels must be exactly -1 or +1");
  }
  const Eigen::Index q = data.rows(), p = data.cols();
  const double rho = config.rho, theta = config.theta;

  Eigen::VectorXd omega = Eigen::VectorXd::Zero(q);
  if (warm_start) {
    if (warm_start->size() != q) throw std::invalid_argument("train_svm: bad warm start size");
    omega = warm_start->cwiseMax(0.0);
  }
  Eigen::VectorXd kdiag(q);
  for (Eigen::Index i = 0; i < q; ++i) kdiag[i] = data.features.row(i).squaredNorm();

  // Maintained aggregates: alpha = sum omega_i y_i x_i, s = y'omega.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
  double s = 0.0;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (omega[i] != 0.0) {
      alpha += omega[i] * data.labels[i] * data.features.row(i).transpose();
      s += omega[i] * data.labels[i];
    }
  }

  auto recover = [&](double residual) {
    SvmSolution sol;
    sol.alpha = Eigen::VectorXd::Zero(p);
    double sy = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      sol.alpha += omega[i] * data.labels[i] * data.features.row(i).transpose();
      sy += omega[i] * data.labels[i];
    }
    sol.beta = sy / rho;
    sol.omega = omega;
    sol.xi.resize(q);
    sol.sigma_mult.resize(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      sol.xi[i] = std::max(omega[i] - theta, 0.0) / rho;
      sol.sigma_mult[i] = std::max(theta - omega[i], 0.0);
    }
    sol.kkt_residual = residual;
    return sol;
  };

  // Dual objective 1'omega - |alpha|^2/2 - s^2/(2 rho) - sum max(omega-theta,0)^2/(2 rho),
  // evaluated from the maintained aggregates.
  auto dual_value = [&]() {
    double penalty = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      const double over = std::max(omega[i] - theta, 0.0);
      penalty += over * over;
    }
    return omega.sum() - 0.5 * alpha.squaredNorm() - (s * s + penalty) / (2.0 * rho);
  };

  // Active-set Newton refinement. Cyclic coordinate ascent crawls when rho is
  // tiny (the s^2/(2 rho) term makes the dual Hessian nearly rank-one), so a
  // direct solve on the free coordinates with the current piece assignment is
  // applied periodically; the candidate is kept only if the dual does not
  // decrease, which preserves the ascent guarantee of the sweeps.
  auto newton_refine = [&]() {
    const Eigen::VectorXd saved = omega;
    const double before = dual_value();
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < q; ++i) {
      const double margin = data.labels[i] * (data.features.row(i).dot(alpha) + s / rho);
      const double grad = 1.0 - margin - std::max(omega[i] - theta, 0.0) / rho;
      if (omega[i] > 0.0 || grad > 0.0) free_idx.push_back(i);
    }
    auto rebuild_aggregates = [&]() {
      alpha.setZero();
      s = 0.0;
      for (Eigen::Index i = 0; i < q; ++i) {
        alpha += omega[i] * data.labels[i] * data.features.row(i).transpose();
        s += omega[i] * data.labels[i];
      }
    };
    // Projected Newton path: solve on the free set, walk the direction until
    // the first breakpoint (a coordinate hitting zero, which gets pinned, or
    // crossing theta, where the dual's curvature jumps), then re-solve with
    // the updated piece assignment. Within each segment the quadratic model
    // is exact, so every partial step ascends.
    bool stepped = false;
    for (int round = 0; round < 64 && !free_idx.empty(); ++round) {
      const Eigen::Index f = static_cast<Eigen::Index>(free_idx.size());
      Eigen::MatrixXd h(f, f);
      Eigen::VectorXd grad_f(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
        // Coordinates sitting on the kink get the stiffer curvature, which
        // can only shorten the step.
        const bool over = omega[i] > theta - 1e-12 * (1.0 + theta);
        const double margin = data.labels[i] * (data.features.row(i).dot(alpha) + s / rho);
        grad_f[a] = 1.0 - margin - std::max(omega[i] - theta, 0.0) / rho;
        for (Eigen::Index b = 0; b <= a; ++b) {
          const Eigen::Index j = free_idx[static_cast<std::size_t>(b)];
          double v = data.labels[i] * data.labels[j] *
                         data.features.row(i).dot(data.features.row(j)) +
                     data.labels[i] * data.labels[j] / rho;
          if (a == b) v += (over ? 1.0 / rho : 0.0) + 1e-10 * (1.0 + 1.0 / rho);
          h(a, b) = v;
          h(b, a) = v;
        }
      }
      // Delta form keeps degenerate directions (dual flat when support
      // vectors outnumber the dimension) from blowing up the candidate.
      const Eigen::VectorXd delta = h.ldlt().solve(grad_f);
      // Longest step that stays feasible and keeps every coordinate on its
      // current piece of the penalty.
      double t = 1.0;
      for (Eigen::Index a = 0; a < f; ++a) {
        const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
        if (delta[a] < 0.0 && omega[i] + delta[a] < 0.0) {
          t = std::min(t, omega[i] / -delta[a]);
        }
        const double to_theta = theta - omega[i];
        if (delta[a] > 0.0 && to_theta > 0.0 && delta[a] > to_theta) {
          t = std::min(t, to_theta / delta[a]);
        } else if (delta[a] < 0.0 && to_theta < 0.0 && delta[a] < to_theta) {
          t = std::min(t, to_theta / delta[a]);
        }
      }
      std::vector<Eigen::Index> kept;
      for (Eigen::Index a = 0; a < f; ++a) {
        const Eigen::Index i = free_idx[static_cast<std::size_t>(a)];
        const double next = omega[i] + t * delta[a];
        if (delta[a] < 0.0 && next <= 1e-14 * (1.0 + omega[i])) {
          omega[i] = 0.0;  // hit the boundary; pin and re-solve without it
        } else {
          omega[i] = next;
          kept.push_back(i);
        }
      }
      rebuild_aggregates();
      stepped = true;
      if (t >= 1.0) break;
      free_idx = std::move(kept);
    }
    if (!stepped) {
      omega = saved;
      return;
    }
    if (dual_value() < before - 1e-12 * (1.0 + std::abs(before))) {
      omega = saved;
      rebuild_aggregates();
    }
  };

  for (int sweep = 0; sweep < config.max_iterations; ++sweep) {
    if (sweep > 0 && sweep % 8 == 0) newton_refine();
    double max_violation = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
      const double yi = data.labels[i];
      const Eigen::RowVectorXd xi_row = data.features.row(i);
      // Dual gradient at the current omega_i.
      const double margin = yi * (xi_row.dot(alpha) + s / rho);
      const double grad = 1.0 - margin - std::max(omega[i] - theta, 0.0) / rho;
      if (omega[i] == 0.0 && grad <= 0.0) continue;

      // Quantities with coordinate i removed.
      const double base = 1.0 - margin + (kdiag[i] + 1.0 / rho) * omega[i];
      // Piece omega <= theta: curvature kdiag + 1/rho.
      double cand = base / (kdiag[i] + 1.0 / rho);
      double new_omega;
      if (cand <= theta) {
        new_omega = std::max(cand, 0.0);
      } else {
        // Piece omega >= theta: extra 1/rho curvature from the xi penalty.
        cand = (base + theta / rho) / (kdiag[i] + 2.0 / rho);
        new_omega = std::max(cand, theta);
      }
      const double delta = new_omega - omega[i];
      if (delta != 0.0) {
        omega[i] = new_omega;
        alpha += delta * yi * xi_row.transpose();
        s += delta * yi;
      }
      // KKT violation of this coordinate after the exact update is zero;
      // track the pre-update optimality gap instead.
      const double viol = omega[i] > 0.0 ? std::abs(grad) : std::max(grad, 0.0);
      max_violation = std::max(max_violation, viol);
    }
    if (max_violation <= 0.1 * config.tolerance) {
      SvmSolution sol = recover(0.0);
      sol.kkt_residual = kkt_residual(data, config, sol);
      if (sol.kkt_residual <= config.tolerance) return sol;
      // Aggregate drift: refresh and keep sweeping.
      alpha.setZero();
      s = 0.0;
      for (Eigen::Index i = 0; i < q; ++i) {
        alpha += omega[i] * data.labels[i] * data.features.row(i).transpose();
        s += omega[i] * data.labels[i];
      }
    }
  }
  SvmSolution best = recover(0.0);
  best.kkt_residual = kkt_residual(data, config, best);
  if (best.kkt_residual <= config.tolerance) return best;
  throw SvmSolverError("train_svm: residual " + std::to_string(best.kkt_residual) +
                           " above tolerance after max_iterations",
                       best, best.kkt_residual);
}

// Objective gaps of the regularized solutions against the unregularized
// problem, measured relative to the best hinge objective found (the smallest
// rho in the sequence serves as the reference).
inline std::vector<double> verify_rho_limit(const Dataset& data, const SvmConfig& config,
                                            const std::vector<double>& rho_sequence) {
  if (rho_sequence.empty()) throw std::invalid_argument("verify_rho_limit: empty sequence");
  for (std::size_t k = 1; k < rho_sequence.size(); ++k) {
    if (rho_sequence[k] >= rho_sequence[k - 1] || rho_sequence[k] <= 0.0) {
      throw std::invalid_argument("verify_rho_limit: sequence must decrease toward 0");
    }
  }
  std::vector<double> objectives;
  for (double rho : rho_sequence) {
    SvmConfig c = config;
    c.rho = rho;
    objectives.push_back(train_svm(data, c).hinge_objective(data, config.theta));
  }
  const double reference = objectives.back();
  std::vector<double> gaps;
  gaps.reserve(objectives.size());
  for (double v : objectives) gaps.push_back(v - reference);
  return gaps;
}

// Plain-text model file: alpha, beta, theta, rho and the training residual.
inline void save_model(const std::string& path, const SvmSolution& sol, const SvmConfig& config) {
  KeyValueDoc doc;
  std::vector<double> a(sol.alpha.data(), sol.alpha.data() + sol.alpha.size());
  doc.set_list("alpha", a);
  doc.set("beta", sol.beta);
  doc.set("theta", config.theta);
  doc.set("rho", config.rho);
  doc.set("kkt_residual", sol.kkt_residual);
  doc.save(path);
}

inline std::pair<SvmSolution, SvmConfig> load_model(const std::string& path) {
  const KeyValueDoc doc = KeyValueDoc::load(path);
  SvmSolution sol;
  const std::vector<double> a = doc.get_list("alpha");
  sol.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  sol.beta = doc.get_double("beta");
  sol.kkt_residual = doc.get_double_or("kkt_residual", 0.0);
  SvmConfig config;
  config.theta = doc.get_double("theta");
  config.rho = doc.get_double("rho");
  return {sol, config};
}

}  // namespace privnoise
