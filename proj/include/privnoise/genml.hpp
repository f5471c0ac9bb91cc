#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "privnoise/dataset.hpp"
#include "privnoise/mech_iid.hpp"
#include "privnoise/random_stream.hpp"
#include "privnoise/svm.hpp"

namespace privnoise {

// Optimization-based learner contract: fit returns a minimizer of the loss
// (which may be kinked, as with hinge terms). hessian is optional and used
// only for the conditioning check in sensitivity estimation.
struct Learner {
  std::function<Eigen::VectorXd(const Dataset&)> fit;
  std::function<double(const Eigen::VectorXd&, const Dataset&)> loss;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Dataset&)> hessian;  // optional
};

// Ridge regression, loss sigma phi'phi + sum (y_i - phi'x_i)^2 / q.
// Closed-form minimizer phi = (sigma q I + X'X)^-1 X'y.
inline Eigen::VectorXd fit_ridge(const Dataset& data, double sigma) {
  data.validate();
  if (sigma <= 0.0) throw std::invalid_argument("fit_ridge: sigma must be positive");
  const Eigen::MatrixXd& x = data.features;
  const double q = static_cast<double>(data.rows());
  const Eigen::MatrixXd gram =
      sigma * q * Eigen::MatrixXd::Identity(x.cols(), x.cols()) + x.transpose() * x;
  return gram.ldlt().solve(x.transpose() * data.labels);
}

inline double ridge_loss(const Eigen::VectorXd& phi, const Dataset& data, double sigma) {
  const double q = static_cast<double>(data.rows());
  return sigma * phi.squaredNorm() +
         (data.labels - data.features * phi).squaredNorm() / q;
}

inline Learner ridge_learner(double sigma) {
  Learner l;
  l.fit = [sigma](const Dataset& d) { return fit_ridge(d, sigma); };
  l.loss = [sigma](const Eigen::VectorXd& phi, const Dataset& d) {
    return ridge_loss(phi, d, sigma);
  };
  l.hessian = [sigma](const Eigen::VectorXd&, const Dataset& d) {
    const double q = static_cast<double>(d.rows());
    return Eigen::MatrixXd(2.0 * sigma * Eigen::MatrixXd::Identity(d.cols(), d.cols()) +
                           (2.0 / q) * d.features.transpose() * d.features);
  };
  return l;
}

// SVM plugged into the same contract through the xi-eliminated objective; the
// parameter vector is (alpha, beta).
inline Learner svm_learner(const SvmConfig& config) {
  Learner l;
  l.fit = [config](const Dataset& d) {
    const SvmSolution sol = train_svm(d, config);
    Eigen::VectorXd phi(sol.alpha.size() + 1);
    phi.head(sol.alpha.size()) = sol.alpha;
    phi[sol.alpha.size()] = sol.beta;
    return phi;
  };
  l.loss = [config](const Eigen::VectorXd& phi, const Dataset& d) {
    const Eigen::VectorXd alpha = phi.head(phi.size() - 1);
    const double beta = phi[phi.size() - 1];
    double obj = 0.5 * alpha.squaredNorm() + 0.5 * config.rho * beta * beta;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      const double t = std::max(0.0, 1.0 - d.labels[i] * (alpha.dot(d.features.row(i)) + beta));
      obj += 0.5 * config.rho * t * t + config.theta * t;
    }
    return obj;
  };
  return l;
}

enum class BoundKind { svm_q, general_q_squared };

// Empirical stand-ins for the existential constants of the utility bounds.
// c_estimate carries a declared 1.5 safety factor and is floored at 1;
// epsilon_0 is the largest tested perturbation magnitude whose worst-case
// sensitivity ratio stays within 2x of the small-perturbation ratio.
struct UtilityCertificate {
  double c_estimate = 1.0;
  double epsilon_0_estimate = 0.0;
  BoundKind bound_kind = BoundKind::svm_q;

  double probability_floor(double epsilon, double trace_vnn, Eigen::Index q) const {
    const double qq = bound_kind == BoundKind::svm_q
                          ? static_cast<double>(q)
                          : static_cast<double>(q) * static_cast<double>(q);
    const double floor = 1.0 - qq * c_estimate * c_estimate / (epsilon * epsilon) * trace_vnn;
    return std::min(std::max(floor, 0.0), 1.0);
  }
};

inline UtilityCertificate estimate_sensitivity(const Learner& learner, const Dataset& data,
                                               int trials, double perturbation_scale,
                                               RandomStream stream,
                                               BoundKind kind = BoundKind::svm_q) {
  data.validate();
  if (trials < 30) throw std::invalid_argument("estimate_sensitivity: trials >= 30 required");
  if (perturbation_scale <= 0.0) {
    throw std::invalid_argument("estimate_sensitivity: perturbation scale must be positive");
  }

  const Eigen::VectorXd phi0 = learner.fit(data);
  if (learner.hessian) {
    const Eigen::MatrixXd h = learner.hessian(phi0, data);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
    const double cond = svd.singularValues()[0] /
                        std::max(svd.singularValues()[svd.singularValues().size() - 1], 1e-300);
    if (cond > 1e12) {
      throw std::runtime_error("estimate_sensitivity: Hessian condition number " +
                               std::to_string(cond) + " exceeds 1e12; certificate refused");
    }
  }

  const std::vector<double> scale_multipliers = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> worst_ratio(scale_multipliers.size(), 0.0);
  for (std::size_t s = 0; s < scale_multipliers.size(); ++s) {
    const double scale = perturbation_scale * scale_multipliers[s];
    for (int t = 0; t < trials; ++t) {
      RandomStream trial = stream.fork(static_cast<std::uint64_t>(s * 1000 + t));
      Dataset perturbed = data;
      double delta_sum = 0.0;
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        Eigen::VectorXd dx(data.cols());
        for (Eigen::Index j = 0; j < data.cols(); ++j) dx[j] = scale * trial.next_gaussian();
        perturbed.features.row(i) += dx.transpose();
        delta_sum += dx.norm();
      }
      if (delta_sum == 0.0) continue;  // identity perturbation carries no information
      const double ratio = (learner.fit(perturbed) - phi0).norm() / delta_sum;
      worst_ratio[s] = std::max(worst_ratio[s], ratio);
    }
  }

  UtilityCertificate cert;
  cert.bound_kind = kind;
  cert.c_estimate = std::max(1.0, 1.5 * worst_ratio[0]);
  cert.epsilon_0_estimate = perturbation_scale * scale_multipliers[0];
  for (std::size_t s = 0; s < scale_multipliers.size(); ++s) {
    if (worst_ratio[s] <= 2.0 * std::max(worst_ratio[0], 1e-300)) {
      cert.epsilon_0_estimate = perturbation_scale * scale_multipliers[s];
    } else {
      break;
    }
  }
  return cert;
}

// Evaluates the selected probability bound at epsilon with Tr(V_nn) from the
// mechanism; only valid inside the certified radius.
inline double utility_floor(const UtilityCertificate& certificate, const NoiseMechanism& mechanism,
                            double epsilon, Eigen::Index q) {
  if (epsilon <= 0.0) throw std::invalid_argument("utility_floor: epsilon must be positive");
  if (epsilon >= certificate.epsilon_0_estimate) {
    throw std::invalid_argument("utility_floor: epsilon outside certified radius epsilon_0 = " +
                                std::to_string(certificate.epsilon_0_estimate));
  }
  return certificate.probability_floor(epsilon, mechanism.second_moment().trace(), q);
}

}  // namespace privnoise
