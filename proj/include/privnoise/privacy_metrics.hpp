#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "privnoise/manifest.hpp"
#include "privnoise/noise_mechanism.hpp"
#include "privnoise/scaling_matrix.hpp"

namespace privnoise {

// Privacy certificate attached to a release: the per-row reconstruction-error
// floors from the Fisher information, plus any certified (epsilon, delta)
// local-DP pairs with the corresponding adversary floor.
struct PrivacyCertificate {
  double crb_floor = 0.0;   // Tr(Pi I^-1), tight floor; +inf when I is singular
  double weak_floor = 0.0;  // 1 / Tr(Pi^-1 I)
  double min_row_floor = 0.0;  // correlated releases: worst-row energy floor, 0 when unset
  std::vector<std::pair<double, double>> dp_pairs;  // (epsilon, delta)
  std::vector<double> adversary_floors;             // floor evaluated at each pair
  std::string notes;

  void write_to(KeyValueDoc& doc, const std::string& prefix = "certificate") const {
    doc.set(prefix + ".crb_floor", crb_floor);
    doc.set(prefix + ".weak_floor", weak_floor);
    if (min_row_floor > 0.0) doc.set(prefix + ".min_row_floor", min_row_floor);
    std::vector<double> eps, del;
    for (const auto& [e, d] : dp_pairs) {
      eps.push_back(e);
      del.push_back(d);
    }
    doc.set_list(prefix + ".epsilon", eps);
    doc.set_list(prefix + ".delta", del);
    doc.set_list(prefix + ".adversary_floor", adversary_floors);
    if (!notes.empty()) doc.set(prefix + ".notes", notes);
  }
};

// Tight and weak Cramer-Rao floors for a mechanism with information `info`:
//   E{ (x - xhat)^T Pi (x - xhat) } >= Tr(Pi I^-1) >= 1 / Tr(Pi^-1 I).
inline PrivacyCertificate crb_bounds(const FisherInfo& info, const ScalingMatrix& scaling) {
  const Eigen::Index p = scaling.dim();
  if (info.matrix.rows() != p) {
    throw std::invalid_argument("crb_bounds: dimension mismatch (" +
                                std::to_string(info.matrix.rows()) + " vs " + std::to_string(p) +
                                ")");
  }
  info.validate();
  PrivacyCertificate cert;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info.matrix);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double lambda_max = es.eigenvalues().maxCoeff();
  if (lambda_min <= 1e-14 * std::max(lambda_max, 1.0)) {
    cert.crb_floor = std::numeric_limits<double>::infinity();
    cert.notes = "singular-information";
  } else {
    const Eigen::MatrixXd inv =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
        es.eigenvectors().transpose();
    cert.crb_floor = (scaling.matrix() * inv).trace();
  }
  cert.weak_floor = 1.0 / (scaling.inverse() * info.matrix).trace();
  return cert;
}

// Smallest epsilon for which the optimal Gaussian mechanism at privacy weight
// lambda is (epsilon, delta)-locally differentially private:
//   eps_min = lambda^{1/4} ||Pi^{1/4}||_{inf,2} (1 + sqrt(2 ln(1/delta))).
inline double dp_certify(double lambda, const ScalingMatrix& scaling, double delta) {
  if (lambda <= 0.0) throw std::invalid_argument("dp_certify: lambda must be positive");
  if (delta <= 0.0 || delta >= 1.0) {
    throw std::invalid_argument("dp_certify: delta must lie in (0, 1)");
  }
  const double norm = induced_inf_to_2_norm(scaling.fourth_root());
  return std::pow(lambda, 0.25) * norm * (1.0 + std::sqrt(2.0 * std::log(1.0 / delta)));
}

// Lower bound on the adversary's Pi-weighted squared reconstruction error for
// a Gaussian mechanism meeting (epsilon, delta) with equality:
//   Tr(Pi^{1/2}) ||Pi^{1/4}||_{inf,2}^2 (1 + sqrt(2 ln(1/delta)))^2 / eps^2.
inline double adversary_floor(double epsilon, double delta, const ScalingMatrix& scaling) {
  if (epsilon <= 0.0) throw std::invalid_argument("adversary_floor: epsilon must be positive");
  if (delta <= 0.0 || delta >= 1.0) {
    throw std::invalid_argument("adversary_floor: delta must lie in (0, 1)");
  }
  const double norm = induced_inf_to_2_norm(scaling.fourth_root());
  const double log_term = 1.0 + std::sqrt(2.0 * std::log(1.0 / delta));
  return scaling.sqrt().trace() * norm * norm * log_term * log_term / (epsilon * epsilon);
}

// Analytic Fisher information helpers for the two named mechanisms.

inline FisherInfo gaussian_fisher_information(const Eigen::MatrixXd& covariance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("gaussian fisher: covariance not positive definite");
  }
  FisherInfo info;
  info.matrix = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose();
  info.quadrature_error = 0.0;
  return info;
}

// Known analytic value 1/b_j^2 per coordinate. The Laplace density's kink at
// the origin sits outside Assumption-style smoothness; callers should label
// this value "analytic-limit" in certificates.
inline FisherInfo laplace_fisher_information(const Eigen::VectorXd& scales) {
  for (Eigen::Index j = 0; j < scales.size(); ++j) {
    if (scales[j] <= 0.0) throw std::invalid_argument("laplace fisher: scale must be positive");
  }
  FisherInfo info;
  info.matrix = scales.array().square().inverse().matrix().asDiagonal();
  info.quadrature_error = 0.0;
  return info;
}

}  // namespace privnoise
