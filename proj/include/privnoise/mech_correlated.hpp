#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "privnoise/dataset.hpp"
#include "privnoise/privacy_metrics.hpp"
#include "privnoise/random_stream.hpp"
#include "privnoise/svm.hpp"

namespace privnoise {

// Classifier-invariance operator assembled from the trained SVM's KKT data:
//   Omega = [ (omega* o y)^T kron I_p ]   (p rows)
//           [ I_q kron alpha*^T       ]   (q rows)
// Dataset perturbations w with Omega w = 0 leave the trained classifier
// unchanged. psi holds an orthonormal basis of that null space.
struct InvarianceOperator {
  Eigen::MatrixXd omega;  // (p+q) x (q p)
  Eigen::Index rank = 0;
  Eigen::MatrixXd psi;    // (q p) x d, orthonormal columns

  Eigen::Index null_dim() const { return psi.cols(); }
};

inline InvarianceOperator build_invariance_operator(const SvmSolution& solution,
                                                    const Dataset& data) {
  data.validate();
  if (solution.kkt_residual > 1e-6) {
    throw std::invalid_argument("invariance operator: solution KKT residual " +
                                std::to_string(solution.kkt_residual) + " above 1e-6");
  }
  const Eigen::Index q = data.rows(), p = data.cols();
  if (solution.alpha.size() != p || solution.omega.size() != q) {
    throw std::invalid_argument("invariance operator: solution/dataset dimension mismatch");
  }

  InvarianceOperator op;
  op.omega = Eigen::MatrixXd::Zero(p + q, q * p);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double c = solution.omega[i] * data.labels[i];
    op.omega.block(0, i * p, p, p) = c * Eigen::MatrixXd::Identity(p, p);
    op.omega.block(p + i, i * p, 1, p) = solution.alpha.transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(op.omega, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv[k] > 1e-10 * sigma_max && sv[k] > 0.0) ++rank;
  }
  op.rank = rank;
  const Eigen::Index d = q * p - rank;
  if (d == 0) {
    throw std::runtime_error(
        "invariance operator: null space is trivial; need more rows q or fewer features p");
  }
  op.psi = svd.matrixV().rightCols(d);
  return op;
}

// Degenerate Gaussian supported on im(Psi): w = Psi wbar with
// wbar ~ N(0, m I_d). Covariance m Psi Psi^T; Omega w = 0 by construction.
struct CorrelatedMechanism {
  InvarianceOperator operator_;
  double m = 0.0;

  Eigen::MatrixXd covariance_implied() const {
    return m * operator_.psi * operator_.psi.transpose();
  }
};

inline CorrelatedMechanism correlated_mechanism(InvarianceOperator op, double m) {
  if (m < 0.0) throw std::invalid_argument("correlated mechanism: m must be nonnegative");
  return CorrelatedMechanism{std::move(op), m};
}

inline Eigen::VectorXd sample_correlated(const CorrelatedMechanism& mechanism,
                                         RandomStream& stream) {
  const Eigen::Index d = mechanism.operator_.null_dim();
  Eigen::VectorXd wbar(d);
  const double sd = std::sqrt(mechanism.m);
  for (Eigen::Index k = 0; k < d; ++k) wbar[k] = sd * stream.next_gaussian();
  return mechanism.operator_.psi * wbar;
}

// Per-row reconstruction floors m Tr(Pi^-1 Psi_i Psi_i^T): the expected
// Pi-weighted noise energy landing on row i, which the trivial estimate
// x_hat = x_bar attains (the bound is tight inside im(Psi) and infinite
// orthogonal to it). Computed through the complement projector
// Psi Psi^T = I - R R^T with R an orthonormal basis of the row space of
// Omega, so the qp x qp basis is never materialized; this is what makes
// dataset-scale releases (q in the hundreds) feasible.
inline Eigen::VectorXd correlated_row_floors(const SvmSolution& solution, const Dataset& data,
                                             double m, const ScalingMatrix& scaling) {
  data.validate();
  if (m < 0.0) throw std::invalid_argument("correlated_row_floors: m must be nonnegative");
  const Eigen::Index q = data.rows(), p = data.cols();
  if (scaling.dim() != p) throw std::invalid_argument("correlated_row_floors: Pi dimension");
  if (solution.alpha.size() != p || solution.omega.size() != q) {
    throw std::invalid_argument("correlated_row_floors: solution/dataset dimension mismatch");
  }

  // Omega^T, qp x (p+q), assembled blockwise.
  Eigen::MatrixXd omega_t = Eigen::MatrixXd::Zero(q * p, p + q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const double c = solution.omega[i] * data.labels[i];
    omega_t.block(i * p, 0, p, p) = c * Eigen::MatrixXd::Identity(p, p);
    omega_t.block(i * p, p + i, p, 1) = solution.alpha;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(omega_t);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd r_basis =
      qr.householderQ() * Eigen::MatrixXd::Identity(q * p, rank);

  const Eigen::MatrixXd pi_inv = scaling.inverse();
  const double full_trace = pi_inv.trace();
  Eigen::VectorXd floors(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::MatrixXd block = r_basis.middleRows(i * p, p);
    floors[i] = m * (full_trace - (pi_inv * block * block.transpose()).trace());
  }
  return floors;
}

// Release with correlated noise plus its certificate. The ambient Fisher
// information is singular (no information orthogonal to im(Psi)), so the
// tight per-row floor is +inf in those directions and the operative
// certificate is the trace bound m / Tr((I_q kron Pi^-1) Psi Psi^T).
inline std::pair<Dataset, PrivacyCertificate> correlated_obfuscate(
    const Dataset& data, const SvmSolution& solution, double m, const ScalingMatrix& scaling,
    RandomStream& stream) {
  const InvarianceOperator op = build_invariance_operator(solution, data);
  const CorrelatedMechanism mech = correlated_mechanism(op, m);
  const Eigen::Index q = data.rows(), p = data.cols();
  if (scaling.dim() != p) throw std::invalid_argument("correlated_obfuscate: Pi dimension");

  const Eigen::VectorXd w = sample_correlated(mech, stream);
  Dataset released = data;
  for (Eigen::Index i = 0; i < q; ++i) {
    released.features.row(i) += w.segment(i * p, p).transpose();
  }

  // Tr((I_q kron Pi^-1) Psi Psi^T) = sum_i Tr(Pi^-1 Psi_i Psi_i^T) over row blocks.
  const Eigen::MatrixXd pi_inv = scaling.inverse();
  double trace = 0.0;
  double min_row = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::MatrixXd block = mech.operator_.psi.middleRows(i * p, p);
    const double row_trace = (pi_inv * block * block.transpose()).trace();
    trace += row_trace;
    min_row = std::min(min_row, m * row_trace);
  }
  PrivacyCertificate cert;
  cert.crb_floor = std::numeric_limits<double>::infinity();
  cert.weak_floor = m / trace;
  cert.min_row_floor = min_row;
  cert.notes = "correlated-degenerate; weak trace bound is the operative floor";
  return {std::move(released), cert};
}

}  // namespace privnoise
