#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace privnoise {

// Positive-definite per-feature weighting matrix Pi. Fractional powers come
// from the symmetric eigendecomposition, computed once at construction.
class ScalingMatrix {
 public:
  explicit ScalingMatrix(const Eigen::MatrixXd& pi) : pi_(pi) {
    if (pi.rows() != pi.cols() || pi.rows() < 1) {
      throw std::invalid_argument("scaling matrix must be square and non-empty");
    }
    const double asym = (pi - pi.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(pi.cwiseAbs().maxCoeff(), 1e-300);
    if (asym > 1e-12 * scale) {
      throw std::invalid_argument("scaling matrix is not symmetric (max asymmetry " +
                                  std::to_string(asym) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (pi + pi.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    eigvals_ = es.eigenvalues();
    eigvecs_ = es.eigenvectors();
    if (eigvals_.minCoeff() <= 0.0) {
      throw std::invalid_argument("scaling matrix is not positive definite: eigenvalue " +
                                  std::to_string(eigvals_.minCoeff()));
    }
  }

  static ScalingMatrix identity(Eigen::Index p) {
    return ScalingMatrix(Eigen::MatrixXd::Identity(p, p));
  }

  const Eigen::MatrixXd& matrix() const { return pi_; }
  Eigen::Index dim() const { return pi_.rows(); }
  const Eigen::VectorXd& eigenvalues() const { return eigvals_; }

  // Pi^exponent for any real exponent (callers use -1, -1/2, 1/4, 1/2).
  Eigen::MatrixXd power(double exponent) const {
    const Eigen::VectorXd powered =
        eigvals_.array().pow(exponent).matrix();
    return eigvecs_ * powered.asDiagonal() * eigvecs_.transpose();
  }

  Eigen::MatrixXd sqrt() const { return power(0.5); }
  Eigen::MatrixXd inv_sqrt() const { return power(-0.5); }
  Eigen::MatrixXd fourth_root() const { return power(0.25); }
  Eigen::MatrixXd inverse() const { return power(-1.0); }

  double trace() const { return pi_.trace(); }

  bool is_diagonal(double tol = 1e-12) const {
    const Eigen::MatrixXd off = pi_ - Eigen::MatrixXd(pi_.diagonal().asDiagonal());
    return off.cwiseAbs().maxCoeff() <= tol * std::max(pi_.cwiseAbs().maxCoeff(), 1e-300);
  }

 private:
  Eigen::MatrixXd pi_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
};

inline Eigen::MatrixXd matrix_power(const ScalingMatrix& m, double exponent) {
  return m.power(exponent);
}

// Induced infinity-to-2 norm ||M||_{inf,2} = max_{x != 0} ||Mx||_2 / ||x||_inf.
// The maximum of this convex function over the unit inf-ball sits at a vertex,
// so it is the max of ||M s||_2 over sign vectors s. Enumeration is capped at
// p = 25 columns; past that callers must opt in to the ||M||_2 * sqrt(p) upper
// bound via allow_upper_bound.
inline double induced_inf_to_2_norm(const Eigen::MatrixXd& m, bool allow_upper_bound = false) {
  if (!m.allFinite()) throw std::invalid_argument("induced norm: non-finite entries");
  const Eigen::Index p = m.cols();
  if (p > 25) {
    if (!allow_upper_bound) {
      throw std::invalid_argument(
          "induced norm: 2^p vertex enumeration infeasible for p > 25; "
          "pass allow_upper_bound to use ||M||_2 * sqrt(p)");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()[0] * std::sqrt(static_cast<double>(p));
  }
  // s and -s give the same value; fix the first sign.
  double best = 0.0;
  Eigen::VectorXd s(p);
  const std::uint64_t count = 1ULL << (p - 1);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    s[0] = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) {
      s[j] = (mask >> (j - 1)) & 1ULL ? -1.0 : 1.0;
    }
    best = std::max(best, (m * s).norm());
  }
  return best;
}

}  // namespace privnoise
