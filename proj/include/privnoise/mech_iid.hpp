#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "privnoise/dataset.hpp"
#include "privnoise/noise_mechanism.hpp"
#include "privnoise/privacy_metrics.hpp"
#include "privnoise/random_stream.hpp"
#include "privnoise/scaling_matrix.hpp"

namespace privnoise {

// The optimal i.i.d. noise: zero-mean Gaussian with covariance
// Sigma = Pi^{-1/2} / sqrt(lambda). Its Fisher information is
// sqrt(lambda) Pi^{1/2} and its P(lambda) objective 2 sqrt(lambda) Tr(Pi^{-1/2}).
class GaussianMechanism : public NoiseMechanism {
 public:
  GaussianMechanism(Eigen::MatrixXd covariance, double lambda, ScalingMatrix scaling)
      : covariance_(std::move(covariance)), lambda_(lambda), scaling_(std::move(scaling)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance_);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument("gaussian mechanism: covariance not positive definite");
    }
    // Square root of Sigma for sampling.
    sqrt_cov_ = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
  }

  const Eigen::MatrixXd& covariance() const { return covariance_; }
  double lambda() const { return lambda_; }
  const ScalingMatrix& scaling() const { return scaling_; }

  Eigen::Index dim() const override { return covariance_.rows(); }

  FisherInfo fisher_information() const override {
    return gaussian_fisher_information(covariance_);
  }

  Eigen::MatrixXd second_moment() const override { return covariance_; }

  Eigen::MatrixXd sample(Eigen::Index count, RandomStream& stream) const override {
    const Eigen::Index p = dim();
    Eigen::MatrixXd z(count, p);
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) z(i, j) = stream.next_gaussian();
    }
    return z * sqrt_cov_;  // rows are sqrt_cov * z_i since sqrt_cov is symmetric
  }

 private:
  Eigen::MatrixXd covariance_;
  double lambda_;
  ScalingMatrix scaling_;
  Eigen::MatrixXd sqrt_cov_;
};

// Per-coordinate Laplace baseline with scales b_j (variance 2 b_j^2).
class LaplaceMechanism : public NoiseMechanism {
 public:
  explicit LaplaceMechanism(Eigen::VectorXd scales) : scales_(std::move(scales)) {
    for (Eigen::Index j = 0; j < scales_.size(); ++j) {
      if (scales_[j] <= 0.0) throw std::invalid_argument("laplace mechanism: scale must be > 0");
    }
  }

  const Eigen::VectorXd& scales() const { return scales_; }

  Eigen::Index dim() const override { return scales_.size(); }

  FisherInfo fisher_information() const override { return laplace_fisher_information(scales_); }

  Eigen::MatrixXd second_moment() const override {
    return (2.0 * scales_.array().square()).matrix().asDiagonal();
  }

  Eigen::MatrixXd sample(Eigen::Index count, RandomStream& stream) const override {
    Eigen::MatrixXd out(count, dim());
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < dim(); ++j) out(i, j) = stream.next_laplace(scales_[j]);
    }
    return out;
  }

 private:
  Eigen::VectorXd scales_;
};

// Solution of P(lambda): Sigma = Pi^{-1/2} / sqrt(lambda).
inline GaussianMechanism optimal_iid_mechanism(double lambda, const ScalingMatrix& scaling) {
  if (lambda <= 0.0) throw std::invalid_argument("optimal mechanism: lambda must be positive");
  return GaussianMechanism(scaling.inv_sqrt() / std::sqrt(lambda), lambda, scaling);
}

// P(lambda) objective Tr(Pi^-1 I) + lambda Tr(V_nn) for any mechanism.
inline double p_lambda_objective(const NoiseMechanism& density, double lambda,
                                 const ScalingMatrix& scaling) {
  if (lambda <= 0.0) throw std::invalid_argument("p_lambda_objective: lambda must be positive");
  const FisherInfo info = density.fisher_information();
  if (info.matrix.rows() != scaling.dim()) {
    throw std::invalid_argument("p_lambda_objective: dimension mismatch");
  }
  return (scaling.inverse() * info.matrix).trace() + lambda * density.second_moment().trace();
}

// Laplace baseline matched to the Gaussian's tight CRB floor Tr(Pi Sigma).
// Diagonal Pi: per-coordinate b_j^2 = Sigma_jj, which reproduces the floor
// term by term. Non-diagonal Pi: one scalar b^2 = Tr(Pi Sigma)/Tr(Pi) on all
// coordinates (trace matching); signalled through `used_scalar_fallback`.
inline LaplaceMechanism matched_laplace_baseline(const GaussianMechanism& mechanism,
                                                bool* used_scalar_fallback = nullptr) {
  const ScalingMatrix& pi = mechanism.scaling();
  const Eigen::MatrixXd& sigma = mechanism.covariance();
  Eigen::VectorXd scales(sigma.rows());
  if (pi.is_diagonal()) {
    if (used_scalar_fallback) *used_scalar_fallback = false;
    scales = sigma.diagonal().cwiseSqrt();
  } else {
    if (used_scalar_fallback) *used_scalar_fallback = true;
    const double b2 = (pi.matrix() * sigma).trace() / pi.trace();
    scales.setConstant(std::sqrt(b2));
  }
  return LaplaceMechanism(std::move(scales));
}

// Released dataset x_bar_i = x_i + n_i; labels pass through untouched.
inline Dataset obfuscate(const Dataset& data, const NoiseMechanism& mechanism,
                         RandomStream& stream) {
  data.validate();
  if (mechanism.dim() != data.cols()) {
    throw std::invalid_argument("obfuscate: mechanism dimension " +
                                std::to_string(mechanism.dim()) + " != feature count " +
                                std::to_string(data.cols()));
  }
  Dataset released = data;
  released.features += mechanism.sample(data.rows(), stream);
  return released;
}

}  // namespace privnoise
