#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "privnoise/random_stream.hpp"

namespace privnoise {

// Fisher information of a noise law. quadrature_error is 0 for analytic cases
// and the achieved integration error estimate otherwise.
struct FisherInfo {
  Eigen::MatrixXd matrix;
  double quadrature_error = 0.0;

  void validate() const {
    const double scale = std::max(matrix.cwiseAbs().maxCoeff(), 1e-300);
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw std::runtime_error("fisher information not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::runtime_error("fisher information has negative eigenvalue");
    }
  }
};

// A sampleable additive-noise law with known Fisher information and second
// moment. All implementations are immutable after construction.
class NoiseMechanism {
 public:
  virtual ~NoiseMechanism() = default;
  virtual Eigen::Index dim() const = 0;
  virtual FisherInfo fisher_information() const = 0;
  virtual Eigen::MatrixXd second_moment() const = 0;  // V_nn = E{n n^T}
  // count i.i.d. draws, one per row.
  virtual Eigen::MatrixXd sample(Eigen::Index count, RandomStream& stream) const = 0;
};

namespace quad {

// Adaptive Gauss-Kronrod on a finite or infinite interval.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double* err_out = nullptr, double tol = 1e-10) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 15, tol, &err);
  if (err_out) *err_out = err;
  return v;
}

}  // namespace quad

// One-dimensional density factor given by a callable, with derivative obtained
// by central differences when not supplied. Used for the product-form test
// battery (logistic, Student-t, ...) and any user density.
struct DensityFactor {
  std::function<double(double)> pdf;
  std::function<double(double)> pdf_deriv;  // optional
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  double deriv(double x) const {
    if (pdf_deriv) return pdf_deriv(x);
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    return (pdf(x + h) - pdf(x - h)) / (2.0 * h);
  }
};

// Product of independent 1-D factors; Fisher information and second moment are
// computed by quadrature per factor. The density must be normalized: a factor
// whose mass deviates from 1 by more than 1e-6 is rejected.
class ProductDensityMechanism : public NoiseMechanism {
 public:
  explicit ProductDensityMechanism(std::vector<DensityFactor> factors)
      : factors_(std::move(factors)) {
    if (factors_.empty()) throw std::invalid_argument("product density: no factors");
    for (const auto& f : factors_) {
      double err = 0.0;
      const double mass = quad::integrate(f.pdf, f.lower, f.upper, &err);
      if (std::abs(mass - 1.0) > 1e-6) {
        throw std::invalid_argument("product density factor not normalized: mass " +
                                    std::to_string(mass));
      }
    }
  }

  Eigen::Index dim() const override { return static_cast<Eigen::Index>(factors_.size()); }

  FisherInfo fisher_information() const override {
    const Eigen::Index p = dim();
    FisherInfo info;
    info.matrix = Eigen::MatrixXd::Zero(p, p);
    double total_err = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& f = factors_[static_cast<std::size_t>(j)];
      double err = 0.0;
      const double ij = quad::integrate(
          [&f](double x) {
            const double g = f.pdf(x);
            if (g <= 0.0) return 0.0;
            const double d = f.deriv(x);
            return d * d / g;
          },
          f.lower, f.upper, &err);
      if (!std::isfinite(ij)) {
        throw std::runtime_error("fisher quadrature diverged on factor " + std::to_string(j));
      }
      info.matrix(j, j) = ij;
      total_err += err;
    }
    info.quadrature_error = total_err;
    return info;
  }

  Eigen::MatrixXd second_moment() const override {
    const Eigen::Index p = dim();
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& f = factors_[static_cast<std::size_t>(j)];
      v(j, j) = quad::integrate([&f](double x) { return x * x * f.pdf(x); }, f.lower, f.upper);
    }
    return v;
  }

  // Inverse-CDF sampling on a dense tabulation of each factor.
  Eigen::MatrixXd sample(Eigen::Index count, RandomStream& stream) const override {
    const Eigen::Index p = dim();
    ensure_tables();
    Eigen::MatrixXd out(count, p);
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        out(i, j) = invert_cdf(static_cast<std::size_t>(j), stream.next_uniform());
      }
    }
    return out;
  }

 private:
  struct CdfTable {
    std::vector<double> x;
    std::vector<double> c;  // cumulative mass, normalized to end at 1
  };

  void ensure_tables() const {
    if (!tables_.empty()) return;
    const int n = 4096;
    for (const auto& f : factors_) {
      // Truncate infinite tails where they carry < 1e-12 mass.
      double lo = f.lower, hi = f.upper;
      if (!std::isfinite(lo) || !std::isfinite(hi)) {
        double span = 1.0;
        while (span < 1e6) {
          const double tail =
              quad::integrate(f.pdf, span, std::isfinite(hi) ? hi : span * 10.0) +
              quad::integrate(f.pdf, std::isfinite(lo) ? lo : -span * 10.0, -span);
          if (tail < 1e-12) break;
          span *= 2.0;
        }
        if (!std::isfinite(lo)) lo = -span;
        if (!std::isfinite(hi)) hi = span;
      }
      CdfTable t;
      t.x.resize(n + 1);
      t.c.resize(n + 1);
      const double h = (hi - lo) / n;
      t.x[0] = lo;
      t.c[0] = 0.0;
      double prev = std::max(f.pdf(lo), 0.0);
      for (int k = 1; k <= n; ++k) {
        t.x[static_cast<std::size_t>(k)] = lo + h * k;
        const double cur = std::max(f.pdf(lo + h * k), 0.0);
        t.c[static_cast<std::size_t>(k)] =
            t.c[static_cast<std::size_t>(k - 1)] + 0.5 * h * (prev + cur);
        prev = cur;
      }
      const double total = t.c.back();
      for (auto& v : t.c) v /= total;
      tables_.push_back(std::move(t));
    }
  }

  double invert_cdf(std::size_t j, double u) const {
    const CdfTable& t = tables_[j];
    const auto it = std::lower_bound(t.c.begin(), t.c.end(), u);
    if (it == t.c.begin()) return t.x.front();
    if (it == t.c.end()) return t.x.back();
    const std::size_t k = static_cast<std::size_t>(it - t.c.begin());
    const double c0 = t.c[k - 1], c1 = t.c[k];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    return t.x[k - 1] + w * (t.x[k] - t.x[k - 1]);
  }

  std::vector<DensityFactor> factors_;
  mutable std::vector<CdfTable> tables_;
};

}  // namespace privnoise
