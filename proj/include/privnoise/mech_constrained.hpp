#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "privnoise/noise_mechanism.hpp"
#include "privnoise/random_stream.hpp"

namespace privnoise {

// Box support with diagonal scaling: coordinate i is confined to
// [lower_i, upper_i] and weighted by theta_diag_i (the diagonal of Pi).
struct BoxConstraint {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd theta_diag;

  void validate() const {
    if (lower.size() != upper.size() || lower.size() != theta_diag.size() || lower.size() < 1) {
      throw std::invalid_argument("box constraint: inconsistent dimensions");
    }
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!(lower[i] < upper[i])) throw std::invalid_argument("box constraint: lower >= upper");
      if (!(theta_diag[i] > 0.0)) throw std::invalid_argument("box constraint: theta must be > 0");
    }
  }
};

// Ground state of the two-point boundary problem
//   u'' + (mu - (lambda/(4 theta)) n^2) u = 0,  u(lower) = u(upper) = 0,
// discretized with second-order central differences; u is normalized so that
// the trapezoid integral of u^2 is 1.
struct EigenSolution1D {
  Eigen::VectorXd grid;      // includes both endpoints
  Eigen::VectorXd u_values;  // zero at endpoints, positive inside
  double mu = 0.0;
  double ode_residual = 0.0;
  double normalization_error = 0.0;

  double second_moment() const {
    double m2 = 0.0;
    for (Eigen::Index k = 0; k + 1 < grid.size(); ++k) {
      const double h = grid[k + 1] - grid[k];
      m2 += 0.5 * h *
            (grid[k] * grid[k] * u_values[k] * u_values[k] +
             grid[k + 1] * grid[k + 1] * u_values[k + 1] * u_values[k + 1]);
    }
    return m2;
  }

  double mean() const {
    double m1 = 0.0;
    for (Eigen::Index k = 0; k + 1 < grid.size(); ++k) {
      const double h = grid[k + 1] - grid[k];
      m1 += 0.5 * h *
            (grid[k] * u_values[k] * u_values[k] + grid[k + 1] * u_values[k + 1] * u_values[k + 1]);
    }
    return m1;
  }
};

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal matrix (diag d, offdiag e)
// strictly below x, by the Sturm sequence.
inline int sturm_count(const Eigen::VectorXd& d, double e, double x) {
  const Eigen::Index n = d.size();
  int count = 0;
  double q = 1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    q = (k == 0) ? d[0] - x : d[k] - x - e * e / q;
    if (q == 0.0) q = 1e-300;
    if (q < 0.0) ++count;
  }
  return count;
}

// Solve (T - shift I) v = rhs for tridiagonal T with constant off-diagonal e,
// using partial pivoting (the shifted matrix is nearly singular on purpose).
inline Eigen::VectorXd shifted_tridiag_solve(const Eigen::VectorXd& d, double e, double shift,
                                             Eigen::VectorXd rhs) {
  const Eigen::Index n = d.size();
  Eigen::VectorXd a(n), b(n), c(n);  // three bands after elimination
  for (Eigen::Index k = 0; k < n; ++k) {
    a[k] = d[k] - shift;
    b[k] = (k + 1 < n) ? e : 0.0;
    c[k] = 0.0;
  }
  Eigen::VectorXd sub(n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) sub[k] = e;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (std::abs(sub[k]) > std::abs(a[k])) {
      std::swap(a[k], sub[k]);
      std::swap(b[k], a[k + 1]);
      std::swap(c[k], b[k + 1]);
      std::swap(rhs[k], rhs[k + 1]);
    }
    if (a[k] == 0.0) a[k] = 1e-300;
    const double m = sub[k] / a[k];
    a[k + 1] -= m * b[k];
    b[k + 1] -= m * c[k];
    rhs[k + 1] -= m * rhs[k];
  }
  Eigen::VectorXd v(n);
  if (a[n - 1] == 0.0) a[n - 1] = 1e-300;
  v[n - 1] = rhs[n - 1] / a[n - 1];
  if (n >= 2) v[n - 2] = (rhs[n - 2] - b[n - 2] * v[n - 1]) / a[n - 2];
  for (Eigen::Index k = n - 3; k >= 0; --k) {
    v[k] = (rhs[k] - b[k] * v[k + 1] - c[k] * v[k + 2]) / a[k];
  }
  return v;
}

}  // namespace detail

inline EigenSolution1D solve_ground_state(double lambda, double theta, double lower, double upper,
                                          int grid_points = 1024) {
  if (!(lower < upper)) throw std::invalid_argument("solve_ground_state: lower >= upper");
  if (lambda < 0.0 || theta <= 0.0) {
    throw std::invalid_argument("solve_ground_state: need lambda >= 0 and theta > 0");
  }
  if (grid_points < 64) throw std::invalid_argument("solve_ground_state: grid_points >= 64");

  const Eigen::Index n = grid_points - 1;  // interior points
  const double h = (upper - lower) / grid_points;
  const double coeff = lambda / (4.0 * theta);

  Eigen::VectorXd diag(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = lower + h * static_cast<double>(k + 1);
    diag[k] = 2.0 / (h * h) + coeff * x * x;
  }
  const double off = -1.0 / (h * h);

  // Bisection for the smallest eigenvalue via Gershgorin bracketing.
  double lo = diag.minCoeff() - 2.0 / (h * h);
  double hi = diag.maxCoeff() + 2.0 / (h * h);
  for (int it = 0; it < 200 && (hi - lo) > 1e-14 * std::max(std::abs(hi), 1.0); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::sturm_count(diag, off, mid) >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double mu = 0.5 * (lo + hi);

  // Inverse iteration at the bisection value polishes the eigenvector.
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0);
  for (int it = 0; it < 8; ++it) {
    u = detail::shifted_tridiag_solve(diag, off, mu, u);
    const double norm = u.norm();
    if (!(norm > 0.0) || !u.allFinite()) {
      throw std::runtime_error("solve_ground_state: inverse iteration broke down");
    }
    u /= norm;
  }
  // Rayleigh quotient on the polished vector.
  {
    Eigen::VectorXd tu = diag.cwiseProduct(u);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      tu[k] += off * u[k + 1];
      tu[k + 1] += off * u[k];
    }
    mu = u.dot(tu);
  }
  if (!(mu > 0.0)) {
    throw std::runtime_error("solve_ground_state: nonpositive eigenvalue " + std::to_string(mu));
  }
  if (u.sum() < 0.0) u = -u;
  if (u.minCoeff() < -1e-8 * u.maxCoeff()) {
    throw std::runtime_error("solve_ground_state: eigenvector changed sign (not ground state)");
  }
  u = u.cwiseMax(0.0);

  EigenSolution1D sol;
  sol.grid.resize(grid_points + 1);
  sol.u_values.setZero(grid_points + 1);
  for (Eigen::Index k = 0; k <= grid_points; ++k) {
    sol.grid[k] = lower + h * static_cast<double>(k);
  }
  sol.u_values.segment(1, n) = u;
  sol.mu = mu;

  // Normalize the trapezoid integral of u^2 to one.
  double mass = 0.0;
  for (Eigen::Index k = 0; k < grid_points; ++k) {
    mass += 0.5 * h * (sol.u_values[k] * sol.u_values[k] + sol.u_values[k + 1] * sol.u_values[k + 1]);
  }
  sol.u_values /= std::sqrt(mass);
  mass = 0.0;
  for (Eigen::Index k = 0; k < grid_points; ++k) {
    mass += 0.5 * h * (sol.u_values[k] * sol.u_values[k] + sol.u_values[k + 1] * sol.u_values[k + 1]);
  }
  sol.normalization_error = std::abs(mass - 1.0);

  // Discrete ODE residual on interior points.
  double res = 0.0;
  for (Eigen::Index k = 1; k < grid_points; ++k) {
    const double x = sol.grid[k];
    const double upp =
        (sol.u_values[k - 1] - 2.0 * sol.u_values[k] + sol.u_values[k + 1]) / (h * h);
    res = std::max(res, std::abs(upp + (mu - coeff * x * x) * sol.u_values[k]));
  }
  sol.ode_residual = res;
  return sol;
}

// One dual-ascent consistency sweep: with mu frozen at the reported value,
// inverse iteration on the same discretization must reproduce u. Returns the
// sup-norm deviation.
inline double dual_ascent_check(const EigenSolution1D& sol, double lambda, double theta) {
  const Eigen::Index gp = sol.grid.size() - 1;
  const Eigen::Index n = gp - 1;
  const double h = sol.grid[1] - sol.grid[0];
  const double coeff = lambda / (4.0 * theta);
  Eigen::VectorXd diag(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double x = sol.grid[k + 1];
    diag[k] = 2.0 / (h * h) + coeff * x * x;
  }
  Eigen::VectorXd u = sol.u_values.segment(1, n);
  for (int it = 0; it < 4; ++it) {
    u = detail::shifted_tridiag_solve(diag, -1.0 / (h * h), sol.mu, u);
    u /= u.norm();
  }
  if (u.sum() < 0.0) u = -u;
  u /= std::sqrt(u.squaredNorm() * h);  // same normalization as the solver, up to endpoints
  Eigen::VectorXd ref = sol.u_values.segment(1, n);
  ref /= std::sqrt(ref.squaredNorm() * h);
  return (u - ref).cwiseAbs().maxCoeff();
}

// Product of per-coordinate ground-state densities u_i(n_i)^2 on the box.
class ConstrainedMechanism : public NoiseMechanism {
 public:
  ConstrainedMechanism(BoxConstraint constraint, double lambda, std::vector<EigenSolution1D> factors)
      : constraint_(std::move(constraint)), lambda_(lambda), factors_(std::move(factors)) {
    build_cdfs();
  }

  const BoxConstraint& constraint() const { return constraint_; }
  double lambda() const { return lambda_; }
  const std::vector<EigenSolution1D>& factors() const { return factors_; }

  Eigen::Index dim() const override { return constraint_.lower.size(); }

  // Per-factor Fisher information 4 * int u'^2, evaluated through the
  // eigenvalue identity int u'^2 = mu - (lambda/(4 theta)) int n^2 u^2.
  FisherInfo fisher_information() const override {
    const Eigen::Index p = dim();
    FisherInfo info;
    info.matrix = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& f = factors_[static_cast<std::size_t>(j)];
      const double coeff = lambda_ / (4.0 * constraint_.theta_diag[j]);
      info.matrix(j, j) = 4.0 * (f.mu - coeff * f.second_moment());
      info.quadrature_error += f.ode_residual + f.normalization_error;
    }
    return info;
  }

  Eigen::MatrixXd second_moment() const override {
    const Eigen::Index p = dim();
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd means(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      means[j] = factors_[static_cast<std::size_t>(j)].mean();
      v(j, j) = factors_[static_cast<std::size_t>(j)].second_moment();
    }
    // Cross moments are products of the (possibly nonzero) means.
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (j != k) v(j, k) = means[j] * means[k];
      }
    }
    return v;
  }

  // Inverse-CDF sampling on the piecewise-linear u^2 interpolant, so samples
  // stay strictly inside the box.
  Eigen::MatrixXd sample(Eigen::Index count, RandomStream& stream) const override {
    Eigen::MatrixXd out(count, dim());
    for (Eigen::Index i = 0; i < count; ++i) {
      for (Eigen::Index j = 0; j < dim(); ++j) {
        out(i, j) = sample_factor(static_cast<std::size_t>(j), stream.next_uniform());
      }
    }
    return out;
  }

  // CDF mass of [a, b] under the piecewise-linear u^2 interpolant.
  double density_mass(Eigen::Index coord, double a, double b) const {
    const auto& cdf = cdfs_[static_cast<std::size_t>(coord)];
    const auto& f = factors_[static_cast<std::size_t>(coord)];
    auto eval = [&](double x) {
      if (x <= f.grid[0]) return 0.0;
      if (x >= f.grid[f.grid.size() - 1]) return 1.0;
      const double h = f.grid[1] - f.grid[0];
      const Eigen::Index k = std::min<Eigen::Index>(static_cast<Eigen::Index>((x - f.grid[0]) / h),
                                                    f.grid.size() - 2);
      const double t = (x - f.grid[k]) / h;
      const double d0 = f.u_values[k] * f.u_values[k];
      const double d1 = f.u_values[k + 1] * f.u_values[k + 1];
      return (cdf[static_cast<std::size_t>(k)] + h * t * (d0 + 0.5 * t * (d1 - d0))) / cdf.back();
    };
    return eval(b) - eval(a);
  }

 private:
  void build_cdfs() {
    constraint_.validate();
    if (static_cast<Eigen::Index>(factors_.size()) != constraint_.lower.size()) {
      throw std::invalid_argument("constrained mechanism: factor count mismatch");
    }
    for (const auto& f : factors_) {
      std::vector<double> c(static_cast<std::size_t>(f.grid.size()), 0.0);
      for (Eigen::Index k = 0; k + 1 < f.grid.size(); ++k) {
        const double h = f.grid[k + 1] - f.grid[k];
        c[static_cast<std::size_t>(k + 1)] =
            c[static_cast<std::size_t>(k)] +
            0.5 * h * (f.u_values[k] * f.u_values[k] + f.u_values[k + 1] * f.u_values[k + 1]);
      }
      cdfs_.push_back(std::move(c));  // raw masses; sampling rescales by the total
    }
  }

  double sample_factor(std::size_t j, double uniform) const {
    const auto& cdf = cdfs_[j];
    const auto& f = factors_[j];
    const double want = uniform * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), want);
    std::size_t k = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
    if (k + 1 >= cdf.size()) k = cdf.size() - 2;
    const double h = f.grid[static_cast<Eigen::Index>(k + 1)] - f.grid[static_cast<Eigen::Index>(k)];
    const double d0 = f.u_values[static_cast<Eigen::Index>(k)] *
                      f.u_values[static_cast<Eigen::Index>(k)];
    const double d1 = f.u_values[static_cast<Eigen::Index>(k + 1)] *
                      f.u_values[static_cast<Eigen::Index>(k + 1)];
    const double target = want - cdf[k];
    // Piecewise-linear density: within the cell, mass(t) = h (d0 t + (d1-d0) t^2 / 2).
    const double a = 0.5 * (d1 - d0) * h;
    const double b = d0 * h;
    double t;
    if (std::abs(a) < 1e-300) {
      t = b > 0.0 ? target / b : 0.5;
    } else {
      const double disc = std::max(b * b + 4.0 * a * target, 0.0);
      t = (-b + std::sqrt(disc)) / (2.0 * a);
    }
    t = std::min(std::max(t, 0.0), 1.0);
    const double x = f.grid[static_cast<Eigen::Index>(k)] + t * h;
    // keep strictly inside the support
    const double lo = f.grid[0], hi = f.grid[f.grid.size() - 1];
    return std::min(std::max(x, std::nextafter(lo, hi)), std::nextafter(hi, lo));
  }

  BoxConstraint constraint_;
  double lambda_;
  std::vector<EigenSolution1D> factors_;
  std::vector<std::vector<double>> cdfs_;
};

inline ConstrainedMechanism constrained_mechanism(const BoxConstraint& constraint, double lambda,
                                                  int grid_points = 1024) {
  constraint.validate();
  std::vector<EigenSolution1D> factors;
  for (Eigen::Index j = 0; j < constraint.lower.size(); ++j) {
    factors.push_back(solve_ground_state(lambda, constraint.theta_diag[j], constraint.lower[j],
                                         constraint.upper[j], grid_points));
  }
  return ConstrainedMechanism(constraint, lambda, std::move(factors));
}

}  // namespace privnoise
