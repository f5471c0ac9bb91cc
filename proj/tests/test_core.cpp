#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "privnoise/dataset.hpp"
#include "privnoise/random_stream.hpp"
#include "privnoise/scaling_matrix.hpp"

#include <cstdio>
#include <fstream>

using namespace privnoise;

namespace {

Eigen::MatrixXd random_spd(Eigen::Index p, RandomStream& rng) {
  Eigen::MatrixXd a(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
  }
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

// Naive reference: try every sign vector without the symmetry reduction.
double brute_force_inf_to_2(const Eigen::MatrixXd& m) {
  const Eigen::Index p = m.cols();
  double best = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << p); ++mask) {
    Eigen::VectorXd s(p);
    for (Eigen::Index j = 0; j < p; ++j) s[j] = (mask >> j) & 1ULL ? -1.0 : 1.0;
    best = std::max(best, (m * s).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("matrix_power identity and diagonal cases", "[core]") {
  const ScalingMatrix id2 = ScalingMatrix::identity(2);
  CHECK((matrix_power(id2, 0.5) - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

  Eigen::MatrixXd d(2, 2);
  d << 4.0, 0.0, 0.0, 1.0;
  const Eigen::MatrixXd inv_sqrt = matrix_power(ScalingMatrix(d), -0.5);
  CHECK(inv_sqrt(0, 0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(inv_sqrt(1, 1) == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(inv_sqrt(0, 1)) < 1e-14);

  Eigen::MatrixXd s(1, 1);
  s << 16.0;
  CHECK(matrix_power(ScalingMatrix(s), 0.25)(0, 0) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("matrix_power square root squares back, commutes", "[core]") {
  RandomStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index p = 1 + trial % 5;
    const Eigen::MatrixXd a = random_spd(p, rng);
    const ScalingMatrix m(a);
    const Eigen::MatrixXd root = m.sqrt();
    CHECK((root * root - a).norm() < 1e-10 * a.norm());
    CHECK((root * a - a * root).norm() < 1e-10 * a.norm());
    // Pi^{1/2} Pi^{-1/2} = I
    CHECK((m.sqrt() * m.inv_sqrt() - Eigen::MatrixXd::Identity(p, p)).norm() < 1e-9);
  }
}

TEST_CASE("matrix_power rejects non-PD input with diagnostic", "[core]") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -3.0;
  CHECK_THROWS_WITH(ScalingMatrix(bad), Catch::Matchers::ContainsSubstring("-3"));
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(ScalingMatrix(asym), std::invalid_argument);
}

TEST_CASE("induced inf-to-2 norm known values", "[core]") {
  CHECK(induced_inf_to_2_norm(Eigen::MatrixXd::Identity(2, 2)) ==
        Catch::Approx(std::sqrt(2.0)).margin(1e-14));
  Eigen::MatrixXd scalar(1, 1);
  scalar << 3.0;
  CHECK(induced_inf_to_2_norm(scalar) == Catch::Approx(3.0));
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 0.0, 0.0, 2.0;
  CHECK(induced_inf_to_2_norm(d) == Catch::Approx(std::sqrt(5.0)).margin(1e-14));
}

TEST_CASE("induced norm matches brute-force enumeration for p <= 8", "[core]") {
  RandomStream rng(11);
  for (Eigen::Index p = 1; p <= 8; ++p) {
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::MatrixXd m(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) m(i, j) = rng.next_gaussian();
      }
      CHECK(induced_inf_to_2_norm(m) == Catch::Approx(brute_force_inf_to_2(m)).margin(1e-12));
    }
  }
}

TEST_CASE("induced norm caps enumeration at p = 25", "[core]") {
  const Eigen::MatrixXd big = Eigen::MatrixXd::Identity(26, 26);
  CHECK_THROWS_AS(induced_inf_to_2_norm(big), std::invalid_argument);
  // Upper-bound route: ||I||_2 sqrt(26)
  CHECK(induced_inf_to_2_norm(big, true) == Catch::Approx(std::sqrt(26.0)).margin(1e-12));
}

TEST_CASE("random streams replay byte-identically and forks are independent", "[core]") {
  RandomStream a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

  RandomStream base(42);
  RandomStream f1 = base.fork(1), f2 = base.fork(2), f1b = RandomStream(42).fork(1);
  CHECK(f1.next_u64() == f1b.next_u64());
  CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("gaussian and laplace draws have the right moments", "[core]") {
  RandomStream rng(5);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_gaussian();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum2 / n == Catch::Approx(1.0).margin(0.02));

  sum = sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_laplace(2.0);
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(sum2 / n == Catch::Approx(8.0).epsilon(0.05));  // Var = 2 b^2
}

TEST_CASE("csv round trip with label mapping and standardization", "[core]") {
  const std::string path = "core_test_tmp.csv";
  {
    std::ofstream out(path);
    out << "height,weight,diagnosis\n";
    out << "1.5,60,M\n2.5,80,B\n1.0,55,M\n";
  }
  CsvOptions opts;
  opts.label_column = "diagnosis";
  opts.label_map = {{"M", 1.0}, {"B", -1.0}};
  Dataset d = read_csv(path, opts);
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 2);
  CHECK(d.labels[0] == 1.0);
  CHECK(d.labels[1] == -1.0);
  CHECK(d.labels_binary());
  CHECK(d.feature_names[0] == "height");

  const ColumnScaling sc = standardize(d);
  CHECK(std::abs(d.features.col(0).mean()) < 1e-12);
  CHECK(sc.means[1] == Catch::Approx(65.0));

  write_csv(path, d, "diagnosis");
  CsvOptions opts2;
  opts2.label_column = "diagnosis";
  const Dataset d2 = read_csv(path, opts2);
  CHECK((d2.features - d.features).cwiseAbs().maxCoeff() < 1e-15);
  std::remove(path.c_str());
}

TEST_CASE("csv rejects unmapped labels and ragged rows", "[core]") {
  const std::string path = "core_test_bad.csv";
  {
    std::ofstream out(path);
    out << "a,b,y\n1,2,1\n3,4\n";
  }
  CsvOptions opts;
  opts.label_column = "y";
  CHECK_THROWS_AS(read_csv(path, opts), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_csv("does_not_exist.csv", opts), std::runtime_error);
}
