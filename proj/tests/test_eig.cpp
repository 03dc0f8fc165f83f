#include "doctest.h"
#include "test_util.hpp"

#include "nsca/eig.hpp"
#include "nsca/error.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace nsca;
using nsca::testing::max_abs;
using nsca::testing::random_matrix;
using nsca::testing::random_spd;

namespace {

Eigen::MatrixXd offdiag(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd o = m;
  o.diagonal().setZero();
  return o;
}

}  // namespace

TEST_CASE("gevd of a diagonal pair") {
  Eigen::MatrixXd a(2, 2);
  a << 2, 0, 0, 1;
  const auto r = gevd(SymmetricMatrix(a), SymmetricMatrix(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(r.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(r.eigenvalues(1) == doctest::Approx(2.0));
  CHECK(std::abs(r.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(r.eigenvectors(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(r.eigenvectors(0, 0)) <= 1e-12);
}

TEST_CASE("gevd of an identical pair has unit eigenvalues") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd m = random_spd(5, rng);
  const auto r = gevd(SymmetricMatrix(m), SymmetricMatrix(m));
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(r.eigenvalues(i) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("gevd residuals on random SPD pairs") {
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd a = random_spd(8, rng);
    const Eigen::MatrixXd b = random_spd(8, rng);
    const auto r = gevd(SymmetricMatrix(a), SymmetricMatrix(b));
    const Eigen::MatrixXd& w = r.eigenvectors;
    CHECK(max_abs(w.transpose() * b * w - Eigen::MatrixXd::Identity(8, 8)) <= 1e-8);
    const Eigen::MatrixXd waw = w.transpose() * a * w;
    CHECK(max_abs(offdiag(waw)) <= 1e-8 * waw.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < 8; ++i) {
      const Eigen::VectorXd v = w.col(i);
      const double rayleigh = v.dot(a * v) / v.dot(b * v);
      CHECK(std::abs(rayleigh - r.eigenvalues(i)) <= 1e-8 * std::abs(r.eigenvalues(i)));
      if (i > 0) CHECK(r.eigenvalues(i - 1) <= r.eigenvalues(i));
    }
  }
}

TEST_CASE("gevd regularizes a singular B and rejects an indefinite one") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 3);
  b(0, 0) = 1.0;
  b(1, 1) = 1.0;
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  const auto r = gevd(SymmetricMatrix(a), SymmetricMatrix(b));
  CHECK(r.regularized);

  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(2, 2);
  indefinite(1, 1) = -1.0;
  try {
    gevd(SymmetricMatrix(Eigen::MatrixXd::Identity(2, 2)), SymmetricMatrix(indefinite));
    FAIL("expected SingularB");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularB);
  }
  CHECK_THROWS_AS(gevd(SymmetricMatrix(Eigen::MatrixXd::Identity(2, 2)),
                       SymmetricMatrix(Eigen::MatrixXd::Identity(3, 3))),
                  Error);
}

TEST_CASE("ajd of diagonal matrices is a signed permutation") {
  std::vector<SymmetricMatrix> cs;
  Eigen::VectorXd d1(3), d2(3);
  d1 << 3, 1, 2;
  d2 << 1, 5, 4;
  cs.emplace_back(Eigen::MatrixXd(d1.asDiagonal()));
  cs.emplace_back(Eigen::MatrixXd(d2.asDiagonal()));
  const auto r = ajd(cs, SymmetricMatrix(Eigen::MatrixXd::Identity(3, 3)));
  const Eigen::MatrixXd a = r.demixing.cwiseAbs();
  CHECK(max_abs(a * a.transpose() - Eigen::MatrixXd::Identity(3, 3)) <= 1e-12);
  CHECK((a.array() > 0.5).count() == 3);
  CHECK(r.offdiag_score.back() <= 1e-20);
}

TEST_CASE("ajd recovers an exactly diagonalizable set") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const Eigen::Index n = 6;
  const Eigen::MatrixXd m = random_matrix(n, n, rng);
  std::vector<SymmetricMatrix> cs;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = u(rng);
    const Eigen::MatrixXd c = m * d.asDiagonal() * m.transpose();
    cs.emplace_back(0.5 * (c + c.transpose()));
  }
  const Eigen::MatrixXd b = m * m.transpose();
  const auto r = ajd(cs, SymmetricMatrix(0.5 * (b + b.transpose())));
  CHECK(r.converged);
  CHECK(amari_index(r.demixing, m) < 0.01);
  CHECK(std::isfinite(r.condition_number));
  const Eigen::MatrixXd wbw = r.demixing.transpose() * b * r.demixing;
  CHECK(max_abs(wbw - Eigen::MatrixXd::Identity(n, n)) <= 1e-8);
  for (std::size_t k = 1; k < r.offdiag_score.size(); ++k) {
    CHECK(r.offdiag_score[k] <= r.offdiag_score[k - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("apply_transform") {
  std::mt19937_64 rng(24);
  const auto x = nsca::testing::random_signal(3, 200, 100.0, rng);
  const auto same = apply_transform(Eigen::MatrixXd::Identity(3, 3), x);
  CHECK(max_abs(same.data() - x.data()) == 0.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(3, 3);
  d(0, 0) = 2.0;
  const auto scaled = apply_transform(d, x);
  CHECK(max_abs(scaled.data().row(0) - 2.0 * x.data().row(0)) <= 1e-15);

  // GEVD against the full covariance whitens the record.
  const SymmetricMatrix cx = covariance_full(x);
  std::vector<std::size_t> idx;
  for (std::size_t t = 0; t < 200; t += 3) idx.push_back(t);
  const auto cp = covariance_on_epochs(x, EpochSet::from_indexes(idx, 200));
  const auto r = gevd(cp.matrix, cx);
  const auto y = apply_transform(r.eigenvectors, x);
  CHECK(max_abs(covariance_full(y).matrix() - Eigen::MatrixXd::Identity(3, 3)) <= 1e-8);
}

TEST_CASE("amari index") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  CHECK(amari_index(eye, eye) == 0.0);
  Eigen::MatrixXd p(3, 3);
  p << 0, 3, 0, 0, 0, -2, 5, 0, 0;
  CHECK(amari_index(eye, p) == doctest::Approx(0.0));
  // Rows and columns of ones + I each contribute 4/2 - 1, so
  // (3 + 3) / (2 * 3 * 2) = 0.5.
  const Eigen::MatrixXd g = Eigen::MatrixXd::Ones(3, 3) + eye;
  CHECK(amari_index(eye, g) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("column signs put the largest entry positive") {
  Eigen::MatrixXd w(2, 2);
  w << -3, 1, 1, -0.5;
  normalize_column_signs(w);
  CHECK(w(0, 0) == 3.0);
  CHECK(w(1, 0) == -1.0);
  CHECK(w(0, 1) == 1.0);
}
