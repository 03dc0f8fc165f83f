#include "doctest.h"
#include "test_util.hpp"

#include "nsca/error.hpp"
#include "nsca/signal.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace nsca;
using nsca::testing::max_abs;

namespace {

// Triple-loop covariance over the listed samples, mean removed over them.
Eigen::MatrixXd brute_covariance(const MultichannelSignal& x,
                                 const std::vector<std::size_t>& idx) {
  const std::size_t n = x.channels();
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t : idx) mean[i] += x.data()(i, t);
    mean[i] /= static_cast<double>(idx.size());
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t : idx) {
        acc += (x.data()(i, t) - mean[i]) * (x.data()(j, t) - mean[j]);
      }
      c(i, j) = acc / static_cast<double>(idx.size());
    }
  }
  return c;
}

}  // namespace

TEST_CASE("signal construction validates its input") {
  SampleMatrix empty(0, 0);
  CHECK_THROWS_AS(MultichannelSignal(empty, 500.0), Error);
  SampleMatrix m = SampleMatrix::Zero(2, 3);
  CHECK_THROWS_AS(MultichannelSignal(m, 0.0), Error);
  m(1, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    MultichannelSignal bad(m, 500.0);
    FAIL("NaN accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
  const auto x = MultichannelSignal::from_channels({{1, 2, 3}, {4, 5, 6}}, 10.0);
  CHECK(x.channels() == 2);
  CHECK(x.samples() == 3);
  CHECK(x.channel(1)[2] == 6.0);
}

TEST_CASE("epoch sets normalize runs and round-trip indexes") {
  const std::vector<std::size_t> idx = {1, 2, 3, 7, 9, 10};
  const EpochSet s = EpochSet::from_indexes(idx, 12);
  CHECK(s.size() == 6);
  CHECK(s.intervals().size() == 3);
  CHECK(s.indexes() == idx);
  CHECK(s.contains(9));
  CHECK_FALSE(s.contains(8));
  CHECK(EpochSet::from_mask(s.mask()) == s);

  const EpochSet r = EpochSet::from_intervals({{5, 8}, {1, 3}, {2, 6}}, 10);
  CHECK(r.intervals() == std::vector<Interval>{{1, 8}});

  const std::vector<std::size_t> unsorted = {3, 2};
  CHECK_THROWS_AS(EpochSet::from_indexes(unsorted, 5), Error);
  const std::vector<std::size_t> outside = {5};
  CHECK_THROWS_AS(EpochSet::from_indexes(outside, 5), Error);
}

TEST_CASE("symmetric matrix rejects asymmetric input") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 2.1, 1;
  CHECK_THROWS_AS(SymmetricMatrix{m}, Error);
  m(1, 0) = 2.0;
  CHECK(SymmetricMatrix(m).dim() == 2);
}

TEST_CASE("covariance_full") {
  SUBCASE("zero signal") {
    const auto x = MultichannelSignal::from_channels({{0, 0, 0, 0}}, 1.0);
    const auto c = covariance_full(x).matrix();
    CHECK(c.rows() == 1);
    CHECK(c(0, 0) == 0.0);
  }
  SUBCASE("linearly dependent channels") {
    std::mt19937_64 rng(3);
    auto a = nsca::testing::white_noise(500, 1.0, rng);
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = 2.0 * a[i];
    const auto c = covariance_full(MultichannelSignal::from_channels({a, b}, 1.0))
                       .matrix();
    CHECK(c(1, 1) == doctest::Approx(4.0 * c(0, 0)).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(2.0 * c(0, 0)).epsilon(1e-12));
    CHECK(std::abs(c.determinant()) <= 1e-10 * c(1, 1) * c(1, 1));
  }
  SUBCASE("matches a brute-force loop") {
    std::mt19937_64 rng(11);
    const auto x = nsca::testing::random_signal(3, 1000, 100.0, rng);
    std::vector<std::size_t> all(1000);
    for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
    const Eigen::MatrixXd ref = brute_covariance(x, all);
    CHECK(max_abs(covariance_full(x).matrix() - ref) <= 1e-12 * max_abs(ref));
  }
}

TEST_CASE("covariance_on_epochs") {
  std::mt19937_64 rng(12);
  const auto x = nsca::testing::random_signal(3, 400, 100.0, rng);

  SUBCASE("all samples equals the full covariance") {
    const auto c = covariance_on_epochs(x, EpochSet::all(400));
    CHECK(max_abs(c.matrix.matrix() - covariance_full(x).matrix()) <= 1e-12);
    CHECK(c.support == 400);
  }
  SUBCASE("one sample annihilates after mean removal") {
    const std::vector<std::size_t> one = {17};
    const auto c = covariance_on_epochs(x, EpochSet::from_indexes(one, 400));
    CHECK(max_abs(c.matrix.matrix()) == 0.0);
    CHECK(c.insufficient_statistics);
  }
  SUBCASE("even indexes of an alternating signal") {
    std::vector<double> a(200), b(200);
    for (std::size_t t = 0; t < 200; ++t) {
      a[t] = (t % 2 == 0) ? 1.0 + 0.01 * t : -3.0;
      b[t] = (t % 2 == 0) ? std::sin(0.1 * t) : 5.0;
    }
    const auto y = MultichannelSignal::from_channels({a, b}, 1.0);
    std::vector<std::size_t> even;
    for (std::size_t t = 0; t < 200; t += 2) even.push_back(t);
    const auto c = covariance_on_epochs(y, EpochSet::from_indexes(even, 200));
    const Eigen::MatrixXd ref = brute_covariance(y, even);
    CHECK(max_abs(c.matrix.matrix() - ref) <= 1e-12 * max_abs(ref));
  }
  SUBCASE("empty set and wrong horizon are errors") {
    CHECK_THROWS_AS(covariance_on_epochs(x, EpochSet(400)), Error);
    CHECK_THROWS_AS(covariance_on_epochs(x, EpochSet::all(399)), Error);
  }
}

TEST_CASE("sliding_power") {
  SUBCASE("constant signal") {
    const std::vector<double> s(50, 3.0);
    const auto p = sliding_power(s, 7);
    for (std::size_t t = 3; t + 3 < s.size(); ++t) {
      CHECK(p[t] == doctest::Approx(9.0).epsilon(1e-14));
    }
  }
  SUBCASE("unit impulse") {
    std::vector<double> s(30, 0.0);
    s[12] = 1.0;
    const auto p = sliding_power(s, 5);
    for (std::size_t t = 0; t < s.size(); ++t) {
      const double expect = (t >= 10 && t <= 14) ? 0.2 : 0.0;
      CHECK(p[t] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
  SUBCASE("matches a direct windowed sum") {
    std::mt19937_64 rng(5);
    const auto s = nsca::testing::white_noise(300, 2.0, rng);
    const std::size_t w = 11;
    const auto p = sliding_power(s, w);
    for (std::size_t t = 0; t < s.size(); ++t) {
      double acc = 0.0;
      for (long a = -5; a <= 5; ++a) {
        const long k = static_cast<long>(t) + a;
        if (k >= 0 && k < static_cast<long>(s.size())) acc += s[k] * s[k];
      }
      CHECK(std::abs(p[t] - acc / 11.0) <= 1e-12 * std::max(1.0, acc / 11.0));
    }
  }
  SUBCASE("window larger than the signal") {
    const std::vector<double> s(4, 1.0);
    try {
      sliding_power(s, 5);
      FAIL("expected WindowTooLarge");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::WindowTooLarge);
    }
  }
}

TEST_CASE("sliding_mean uses a leading offset") {
  const std::vector<double> s = {1, 2, 3, 4, 5};
  const auto m = sliding_mean(s, 2, 1);
  // out(t) = (s(t-1) + s(t)) / 2 with zeros outside.
  CHECK(m[0] == doctest::Approx(0.5));
  CHECK(m[1] == doctest::Approx(1.5));
  CHECK(m[4] == doctest::Approx(4.5));
}

TEST_CASE("window_samples rounds durations") {
  CHECK(window_samples(0.010, 500.0) == 5);
  CHECK(window_samples(0.2, 500.0) == 100);
  CHECK_THROWS_AS(window_samples(0.0005, 500.0), Error);
}
