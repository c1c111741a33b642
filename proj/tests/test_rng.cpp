#include <gencs/rng.hpp>

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

using namespace gencs;

TEST_CASE("derive_stream is deterministic and path-sensitive") {
  const std::uint64_t a = derive_stream(42, {1, 2, 3});
  const std::uint64_t b = derive_stream(42, {1, 2, 3});
  CHECK(a == b);

  // Any change to the root seed or any path element lands on a new stream.
  CHECK(derive_stream(43, {1, 2, 3}) != a);
  CHECK(derive_stream(42, {1, 2, 4}) != a);
  CHECK(derive_stream(42, {1, 2}) != a);
  CHECK(derive_stream(42, {1, 2, 3, 0}) != a);
  CHECK(derive_stream(42, {}) != derive_stream(42, {0}));

  // Sibling streams decorrelate: prefix reordering matters.
  CHECK(derive_stream(42, {2, 1}) != derive_stream(42, {1, 2}));
}

TEST_CASE("identical stream states replay the identical sequence") {
  Stream s1(derive_stream(7, {9}));
  Stream s2(derive_stream(7, {9}));
  for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("uniform01 stays in [0,1) and fills the interval") {
  Stream s(123);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
  // Mean of n uniforms has sd 1/sqrt(12 n); allow 4 sigma.
  CHECK(std::abs(sum / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal matches the first two moments of N(0,1)") {
  Stream s(999);
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  // Var of the sample variance of a normal is ~2/n.
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("normal_vector equals repeated scalar draws from the same state") {
  Stream a(31337);
  Stream b(31337);
  const Vector v = a.normal_vector(9);
  for (Index i = 0; i < 9; ++i) CHECK(v[i] == b.normal());
}

TEST_CASE("cumulative_distribution forms inclusive sums and clamps the tail") {
  Vector p(4);
  p << 0.1, 0.2, 0.3, 0.4;
  const Vector cdf = cumulative_distribution(p);
  REQUIRE(cdf.size() == 4);
  CHECK(cdf[0] == doctest::Approx(0.1));
  CHECK(cdf[1] == doctest::Approx(0.3));
  CHECK(cdf[2] == doctest::Approx(0.6));
  CHECK(cdf[3] == 1.0);  // exactly, independent of rounding in the sums

  // The clamp also absorbs accumulated round-off below 1.
  Vector q = Vector::Constant(7, 1.0 / 7.0);
  CHECK(cumulative_distribution(q)[6] == 1.0);
}

TEST_CASE("discrete_from_cdf honors a point mass") {
  Vector p = Vector::Zero(6);
  p[3] = 1.0;
  const Vector cdf = cumulative_distribution(p);
  Stream s(5);
  for (int i = 0; i < 50; ++i) CHECK(s.discrete_from_cdf(cdf) == 3);
}

TEST_CASE("discrete_from_cdf reproduces prescribed frequencies") {
  Vector p(3);
  p << 0.5, 0.25, 0.25;
  const Vector cdf = cumulative_distribution(p);
  Stream s(2024);
  const int n = 40000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<size_t>(s.discrete_from_cdf(cdf))];
  for (int j = 0; j < 3; ++j) {
    const double freq = static_cast<double>(counts[static_cast<size_t>(j)]) / n;
    const double sd = std::sqrt(p[j] * (1 - p[j]) / n);
    CHECK(std::abs(freq - p[j]) < 4.0 * sd);
  }
}
