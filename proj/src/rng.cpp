#include <gencs/rng.hpp>

#include <cmath>
#include <numbers>

namespace gencs {

namespace {

std::uint64_t splitmix64_step(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = seed;
  std::uint64_t derived = splitmix64_step(state);
  for (std::uint64_t component : path) {
    state = derived ^ (component + 0x632be59bd9b4e019ULL);
    derived = splitmix64_step(state);
  }
  return derived;
}

std::uint64_t Stream::next_u64() { return splitmix64_step(state_); }

double Stream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u must be strictly positive for the log; uniform01 can return 0.
  double u = 0.0;
  do {
    u = uniform01();
  } while (u == 0.0);
  const double v = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u));
  const double angle = 2.0 * std::numbers::pi * v;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Index Stream::discrete_from_cdf(const Vector& cdf) {
  const double u = uniform01();
  Index lo = 0;
  Index hi = cdf.size() - 1;
  while (lo < hi) {
    const Index mid = lo + (hi - lo) / 2;
    if (cdf[mid] > u) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

Vector Stream::normal_vector(Index n) {
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal();
  return out;
}

Vector cumulative_distribution(const Vector& p) {
  Vector cdf(p.size());
  double run = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    run += p[i];
    cdf[i] = run;
  }
  if (cdf.size() > 0) cdf[cdf.size() - 1] = 1.0;
  return cdf;
}

}  // namespace gencs
