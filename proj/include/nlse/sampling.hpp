#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nlse/autodiff.hpp"
#include "nlse/error.hpp"

namespace nlse {

// Seedable generator with reproducible output on every platform: the
// mt19937_64 bit stream is fully specified by the standard, and all
// conversions to real draws are done here rather than by <random>
// distributions (whose algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1, without modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  // Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a, b, s;
    do {
      a = 2.0 * uniform() - 1.0;
      b = 2.0 * uniform() - 1.0;
      s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * m;
    has_spare_ = true;
    return a * m;
  }

  // Independent child stream; depends only on this generator's seed and the stream id.
  Rng split(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x9E3779B97F4A7C15ull))); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream ids derived from the master seed of a run.
enum class Stream : std::uint64_t { training_points = 1, noise = 2, collocation = 3, init = 4 };

inline Rng stream(const Rng& master, Stream s) { return master.split(static_cast<std::uint64_t>(s)); }

template <typename Scalar>
struct DomainBounds {
  Scalar x_min{-5};
  Scalar x_max{5};
  Scalar t_min{0};
  Scalar t_max{std::numbers::pi_v<Scalar> / 2};

  void validate() const {
    if (!(x_min < x_max) || !(t_min < t_max)) throw ConfigError("domain bounds must satisfy min < max");
  }
  bool contains(Scalar x, Scalar t) const { return x >= x_min && x <= x_max && t >= t_min && t <= t_max; }
};

template <typename Scalar>
struct CollocationSet {
  PointMatrix<Scalar> points;

  Index count() const { return points.cols(); }
};

// Latin hypercube design: in each dimension the n points fall one per
// equal-width stratum; independent permutations pair the dimensions.
template <typename Scalar>
CollocationSet<Scalar> lhs_sample(Index n, const DomainBounds<Scalar>& bounds, Rng& rng) {
  if (n < 1) throw ConfigError("lhs_sample: n must be at least 1");
  bounds.validate();
  const Scalar lo[2] = {bounds.x_min, bounds.t_min};
  const Scalar hi[2] = {bounds.x_max, bounds.t_max};
  CollocationSet<Scalar> set{PointMatrix<Scalar>(2, n)};
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (int dim = 0; dim < 2; ++dim) {
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    const Scalar width = (hi[dim] - lo[dim]) / static_cast<Scalar>(n);
    for (Index i = 0; i < n; ++i) {
      const auto stratum = static_cast<Scalar>(order[static_cast<std::size_t>(i)]);
      set.points(dim, i) = lo[dim] + width * (stratum + static_cast<Scalar>(rng.uniform()));
    }
  }
  return set;
}

// i.i.d. uniform points over the box.
template <typename Scalar>
PointMatrix<Scalar> draw_training_points(Index n_u, const DomainBounds<Scalar>& bounds, Rng& rng) {
  if (n_u < 1) throw ConfigError("draw_training_points: n_u must be at least 1");
  bounds.validate();
  PointMatrix<Scalar> pts(2, n_u);
  for (Index i = 0; i < n_u; ++i) {
    pts(0, i) = static_cast<Scalar>(rng.uniform(bounds.x_min, bounds.x_max));
    pts(1, i) = static_cast<Scalar>(rng.uniform(bounds.t_min, bounds.t_max));
  }
  return pts;
}

// Regular nx-by-nt tensor grid including the endpoints. Point (ix, it) is
// column it * nx + ix, so x runs fastest.
template <typename Scalar>
PointMatrix<Scalar> evaluation_grid(Index nx, Index nt, const DomainBounds<Scalar>& bounds) {
  if (nx < 2 || nt < 2) throw ConfigError("evaluation_grid: need at least 2 nodes per dimension");
  bounds.validate();
  const VectorX<Scalar> xs = VectorX<Scalar>::LinSpaced(nx, bounds.x_min, bounds.x_max);
  const VectorX<Scalar> ts = VectorX<Scalar>::LinSpaced(nt, bounds.t_min, bounds.t_max);
  PointMatrix<Scalar> pts(2, nx * nt);
  for (Index it = 0; it < nt; ++it) {
    for (Index ix = 0; ix < nx; ++ix) {
      pts(0, it * nx + ix) = xs[ix];
      pts(1, it * nx + ix) = ts[it];
    }
  }
  return pts;
}

}  // namespace nlse
