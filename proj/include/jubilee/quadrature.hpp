// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace jubilee {

/// How expectations over type profiles are evaluated: tensor Gauss-Legendre
/// quadrature (two-creditor economies only) or seeded Monte Carlo sampling
/// (any creditor count).
struct QuadratureSpec {
  enum class Scheme { GaussLegendre, MonteCarlo };

  Scheme scheme = Scheme::GaussLegendre;
  int nodes = 64;                ///< nodes per axis (Gauss-Legendre)
  std::size_t samples = 100000;  ///< draws (Monte Carlo)
  std::uint64_t seed = 1;        ///< Monte Carlo stream seed

  static QuadratureSpec gauss_legendre(int nodes = 64) {
    QuadratureSpec q;
    q.scheme = Scheme::GaussLegendre;
    q.nodes = nodes;
    return q;
  }

  static QuadratureSpec monte_carlo(std::size_t samples, std::uint64_t seed) {
    QuadratureSpec q;
    q.scheme = Scheme::MonteCarlo;
    q.samples = samples;
    q.seed = seed;
    return q;
  }

  /// Resolution floor: coarse specs produce numbers too noisy for any of the
  /// documented tolerances, so they are rejected outright.
  void validate() const {
    if (scheme == Scheme::GaussLegendre) {
      if (nodes < 16) throw std::invalid_argument("quadrature: Gauss-Legendre needs at least 16 nodes");
    } else {
      if (samples < 10000) throw std::invalid_argument("quadrature: Monte Carlo needs at least 1e4 samples");
    }
  }
};

/// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration on
/// the Legendre three-term recurrence. Construction is O(n^2) with tiny
/// constants; node counts used here are <= a few hundred.
class GaussLegendre {
public:
  explicit GaussLegendre(int node_count) {
    if (node_count < 1) throw std::invalid_argument("GaussLegendre: node count must be positive");
    const int n = node_count;
    nodes_.resize(static_cast<std::size_t>(n));
    weights_.resize(static_cast<std::size_t>(n));
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < (n + 1) / 2; ++k) {
      // Tricomi initial guess, then Newton on P_n.
      double x = std::cos(pi * (static_cast<double>(k) + 0.75) / (static_cast<double>(n) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = x;
        for (int j = 2; j <= n; ++j) {
          const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / static_cast<double>(j);
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double step = p1 / dp;
        x -= step;
        if (std::abs(step) < 1e-15) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes_[static_cast<std::size_t>(k)] = -x;  // ascending order
      weights_[static_cast<std::size_t>(k)] = w;
      nodes_[static_cast<std::size_t>(n - 1 - k)] = x;
      weights_[static_cast<std::size_t>(n - 1 - k)] = w;
    }
  }

  /// Integrate f over [a, b]; degenerate or inverted intervals contribute 0.
  template <typename F>
  double integrate(double a, double b, F&& f) const {
    if (!(b > a)) return 0.0;
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      acc += weights_[k] * f(mid + half * nodes_[k]);
    }
    return acc * half;
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Uniform double in [0, 1) built from the top 53 bits of a 64-bit draw, so
/// seeded streams are identical across platforms and standard libraries.
inline double uniform_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Welford accumulator for Monte Carlo means and standard errors.
class RunningMoments {
public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const { return count_; }
  double mean() const { return mean_; }

  double variance() const {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }

  double std_error() const {
    return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }

private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Evenly spaced grid including both endpoints (points >= 2).
inline std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 2) throw std::invalid_argument("linspace: need at least two points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo + step * i;
  grid.back() = hi;
  return grid;
}

}  // namespace jubilee
