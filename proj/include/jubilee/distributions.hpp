// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jubilee/quadrature.hpp"

namespace jubilee {

/// Closed interval a creditor type lives on.
struct SupportInterval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

/// A creditor-type distribution truncated (and renormalized) to a closed
/// support [lo, hi]. Four families are supported; every parameterization is
/// gated at construction on the regularity condition the mechanism needs:
/// the informational-rent term cdf/pdf must be strictly increasing across
/// the support. Densities are strictly positive on the closed support, so
/// the rent term is finite everywhere including the edges.
class TypeDistribution {
public:
  enum class Family {
    Uniform,
    TruncatedExponential,
    TruncatedPareto,
    TruncatedPositiveNormal,
  };

  static TypeDistribution uniform(double lo, double hi) {
    return TypeDistribution(Family::Uniform, lo, hi, 0.0, 0.0);
  }

  /// Exponential with the given rate, truncated to [lo, hi] within [0, inf).
  static TypeDistribution truncated_exponential(double rate, double lo, double hi) {
    return TypeDistribution(Family::TruncatedExponential, lo, hi, rate, 0.0);
  }

  /// Pareto with the given shape and scale, truncated to [lo, hi]; the
  /// untruncated support starts at the scale, so lo must not undercut it.
  static TypeDistribution truncated_pareto(double shape, double scale, double lo, double hi) {
    return TypeDistribution(Family::TruncatedPareto, lo, hi, shape, scale);
  }

  /// Half-normal (|N(0, sigma^2)|) truncated to [lo, hi] within [0, inf).
  static TypeDistribution truncated_positive_normal(double sigma, double lo, double hi) {
    return TypeDistribution(Family::TruncatedPositiveNormal, lo, hi, sigma, 0.0);
  }

  Family family() const { return family_; }
  const SupportInterval& support() const { return support_; }

  /// First family parameter: rate (exponential), shape (Pareto), sigma
  /// (positive normal); unused for uniform.
  double param1() const { return p1_; }
  /// Second family parameter: scale (Pareto); unused otherwise.
  double param2() const { return p2_; }

  /// Truncated cdf; 0 below the support and 1 above it, exact at the edges.
  double cdf(double theta) const {
    if (theta <= support_.lo) return 0.0;
    if (theta >= support_.hi) return 1.0;
    return (base_cdf(theta) - base_cdf_lo_) / normalizer_;
  }

  /// Truncated density; rejects evaluation outside the closed support.
  double pdf(double theta) const {
    if (theta < support_.lo || theta > support_.hi) {
      throw std::domain_error("TypeDistribution::pdf: point outside the support");
    }
    return base_pdf(theta) / normalizer_;
  }

  /// Informational-rent term cdf/pdf; zero at the low edge, finite at the
  /// high edge, strictly increasing in between (gated at construction).
  double inverse_hazard(double theta) const { return cdf(theta) / pdf(theta); }

  /// Inverse cdf on [0, 1].
  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) {
      throw std::invalid_argument("TypeDistribution::quantile: u must lie in [0, 1]");
    }
    switch (family_) {
      case Family::Uniform:
        return support_.lo + u * support_.width();
      case Family::TruncatedExponential: {
        // Interpolate between the survival values of the edges; stable for
        // steep rates because no cancellations occur.
        const double s = survival_lo_ * (1.0 - u) + survival_hi_ * u;
        return -std::log(s) / p1_;
      }
      case Family::TruncatedPareto: {
        const double s = survival_lo_ * (1.0 - u) + survival_hi_ * u;
        return p2_ * std::pow(s, -1.0 / p1_);
      }
      case Family::TruncatedPositiveNormal: {
        // No closed form; the cdf is strictly increasing, so bisect.
        double a = support_.lo;
        double b = support_.hi;
        for (int iter = 0; iter < 200 && (b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++iter) {
          const double mid = 0.5 * (a + b);
          (cdf(mid) < u ? a : b) = mid;
        }
        return 0.5 * (a + b);
      }
    }
    throw std::logic_error("TypeDistribution::quantile: unreachable");
  }

  /// Inverse-transform sampling from a seeded 64-bit engine; the stream is
  /// fully determined by the seed.
  std::vector<double> sample(std::uint64_t seed, std::size_t count) const {
    std::mt19937_64 gen(seed);
    std::vector<double> draws(count);
    for (auto& d : draws) d = quantile(uniform_unit(gen));
    return draws;
  }

  /// One draw from an existing engine (shared-stream sampling).
  double draw(std::mt19937_64& gen) const { return quantile(uniform_unit(gen)); }

  /// Mean of the truncated distribution (cached at construction).
  double mean() const { return mean_; }

private:
  TypeDistribution(Family family, double lo, double hi, double p1, double p2)
      : family_(family), support_{lo, hi}, p1_(p1), p2_(p2) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      throw std::invalid_argument("TypeDistribution: support must satisfy lo < hi and be finite");
    }
    switch (family_) {
      case Family::Uniform:
        break;
      case Family::TruncatedExponential:
        if (!(p1_ > 0.0)) throw std::invalid_argument("truncated exponential: rate must be positive");
        if (lo < 0.0) throw std::invalid_argument("truncated exponential: support must lie in [0, inf)");
        break;
      case Family::TruncatedPareto:
        if (!(p1_ > 0.0)) throw std::invalid_argument("truncated Pareto: shape must be positive");
        if (!(p2_ > 0.0)) throw std::invalid_argument("truncated Pareto: scale must be positive");
        if (lo < p2_) throw std::invalid_argument("truncated Pareto: lower support edge must not undercut the scale");
        break;
      case Family::TruncatedPositiveNormal:
        if (!(p1_ > 0.0)) throw std::invalid_argument("truncated positive normal: sigma must be positive");
        if (lo < 0.0) throw std::invalid_argument("truncated positive normal: support must lie in [0, inf)");
        break;
    }
    base_cdf_lo_ = base_cdf(lo);
    normalizer_ = base_cdf(hi) - base_cdf_lo_;
    if (!(normalizer_ > 0.0) || !std::isfinite(normalizer_)) {
      throw std::invalid_argument("TypeDistribution: truncation window has no probability mass");
    }
    survival_lo_ = base_survival(lo);
    survival_hi_ = base_survival(hi);
    if (!(base_pdf(lo) > 0.0) || !(base_pdf(hi) > 0.0)) {
      throw std::invalid_argument("TypeDistribution: density must be strictly positive on the closed support");
    }

    // Regularity gate: the rent term cdf/pdf must be strictly increasing.
    // Checked on a fixed 1000-point grid; increments must clear 1e-12.
    const auto grid = linspace(lo, hi, 1000);
    double prev = inverse_hazard(grid.front());
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const double cur = inverse_hazard(grid[k]);
      if (!(cur - prev > 1e-12)) {
        throw std::invalid_argument(
            "TypeDistribution: cdf/pdf must be strictly increasing across the support "
            "(regularity condition violated)");
      }
      prev = cur;
    }

    const GaussLegendre quad(64);
    mean_ = quad.integrate(lo, hi, [this](double x) { return x * pdf(x); });
  }

  // Untruncated cdf/pdf/survival of the base family.
  double base_cdf(double x) const {
    switch (family_) {
      case Family::Uniform:
        return x;
      case Family::TruncatedExponential:
        return 1.0 - std::exp(-p1_ * x);
      case Family::TruncatedPareto:
        return 1.0 - std::pow(p2_ / x, p1_);
      case Family::TruncatedPositiveNormal:
        return std::erf(x / (p1_ * 1.4142135623730951));
    }
    throw std::logic_error("TypeDistribution::base_cdf: unreachable");
  }

  double base_survival(double x) const {
    switch (family_) {
      case Family::Uniform:
        return 1.0 - x;
      case Family::TruncatedExponential:
        return std::exp(-p1_ * x);
      case Family::TruncatedPareto:
        return std::pow(p2_ / x, p1_);
      case Family::TruncatedPositiveNormal:
        return 1.0 - std::erf(x / (p1_ * 1.4142135623730951));
    }
    throw std::logic_error("TypeDistribution::base_survival: unreachable");
  }

  double base_pdf(double x) const {
    switch (family_) {
      case Family::Uniform:
        return 1.0;
      case Family::TruncatedExponential:
        return p1_ * std::exp(-p1_ * x);
      case Family::TruncatedPareto:
        return p1_ * std::pow(p2_, p1_) / std::pow(x, p1_ + 1.0);
      case Family::TruncatedPositiveNormal:
        return 0.7978845608028654 / p1_ * std::exp(-x * x / (2.0 * p1_ * p1_));
    }
    throw std::logic_error("TypeDistribution::base_pdf: unreachable");
  }

  Family family_;
  SupportInterval support_;
  double p1_ = 0.0;
  double p2_ = 0.0;
  double base_cdf_lo_ = 0.0;
  double normalizer_ = 1.0;
  double survival_lo_ = 1.0;
  double survival_hi_ = 0.0;
  double mean_ = 0.0;
};

}  // namespace jubilee
