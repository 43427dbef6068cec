// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "jubilee/distributions.hpp"

namespace jubilee {

/// Zero-mean, non-decreasing revision applied to every report a creditor
/// does not own: each counterparty's report theta_j enters creditor i's
/// liquidation value as e(theta_j). The linear form is e(x) = alpha (x - mu)
/// with mu the distribution mean, so the zero-mean property holds by
/// construction for every supported distribution.
struct RevisionSpec {
  enum class Kind { Zero, Linear };

  Kind kind = Kind::Zero;
  double alpha = 0.0;  ///< slope of the linear form; ignored for Kind::Zero

  static RevisionSpec zero() { return RevisionSpec{Kind::Zero, 0.0}; }
  static RevisionSpec linear(double alpha) { return RevisionSpec{Kind::Linear, alpha}; }

  /// Effective slope (0 for the zero revision).
  double slope() const { return kind == Kind::Linear ? alpha : 0.0; }
};

/// Economy description: total debt D split evenly across n creditors, the
/// continuation value A the market attaches to a settled debtor, an
/// informational investment amount, the common type distribution, and the
/// revision rule.
class MarketParams {
public:
  MarketParams(double total_debt, int creditor_count, double continuation_value,
               double investment, TypeDistribution dist, RevisionSpec revision)
      : total_debt_(total_debt),
        creditor_count_(creditor_count),
        continuation_value_(continuation_value),
        investment_(investment),
        dist_(std::move(dist)),
        revision_(revision) {
    if (!(total_debt_ > 0.0) || !std::isfinite(total_debt_)) {
      throw std::invalid_argument("MarketParams: total debt must be positive and finite");
    }
    if (creditor_count_ < 2) {
      throw std::invalid_argument("MarketParams: at least two creditors are required");
    }
    if (!(continuation_value_ > 0.0) || !std::isfinite(continuation_value_)) {
      throw std::invalid_argument("MarketParams: continuation value must be positive and finite");
    }
    if (!std::isfinite(investment_)) {
      throw std::invalid_argument("MarketParams: investment amount must be finite");
    }
    if (revision_.kind == RevisionSpec::Kind::Linear) {
      if (!std::isfinite(revision_.alpha) || revision_.alpha < 0.0) {
        throw std::invalid_argument("MarketParams: revision slope must be finite and non-negative");
      }
    }
    if (dist_.support().hi > total_debt_) {
      throw std::invalid_argument("MarketParams: type support must not exceed the total debt");
    }

    // The revision must integrate to zero against the type density. The
    // linear form uses the cached distribution mean, so this is a
    // self-consistency check on the quadrature rather than a new constraint.
    const GaussLegendre quad(64);
    const double revision_mean = quad.integrate(
        dist_.support().lo, dist_.support().hi,
        [this](double x) { return revision_value(x) * dist_.pdf(x); });
    if (std::abs(revision_mean) > 1e-9) {
      throw std::invalid_argument("MarketParams: revision must have zero mean under the type distribution");
    }

    // A creditor's liquidation value can exceed its debt share when the
    // counterparties' revisions are large; that is legal but worth flagging.
    const double max_revision =
        revision_.slope() * (dist_.support().hi - dist_.mean());
    const double max_liquidation =
        dist_.support().hi + static_cast<double>(creditor_count_ - 1) * max_revision;
    if (max_liquidation > per_creditor_debt()) {
      warnings_.push_back(
          "liquidation value can exceed the per-creditor debt share for high-type profiles");
    }
  }

  double total_debt() const { return total_debt_; }
  int creditor_count() const { return creditor_count_; }
  double continuation_value() const { return continuation_value_; }
  double investment() const { return investment_; }
  const TypeDistribution& dist() const { return dist_; }
  const RevisionSpec& revision() const { return revision_; }
  double per_creditor_debt() const { return total_debt_ / static_cast<double>(creditor_count_); }

  /// e(x): the revision a report x contributes to every other creditor's
  /// liquidation value. Zero-mean and non-decreasing.
  double revision_value(double x) const { return revision_.slope() * (x - dist_.mean()); }

  const std::vector<std::string>& warnings() const { return warnings_; }

private:
  double total_debt_;
  int creditor_count_;
  double continuation_value_;
  double investment_;
  TypeDistribution dist_;
  RevisionSpec revision_;
  std::vector<std::string> warnings_;
};

/// Reported (or true) type profile, one entry per creditor.
using TypeProfile = std::vector<double>;

/// Throws unless every entry lies inside the closed support and the count
/// matches the economy.
inline void validate_profile(const MarketParams& params, const TypeProfile& theta) {
  if (static_cast<int>(theta.size()) != params.creditor_count()) {
    throw std::invalid_argument("type profile size must match the creditor count");
  }
  const auto& s = params.dist().support();
  for (double v : theta) {
    if (!(v >= s.lo && v <= s.hi)) {
      throw std::invalid_argument("type profile entry outside the distribution support");
    }
  }
}

/// Creditor i's liquidation value l_i = theta_i + sum_{j != i} e(theta_j):
/// its own recovery plus every counterparty's revision.
inline double liquidation_value(const MarketParams& params, std::size_t i, const TypeProfile& theta) {
  validate_profile(params, theta);
  if (i >= theta.size()) throw std::invalid_argument("liquidation_value: creditor index out of range");
  double value = theta[i];
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (j != i) value += params.revision_value(theta[j]);
  }
  return value;
}

/// True when a liquidation value exceeds the per-creditor debt share; the
/// mechanism stays defined but the outcome carries a warning flag.
inline bool liquidation_exceeds_debt(const MarketParams& params, double liquidation) {
  return liquidation > params.per_creditor_debt();
}

/// Own-report side of the solvency split: the cost a report theta adds on
/// its own account, theta + cdf/pdf(theta) + (n-1) e(theta). Strictly
/// increasing in theta (rent term increasing, revision non-decreasing).
inline double own_virtual_cost(const MarketParams& params, double theta) {
  const auto& s = params.dist().support();
  if (!(theta >= s.lo && theta <= s.hi)) {
    throw std::invalid_argument("own_virtual_cost: report outside the distribution support");
  }
  return theta + params.dist().inverse_hazard(theta) +
         static_cast<double>(params.creditor_count() - 1) * params.revision_value(theta);
}

/// Counterparty side of the solvency split for creditor i: the cost carried
/// by the remaining reports, (n-1) sum_j e(theta_j) + sum_j [theta_j +
/// cdf/pdf(theta_j)] over j != i. Non-decreasing in every entry. The
/// identity own + others = sum over all creditors of [l_j + cdf/pdf] holds
/// exactly.
inline double others_virtual_cost(const MarketParams& params, std::size_t /*i*/,
                                  const TypeProfile& theta_others) {
  if (static_cast<int>(theta_others.size()) != params.creditor_count() - 1) {
    throw std::invalid_argument("others_virtual_cost: expected n-1 counterparty reports");
  }
  const auto& s = params.dist().support();
  double value = 0.0;
  for (double v : theta_others) {
    if (!(v >= s.lo && v <= s.hi)) {
      throw std::invalid_argument("others_virtual_cost: report outside the distribution support");
    }
    value += static_cast<double>(params.creditor_count() - 1) * params.revision_value(v);
    value += v + params.dist().inverse_hazard(v);
  }
  return value;
}

/// Investment (settlement) rule: the debtor continues exactly when the
/// continuation value covers the sum of liquidation values plus
/// informational rents. Ties count as solvent.
inline bool investment_rule(const MarketParams& params, const TypeProfile& theta) {
  validate_profile(params, theta);
  double cost = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    cost += liquidation_value(params, i, theta) + params.dist().inverse_hazard(theta[i]);
  }
  return params.continuation_value() >= cost;
}

/// Pivotal type: the highest report creditor i can make and still leave the
/// economy solvent, given the others' reports. Clamping encodes the
/// degenerate regimes: Low means every report leads to bankruptcy, High
/// means every report settles.
struct PivotalResult {
  enum class Clamp { None, Low, High };
  double value = 0.0;
  Clamp clamp = Clamp::None;
};

inline PivotalResult pivotal_type(const MarketParams& params, std::size_t i,
                                  const TypeProfile& theta_others) {
  const double budget = params.continuation_value() - others_virtual_cost(params, i, theta_others);
  const auto& s = params.dist().support();
  if (own_virtual_cost(params, s.lo) > budget) {
    return PivotalResult{s.lo, PivotalResult::Clamp::Low};
  }
  if (own_virtual_cost(params, s.hi) <= budget) {
    return PivotalResult{s.hi, PivotalResult::Clamp::High};
  }
  // own_virtual_cost is strictly increasing and continuous, and the root is
  // bracketed; bisect to 1e-12 in the type coordinate.
  double lo = s.lo;
  double hi = s.hi;
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-12; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (own_virtual_cost(params, mid) <= budget ? lo : hi) = mid;
  }
  return PivotalResult{0.5 * (lo + hi), PivotalResult::Clamp::None};
}

/// Settlement transfer paid to creditor i. Depends only on the others'
/// reports (pivotal type plus their revisions), which is what makes truthful
/// reporting safe: a creditor's own report moves the decision, never its
/// price.
inline double optimal_transfer(const MarketParams& params, std::size_t i,
                               const TypeProfile& theta_others) {
  const PivotalResult pivot = pivotal_type(params, i, theta_others);
  double revision_sum = 0.0;
  for (double v : theta_others) revision_sum += params.revision_value(v);
  return pivot.value + revision_sum;
}

/// Full settlement outcome for one reported profile.
enum class OutcomeFlag {
  TransferExceedsDebt,
  PivotalClampedLow,
  PivotalClampedHigh,
};

struct Outcome {
  bool solvent = false;
  std::vector<double> pivotal;      ///< pivotal type per creditor (empty if unknown)
  std::vector<double> transfers;    ///< zeros when bankrupt
  std::vector<double> forgiveness;  ///< per-creditor debt share minus transfer; zeros when bankrupt
  std::set<OutcomeFlag> flags;
};

inline TypeProfile profile_without(const TypeProfile& theta, std::size_t i) {
  TypeProfile others;
  others.reserve(theta.size() - 1);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (j != i) others.push_back(theta[j]);
  }
  return others;
}

/// Run the mechanism on a reported profile: decide solvency, and when the
/// debtor settles, price every creditor at its pivotal type plus revisions
/// and forgive the rest of its debt share.
inline Outcome settle(const MarketParams& params, const TypeProfile& theta) {
  validate_profile(params, theta);
  const std::size_t n = theta.size();
  Outcome out;
  out.solvent = investment_rule(params, theta);
  out.pivotal.resize(n, 0.0);
  out.transfers.assign(n, 0.0);
  out.forgiveness.assign(n, 0.0);

  const double debt_share = params.per_creditor_debt();
  for (std::size_t i = 0; i < n; ++i) {
    const TypeProfile others = profile_without(theta, i);
    const PivotalResult pivot = pivotal_type(params, i, others);
    out.pivotal[i] = pivot.value;
    if (pivot.clamp == PivotalResult::Clamp::Low) out.flags.insert(OutcomeFlag::PivotalClampedLow);
    if (pivot.clamp == PivotalResult::Clamp::High) out.flags.insert(OutcomeFlag::PivotalClampedHigh);
    if (out.solvent) {
      double revision_sum = 0.0;
      for (double v : others) revision_sum += params.revision_value(v);
      out.transfers[i] = pivot.value + revision_sum;
      out.forgiveness[i] = debt_share - out.transfers[i];
      if (out.transfers[i] > debt_share) out.flags.insert(OutcomeFlag::TransferExceedsDebt);
    }
  }
  return out;
}

/// Threshold formulation of the investment rule: solvent exactly when every
/// creditor reports at or below its pivotal type, with a clamped-low pivotal
/// meaning "never solvent". Used by tests to validate the primary rule.
inline bool solvent_by_pivotal(const MarketParams& params, const TypeProfile& theta) {
  validate_profile(params, theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const PivotalResult pivot = pivotal_type(params, i, profile_without(theta, i));
    if (pivot.clamp == PivotalResult::Clamp::Low) return false;
    if (!(theta[i] <= pivot.value)) return false;
  }
  return true;
}

}  // namespace jubilee
