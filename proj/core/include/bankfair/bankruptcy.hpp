#pragma once

#include <span>
#include <string>
#include <vector>

namespace bankfair {

// Estate to divide among agents with the given claims. Here the agents are
// the remaining intervals, the estate a provider's outstanding exposure
// requirement and the claims its predicted per-interval demand.
struct BankruptcyInstance {
  std::vector<double> claims;
  double estate = 0.0;

  void validate() const;
};

struct AllocationResult {
  std::vector<double> awards;
  double level = 0.0;  // equal-award level (low estate) or equal-loss level (high estate)
};

// Talmud rule. With C = sum(claims):
//   estate <= C/2: award_i = min(claim_i / 2, level)
//   estate >  C/2: award_i = max(claim_i / 2, claim_i - level)
// level is solved by bisection so that the awards sum to the estate.
// Throws InfeasibleError if estate exceeds C and DomainError on negative or
// non-finite input.
AllocationResult talmud(const BankruptcyInstance& instance);

// [prev - earned]_+ elementwise. Negative inputs are clamped to zero with a
// logged warning.
std::vector<double> update_remaining(std::span<const double> prev_remaining,
                                     std::span<const double> earned_last);

// Alternative bookkeeping that subtracts the interval plan and adds back the
// unearned part: [prev - plan + (plan - earned)]_+. Algebraically identical
// to update_remaining when the unearned balance is recorded unfloored.
std::vector<double> update_remaining_from_plan(std::span<const double> prev_remaining,
                                               std::span<const double> plan_last,
                                               std::span<const double> unearned_last);

// Claim vector claim_rate * K * forecast. Identical for every provider.
std::vector<double> predict_demands(std::span<const double> forecast, double claim_rate,
                                    int list_size);

// claim_rate = k * sum(m) / (|P| * K * sum(traffic)).
double demand_coefficient(double k, std::span<const double> min_exposure, int list_size,
                          double traffic_total);

enum class AllocationRule { kTalmud, kNaive, kProp, kNone };

AllocationRule parse_rule(const std::string& name);
std::string rule_name(AllocationRule rule);

struct IntervalPlan {
  std::vector<double> min_exposure;  // per provider, current interval
};

// One row of the allocation audit trail.
struct AllocationTrace {
  int provider = 0;
  double estate = 0.0;  // after clamping to the claim total
  double claim = 0.0;   // current interval's claim
  double award = 0.0;
  double level = 0.0;
  bool clamped = false;
};

struct PlanResult {
  IntervalPlan plan;
  std::vector<AllocationTrace> trace;
};

// Plans the current interval (first entry of `claims` and `forecast`).
// `claims` and `forecast` cover the remaining intervals n..N.
//   talmud: per provider, Talmud over the remaining intervals with the
//           estate clamped to the claim total; returns the first award.
//   naive:  remaining/2 when forecast[0] >= mean(forecast), else 0.
//   prop:   forecast[0] / sum(forecast) * remaining.
//   none:   all zero.
// `interval` is only used in diagnostics. Throws InfeasibleError when a
// provider still owes exposure but every claim is zero.
PlanResult plan_interval(AllocationRule rule, std::span<const double> remaining,
                         std::span<const double> claims, std::span<const double> forecast,
                         int interval = 0);

}  // namespace bankfair
