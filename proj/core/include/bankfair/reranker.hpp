#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bankfair/bankruptcy.hpp"
#include "bankfair/domain.hpp"

namespace bankfair {

// Online dual state for one interval. Feasible region: prices >= -penalties.
struct DualState {
  std::vector<double> prices;     // per-provider price on exposure
  std::vector<double> penalties;  // shortfall penalty, bounds prices from below
  std::vector<double> caps;       // exposure cap
  std::vector<double> weight;     // projection norm weights, > 0
  double step_size = 0.1;

  static DualState Initial(std::vector<double> penalties, std::vector<double> caps,
                           double step_size, std::vector<double> weight = {});
  int num_providers() const { return static_cast<int>(prices.size()); }
  bool feasible() const;
};

// Exposure bookkeeping for one interval.
struct ExposureLedger {
  std::vector<double> earned;      // this interval
  std::vector<double> unearned;    // plan - earned, not floored
  std::vector<double> cumulative;  // all intervals so far, this one included
};

// How the per-request auxiliary target is formed from the interval plan.
enum class DualTarget {
  // Target is the plan share M/r per request and prices stay in
  // [-penalty, 0]: minimum-exposure constraints only ever raise a provider.
  // At a zero price every E in [M, cap] is optimal and the target is M.
  kOneSided,
  // Both plan and cap divided by r: the plain stochastic subgradient of the
  // relaxed dual, which also pushes providers above their cap back down.
  kPerRequest,
};

DualTarget parse_dual_target(const std::string& name);
std::string dual_target_name(DualTarget t);

struct RerankConfig {
  int list_size = 10;                  // K
  double demand_scale = 1.5;           // claims cover demand_scale times the requirement
  double small_provider_weight = 0.5;  // share of the penalty driven by inventory size
  std::optional<double> step_size;     // unset: default_step_size(expected traffic)
  std::vector<double> weight;          // empty: all ones
  bool warm_start = false;             // carry prices across intervals
  DualTarget target = DualTarget::kOneSided;

  void validate() const;
};

// penalty_p = w * max|I| / |I_p| + (1 - w) / |P| with w = small_provider_weight.
std::vector<double> compute_penalties(const Catalog& catalog, double small_provider_weight);

// cap_p = K * expected_traffic * |I_p| / |I|.
std::vector<double> compute_caps(const Catalog& catalog, int list_size, double expected_traffic);

// Step size used when none is configured: 1 / (r sqrt(r)) for expected
// traffic r, i.e. the usual 1/sqrt(T) schedule expressed in the
// relevance / r units that prices live in.
double default_step_size(double expected_traffic);

// Top-K by relevance with the library-wide tie-breaking (higher score, then
// lower item id).
RankedList top_k(std::span<const double> relevance, int list_size);

// K items maximising relevance / expected_traffic - prices[provider]; ties
// broken by higher raw relevance, then lower item id.
RankedList select_list(std::span<const double> relevance, const DualState& dual,
                       const Catalog& catalog, double expected_traffic, int list_size);

struct ConjugateSolution {
  std::vector<double> target_exposure;
  double value = 0.0;  // optimal objective
};

// Per provider, maximiser of -penalty [M - E]_+ + price E over 0 <= E <= cap:
// cap when price >= 0, min(M, cap) when -penalty <= price < 0.
ConjugateSolution conjugate_argmax(const DualState& dual, std::span<const double> plan);

// Closed form sum of price M + (cap - M) max(price, 0); valid when M <= cap.
double conjugate_value(const DualState& dual, std::span<const double> plan);

// Weighted proximal subgradient step projected onto prices >= -penalties:
//   g = target_exposure - x_exposure,
//   price' = max(price - step_size g / weight, -penalty).
DualState dual_step(const DualState& dual, std::span<const double> x_exposure,
                    std::span<const double> target_exposure);

// FNV-1a over the bytes of prices, for replay traces.
std::uint64_t hash_prices(std::span<const double> prices);

struct IntervalOutcome {
  std::vector<RankedList> lists;
  ExposureLedger ledger;
  DualState final_dual;
  std::vector<std::uint64_t> price_hashes;  // prices before each request
};

// Serves one interval's requests in arrival order. Prices start at zero
// unless `initial_prices` is given (warm start).
IntervalOutcome run_interval(std::span<const UserRequest> requests, const IntervalPlan& plan,
                             const RerankConfig& cfg, const Catalog& catalog,
                             double expected_traffic, std::span<const double> prior_cumulative = {},
                             std::span<const double> initial_prices = {});

}  // namespace bankfair
