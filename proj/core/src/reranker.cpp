#include "bankfair/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include <fmt/format.h>

#include "bankfair/errors.hpp"

namespace bankfair {

DualState DualState::Initial(std::vector<double> penalties, std::vector<double> caps,
                             double step_size, std::vector<double> weight) {
  if (penalties.size() != caps.size()) throw ConfigError("dual state: penalty/cap size mismatch");
  if (!(step_size > 0.0)) throw ConfigError("dual step size must be > 0");
  for (std::size_t p = 0; p < penalties.size(); ++p) {
    if (!std::isfinite(penalties[p]) || penalties[p] < 0.0)
      throw ConfigError("penalties must be finite and >= 0");
    if (!std::isfinite(caps[p]) || caps[p] < 0.0) throw ConfigError("caps must be finite and >= 0");
  }
  DualState d;
  d.prices.assign(penalties.size(), 0.0);
  d.penalties = std::move(penalties);
  d.caps = std::move(caps);
  d.weight = weight.empty() ? std::vector<double>(d.prices.size(), 1.0) : std::move(weight);
  if (d.weight.size() != d.prices.size()) throw ConfigError("dual state: weight size mismatch");
  for (double w : d.weight) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("projection weights must be > 0");
  }
  d.step_size = step_size;
  return d;
}

bool DualState::feasible() const {
  for (std::size_t p = 0; p < prices.size(); ++p) {
    if (!(prices[p] >= -penalties[p])) return false;
  }
  return true;
}

DualTarget parse_dual_target(const std::string& name) {
  if (name == "one_sided") return DualTarget::kOneSided;
  if (name == "per_request") return DualTarget::kPerRequest;
  throw ConfigError("unknown dual target '" + name + "'");
}

std::string dual_target_name(DualTarget t) {
  return t == DualTarget::kOneSided ? "one_sided" : "per_request";
}

void RerankConfig::validate() const {
  if (list_size < 1) throw ConfigError("list size K must be >= 1");
  if (demand_scale <= 0.0) throw ConfigError("demand scale k must be > 0");
  if (small_provider_weight < 0.0 || small_provider_weight > 1.0)
    throw ConfigError("beta must lie in [0, 1]");
  if (step_size && !(*step_size > 0.0)) throw ConfigError("eta must be > 0");
}

std::vector<double> compute_penalties(const Catalog& catalog, double small_provider_weight) {
  if (small_provider_weight < 0.0 || small_provider_weight > 1.0)
    throw ConfigError("beta must lie in [0, 1]");
  const auto inv = catalog.inventory();
  if (inv.empty()) throw ConfigError("catalog has no providers");
  const int largest = *std::max_element(inv.begin(), inv.end());
  std::vector<double> penalties(inv.size());
  for (std::size_t p = 0; p < inv.size(); ++p) {
    if (inv[p] <= 0) throw ConfigError(fmt::format("provider {} has zero inventory", p));
    penalties[p] = small_provider_weight * largest / static_cast<double>(inv[p]) +
                   (1.0 - small_provider_weight) / static_cast<double>(inv.size());
  }
  return penalties;
}

std::vector<double> compute_caps(const Catalog& catalog, int list_size, double expected_traffic) {
  const auto inv = catalog.inventory();
  std::vector<double> caps(inv.size());
  const double budget = list_size * std::max(expected_traffic, 0.0);
  for (std::size_t p = 0; p < inv.size(); ++p) {
    caps[p] = budget * inv[p] / static_cast<double>(catalog.num_items());
  }
  return caps;
}

double default_step_size(double expected_traffic) {
  const double r = std::max(expected_traffic, 1.0);
  return 1.0 / (r * std::sqrt(r));
}

namespace {

// Selects the K best indices under `better` (a strict total order).
template <typename Better>
std::vector<ItemId> best_k(std::size_t n, int k, Better better) {
  std::vector<ItemId> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(k);
  return idx;
}

RankedList make_list(std::vector<ItemId> items, std::span<const double> relevance) {
  RankedList list;
  list.scores.reserve(items.size());
  for (ItemId i : items) list.scores.push_back(relevance[i]);
  list.items = std::move(items);
  return list;
}

}  // namespace

RankedList top_k(std::span<const double> relevance, int list_size) {
  if (list_size < 1 || static_cast<std::size_t>(list_size) > relevance.size()) {
    throw ConfigError(fmt::format("cannot pick {} items from {}", list_size, relevance.size()));
  }
  auto items = best_k(relevance.size(), list_size, [&](ItemId a, ItemId b) {
    if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
    return a < b;
  });
  return make_list(std::move(items), relevance);
}

RankedList select_list(std::span<const double> relevance, const DualState& dual,
                       const Catalog& catalog, double expected_traffic, int list_size) {
  if (list_size < 1 || list_size > catalog.num_items()) {
    throw ConfigError(
        fmt::format("cannot pick {} items from a catalog of {}", list_size, catalog.num_items()));
  }
  if (!(expected_traffic > 0.0)) throw DomainError("select_list needs a positive traffic estimate");
  if (static_cast<int>(relevance.size()) != catalog.num_items()) {
    throw ConfigError("relevance vector length differs from catalog size");
  }
  std::vector<double> adjusted(relevance.size());
  for (std::size_t i = 0; i < adjusted.size(); ++i) {
    adjusted[i] =
        relevance[i] / expected_traffic - dual.prices[catalog.provider_of(static_cast<ItemId>(i))];
  }
  auto items = best_k(relevance.size(), list_size, [&](ItemId a, ItemId b) {
    if (adjusted[a] != adjusted[b]) return adjusted[a] > adjusted[b];
    if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
    return a < b;
  });
  return make_list(std::move(items), relevance);
}

ConjugateSolution conjugate_argmax(const DualState& dual, std::span<const double> plan) {
  if (plan.size() != dual.prices.size()) throw ConfigError("conjugate_argmax: size mismatch");
  ConjugateSolution out;
  out.target_exposure.resize(plan.size());
  for (std::size_t p = 0; p < plan.size(); ++p) {
    const double price = dual.prices[p];
    const double cap = dual.caps[p];
    // Objective slope is penalty + price below M and price above it.
    const double e = price >= 0.0 ? cap : std::min(plan[p], cap);
    out.target_exposure[p] = e;
    out.value += -dual.penalties[p] * std::max(plan[p] - e, 0.0) + price * e;
  }
  return out;
}

double conjugate_value(const DualState& dual, std::span<const double> plan) {
  double v = 0.0;
  for (std::size_t p = 0; p < plan.size(); ++p) {
    v += dual.prices[p] * plan[p] + (dual.caps[p] - plan[p]) * std::max(dual.prices[p], 0.0);
  }
  return v;
}

DualState dual_step(const DualState& dual, std::span<const double> x_exposure,
                    std::span<const double> target_exposure) {
  if (x_exposure.size() != dual.prices.size() || target_exposure.size() != dual.prices.size()) {
    throw ConfigError("dual_step: size mismatch");
  }
  DualState next = dual;
  for (std::size_t p = 0; p < next.prices.size(); ++p) {
    const double g = -x_exposure[p] + target_exposure[p];
    next.prices[p] =
        std::max(dual.prices[p] - dual.step_size * g / dual.weight[p], -dual.penalties[p]);
  }
  return next;
}

std::uint64_t hash_prices(std::span<const double> prices) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : prices) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

IntervalOutcome run_interval(std::span<const UserRequest> requests, const IntervalPlan& plan,
                             const RerankConfig& cfg, const Catalog& catalog,
                             double expected_traffic, std::span<const double> prior_cumulative,
                             std::span<const double> initial_prices) {
  cfg.validate();
  const int num_providers = catalog.num_providers();
  if (static_cast<int>(plan.min_exposure.size()) != num_providers) {
    throw ConfigError("interval plan size differs from provider count");
  }
  if (!(expected_traffic > 0.0))
    throw DomainError("run_interval needs a positive traffic estimate");
  if (!requests.empty()) {
    const int n = requests.front().interval;
    for (const auto& r : requests) {
      if (r.interval != n) throw ConfigError("run_interval: requests span several intervals");
    }
  }

  // A zero plan removes the shortfall term entirely, so such providers have
  // no room below a zero price.
  std::vector<double> penalties = compute_penalties(catalog, cfg.small_provider_weight);
  for (int p = 0; p < num_providers; ++p) {
    if (plan.min_exposure[p] <= 0.0) penalties[p] = 0.0;
  }
  std::vector<double> caps = compute_caps(catalog, cfg.list_size, expected_traffic);
  DualState dual = DualState::Initial(
      penalties, caps, cfg.step_size.value_or(default_step_size(expected_traffic)), cfg.weight);
  if (!initial_prices.empty()) {
    if (static_cast<int>(initial_prices.size()) != num_providers) {
      throw ConfigError("warm-start prices have the wrong size");
    }
    for (int p = 0; p < num_providers; ++p)
      dual.prices[p] = std::max(initial_prices[p], -penalties[p]);
  }

  // Per-request view of the interval problem: the plan is spread over the
  // expected arrivals.
  DualState per_request = dual;
  std::vector<double> plan_share(num_providers);
  for (int p = 0; p < num_providers; ++p) plan_share[p] = plan.min_exposure[p] / expected_traffic;
  if (cfg.target == DualTarget::kPerRequest) {
    for (double& g : per_request.caps) g /= expected_traffic;
  }

  IntervalOutcome out;
  out.ledger.earned.assign(num_providers, 0.0);
  out.ledger.unearned = plan.min_exposure;
  out.lists.reserve(requests.size());
  out.price_hashes.reserve(requests.size());

  for (const UserRequest& req : requests) {
    out.price_hashes.push_back(hash_prices(dual.prices));
    RankedList list = select_list(req.scores(), dual, catalog, expected_traffic, cfg.list_size);
    const std::vector<double> exposure = catalog.exposure_of(list.items);
    for (int p = 0; p < num_providers; ++p) {
      out.ledger.earned[p] += exposure[p];
      out.ledger.unearned[p] -= exposure[p];
    }
    std::vector<double> target_exposure;
    if (cfg.target == DualTarget::kOneSided) {
      // Prices stay <= 0 here. At a zero price the objective is flat on [M, cap];
      // taking the lower end keeps a satisfied provider at rest instead of
      // chasing its cap.
      target_exposure.resize(num_providers);
      for (int p = 0; p < num_providers; ++p) target_exposure[p] = std::min(plan_share[p], caps[p]);
    } else {
      per_request.prices = dual.prices;
      target_exposure = conjugate_argmax(per_request, plan_share).target_exposure;
    }
    dual = dual_step(dual, exposure, target_exposure);
    if (cfg.target == DualTarget::kOneSided) {
      for (double& price : dual.prices) price = std::min(price, 0.0);
    }
    out.lists.push_back(std::move(list));
  }

  out.ledger.cumulative = out.ledger.earned;
  if (!prior_cumulative.empty()) {
    if (static_cast<int>(prior_cumulative.size()) != num_providers) {
      throw ConfigError("prior cumulative exposure has the wrong size");
    }
    for (int p = 0; p < num_providers; ++p) out.ledger.cumulative[p] += prior_cumulative[p];
  }
  out.final_dual = std::move(dual);
  return out;
}

}  // namespace bankfair
