#include "bankfair/bankruptcy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bankfair/errors.hpp"

namespace bankfair {
namespace {

constexpr double kThetaTolerance = 1e-10;
constexpr int kMaxBisections = 200;

double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Relative slack when comparing an estate against the claim total.
double slack(double scale) {
  return 1e-12 * std::max(1.0, scale);
}

}  // namespace

void BankruptcyInstance::validate() const {
  if (!std::isfinite(estate) || estate < 0.0) {
    throw DomainError(fmt::format("estate must be finite and >= 0, got {}", estate));
  }
  for (double c : claims) {
    if (!std::isfinite(c) || c < 0.0) {
      throw DomainError(fmt::format("claims must be finite and >= 0, got {}", c));
    }
  }
  const double total = sum(claims);
  if (estate > total + slack(total)) {
    throw InfeasibleError(fmt::format("estate {} exceeds total claims {}", estate, total));
  }
}

AllocationResult talmud(const BankruptcyInstance& instance) {
  instance.validate();
  const auto& d = instance.claims;
  const std::size_t n = d.size();
  const double total = sum(d);
  const double estate = std::min(instance.estate, total);
  AllocationResult result;
  result.awards.assign(n, 0.0);
  if (n == 0 || estate <= 0.0) return result;
  if (estate >= total) {
    result.awards = d;
    return result;
  }

  const bool low = estate <= total / 2.0;
  const double max_half = *std::max_element(d.begin(), d.end()) / 2.0;
  // Both branch maps are monotone in level over [0, max_half]: increasing for
  // the low branch, decreasing for the high one.
  auto award = [&](std::size_t i, double level) {
    return low ? std::min(d[i] / 2.0, level) : std::max(d[i] / 2.0, d[i] - level);
  };
  auto allocated = [&](double level) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += award(i, level);
    return s;
  };

  double lo = 0.0, hi = max_half;
  for (int it = 0; it < kMaxBisections && hi - lo > kThetaTolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool too_much = allocated(mid) > estate;
    // Low branch: allocation grows with level. High branch: it shrinks.
    if (too_much == low) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double level = 0.5 * (lo + hi);

  // Exact finish: agents whose award is governed by level (not pinned at
  // claim/2) share the residual equally, which restores the budget to
  // rounding precision without breaking equal treatment.
  std::vector<std::size_t> free_agents;
  double pinned = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool at_half = low ? d[i] / 2.0 <= level : d[i] / 2.0 >= d[i] - level;
    if (at_half) {
      result.awards[i] = d[i] / 2.0;
      pinned += result.awards[i];
    } else {
      free_agents.push_back(i);
    }
  }
  if (!free_agents.empty()) {
    const double share = (estate - pinned) / static_cast<double>(free_agents.size());
    // share = level (low) or d_i - share_i = level (high): solve level exactly.
    double exact_level;
    if (low) {
      exact_level = share;
    } else {
      double claim_sum = 0.0;
      for (auto i : free_agents) claim_sum += d[i];
      exact_level = (claim_sum - (estate - pinned)) / static_cast<double>(free_agents.size());
    }
    for (auto i : free_agents) {
      const double v = low ? exact_level : d[i] - exact_level;
      result.awards[i] = std::clamp(v, 0.0, d[i]);
    }
    result.level = exact_level;
  } else {
    result.level = level;
  }
  return result;
}

std::vector<double> update_remaining(std::span<const double> prev_remaining,
                                     std::span<const double> earned_last) {
  if (prev_remaining.size() != earned_last.size()) {
    throw ConfigError("update_remaining: size mismatch");
  }
  std::vector<double> out(prev_remaining.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    double prev = prev_remaining[p];
    double earned = earned_last[p];
    if (prev < 0.0 || earned < 0.0) {
      spdlog::warn("update_remaining: negative input for provider {} clamped to 0", p);
      prev = std::max(prev, 0.0);
      earned = std::max(earned, 0.0);
    }
    out[p] = std::max(prev - earned, 0.0);
  }
  return out;
}

std::vector<double> update_remaining_from_plan(std::span<const double> prev_remaining,
                                               std::span<const double> plan_last,
                                               std::span<const double> unearned_last) {
  if (prev_remaining.size() != plan_last.size() || plan_last.size() != unearned_last.size()) {
    throw ConfigError("update_remaining_from_plan: size mismatch");
  }
  std::vector<double> out(prev_remaining.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = std::max(prev_remaining[p] - plan_last[p] + unearned_last[p], 0.0);
  }
  return out;
}

std::vector<double> predict_demands(std::span<const double> forecast, double claim_rate,
                                    int list_size) {
  if (!(claim_rate > 0.0)) throw ConfigError("demand coefficient must be > 0");
  std::vector<double> claims(forecast.size());
  const double scale = claim_rate * list_size;
  for (std::size_t i = 0; i < claims.size(); ++i) claims[i] = scale * std::max(forecast[i], 0.0);
  return claims;
}

double demand_coefficient(double k, std::span<const double> min_exposure, int list_size,
                          double traffic_total) {
  if (min_exposure.empty()) throw ConfigError("no providers");
  if (traffic_total <= 0.0 || list_size < 1) {
    throw ConfigError("demand coefficient needs positive traffic and list size");
  }
  const double m_total = sum(min_exposure);
  const double claim_rate =
      k * m_total / (static_cast<double>(min_exposure.size()) * list_size * traffic_total);
  // A zero requirement leaves claim_rate at zero; any positive value gives the
  // same (all-zero) plans, so fall back to a unit coefficient.
  return claim_rate > 0.0 ? claim_rate : 1.0;
}

AllocationRule parse_rule(const std::string& name) {
  if (name == "talmud") return AllocationRule::kTalmud;
  if (name == "naive") return AllocationRule::kNaive;
  if (name == "prop") return AllocationRule::kProp;
  if (name == "none") return AllocationRule::kNone;
  throw ConfigError("unknown allocation rule '" + name + "'");
}

std::string rule_name(AllocationRule rule) {
  switch (rule) {
    case AllocationRule::kTalmud: return "talmud";
    case AllocationRule::kNaive: return "naive";
    case AllocationRule::kProp: return "prop";
    case AllocationRule::kNone: return "none";
  }
  return "none";
}

PlanResult plan_interval(AllocationRule rule, std::span<const double> remaining,
                         std::span<const double> claims, std::span<const double> forecast,
                         int interval) {
  const std::size_t num_providers = remaining.size();
  PlanResult out;
  out.plan.min_exposure.assign(num_providers, 0.0);
  if (rule == AllocationRule::kNone) return out;
  if (forecast.empty()) throw ConfigError("plan_interval: empty forecast horizon");

  switch (rule) {
    case AllocationRule::kTalmud: {
      if (claims.size() != forecast.size())
        throw ConfigError("plan_interval: claims/forecast mismatch");
      const double claim_total = sum(claims);
      int clamped = 0;
      for (std::size_t p = 0; p < num_providers; ++p) {
        AllocationTrace tr;
        tr.provider = static_cast<int>(p);
        tr.claim = claims[0];
        double estate = std::max(remaining[p], 0.0);
        if (estate > claim_total + slack(claim_total)) {
          if (claim_total <= 0.0) {
            throw InfeasibleError(
                fmt::format("provider {} still needs {} exposure at interval {} but every "
                            "remaining claim is zero",
                            p, estate, interval + 1),
                static_cast<int>(p), interval);
          }
          spdlog::debug("interval {}: provider {} estate {} exceeds claims {}; clamping",
                        interval + 1, p, estate, claim_total);
          estate = claim_total;
          ++clamped;
          tr.clamped = true;
        }
        tr.estate = estate;
        const AllocationResult r =
            talmud(BankruptcyInstance{std::vector<double>(claims.begin(), claims.end()), estate});
        tr.award = r.awards.front();
        tr.level = r.level;
        out.plan.min_exposure[p] = tr.award;
        out.trace.push_back(tr);
      }
      if (clamped > 0) {
        spdlog::warn("interval {}: {} provider estate(s) exceed the remaining claims {}; clamped",
                     interval + 1, clamped, claim_total);
      }
      break;
    }
    case AllocationRule::kNaive: {
      const double mean = sum(forecast) / static_cast<double>(forecast.size());
      const bool busy = forecast[0] >= mean;
      for (std::size_t p = 0; p < num_providers; ++p) {
        out.plan.min_exposure[p] = busy ? std::max(remaining[p], 0.0) / 2.0 : 0.0;
        out.trace.push_back({static_cast<int>(p), remaining[p], claims.empty() ? 0.0 : claims[0],
                             out.plan.min_exposure[p], mean, false});
      }
      break;
    }
    case AllocationRule::kProp: {
      const double total = sum(forecast);
      const double share = total > 0.0 ? forecast[0] / total : 0.0;
      for (std::size_t p = 0; p < num_providers; ++p) {
        out.plan.min_exposure[p] = share * std::max(remaining[p], 0.0);
        out.trace.push_back({static_cast<int>(p), remaining[p], claims.empty() ? 0.0 : claims[0],
                             out.plan.min_exposure[p], share, false});
      }
      break;
    }
    case AllocationRule::kNone: break;
  }
  return out;
}

}  // namespace bankfair
