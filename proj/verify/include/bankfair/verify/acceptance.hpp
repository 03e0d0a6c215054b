#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bankfair/harness.hpp"

namespace bankfair::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// "[PASS] 3 fairness toy (0.012 s): ..." on one line.
std::string format_result(const CriterionResult& r);

CriterionResult check_talmud_textbook();
CriterionResult check_talmud_properties(int instances = 10000, std::uint64_t seed = 1);
CriterionResult check_feasible_region_toy();
CriterionResult check_traffic_trend(int levels = 20, int seeds = 10);
CriterionResult check_conjugate_closed_form(int draws = 1000, std::uint64_t seed = 5);
CriterionResult check_select_list_enumeration(int instances = 1000, std::uint64_t seed = 6);
CriterionResult check_rule_dominance(int seeds = 5);
CriterionResult check_unconstrained_collapse();
CriterionResult check_determinism();

// The fluctuating-traffic benchmark behind check_rule_dominance: 20
// providers, 200 items, 14 intervals averaging 100 arrivals, temperature = 0.2,
// total requirement 0.3 of the exposure budget, min_accuracy = 0.95, K = 10.
RunConfig dominance_benchmark(AllocationRule rule, std::uint64_t seed);

// Two providers with four items each; provider 0 ranks below provider 1 for
// every user. `users` requests arrive in a single interval.
Instance fairness_toy(int users);

struct AcceptanceOptions {
  std::optional<std::string> only;  // criterion number
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

}  // namespace bankfair::verify
