#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bankfair {

struct IntervalStats {
  int interval = 0;          // 1-based
  std::int64_t traffic = 0;  // realised arrivals
  double forecast = 0.0;     // predicted arrivals used for this interval
  double accuracy = 1.0;     // a(n): mean NDCG of the interval's users (1 if none)
  double vio = 0.0;          // share of the interval's users below min_accuracy
  double esp_partial = 0.0;  // ESP on cumulative exposure up to this interval
  double plan_total = 0.0;   // sum of the interval's minimum-exposure targets
  double feasible_ratio = 1.0;
};

struct AllocationRow {
  int interval = 0;  // 1-based
  int provider = 0;
  double estate = 0.0;
  double claim = 0.0;
  double award = 0.0;
  double level = 0.0;
};

struct DecisionRow {
  int interval = 0;  // 1-based
  int t = 0;
  std::string user_id;
  std::vector<std::string> items;
  std::uint64_t price_hash = 0;
};

struct SimReport {
  double ndcg_at_k = 1.0;
  double vio_at_k = 0.0;
  double esp_at_k = 1.0;
  double claim_rate = 0.0;
  std::vector<IntervalStats> intervals;
  std::vector<double> per_interval_accuracy;
  std::vector<double> min_exposure;
  std::vector<double> cumulative_exposure;
  // earned[n][p]; kept for conservation checks, not serialised.
  std::vector<std::vector<double>> earned_by_interval;
  std::vector<double> per_user_ndcg;
  std::vector<AllocationRow> allocations;
  std::vector<DecisionRow> decisions;
  nlohmann::ordered_json config_echo;
};

// Stable key order; byte-identical for identical reports.
nlohmann::ordered_json report_to_json(const SimReport& report);

std::string intervals_csv(const SimReport& report);
std::string allocations_csv(const SimReport& report);
std::string decisions_csv(const SimReport& report);

// report.json, intervals.csv, allocations.csv and (when traced) decisions.csv.
void write_report(const std::string& dir, const SimReport& report);

}  // namespace bankfair
