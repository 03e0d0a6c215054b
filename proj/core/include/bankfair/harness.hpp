#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bankfair/bankruptcy.hpp"
#include "bankfair/domain.hpp"
#include "bankfair/forecast.hpp"
#include "bankfair/metrics.hpp"
#include "bankfair/report.hpp"
#include "bankfair/reranker.hpp"

namespace bankfair {

struct DataSource {
  // Exactly one of csv_path / synth.
  std::optional<std::string> csv_path;
  std::optional<std::string> relevance_path;
  std::optional<std::string> items_path;
  CsvSchema schema;
  std::optional<SynthConfig> synth;
};

enum class RemainingUpdate {
  kEarned,       // [remaining - E]_+
  kPlanUnearned  // [remaining - plan + unearned]_+
};

struct RunConfig {
  DataSource data;
  AllocationRule rule = AllocationRule::kTalmud;
  ForecastSpec forecaster;

  // Requirement per provider: min_exposure_per_provider if set, else
  // min_exposure_fraction * K * total traffic / |P| if set, else
  // uniform_min_exposure. Multiplied by min_exposure_scale in every case.
  double uniform_min_exposure = 0.0;
  std::vector<double> min_exposure_per_provider;
  std::optional<double> min_exposure_fraction;
  double min_exposure_scale = 1.0;
  double min_accuracy = 0.95;

  RerankConfig rerank;
  std::optional<double> temperature;
  std::uint64_t seed = 7;
  // Std-dev of the Gaussian noise applied to relevance at each interval
  // boundary after the first (base-model retraining); 0 disables it.
  double drift_sigma = 0.0;
  bool claim_rate_from_realized = false;
  RemainingUpdate remaining_update = RemainingUpdate::kEarned;
  bool trace = false;

  void validate() const;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
// Relative paths in the JSON resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");

// Materialises the instance a run would use (after optional temperature resampling).
Instance build_instance(const RunConfig& cfg);

// Resolves the per-provider requirement vector for an instance.
std::vector<double> resolve_min_exposure(const RunConfig& cfg, const Instance& instance);

SimReport run(const RunConfig& cfg);
SimReport run(const RunConfig& cfg, const Instance& instance);

struct SweepGrid {
  std::vector<double> min_exposure_scale, demand_scale, small_provider_weight, step_size,
      temperature, min_accuracy;
};

struct SweepSpec {
  RunConfig base;
  SweepGrid grid;
  std::vector<std::uint64_t> seeds;

  void validate() const;
};

SweepSpec sweep_spec_from_json(const nlohmann::json& j, const std::string& base_dir = "");

struct SweepPoint {
  double min_exposure_scale = 1.0;
  double demand_scale = 1.5;
  double small_provider_weight = 0.5;
  std::optional<double> step_size;
  std::optional<double> temperature;
  double min_accuracy = 0.95;
};

struct SweepRow {
  int config_index = 0;
  std::uint64_t seed = 0;
  SweepPoint point;
  std::optional<SimReport> report;
  std::string error;
  bool pareto = false;
};

struct SweepSummary {
  int config_index = 0;
  SweepPoint point;
  MeanInterval ndcg, vio, esp;
  int failures = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

// Expands the grid (axes left empty keep the base value).
std::vector<SweepPoint> expand_grid(const SweepSpec& spec);
RunConfig apply_point(const RunConfig& base, const SweepPoint& point, std::uint64_t seed);

// Runs grid x seeds on `threads` workers; row order is grid-major, seed-minor
// regardless of scheduling. Failures are recorded per row.
SweepResult sweep(const SweepSpec& spec, unsigned threads = 0);

// Flags rows not dominated on (ESP up, NDCG up, Vio down).
void mark_pareto(std::vector<SweepRow>& rows);

std::string pareto_csv(const SweepResult& result);
std::string summary_csv(const SweepResult& result);
void write_sweep(const std::string& dir, const SweepResult& result);

}  // namespace bankfair
