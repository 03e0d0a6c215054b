#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "bankfair/errors.hpp"
#include "bankfair/harness.hpp"
#include "bankfair/verify/acceptance.hpp"

namespace bankfair {
namespace {

namespace fs = std::filesystem;

RunConfig small_config(AllocationRule rule = AllocationRule::kTalmud, std::uint64_t seed = 1) {
  SynthConfig synth;
  synth.num_items = 40;
  synth.num_providers = 5;
  synth.horizon = 5;
  synth.mean_traffic = 25;
  synth.relevance.kind = RelevanceKind::kPopularity;
  RunConfig cfg;
  cfg.data.synth = synth;
  cfg.rule = rule;
  cfg.min_exposure_fraction = 0.2;
  cfg.rerank.list_size = 5;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(RunConfig, RequiresExactlyOneSource) {
  RunConfig cfg;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.data.csv_path = "x.csv";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RunConfig, RejectsOutOfRangeValues) {
  RunConfig cfg = small_config();
  cfg.min_accuracy = 1.2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.temperature = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = small_config();
  cfg.uniform_min_exposure = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig cfg = small_config(AllocationRule::kProp, 9);
  cfg.rerank.step_size = 0.01;
  cfg.temperature = 0.5;
  cfg.trace = true;
  cfg.forecaster = parse_forecast_spec("seasonal:s=7");
  const auto j = run_config_to_json(cfg);
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(run_config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.rule, AllocationRule::kProp);
  EXPECT_EQ(*back.rerank.step_size, 0.01);
}

TEST(RunConfig, UnknownValuesAreConfigErrors) {
  auto j = nlohmann::json::parse(run_config_to_json(small_config()).dump());
  j["rule"] = "lottery";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
}

TEST(MinExposure, ResolutionOrder) {
  RunConfig cfg = small_config();
  const Instance inst = build_instance(cfg);
  const double total = static_cast<double>(inst.traffic.total());
  EXPECT_NEAR(resolve_min_exposure(cfg, inst)[0], 0.2 * 5 * total / 5, 1e-9);
  cfg.min_exposure_scale = 2.0;
  EXPECT_NEAR(resolve_min_exposure(cfg, inst)[0], 2 * 0.2 * 5 * total / 5, 1e-9);
  cfg.min_exposure_per_provider = {1, 2, 3, 4, 5};
  EXPECT_EQ(resolve_min_exposure(cfg, inst), (std::vector<double>{2, 4, 6, 8, 10}));
  cfg.min_exposure_per_provider = {1};
  EXPECT_THROW(resolve_min_exposure(cfg, inst), ConfigError);
}

TEST(Run, NoneRuleIsUnconstrained) {
  RunConfig cfg = small_config(AllocationRule::kNone);
  const SimReport rep = run(cfg);
  EXPECT_EQ(rep.ndcg_at_k, 1.0);
  EXPECT_EQ(rep.vio_at_k, 0.0);
  for (double v : rep.per_user_ndcg) EXPECT_EQ(v, 1.0);
  // ESP reflects whoever reached m without help.
  double met = 0;
  for (std::size_t p = 0; p < rep.min_exposure.size(); ++p) {
    met += rep.cumulative_exposure[p] >= rep.min_exposure[p];
  }
  EXPECT_EQ(rep.esp_at_k, met / rep.min_exposure.size());
}

TEST(Run, ToyReachesFullEsp) {
  RunConfig cfg;
  cfg.data.synth = SynthConfig{};
  cfg.forecaster = parse_forecast_spec("oracle");
  cfg.min_exposure_per_provider = {4, 0};
  cfg.rerank.list_size = 5;
  cfg.rerank.demand_scale = 2.0;
  const SimReport rep = run(cfg, verify::fairness_toy(3));
  EXPECT_EQ(rep.esp_at_k, 1.0);
  EXPECT_GE(rep.cumulative_exposure[0], 4.0);
}

TEST(Run, ExposureIsConserved) {
  const RunConfig cfg = small_config();
  const Instance inst = build_instance(cfg);
  const SimReport rep = run(cfg, inst);
  ASSERT_EQ(rep.intervals.size(), static_cast<std::size_t>(inst.traffic.horizon()));
  for (int n = 0; n < inst.traffic.horizon(); ++n) {
    const auto& earned = rep.earned_by_interval[n];
    EXPECT_EQ(std::accumulate(earned.begin(), earned.end(), 0.0),
              static_cast<double>(inst.traffic.counts[n] * cfg.rerank.list_size));
    EXPECT_EQ(rep.intervals[n].traffic, inst.traffic.counts[n]);
  }
  const double total =
      std::accumulate(rep.cumulative_exposure.begin(), rep.cumulative_exposure.end(), 0.0);
  EXPECT_EQ(total, static_cast<double>(inst.traffic.total() * cfg.rerank.list_size));
  EXPECT_EQ(rep.per_user_ndcg.size(), inst.requests.size());
}

TEST(Run, AllocationRowsSumToThePlan) {
  const SimReport rep = run(small_config());
  for (const auto& stats : rep.intervals) {
    double awarded = 0.0;
    for (const auto& row : rep.allocations) {
      if (row.interval == stats.interval) awarded += row.award;
    }
    EXPECT_NEAR(awarded, stats.plan_total, 1e-9);
  }
}

TEST(Run, TraceRecordsEveryDecision) {
  RunConfig cfg = small_config();
  cfg.trace = true;
  const SimReport rep = run(cfg);
  EXPECT_EQ(rep.decisions.size(), rep.per_user_ndcg.size());
  EXPECT_EQ(rep.decisions.front().items.size(), 5u);
}

TEST(Run, DeterministicJson) {
  RunConfig cfg = small_config();
  cfg.temperature = 0.3;
  cfg.drift_sigma = 0.05;
  EXPECT_EQ(report_to_json(run(cfg)).dump(), report_to_json(run(cfg)).dump());
}

TEST(Run, EchoesTheConfig) {
  const RunConfig cfg = small_config(AllocationRule::kNaive);
  const auto j = report_to_json(run(cfg));
  EXPECT_EQ(j.at("config").at("rule"), "naive");
  EXPECT_TRUE(j.contains("ndcg_at_k"));
}

TEST(Run, OutstandingRequirementWithoutTrafficIsInfeasible) {
  RunConfig cfg = small_config();
  cfg.data.synth->traffic = {20, 0, 0};
  cfg.data.synth->horizon = 3;
  cfg.forecaster = parse_forecast_spec("last_value");
  cfg.min_exposure_fraction.reset();
  cfg.uniform_min_exposure = 1000;
  EXPECT_THROW(run(cfg), InfeasibleError);
}

TEST(Run, TemperatureResamplingKeepsTheTotal) {
  RunConfig cfg = small_config();
  const auto base_total = build_instance(cfg).traffic.total();
  cfg.temperature = 0.1;
  EXPECT_EQ(build_instance(cfg).traffic.total(), base_total);
}

TEST(Run, CsvSource) {
  const fs::path dir = fs::temp_directory_path() / "bankfair_harness_csv";
  fs::remove_all(dir);
  const RunConfig synth_cfg = small_config();
  const Instance inst = build_instance(synth_cfg);
  write_interactions(dir.string(), inst);

  RunConfig cfg = synth_cfg;
  cfg.data.synth.reset();
  cfg.data.csv_path = (dir / "interactions.csv").string();
  cfg.data.relevance_path = (dir / "relevance.bin").string();
  cfg.data.items_path = (dir / "items.csv").string();
  cfg.forecaster = parse_forecast_spec("moving_average:w=3,prior=25");
  RunConfig same = synth_cfg;
  same.forecaster = cfg.forecaster;
  // Same instance through either source gives the same metrics.
  const SimReport from_csv = run(cfg);
  const SimReport from_synth = run(same, inst);
  EXPECT_EQ(from_csv.ndcg_at_k, from_synth.ndcg_at_k);
  EXPECT_EQ(from_csv.cumulative_exposure, from_synth.cumulative_exposure);
  fs::remove_all(dir);
}

TEST(Run, EmptyCsvIsAConfigError) {
  const fs::path dir = fs::temp_directory_path() / "bankfair_harness_empty";
  fs::create_directories(dir);
  std::ofstream(dir / "log.csv") << "user_id,item_id,provider_id,timestamp,score\n";
  RunConfig cfg;
  cfg.data.csv_path = (dir / "log.csv").string();
  EXPECT_THROW(run(cfg), ConfigError);
  fs::remove_all(dir);
}

TEST(WriteReport, ProducesAllFiles) {
  const fs::path dir = fs::temp_directory_path() / "bankfair_write_report";
  fs::remove_all(dir);
  RunConfig cfg = small_config();
  cfg.trace = true;
  write_report(dir.string(), run(cfg));
  for (const char* f : {"report.json", "intervals.csv", "allocations.csv", "decisions.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j.at("intervals").size(), 5u);
  const std::string intervals = slurp(dir / "intervals.csv");
  EXPECT_EQ(std::count(intervals.begin(), intervals.end(), '\n'), 6);
  fs::remove_all(dir);
}

SweepSpec small_sweep() {
  SweepSpec spec;
  spec.base = small_config();
  spec.grid.demand_scale = {1.0, 2.0};
  spec.grid.small_provider_weight = {0.0, 1.0};
  spec.seeds = {1, 2, 3, 4, 5};
  return spec;
}

TEST(Sweep, GridExpansionAndRowOrder) {
  const SweepSpec spec = small_sweep();
  EXPECT_EQ(expand_grid(spec).size(), 4u);
  const SweepResult result = sweep(spec, 2);
  ASSERT_EQ(result.rows.size(), 20u);
  EXPECT_EQ(result.rows[0].config_index, 0);
  EXPECT_EQ(result.rows[4].seed, 5u);
  EXPECT_EQ(result.rows[5].config_index, 1);
  ASSERT_EQ(result.summaries.size(), 4u);
  for (const auto& s : result.summaries) {
    EXPECT_EQ(s.ndcg.samples, 5);
    EXPECT_GT(s.ndcg.half_width, 0.0);
  }
}

TEST(Sweep, SingletonGridMatchesRun) {
  SweepSpec spec;
  spec.base = small_config();
  spec.seeds = {spec.base.seed};
  const SweepResult result = sweep(spec, 1);
  ASSERT_EQ(result.rows.size(), 1u);
  EXPECT_EQ(report_to_json(*result.rows[0].report).dump(), report_to_json(run(spec.base)).dump());
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const SweepSpec spec = small_sweep();
  EXPECT_EQ(pareto_csv(sweep(spec, 1)), pareto_csv(sweep(spec, 4)));
  EXPECT_EQ(summary_csv(sweep(spec, 1)), summary_csv(sweep(spec, 3)));
}

TEST(Sweep, DuplicateSeedsRejected) {
  SweepSpec spec = small_sweep();
  spec.seeds = {1, 1};
  EXPECT_THROW(sweep(spec, 1), ConfigError);
}

TEST(Sweep, FailuresAreRecordedPerRow) {
  SweepSpec spec;
  spec.base = small_config();
  spec.base.data.synth->traffic = {20, 0, 0};
  spec.base.data.synth->horizon = 3;
  spec.base.forecaster = parse_forecast_spec("last_value");
  spec.base.min_exposure_fraction.reset();
  spec.base.uniform_min_exposure = 1000;
  spec.seeds = {1, 2};
  const SweepResult result = sweep(spec, 1);
  for (const auto& row : result.rows) {
    EXPECT_FALSE(row.report.has_value());
    EXPECT_FALSE(row.error.empty());
  }
  EXPECT_EQ(result.summaries[0].failures, 2);
}

SweepRow row_with(double ndcg, double vio, double esp) {
  SweepRow r;
  SimReport rep;
  rep.ndcg_at_k = ndcg;
  rep.vio_at_k = vio;
  rep.esp_at_k = esp;
  r.report = rep;
  return r;
}

TEST(Pareto, DominatedRowIsFlaggedFalse) {
  std::vector<SweepRow> rows{row_with(0.9, 0.1, 1.0), row_with(0.8, 0.2, 0.9),
                             row_with(0.95, 0.3, 0.8), SweepRow{}};
  mark_pareto(rows);
  EXPECT_TRUE(rows[0].pareto);
  EXPECT_FALSE(rows[1].pareto);
  EXPECT_TRUE(rows[2].pareto);
  EXPECT_FALSE(rows[3].pareto);
}

TEST(Pareto, EqualRowsAreBothKept) {
  std::vector<SweepRow> rows{row_with(0.9, 0.1, 1.0), row_with(0.9, 0.1, 1.0)};
  mark_pareto(rows);
  EXPECT_TRUE(rows[0].pareto);
  EXPECT_TRUE(rows[1].pareto);
}

TEST(Sweep, SpecFromJson) {
  nlohmann::json j;
  j["base"] = nlohmann::json::parse(run_config_to_json(small_config()).dump());
  j["grid"] = {{"k", {1.0, 1.5}}, {"tau", {0.2}}};
  j["seeds"] = {3, 4};
  const SweepSpec spec = sweep_spec_from_json(j);
  EXPECT_EQ(spec.grid.demand_scale, (std::vector<double>{1.0, 1.5}));
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(expand_grid(spec).size(), 2u);
}

}  // namespace
}  // namespace bankfair
