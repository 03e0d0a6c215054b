#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bankfair/errors.hpp"
#include "bankfair/harness.hpp"
#include "bankfair/verify/acceptance.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bankfair::IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw bankfair::ConfigError("'" + path + "': " + e.what());
  }
}

std::string parent_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

struct RunArgs {
  std::string config;
  std::string data;
  std::string synth;
  std::string relevance;
  std::string items;
  std::string rule;
  std::string forecaster;
  std::optional<double> min_exposure;
  std::optional<double> min_exposure_fraction;
  std::optional<double> min_accuracy;
  std::optional<int> list_size;
  std::optional<double> k;
  std::optional<double> small_provider_weight;
  std::string step_size;
  std::optional<double> interval_hours;
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::string dual_target;
  std::optional<double> drift;
  bool warm_start = false;
  bool realized_claims = false;
  bool trace = false;
  std::string out = "out";
};

bankfair::RunConfig build_run_config(const RunArgs& a) {
  bankfair::RunConfig cfg;
  if (!a.config.empty())
    cfg = bankfair::run_config_from_json(read_json(a.config), parent_dir(a.config));
  if (!a.data.empty()) {
    cfg.data.csv_path = a.data;
    cfg.data.synth.reset();
  }
  if (!a.synth.empty()) {
    cfg.data.synth = read_json(a.synth).get<bankfair::SynthConfig>();
    cfg.data.csv_path.reset();
  }
  if (!a.relevance.empty()) cfg.data.relevance_path = a.relevance;
  if (!a.items.empty()) cfg.data.items_path = a.items;
  if (!a.rule.empty()) cfg.rule = bankfair::parse_rule(a.rule);
  if (!a.forecaster.empty()) cfg.forecaster = bankfair::parse_forecast_spec(a.forecaster);
  if (a.min_exposure) {
    cfg.uniform_min_exposure = *a.min_exposure;
    cfg.min_exposure_fraction.reset();
    cfg.min_exposure_per_provider.clear();
  }
  if (a.min_exposure_fraction) cfg.min_exposure_fraction = *a.min_exposure_fraction;
  if (a.min_accuracy) cfg.min_accuracy = *a.min_accuracy;
  if (a.list_size) cfg.rerank.list_size = *a.list_size;
  if (a.k) cfg.rerank.demand_scale = *a.k;
  if (a.small_provider_weight) cfg.rerank.small_provider_weight = *a.small_provider_weight;
  if (!a.step_size.empty()) {
    if (a.step_size == "auto") {
      cfg.rerank.step_size.reset();
    } else {
      try {
        cfg.rerank.step_size = std::stod(a.step_size);
      } catch (const std::exception&) {
        throw bankfair::ConfigError("--eta expects a number or 'auto'");
      }
    }
  }
  if (a.interval_hours) {
    if (!(*a.interval_hours > 0.0)) throw bankfair::ConfigError("--interval-hours must be > 0");
    cfg.data.schema.interval_seconds = std::llround(*a.interval_hours * 3600.0);
  }
  if (a.temperature) cfg.temperature = *a.temperature;
  if (a.seed) cfg.seed = *a.seed;
  if (!a.dual_target.empty()) cfg.rerank.target = bankfair::parse_dual_target(a.dual_target);
  if (a.drift) cfg.drift_sigma = *a.drift;
  if (a.warm_start) cfg.rerank.warm_start = true;
  if (a.realized_claims) cfg.claim_rate_from_realized = true;
  if (a.trace) cfg.trace = true;
  return cfg;
}

int cmd_run(const RunArgs& args) {
  const bankfair::RunConfig cfg = build_run_config(args);
  const bankfair::SimReport report = bankfair::run(cfg);
  bankfair::write_report(args.out, report);
  std::cout << fmt::format("ndcg@{} {:.6f}  vio@{} {:.6f}  esp@{} {:.6f}\n", cfg.rerank.list_size,
                           report.ndcg_at_k, cfg.rerank.list_size, report.vio_at_k,
                           cfg.rerank.list_size, report.esp_at_k);
  return kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, unsigned threads) {
  const bankfair::SweepSpec spec =
      bankfair::sweep_spec_from_json(read_json(spec_path), parent_dir(spec_path));
  const bankfair::SweepResult result = bankfair::sweep(spec, threads);
  bankfair::write_sweep(out, result);
  int failures = 0;
  for (const auto& row : result.rows) failures += row.report ? 0 : 1;
  std::cout << fmt::format("{} runs, {} failed, results in {}\n", result.rows.size(), failures,
                           out);
  return kExitOk;
}

int cmd_verify(const std::string& only) {
  bankfair::verify::AcceptanceOptions options;
  if (!only.empty()) options.only = only;
  const auto results = bankfair::verify::run_acceptance(options);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << bankfair::verify::format_result(r) << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-exposure re-ranking simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log diagnostics to stderr");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Simulate one configuration");
  run->add_option("--config", run_args.config, "JSON run configuration (flags override it)");
  auto* data = run->add_option("--data", run_args.data, "Interaction CSV");
  auto* synth = run->add_option("--synth", run_args.synth, "Synthetic instance JSON");
  data->excludes(synth);
  run->add_option("--relevance", run_args.relevance, "Dense relevance matrix for --data");
  run->add_option("--items", run_args.items, "item_id,provider_id listing for --data");
  run->add_option("--rule", run_args.rule, "talmud | naive | prop | none");
  run->add_option("--forecaster", run_args.forecaster,
                  "last_value | moving_average:w=3 | seasonal:s=7 | oracle");
  auto* m_opt = run->add_option("--m", run_args.min_exposure, "Minimum exposure per provider");
  run->add_option("--m-fraction", run_args.min_exposure_fraction,
                  "Total requirement as a fraction of K x total traffic, split evenly")
      ->excludes(m_opt);
  run->add_option("--phi", run_args.min_accuracy, "Minimum per-user NDCG");
  run->add_option("--K", run_args.list_size, "List length");
  run->add_option("--k", run_args.k, "Demand scale k");
  run->add_option("--beta", run_args.small_provider_weight,
                  "Penalty mix between small-provider and uniform terms");
  run->add_option("--eta", run_args.step_size, "Dual step size or 'auto'");
  run->add_option("--interval-hours", run_args.interval_hours, "Interval length for --data");
  run->add_option("--tau", run_args.temperature, "Traffic resampling temperature in (0, 1]");
  run->add_option("--seed", run_args.seed, "Random seed");
  run->add_option("--dual-target", run_args.dual_target, "one_sided | per_request");
  run->add_option("--drift", run_args.drift, "Relevance noise added at every interval boundary");
  run->add_flag("--warm-start-dual", run_args.warm_start, "Carry dual prices across intervals");
  run->add_flag("--realized-claims", run_args.realized_claims,
                "Compute the demand coefficient from realised traffic");
  run->add_flag("--trace", run_args.trace, "Also write decisions.csv");
  run->add_option("--out", run_args.out, "Output directory");

  std::string spec_path;
  std::string sweep_out = "sweep_out";
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of configurations over several seeds");
  sweep->add_option("--spec", spec_path, "Sweep specification JSON")->required();
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  std::string only;
  auto* verify = app.add_subcommand("verify", "Run the built-in acceptance suite");
  verify->add_option("--only", only, "Run a single criterion by number");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  // Keep stdout for results; diagnostics go to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("bankfair"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(spec_path, sweep_out, threads);
    if (*verify) {
      // The benchmarks clamp estates routinely; only show that with -v.
      if (!verbose) spdlog::set_level(spdlog::level::err);
      return cmd_verify(only);
    }
  } catch (const bankfair::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
