#include "bankfair/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bankfair/errors.hpp"
#include "bankfair/random.hpp"

namespace bankfair {
namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

SynthConfig load_synth(const nlohmann::json& j, const std::string& base_dir) {
  if (j.is_string()) {
    const std::string path = resolve(j.get<std::string>(), base_dir);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synth config '" + path + "'");
    nlohmann::json inner;
    try {
      in >> inner;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("synth config '" + path + "': " + e.what());
    }
    return inner.get<SynthConfig>();
  }
  return j.get<SynthConfig>();
}

// Relevance after a base-model update: clamp(s + eps, 0, 1).
std::vector<UserRequest> perturb(std::span<const UserRequest> requests, double sigma,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<UserRequest> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    auto scores = std::make_shared<std::vector<double>>(req.scores().begin(), req.scores().end());
    for (double& s : *scores) s = std::clamp(s + sigma * rng.normal(), 0.0, 1.0);
    out.push_back(UserRequest{req.user_id, req.interval, req.arrival_seq, std::move(scores)});
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  if (data.csv_path.has_value() == data.synth.has_value()) {
    throw ConfigError("run config needs exactly one data source (csv or synth)");
  }
  if (data.synth) data.synth->validate();
  if (data.schema.interval_seconds <= 0) throw ConfigError("interval length must be > 0");
  if (uniform_min_exposure < 0.0 || min_exposure_scale < 0.0)
    throw ConfigError("minimum exposure must be >= 0");
  if (min_exposure_fraction && (*min_exposure_fraction < 0.0)) {
    throw ConfigError("minimum-exposure budget fraction must be >= 0");
  }
  if (min_accuracy < 0.0 || min_accuracy > 1.0) throw ConfigError("phi must lie in [0, 1]");
  if (temperature && !(*temperature > 0.0 && *temperature <= 1.0))
    throw DomainError("tau must lie in (0, 1]");
  if (drift_sigma < 0.0) throw ConfigError("drift sigma must be >= 0");
  rerank.validate();
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json data;
  if (cfg.data.csv_path) {
    data["csv"] = *cfg.data.csv_path;
    if (cfg.data.relevance_path) data["relevance"] = *cfg.data.relevance_path;
    if (cfg.data.items_path) data["items"] = *cfg.data.items_path;
    data["interval_seconds"] = cfg.data.schema.interval_seconds;
    data["origin"] = cfg.data.schema.origin;
  }
  if (cfg.data.synth) data["synth"] = nlohmann::ordered_json(nlohmann::json(*cfg.data.synth));
  j["data"] = std::move(data);
  j["rule"] = rule_name(cfg.rule);
  j["forecaster"] = forecast_spec_string(cfg.forecaster);
  j["m"] = cfg.uniform_min_exposure;
  j["m_per_provider"] = cfg.min_exposure_per_provider;
  j["m_budget_fraction"] = cfg.min_exposure_fraction
                               ? nlohmann::ordered_json(*cfg.min_exposure_fraction)
                               : nlohmann::ordered_json(nullptr);
  j["m_scale"] = cfg.min_exposure_scale;
  j["phi"] = cfg.min_accuracy;
  j["K"] = cfg.rerank.list_size;
  j["k"] = cfg.rerank.demand_scale;
  j["beta"] = cfg.rerank.small_provider_weight;
  j["eta"] = cfg.rerank.step_size ? nlohmann::ordered_json(*cfg.rerank.step_size)
                                  : nlohmann::ordered_json("auto");
  j["weight"] = cfg.rerank.weight;
  j["warm_start_dual"] = cfg.rerank.warm_start;
  j["dual_target"] = dual_target_name(cfg.rerank.target);
  j["tau"] =
      cfg.temperature ? nlohmann::ordered_json(*cfg.temperature) : nlohmann::ordered_json(nullptr);
  j["seed"] = cfg.seed;
  j["drift_sigma"] = cfg.drift_sigma;
  j["claim_rate_from_realized"] = cfg.claim_rate_from_realized;
  j["remaining_update"] = cfg.remaining_update == RemainingUpdate::kEarned ? "earned" : "plan";
  j["trace"] = cfg.trace;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  RunConfig cfg;
  try {
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("csv")) cfg.data.csv_path = resolve(d.at("csv").get<std::string>(), base_dir);
      if (d.contains("relevance")) {
        cfg.data.relevance_path = resolve(d.at("relevance").get<std::string>(), base_dir);
      }
      if (d.contains("items"))
        cfg.data.items_path = resolve(d.at("items").get<std::string>(), base_dir);
      if (d.contains("interval_hours")) {
        cfg.data.schema.interval_seconds =
            std::llround(d.at("interval_hours").get<double>() * 3600.0);
      }
      cfg.data.schema.interval_seconds =
          d.value("interval_seconds", cfg.data.schema.interval_seconds);
      cfg.data.schema.origin = d.value("origin", cfg.data.schema.origin);
      if (d.contains("synth")) cfg.data.synth = load_synth(d.at("synth"), base_dir);
    }
    cfg.rule = parse_rule(j.value("rule", std::string("talmud")));
    cfg.forecaster = parse_forecast_spec(j.value("forecaster", std::string("moving_average:w=3")));
    cfg.uniform_min_exposure = j.value("m", cfg.uniform_min_exposure);
    cfg.min_exposure_per_provider = j.value("m_per_provider", cfg.min_exposure_per_provider);
    if (j.contains("m_budget_fraction") && !j.at("m_budget_fraction").is_null()) {
      cfg.min_exposure_fraction = j.at("m_budget_fraction").get<double>();
    }
    cfg.min_exposure_scale = j.value("m_scale", cfg.min_exposure_scale);
    cfg.min_accuracy = j.value("phi", cfg.min_accuracy);
    cfg.rerank.list_size = j.value("K", cfg.rerank.list_size);
    cfg.rerank.demand_scale = j.value("k", cfg.rerank.demand_scale);
    cfg.rerank.small_provider_weight = j.value("beta", cfg.rerank.small_provider_weight);
    if (j.contains("eta") && j.at("eta").is_number())
      cfg.rerank.step_size = j.at("eta").get<double>();
    cfg.rerank.weight = j.value("weight", cfg.rerank.weight);
    cfg.rerank.warm_start = j.value("warm_start_dual", cfg.rerank.warm_start);
    cfg.rerank.target = parse_dual_target(j.value("dual_target", std::string("one_sided")));
    if (j.contains("tau") && !j.at("tau").is_null()) cfg.temperature = j.at("tau").get<double>();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.drift_sigma = j.value("drift_sigma", cfg.drift_sigma);
    cfg.claim_rate_from_realized =
        j.value("claim_rate_from_realized", cfg.claim_rate_from_realized);
    const std::string update = j.value("remaining_update", std::string("earned"));
    if (update == "earned") {
      cfg.remaining_update = RemainingUpdate::kEarned;
    } else if (update == "plan") {
      cfg.remaining_update = RemainingUpdate::kPlanUnearned;
    } else {
      throw ConfigError("unknown remaining_update '" + update + "'");
    }
    cfg.trace = j.value("trace", cfg.trace);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return cfg;
}

Instance build_instance(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.synth) {
    SynthConfig synth = *cfg.data.synth;
    if (cfg.temperature) {
      const TrafficSeries base = synth_traffic(synth, cfg.seed);
      const std::int64_t total = base.total();
      if (total <= 0) throw ConfigError("cannot resample a series with no traffic");
      synth.traffic =
          resample_traffic(base, *cfg.temperature, total, Rng::mix(cfg.seed, 11)).counts;
      synth.horizon = static_cast<int>(synth.traffic.size());
    }
    return synth_instance(synth, cfg.seed);
  }
  LoadOptions options;
  options.schema = cfg.data.schema;
  options.relevance_path = cfg.data.relevance_path;
  options.items_path = cfg.data.items_path;
  LoadResult loaded = load_interactions(*cfg.data.csv_path, options);
  if (loaded.no_requests) throw ConfigError("no requests in '" + *cfg.data.csv_path + "'");
  if (!cfg.temperature) return std::move(loaded.instance);
  const TrafficSeries resampled =
      resample_traffic(loaded.instance.traffic, *cfg.temperature, loaded.instance.traffic.total(),
                       Rng::mix(cfg.seed, 11));
  return resample_requests(loaded.instance, resampled, Rng::mix(cfg.seed, 12));
}

std::vector<double> resolve_min_exposure(const RunConfig& cfg, const Instance& instance) {
  const int num_providers = instance.catalog.num_providers();
  std::vector<double> required;
  if (!cfg.min_exposure_per_provider.empty()) {
    if (static_cast<int>(cfg.min_exposure_per_provider.size()) != num_providers) {
      throw ConfigError(fmt::format("m_per_provider has {} entries for {} providers",
                                    cfg.min_exposure_per_provider.size(), num_providers));
    }
    required = cfg.min_exposure_per_provider;
  } else if (cfg.min_exposure_fraction) {
    const double budget = static_cast<double>(cfg.rerank.list_size) * instance.traffic.total();
    required.assign(num_providers, *cfg.min_exposure_fraction * budget / num_providers);
  } else {
    required.assign(num_providers, cfg.uniform_min_exposure);
  }
  for (double& v : required) v *= cfg.min_exposure_scale;
  return required;
}

SimReport run(const RunConfig& cfg) {
  return run(cfg, build_instance(cfg));
}

SimReport run(const RunConfig& cfg, const Instance& instance) {
  cfg.validate();
  const Catalog& catalog = instance.catalog;
  const int num_providers = catalog.num_providers();
  const int horizon = instance.traffic.horizon();
  const int list_size = cfg.rerank.list_size;
  if (horizon < 1) throw ConfigError("instance has no intervals");
  if (list_size > catalog.num_items()) {
    throw ConfigError(
        fmt::format("K = {} exceeds catalog size {}", list_size, catalog.num_items()));
  }

  FairnessPolicy policy{resolve_min_exposure(cfg, instance), cfg.min_accuracy, list_size};
  policy.validate();

  ForecastSpec forecaster = cfg.forecaster;
  if (cfg.data.synth && !forecaster.params.contains("prior")) {
    forecaster.params["prior"] = cfg.data.synth->mean_traffic;
  }
  const auto& counts = instance.traffic.counts;

  SimReport report;
  report.config_echo = run_config_to_json(cfg);
  report.min_exposure = policy.min_exposure;

  const double traffic_total =
      cfg.claim_rate_from_realized ? static_cast<double>(instance.traffic.total()) : [&] {
        const Forecast initial = forecast_traffic({}, horizon, forecaster, counts);
        return std::accumulate(initial.values.begin(), initial.values.end(), 0.0);
      }();
  report.claim_rate =
      demand_coefficient(cfg.rerank.demand_scale, policy.min_exposure, list_size, traffic_total);

  std::vector<double> remaining = policy.min_exposure;
  std::vector<double> cumulative(num_providers, 0.0);
  std::vector<double> last_earned(num_providers, 0.0);
  std::vector<double> last_plan(num_providers, 0.0);
  std::vector<double> last_unearned(num_providers, 0.0);
  std::vector<double> prices;

  for (int n = 0; n < horizon; ++n) {
    const std::span<const std::int64_t> history(counts.data(), static_cast<std::size_t>(n));
    const std::span<const std::int64_t> future(counts.data() + n, counts.size() - n);
    const Forecast fc = forecast_traffic(history, horizon - n, forecaster, future);
    const std::vector<double> claims = predict_demands(fc.values, report.claim_rate, list_size);
    if (n > 0) {
      remaining = cfg.remaining_update == RemainingUpdate::kEarned
                      ? update_remaining(remaining, last_earned)
                      : update_remaining_from_plan(remaining, last_plan, last_unearned);
    }
    const PlanResult planned = plan_interval(cfg.rule, remaining, claims, fc.values, n);
    for (const auto& tr : planned.trace) {
      report.allocations.push_back({n + 1, tr.provider, tr.estate, tr.claim, tr.award, tr.level});
    }

    std::span<const UserRequest> requests = instance.interval_requests(n);
    std::vector<UserRequest> drifted;
    if (cfg.drift_sigma > 0.0 && n > 0) {
      drifted = perturb(requests, cfg.drift_sigma, Rng::mix(cfg.seed, 1000 + n));
      requests = drifted;
    }

    const double expected_traffic = std::max(fc.values.front(), 1.0);
    const IntervalOutcome outcome = run_interval(
        requests, planned.plan, cfg.rerank, catalog, expected_traffic, cumulative,
        cfg.rerank.warm_start ? std::span<const double>(prices) : std::span<const double>());
    if (cfg.rerank.warm_start) prices = outcome.final_dual.prices;

    IntervalStats stats;
    stats.interval = n + 1;
    stats.traffic = counts[n];
    stats.forecast = fc.values.front();
    stats.plan_total =
        std::accumulate(planned.plan.min_exposure.begin(), planned.plan.min_exposure.end(), 0.0);
    stats.feasible_ratio = counts[n] > 0
                               ? feasible_region_ratio(planned.plan.min_exposure,
                                                       static_cast<double>(counts[n]), list_size)
                               : 0.0;
    std::vector<double> interval_ndcg;
    interval_ndcg.reserve(requests.size());
    for (std::size_t t = 0; t < requests.size(); ++t) {
      const auto scores = requests[t].scores();
      const double v = ndcg_at_k(outcome.lists[t], top_k(scores, list_size), scores);
      interval_ndcg.push_back(v);
      report.per_user_ndcg.push_back(v);
      if (cfg.trace) {
        DecisionRow row{
            n + 1, static_cast<int>(t), requests[t].user_id, {}, outcome.price_hashes[t]};
        for (ItemId i : outcome.lists[t].items) row.items.push_back(catalog.item_label(i));
        report.decisions.push_back(std::move(row));
      }
    }
    if (!interval_ndcg.empty()) {
      stats.accuracy = std::accumulate(interval_ndcg.begin(), interval_ndcg.end(), 0.0) /
                       static_cast<double>(interval_ndcg.size());
      stats.vio = vio_at_k(interval_ndcg, cfg.min_accuracy);
    }
    cumulative = outcome.ledger.cumulative;
    stats.esp_partial = esp_at_k(cumulative, policy.min_exposure);
    report.intervals.push_back(stats);
    report.per_interval_accuracy.push_back(stats.accuracy);
    report.earned_by_interval.push_back(outcome.ledger.earned);

    last_earned = outcome.ledger.earned;
    last_plan = planned.plan.min_exposure;
    last_unearned = outcome.ledger.unearned;
  }

  report.cumulative_exposure = cumulative;
  if (!report.per_user_ndcg.empty()) {
    report.ndcg_at_k =
        std::accumulate(report.per_user_ndcg.begin(), report.per_user_ndcg.end(), 0.0) /
        static_cast<double>(report.per_user_ndcg.size());
    report.vio_at_k = vio_at_k(report.per_user_ndcg, cfg.min_accuracy);
  }
  report.esp_at_k = esp_at_k(cumulative, policy.min_exposure);
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

void SweepSpec::validate() const {
  base.validate();
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("sweep seeds must be distinct");
  }
}

SweepSpec sweep_spec_from_json(const nlohmann::json& j, const std::string& base_dir) {
  SweepSpec spec;
  try {
    spec.base = run_config_from_json(j.value("base", nlohmann::json::object()), base_dir);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      spec.grid.min_exposure_scale = g.value("m_scale", std::vector<double>{});
      spec.grid.demand_scale = g.value("k", std::vector<double>{});
      spec.grid.small_provider_weight = g.value("beta", std::vector<double>{});
      spec.grid.step_size = g.value("eta", std::vector<double>{});
      spec.grid.temperature = g.value("tau", std::vector<double>{});
      spec.grid.min_accuracy = g.value("phi", std::vector<double>{});
    }
    spec.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep spec: ") + e.what());
  }
  if (spec.seeds.empty()) spec.seeds.push_back(spec.base.seed);
  spec.validate();
  return spec;
}

std::vector<SweepPoint> expand_grid(const SweepSpec& spec) {
  const RunConfig& b = spec.base;
  auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  std::vector<std::optional<double>> step_sizes, temperatures;
  if (spec.grid.step_size.empty()) step_sizes.push_back(b.rerank.step_size);
  for (double e : spec.grid.step_size) step_sizes.emplace_back(e);
  if (spec.grid.temperature.empty()) temperatures.push_back(b.temperature);
  for (double t : spec.grid.temperature) temperatures.emplace_back(t);

  std::vector<SweepPoint> points;
  for (double ms : axis(spec.grid.min_exposure_scale, b.min_exposure_scale))
    for (double k : axis(spec.grid.demand_scale, b.rerank.demand_scale))
      for (double weight : axis(spec.grid.small_provider_weight, b.rerank.small_provider_weight))
        for (const auto& step_size : step_sizes)
          for (const auto& temperature : temperatures)
            for (double min_accuracy : axis(spec.grid.min_accuracy, b.min_accuracy)) {
              points.push_back(SweepPoint{ms, k, weight, step_size, temperature, min_accuracy});
            }
  return points;
}

RunConfig apply_point(const RunConfig& base, const SweepPoint& point, std::uint64_t seed) {
  RunConfig cfg = base;
  cfg.min_exposure_scale = point.min_exposure_scale;
  cfg.rerank.demand_scale = point.demand_scale;
  cfg.rerank.small_provider_weight = point.small_provider_weight;
  cfg.rerank.step_size = point.step_size;
  cfg.temperature = point.temperature;
  cfg.min_accuracy = point.min_accuracy;
  cfg.seed = seed;
  return cfg;
}

void mark_pareto(std::vector<SweepRow>& rows) {
  for (auto& r : rows) {
    if (!r.report) {
      r.pareto = false;
      continue;
    }
    const SimReport& a = *r.report;
    r.pareto = std::none_of(rows.begin(), rows.end(), [&](const SweepRow& other) {
      if (&other == &r || !other.report) return false;
      const SimReport& b = *other.report;
      const bool no_worse =
          b.esp_at_k >= a.esp_at_k && b.ndcg_at_k >= a.ndcg_at_k && b.vio_at_k <= a.vio_at_k;
      const bool better =
          b.esp_at_k > a.esp_at_k || b.ndcg_at_k > a.ndcg_at_k || b.vio_at_k < a.vio_at_k;
      return no_worse && better;
    });
  }
}

SweepResult sweep(const SweepSpec& spec, unsigned threads) {
  spec.validate();
  const std::vector<SweepPoint> points = expand_grid(spec);
  SweepResult result;
  for (std::size_t c = 0; c < points.size(); ++c) {
    for (std::uint64_t seed : spec.seeds) {
      result.rows.push_back(
          SweepRow{static_cast<int>(c), seed, points[c], std::nullopt, "", false});
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.rows.size(); i = next++) {
      SweepRow& row = result.rows[i];
      try {
        row.report = run(apply_point(spec.base, row.point, row.seed));
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(result.rows.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  mark_pareto(result.rows);

  for (std::size_t c = 0; c < points.size(); ++c) {
    SweepSummary s;
    s.config_index = static_cast<int>(c);
    s.point = points[c];
    std::vector<double> ndcg, vio, esp;
    for (const auto& row : result.rows) {
      if (row.config_index != static_cast<int>(c)) continue;
      if (!row.report) {
        ++s.failures;
        continue;
      }
      ndcg.push_back(row.report->ndcg_at_k);
      vio.push_back(row.report->vio_at_k);
      esp.push_back(row.report->esp_at_k);
    }
    s.ndcg = t_interval(ndcg);
    s.vio = t_interval(vio);
    s.esp = t_interval(esp);
    result.summaries.push_back(s);
  }
  return result;
}

namespace {

std::string opt(const std::optional<double>& v, const char* fallback) {
  return v ? fmt::format("{:.17g}", *v) : std::string(fallback);
}

std::string point_fields(const SweepPoint& p) {
  return fmt::format("{:.17g},{:.17g},{:.17g},{},{},{:.17g}", p.min_exposure_scale, p.demand_scale,
                     p.small_provider_weight, opt(p.step_size, "auto"), opt(p.temperature, "none"),
                     p.min_accuracy);
}

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

}  // namespace

std::string pareto_csv(const SweepResult& result) {
  std::string out = "config,seed,m_scale,k,beta,eta,tau,phi,ndcg,vio,esp,pareto,error\n";
  for (const auto& row : result.rows) {
    out += fmt::format("{},{},{},", row.config_index, row.seed, point_fields(row.point));
    if (row.report) {
      out += fmt::format("{:.17g},{:.17g},{:.17g},{},\n", row.report->ndcg_at_k,
                         row.report->vio_at_k, row.report->esp_at_k, row.pareto ? "true" : "false");
    } else {
      out += fmt::format(",,,false,{}\n", csv_escape(row.error));
    }
  }
  return out;
}

std::string summary_csv(const SweepResult& result) {
  std::string out =
      "config,m_scale,k,beta,eta,tau,phi,runs,failures,ndcg_mean,ndcg_ci95,vio_mean,vio_ci95,"
      "esp_mean,esp_ci95\n";
  for (const auto& s : result.summaries) {
    out +=
        fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.config_index,
                    point_fields(s.point), s.ndcg.samples, s.failures, s.ndcg.mean,
                    s.ndcg.half_width, s.vio.mean, s.vio.half_width, s.esp.mean, s.esp.half_width);
  }
  return out;
}

void write_sweep(const std::string& dir, const SweepResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::ofstream(fs::path(dir) / "pareto.csv", std::ios::binary) << pareto_csv(result);
  std::ofstream(fs::path(dir) / "summary.csv", std::ios::binary) << summary_csv(result);
}

}  // namespace bankfair
