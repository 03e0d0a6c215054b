#include "bankfair/forecast.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bankfair/errors.hpp"

namespace bankfair {
namespace {

double mean_of_last(std::span<const std::int64_t> history, std::size_t window) {
  window = std::min(window, history.size());
  const auto tail = history.subspan(history.size() - window);
  return static_cast<double>(std::accumulate(tail.begin(), tail.end(), std::int64_t{0})) /
         static_cast<double>(window);
}

ForecastMethod method_from_name(const std::string& name) {
  if (name == "last_value") return ForecastMethod::kLastValue;
  if (name == "moving_average") return ForecastMethod::kMovingAverage;
  if (name == "seasonal") return ForecastMethod::kSeasonal;
  if (name == "oracle") return ForecastMethod::kOracle;
  throw ConfigError("unknown forecaster '" + name + "'");
}

}  // namespace

double ForecastSpec::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string method_name(ForecastMethod method) {
  switch (method) {
    case ForecastMethod::kLastValue: return "last_value";
    case ForecastMethod::kMovingAverage: return "moving_average";
    case ForecastMethod::kSeasonal: return "seasonal";
    case ForecastMethod::kOracle: return "oracle";
  }
  return "";
}

ForecastSpec parse_forecast_spec(const std::string& text) {
  ForecastSpec spec;
  const auto colon = text.find(':');
  spec.method = method_from_name(text.substr(0, colon));
  if (colon == std::string::npos) return spec;
  std::string_view rest(text);
  rest.remove_prefix(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view pair = rest.substr(0, comma);
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("forecaster parameter '" + std::string(pair) + "' is not key=value");
    }
    const std::string_view value = pair.substr(eq + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("forecaster parameter '" + std::string(pair) + "' is not numeric");
    }
    spec.params[std::string(pair.substr(0, eq))] = v;
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  for (const char* key : {"w", "s"}) {
    if (spec.params.count(key) && !(spec.params[key] >= 1.0)) {
      throw ConfigError(fmt::format("forecaster parameter '{}' must be >= 1", key));
    }
  }
  if (spec.params.count("prior") && !(spec.params["prior"] >= 0.0)) {
    throw ConfigError("forecaster parameter 'prior' must be >= 0");
  }
  return spec;
}

std::string forecast_spec_string(const ForecastSpec& spec) {
  std::string out = method_name(spec.method);
  char sep = ':';
  for (const auto& [k, v] : spec.params) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out += sep;
    out += k + "=" + std::string(buf, ptr);
    sep = ',';
  }
  return out;
}

Forecast forecast_traffic(std::span<const std::int64_t> history, int horizon,
                          const ForecastSpec& spec, std::span<const std::int64_t> future) {
  if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
  Forecast out;
  out.method = method_name(spec.method);
  out.values.assign(horizon, 0.0);

  if (spec.method == ForecastMethod::kOracle) {
    if (static_cast<int>(future.size()) < horizon) {
      throw ConfigError("oracle forecaster needs the true future counts");
    }
    for (int h = 0; h < horizon; ++h) out.values[h] = static_cast<double>(future[h]);
    return out;
  }

  const double prior = std::max(spec.param("prior", 1.0), 0.0);
  if (history.empty()) {
    std::fill(out.values.begin(), out.values.end(), prior);
    return out;
  }

  ForecastMethod method = spec.method;
  const auto lag = static_cast<std::size_t>(std::max(1.0, spec.param("s", 7.0)));
  if (method == ForecastMethod::kSeasonal && history.size() < lag) {
    spdlog::warn("seasonal forecaster: history of {} shorter than lag {}; using moving average",
                 history.size(), lag);
    method = ForecastMethod::kMovingAverage;
  }

  switch (method) {
    case ForecastMethod::kLastValue:
      std::fill(out.values.begin(), out.values.end(), static_cast<double>(history.back()));
      break;
    case ForecastMethod::kMovingAverage: {
      const auto window = static_cast<std::size_t>(std::max(1.0, spec.param("w", 3.0)));
      std::fill(out.values.begin(), out.values.end(), mean_of_last(history, window));
      break;
    }
    case ForecastMethod::kSeasonal: {
      const std::size_t base = history.size() - lag;
      for (int h = 0; h < horizon; ++h) {
        out.values[h] = static_cast<double>(history[base + static_cast<std::size_t>(h) % lag]);
      }
      break;
    }
    case ForecastMethod::kOracle: break;
  }
  for (double& v : out.values) v = std::max(v, 0.0);
  return out;
}

}  // namespace bankfair
