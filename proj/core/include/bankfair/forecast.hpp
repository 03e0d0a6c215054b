#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bankfair {

enum class ForecastMethod { kLastValue, kMovingAverage, kSeasonal, kOracle };

// Forecaster choice plus its numeric parameters:
//   w      moving-average window (default 3)
//   s      seasonal lag (default 7)
//   prior  prediction used when there is no history (default 1)
struct ForecastSpec {
  ForecastMethod method = ForecastMethod::kMovingAverage;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
};

// Parses "moving_average:w=3" / "seasonal:s=7,prior=100" / "oracle".
ForecastSpec parse_forecast_spec(const std::string& text);
std::string forecast_spec_string(const ForecastSpec& spec);
std::string method_name(ForecastMethod method);

struct Forecast {
  std::vector<double> values;  // predicted traffic for the next `horizon` intervals
  std::string method;
};

// Predicts the next `horizon` intervals from the observed counts. The oracle
// method returns `future` (the true counts) and requires at least `horizon`
// entries there; the others ignore it.
Forecast forecast_traffic(std::span<const std::int64_t> history, int horizon,
                          const ForecastSpec& spec, std::span<const std::int64_t> future = {});

}  // namespace bankfair
