#include "bankfair/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bankfair/errors.hpp"
#include "bankfair/random.hpp"

namespace bankfair {

Catalog Catalog::Create(std::vector<ProviderId> item_provider, int num_providers,
                        std::vector<std::string> item_labels,
                        std::vector<std::string> provider_labels) {
  if (num_providers < 1) throw ConfigError("catalog needs at least one provider");
  if (static_cast<int>(item_provider.size()) < num_providers) {
    throw ConfigError("catalog has fewer items (" + std::to_string(item_provider.size()) +
                      ") than providers (" + std::to_string(num_providers) + ")");
  }
  Catalog c;
  c.num_providers_ = num_providers;
  c.inventory_.assign(num_providers, 0);
  for (std::size_t i = 0; i < item_provider.size(); ++i) {
    const ProviderId p = item_provider[i];
    if (p < 0 || p >= num_providers) {
      throw ConsistencyError("item " + std::to_string(i) + " maps to unknown provider " +
                             std::to_string(p));
    }
    ++c.inventory_[p];
  }
  for (int p = 0; p < num_providers; ++p) {
    if (c.inventory_[p] == 0) {
      throw ConfigError("provider " + std::to_string(p) + " has no items");
    }
  }
  if (item_labels.empty()) {
    item_labels.reserve(item_provider.size());
    for (std::size_t i = 0; i < item_provider.size(); ++i) item_labels.push_back(std::to_string(i));
  }
  if (provider_labels.empty()) {
    provider_labels.reserve(num_providers);
    for (int p = 0; p < num_providers; ++p) provider_labels.push_back(std::to_string(p));
  }
  if (item_labels.size() != item_provider.size() ||
      static_cast<int>(provider_labels.size()) != num_providers) {
    throw ConfigError("catalog label count mismatch");
  }
  c.item_provider_ = std::move(item_provider);
  c.item_labels_ = std::move(item_labels);
  c.provider_labels_ = std::move(provider_labels);
  return c;
}

std::vector<double> Catalog::exposure_of(std::span<const ItemId> items) const {
  std::vector<double> exposure(num_providers_, 0.0);
  for (ItemId i : items) exposure[item_provider_[i]] += 1.0;
  return exposure;
}

bool UserRequest::degenerate(int k) const {
  const auto s = scores();
  const auto positive = std::count_if(s.begin(), s.end(), [](double v) { return v > 0.0; });
  return positive < k;
}

std::int64_t TrafficSeries::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

void FairnessPolicy::validate() const {
  if (list_size < 1) throw ConfigError("list size K must be >= 1");
  if (!(min_accuracy >= 0.0 && min_accuracy <= 1.0)) {
    throw ConfigError("required minimum accuracy must lie in [0, 1]");
  }
  for (double m : min_exposure) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw ConfigError("required minimum exposure must be finite and >= 0");
    }
  }
}

std::span<const UserRequest> Instance::interval_requests(int n) const {
  std::size_t begin = 0;
  for (int i = 0; i < n; ++i) begin += static_cast<std::size_t>(traffic.counts[i]);
  return std::span<const UserRequest>(requests).subspan(
      begin, static_cast<std::size_t>(traffic.counts[n]));
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (num_providers < 1) throw ConfigError("synth: num_providers must be >= 1");
  if (num_providers > num_items) {
    throw ConfigError("synth: num_providers (" + std::to_string(num_providers) +
                      ") exceeds num_items (" + std::to_string(num_items) + ")");
  }
  if (traffic.empty() && horizon < 1) throw ConfigError("synth: horizon must be >= 1");
  if (!traffic.empty() && horizon != 0 && horizon != static_cast<int>(traffic.size())) {
    throw ConfigError("synth: horizon disagrees with explicit traffic length");
  }
  for (auto c : traffic) {
    if (c < 0) throw ConfigError("synth: traffic counts must be >= 0");
  }
  if (mean_traffic < 0.0) throw ConfigError("synth: mean_traffic must be >= 0");
  if (relevance.low < 0.0 || relevance.high > 1.0 || relevance.low > relevance.high) {
    throw ConfigError("synth: relevance bounds must satisfy 0 <= low <= high <= 1");
  }
  if (relevance.kind == RelevanceKind::kBeta && (relevance.a <= 0.0 || relevance.b <= 0.0)) {
    throw ConfigError("synth: beta parameters must be positive");
  }
  if (relevance.popularity_weight < 0.0 || relevance.popularity_weight > 1.0) {
    throw ConfigError("synth: popularity_weight must lie in [0, 1]");
  }
  if (!provider_scale.empty() && static_cast<int>(provider_scale.size()) != num_providers) {
    throw ConfigError("synth: provider_scale needs one entry per provider");
  }
}

namespace {

const char* kind_name(RelevanceKind k) {
  switch (k) {
    case RelevanceKind::kUniform: return "uniform";
    case RelevanceKind::kBeta: return "beta";
    case RelevanceKind::kPopularity: return "popularity";
  }
  return "uniform";
}

RelevanceKind kind_from_name(const std::string& s) {
  if (s == "uniform") return RelevanceKind::kUniform;
  if (s == "beta") return RelevanceKind::kBeta;
  if (s == "popularity") return RelevanceKind::kPopularity;
  throw ConfigError("synth: unknown relevance kind '" + s + "'");
}

// Largest-remainder apportionment of n items over weights, at least one each.
std::vector<int> apportion(int n, const std::vector<double>& weights) {
  const int k = static_cast<int>(weights.size());
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const int spare = n - k;
  std::vector<int> counts(k, 1);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = spare * weights[i] / total;
    const int whole = static_cast<int>(std::floor(exact));
    counts[i] += whole;
    assigned += whole;
    remainders.emplace_back(exact - whole, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < spare - assigned; ++r) ++counts[remainders[r].second];
  return counts;
}

}  // namespace

void to_json(nlohmann::json& j, const SynthConfig& cfg) {
  j = nlohmann::json{
      {"num_items", cfg.num_items},
      {"num_providers", cfg.num_providers},
      {"horizon", cfg.horizon},
      {"traffic", cfg.traffic},
      {"mean_traffic", cfg.mean_traffic},
      {"traffic_amplitude", cfg.traffic_amplitude},
      {"traffic_period", cfg.traffic_period},
      {"traffic_noise", cfg.traffic_noise},
      {"inventory_skew", cfg.inventory_skew},
      {"relevance",
       {{"kind", kind_name(cfg.relevance.kind)},
        {"low", cfg.relevance.low},
        {"high", cfg.relevance.high},
        {"a", cfg.relevance.a},
        {"b", cfg.relevance.b},
        {"popularity_weight", cfg.relevance.popularity_weight},
        {"popularity_skew", cfg.relevance.popularity_skew}}},
      {"provider_scale", cfg.provider_scale},
  };
}

void from_json(const nlohmann::json& j, SynthConfig& cfg) {
  cfg = SynthConfig{};
  cfg.num_items = j.value("num_items", cfg.num_items);
  cfg.num_providers = j.value("num_providers", cfg.num_providers);
  cfg.traffic = j.value("traffic", cfg.traffic);
  cfg.horizon =
      j.value("horizon", cfg.traffic.empty() ? cfg.horizon : static_cast<int>(cfg.traffic.size()));
  cfg.mean_traffic = j.value("mean_traffic", cfg.mean_traffic);
  cfg.traffic_amplitude = j.value("traffic_amplitude", cfg.traffic_amplitude);
  cfg.traffic_period = j.value("traffic_period", cfg.traffic_period);
  cfg.traffic_noise = j.value("traffic_noise", cfg.traffic_noise);
  cfg.inventory_skew = j.value("inventory_skew", cfg.inventory_skew);
  cfg.provider_scale = j.value("provider_scale", cfg.provider_scale);
  if (j.contains("relevance")) {
    const auto& r = j.at("relevance");
    cfg.relevance.kind = kind_from_name(r.value("kind", std::string("uniform")));
    cfg.relevance.low = r.value("low", cfg.relevance.low);
    cfg.relevance.high = r.value("high", cfg.relevance.high);
    cfg.relevance.a = r.value("a", cfg.relevance.a);
    cfg.relevance.b = r.value("b", cfg.relevance.b);
    cfg.relevance.popularity_weight = r.value("popularity_weight", cfg.relevance.popularity_weight);
    cfg.relevance.popularity_skew = r.value("popularity_skew", cfg.relevance.popularity_skew);
  }
}

TrafficSeries synth_traffic(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!cfg.traffic.empty()) return TrafficSeries{cfg.traffic};
  Rng rng(Rng::mix(seed, 1));
  TrafficSeries series;
  series.counts.reserve(cfg.horizon);
  for (int n = 0; n < cfg.horizon; ++n) {
    const double phase =
        cfg.traffic_period > 0.0 ? std::sin(2.0 * std::numbers::pi * n / cfg.traffic_period) : 0.0;
    const double level = cfg.mean_traffic * (1.0 + cfg.traffic_amplitude * phase) *
                         (1.0 + cfg.traffic_noise * rng.normal());
    series.counts.push_back(std::max<std::int64_t>(0, std::llround(level)));
  }
  return series;
}

Instance synth_instance(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Instance inst;
  inst.traffic = synth_traffic(cfg, seed);

  std::vector<double> shares(cfg.num_providers);
  for (int p = 0; p < cfg.num_providers; ++p) shares[p] = std::pow(p + 1.0, -cfg.inventory_skew);
  const std::vector<int> per_provider = apportion(cfg.num_items, shares);
  std::vector<ProviderId> item_provider;
  item_provider.reserve(cfg.num_items);
  for (int p = 0; p < cfg.num_providers; ++p)
    item_provider.insert(item_provider.end(), per_provider[p], p);
  inst.catalog = Catalog::Create(std::move(item_provider), cfg.num_providers);

  const RelevanceConfig& rel = cfg.relevance;
  std::vector<double> popularity(cfg.num_items, 0.0);
  if (rel.kind == RelevanceKind::kPopularity) {
    Rng item_rng(Rng::mix(seed, 2));
    for (int i = 0; i < cfg.num_items; ++i) {
      const double level = std::pow(inst.catalog.provider_of(i) + 1.0, -rel.popularity_skew);
      popularity[i] = level * item_rng.uniform(0.5, 1.0);
    }
  }

  Rng rng(Rng::mix(seed, 3));
  const std::int64_t total = inst.traffic.total();
  inst.requests.reserve(static_cast<std::size_t>(total));
  std::int64_t user = 0;
  for (int n = 0; n < inst.traffic.horizon(); ++n) {
    for (std::int64_t t = 0; t < inst.traffic.counts[n]; ++t, ++user) {
      auto scores = std::make_shared<std::vector<double>>(cfg.num_items);
      for (int i = 0; i < cfg.num_items; ++i) {
        double s = 0.0;
        switch (rel.kind) {
          case RelevanceKind::kUniform: s = rng.uniform(rel.low, rel.high); break;
          case RelevanceKind::kBeta:
            s = rel.low + (rel.high - rel.low) * rng.beta(rel.a, rel.b);
            break;
          case RelevanceKind::kPopularity:
            s = rel.low + (rel.high - rel.low) * (rel.popularity_weight * popularity[i] +
                                                  (1.0 - rel.popularity_weight) * rng.uniform());
            break;
        }
        if (!cfg.provider_scale.empty()) s *= cfg.provider_scale[inst.catalog.provider_of(i)];
        (*scores)[i] = std::clamp(s, 0.0, 1.0);
      }
      inst.requests.push_back(
          UserRequest{std::to_string(user), n, static_cast<int>(t), std::move(scores)});
    }
  }
  return inst;
}

std::vector<double> resample_probabilities(const TrafficSeries& series, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("temperature tau must be > 0");
  if (series.counts.empty()) throw ConfigError("cannot resample an empty traffic series");
  const double max_count =
      static_cast<double>(*std::max_element(series.counts.begin(), series.counts.end()));
  const double scale = max_count > 0.0 ? temperature * max_count : temperature;
  std::vector<double> logits(series.counts.size());
  for (std::size_t n = 0; n < logits.size(); ++n) logits[n] = series.counts[n] / scale;
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

TrafficSeries resample_traffic(const TrafficSeries& series, double temperature, std::int64_t total,
                               std::uint64_t seed) {
  if (total <= 0) throw ConfigError("resample total must be > 0");
  const std::vector<double> probs = resample_probabilities(series, temperature);
  std::vector<double> cumulative(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cumulative.begin());
  Rng rng(seed);
  TrafficSeries out;
  out.counts.assign(probs.size(), 0);
  for (std::int64_t draw = 0; draw < total; ++draw) {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    ++out.counts[static_cast<std::size_t>(it - cumulative.begin())];
  }
  return out;
}

Instance resample_requests(const Instance& instance, const TrafficSeries& traffic,
                           std::uint64_t seed) {
  if (instance.requests.empty()) throw ConfigError("cannot resample an instance without requests");
  Rng rng(seed);
  Instance out;
  out.catalog = instance.catalog;
  out.traffic = traffic;
  out.requests.reserve(static_cast<std::size_t>(traffic.total()));
  for (int n = 0; n < traffic.horizon(); ++n) {
    for (std::int64_t t = 0; t < traffic.counts[n]; ++t) {
      const auto& src = instance.requests[rng.below(instance.requests.size())];
      out.requests.push_back(UserRequest{src.user_id, n, static_cast<int>(t), src.relevance});
    }
  }
  return out;
}

}  // namespace bankfair
