#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bankfair {

using ItemId = int;
using ProviderId = int;

// Immutable item -> provider assignment (the item-provider adjacency matrix,
// stored row-compressed since every item has exactly one provider) plus the
// per-provider inventory sizes.
class Catalog {
 public:
  Catalog() = default;

  // Validates: every entry in [0, num_providers), num_providers >= 1,
  // num_items >= num_providers, no provider left without items.
  static Catalog Create(std::vector<ProviderId> item_provider, int num_providers,
                        std::vector<std::string> item_labels = {},
                        std::vector<std::string> provider_labels = {});

  int num_items() const { return static_cast<int>(item_provider_.size()); }
  int num_providers() const { return num_providers_; }
  bool empty() const { return item_provider_.empty(); }

  ProviderId provider_of(ItemId item) const { return item_provider_[item]; }
  std::span<const ProviderId> item_provider() const { return item_provider_; }
  std::span<const int> inventory() const { return inventory_; }

  // External identifiers used by the interchange format. Default to the
  // decimal index when the catalog was not loaded from a file.
  const std::string& item_label(ItemId item) const { return item_labels_[item]; }
  const std::string& provider_label(ProviderId p) const { return provider_labels_[p]; }

  // Per-provider exposure of a set of items (A^T x).
  std::vector<double> exposure_of(std::span<const ItemId> items) const;

  friend bool operator==(const Catalog&, const Catalog&) = default;

 private:
  std::vector<ProviderId> item_provider_;
  std::vector<int> inventory_;
  std::vector<std::string> item_labels_;
  std::vector<std::string> provider_labels_;
  int num_providers_ = 0;
};

// One user arrival. The relevance vector is shared between requests of the
// same user and never mutated after construction.
struct UserRequest {
  std::string user_id;
  int interval = 0;     // 0-based interval index
  int arrival_seq = 0;  // 0-based position within the interval
  std::shared_ptr<const std::vector<double>> relevance;

  std::span<const double> scores() const { return *relevance; }

  // Fewer than k strictly positive scores: the top-k list is padded with
  // zero-relevance items and NDCG becomes ill-conditioned.
  bool degenerate(int k) const;
};

struct TrafficSeries {
  std::vector<std::int64_t> counts;

  int horizon() const { return static_cast<int>(counts.size()); }
  std::int64_t total() const;
  friend bool operator==(const TrafficSeries&, const TrafficSeries&) = default;
};

struct FairnessPolicy {
  std::vector<double> min_exposure;  // per provider
  double min_accuracy = 0.95;        // min_accuracy
  int list_size = 10;                // K

  void validate() const;
};

struct RankedList {
  std::vector<ItemId> items;
  std::vector<double> scores;

  int size() const { return static_cast<int>(items.size()); }
  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// A catalog plus its request stream, ordered by (interval, arrival_seq).
struct Instance {
  Catalog catalog;
  TrafficSeries traffic;
  std::vector<UserRequest> requests;

  // Requests belonging to interval n. Requires requests sorted by interval
  // with traffic.counts matching the group sizes.
  std::span<const UserRequest> interval_requests(int n) const;
};

// Column layout of the interchange CSV.
struct CsvSchema {
  std::string user_column = "user_id";
  std::string item_column = "item_id";
  std::string provider_column = "provider_id";
  std::string timestamp_column = "timestamp";
  std::string score_column = "score";
  std::int64_t interval_seconds = 86400;
  // Interval boundaries sit at multiples of interval_seconds from this origin
  // (epoch seconds); the default aligns daily intervals to UTC midnight.
  std::int64_t origin = 0;
};

struct LoadOptions {
  CsvSchema schema;
  // Dense relevance matrix (one row per distinct user in order of first
  // appearance). Without it, a user's vector holds that user's logged scores
  // and zero elsewhere.
  std::optional<std::string> relevance_path;
  // Optional `item_id,provider_id` listing that fixes the catalog, including
  // items that never occur in the log.
  std::optional<std::string> items_path;
};

struct LoadResult {
  Instance instance;
  bool no_requests = false;
};

LoadResult load_interactions(const std::string& path, const LoadOptions& options = {});

// Writes interactions.csv, items.csv and relevance.bin into `dir` so that
// load_interactions reproduces the instance exactly (catalog, traffic and
// request order). Each request becomes one row whose item is its top-scored
// item; arrivals are spread evenly inside their interval.
void write_interactions(const std::string& dir, const Instance& instance,
                        const CsvSchema& schema = {});

// Dense relevance matrix with a 16-byte little-endian header:
// magic "BFRM", u32 num_users, u32 num_items, u32 element width (4 or 8).
struct RelevanceMatrix {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::vector<double> values;  // row-major

  std::span<const double> row(std::size_t u) const {
    return std::span<const double>(values).subspan(u * num_items, num_items);
  }
};

RelevanceMatrix read_relevance_matrix(const std::string& path);
void write_relevance_matrix(const std::string& path, const RelevanceMatrix& m,
                            int element_width = 8);

// ---------------------------------------------------------------------------
// Synthetic instances

enum class RelevanceKind {
  kUniform,     // iid U(low, high)
  kBeta,        // iid Beta(a, b)
  kPopularity,  // mixes a per-item popularity with per-user noise
};

struct RelevanceConfig {
  RelevanceKind kind = RelevanceKind::kUniform;
  double low = 0.0;
  double high = 1.0;
  double a = 2.0;
  double b = 2.0;
  // kPopularity: s = w * q_i + (1 - w) * U(0,1), with q_i the item popularity.
  double popularity_weight = 0.5;
  // Provider p's popularity level is (p + 1)^-popularity_skew, times a
  // uniform per-item jitter.
  double popularity_skew = 1.0;
};

struct SynthConfig {
  int num_items = 200;
  int num_providers = 20;
  int horizon = 14;
  // Explicit per-interval traffic; when empty it is generated from the
  // sinusoid parameters below.
  std::vector<std::int64_t> traffic;
  double mean_traffic = 100.0;
  double traffic_amplitude = 0.5;
  double traffic_period = 7.0;
  double traffic_noise = 0.1;
  // Provider p owns a share of items proportional to (p + 1)^-inventory_skew.
  double inventory_skew = 0.0;
  RelevanceConfig relevance;
  // Optional per-provider multiplier applied to relevance before clamping.
  std::vector<double> provider_scale;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

// Traffic the generator would use for `cfg` and `seed`.
TrafficSeries synth_traffic(const SynthConfig& cfg, std::uint64_t seed);

Instance synth_instance(const SynthConfig& cfg, std::uint64_t seed);

// Per-interval probabilities softmax(counts / (temperature * max count)).
std::vector<double> resample_probabilities(const TrafficSeries& series, double temperature);

// Multinomial redraw of `total` arrivals over the series' intervals with the
// probabilities above.
TrafficSeries resample_traffic(const TrafficSeries& series, double temperature, std::int64_t total,
                               std::uint64_t seed);

// Rebuilds an instance's request stream to follow `traffic`, sampling
// requests with replacement from the original pool.
Instance resample_requests(const Instance& instance, const TrafficSeries& traffic,
                           std::uint64_t seed);

}  // namespace bankfair
