#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bankfair/domain.hpp"

namespace bankfair {

// DCG of `list` against `relevance`: sum s_i / log2(rank_i + 1), ranks from 1.
double dcg(const RankedList& list, std::span<const double> relevance);

// DCG(reranked) / DCG(original). When the original list has zero DCG the
// result is 1 if the reranked DCG is also zero; otherwise DomainError.
double ndcg_at_k(const RankedList& reranked, const RankedList& original,
                 std::span<const double> relevance);

// Fraction of users with NDCG strictly below min_accuracy. Throws on an empty set.
double vio_at_k(std::span<const double> per_user_ndcg, double min_accuracy);

// Fraction of providers whose cumulative exposure reaches their requirement.
double esp_at_k(std::span<const double> cumulative_exposure, std::span<const double> min_exposure);

// Share of the unconstrained exposure simplex that survives the interval's
// minimum-exposure constraints: max(0, 1 - sum(M) / (r K)).
double feasible_region_ratio(std::span<const double> plan, double traffic, int list_size);

// Spearman rank correlation (average ranks for ties). Empty when either side
// is constant or fewer than two points are given.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct MeanInterval {
  double mean = 0.0;
  double half_width = 0.0;  // 0 with a single sample
  int samples = 0;
};

// Mean and two-sided t-distribution confidence half-width.
MeanInterval t_interval(std::span<const double> samples, double confidence = 0.95);

// One observation for the accuracy-loss curve: traffic of an interval and the
// accuracy a(n) reached there.
struct TrafficAccuracy {
  double traffic = 0.0;
  double accuracy = 1.0;
};

struct LossCurve {
  std::vector<std::pair<double, double>> points;  // (traffic, mean loss), by traffic
  std::optional<double> rank_correlation;         // unset when undefined
};

// Groups observations by traffic level and averages loss = 1 - accuracy.
// The rank correlation needs at least three levels and non-constant loss.
LossCurve accuracy_loss_curve(std::span<const TrafficAccuracy> observations);

}  // namespace bankfair
