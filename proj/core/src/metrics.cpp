#include "bankfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "bankfair/errors.hpp"

namespace bankfair {

double dcg(const RankedList& list, std::span<const double> relevance) {
  double total = 0.0;
  for (int r = 0; r < list.size(); ++r) {
    total += relevance[list.items[r]] / std::log2(r + 2.0);
  }
  return total;
}

double ndcg_at_k(const RankedList& reranked, const RankedList& original,
                 std::span<const double> relevance) {
  if (reranked.size() != original.size()) {
    throw ConfigError("ndcg_at_k: lists differ in length");
  }
  const double ideal = dcg(original, relevance);
  const double got = dcg(reranked, relevance);
  if (ideal <= 0.0) {
    if (got <= 0.0) return 1.0;
    throw DomainError("ndcg_at_k: original list has zero DCG but the re-ranked one does not");
  }
  return got / ideal;
}

double vio_at_k(std::span<const double> per_user_ndcg, double min_accuracy) {
  if (per_user_ndcg.empty()) throw DomainError("vio_at_k: no users");
  if (min_accuracy < 0.0 || min_accuracy > 1.0) throw ConfigError("phi must lie in [0, 1]");
  const auto below = std::count_if(per_user_ndcg.begin(), per_user_ndcg.end(),
                                   [min_accuracy](double v) { return v < min_accuracy; });
  return static_cast<double>(below) / static_cast<double>(per_user_ndcg.size());
}

double esp_at_k(std::span<const double> cumulative_exposure, std::span<const double> min_exposure) {
  if (cumulative_exposure.size() != min_exposure.size()) {
    throw ConfigError("esp_at_k: size mismatch");
  }
  if (min_exposure.empty()) return 1.0;
  std::size_t met = 0;
  for (std::size_t p = 0; p < min_exposure.size(); ++p) {
    if (cumulative_exposure[p] >= min_exposure[p]) ++met;
  }
  return static_cast<double>(met) / static_cast<double>(min_exposure.size());
}

double feasible_region_ratio(std::span<const double> plan, double traffic, int list_size) {
  const double budget = traffic * list_size;
  if (!(budget > 0.0)) throw DomainError("feasible_region_ratio needs r * K > 0");
  const double required = std::accumulate(plan.begin(), plan.end(), 0.0);
  return std::max(0.0, 1.0 - required / budget);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman: size mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

MeanInterval t_interval(std::span<const double> samples, double confidence) {
  MeanInterval out;
  out.samples = static_cast<int>(samples.size());
  if (samples.empty()) return out;
  const double n = static_cast<double>(samples.size());
  out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() < 2) return out;
  double ss = 0.0;
  for (double s : samples) ss += (s - out.mean) * (s - out.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  out.half_width = q * sd / std::sqrt(n);
  return out;
}

LossCurve accuracy_loss_curve(std::span<const TrafficAccuracy> observations) {
  std::map<double, std::pair<double, int>> by_level;
  for (const auto& o : observations) {
    auto& [sum, count] = by_level[o.traffic];
    sum += 1.0 - o.accuracy;
    ++count;
  }
  LossCurve curve;
  std::vector<double> traffic, loss;
  for (const auto& [level, acc] : by_level) {
    const double mean = acc.first / acc.second;
    curve.points.emplace_back(level, mean);
    traffic.push_back(level);
    loss.push_back(mean);
  }
  if (curve.points.size() >= 3) curve.rank_correlation = spearman(traffic, loss);
  return curve;
}

}  // namespace bankfair
