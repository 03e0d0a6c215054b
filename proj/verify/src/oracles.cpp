#include "bankfair/verify/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace bankfair::verify {

std::vector<double> talmud_by_grid(std::span<const double> claims, double estate, int grid_points) {
  const std::size_t n = claims.size();
  const double total = std::accumulate(claims.begin(), claims.end(), 0.0);
  if (n == 0) return {};
  if (estate >= total) return {claims.begin(), claims.end()};
  const bool low = 2.0 * estate <= total;
  auto award = [&](std::size_t i, double t) {
    const double half = claims[i] / 2.0;
    return low ? std::min(half, t) : std::max(half, claims[i] - t);
  };
  auto awarded = [&](double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += award(i, t);
    return s;
  };

  const double top = *std::max_element(claims.begin(), claims.end()) / 2.0;
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(grid_points) + n);
  for (int g = 0; g < grid_points; ++g) grid.push_back(top * g / (grid_points - 1));
  for (double c : claims) grid.push_back(c / 2.0);
  std::sort(grid.begin(), grid.end());

  double threshold = grid.back();
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double a = awarded(grid[g]) - estate;
    const double b = awarded(grid[g + 1]) - estate;
    if (a == 0.0) {
      threshold = grid[g];
      break;
    }
    if ((a < 0.0) != (b < 0.0) || b == 0.0) {
      threshold = b == a ? grid[g] : grid[g] + (grid[g + 1] - grid[g]) * a / (a - b);
      break;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = award(i, threshold);
  return out;
}

double conjugate_objective(double e, double price, double plan, double penalty) {
  return -penalty * std::max(plan - e, 0.0) + price * e;
}

GridMax conjugate_by_grid(double price, double plan, double cap, double penalty, int points) {
  GridMax best{0.0, -std::numeric_limits<double>::infinity()};
  for (int g = 0; g < points; ++g) {
    const double e = cap * g / (points - 1);
    const double v = conjugate_objective(e, price, plan, penalty);
    if (v > best.value) best = {e, v};
  }
  return best;
}

std::vector<ItemId> best_subset_by_enumeration(std::span<const double> relevance,
                                               std::span<const double> price,
                                               std::span<const ProviderId> item_provider,
                                               double expected_traffic, int list_size) {
  const int n = static_cast<int>(relevance.size());
  std::vector<double> adjusted(n);
  for (int i = 0; i < n; ++i)
    adjusted[i] = relevance[i] / expected_traffic - price[item_provider[i]];

  std::vector<ItemId> best;
  double best_adj = -std::numeric_limits<double>::infinity();
  double best_rel = -std::numeric_limits<double>::infinity();
  // Walk all n-bit masks with exactly list_size bits set.
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != list_size) continue;
    std::vector<ItemId> set;
    double adj = 0.0, rel = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        set.push_back(i);
        adj += adjusted[i];
        rel += relevance[i];
      }
    }
    const bool better = adj > best_adj || (adj == best_adj && rel > best_rel) ||
                        (adj == best_adj && rel == best_rel && set < best);
    if (best.empty() || better) {
      best = std::move(set);
      best_adj = adj;
      best_rel = rel;
    }
  }
  std::sort(best.begin(), best.end(), [&](ItemId a, ItemId b) {
    if (adjusted[a] != adjusted[b]) return adjusted[a] > adjusted[b];
    if (relevance[a] != relevance[b]) return relevance[a] > relevance[b];
    return a < b;
  });
  return best;
}

double ideal_dcg_by_permutation(std::span<const double> relevance, int list_size) {
  std::vector<int> idx(relevance.size());
  std::iota(idx.begin(), idx.end(), 0);
  double best = 0.0;
  // Every permutation's prefix is one ordered arrangement; duplicates are
  // harmless for a maximum.
  do {
    double v = 0.0;
    for (int r = 0; r < list_size; ++r) v += relevance[idx[r]] / std::log2(r + 2.0);
    best = std::max(best, v);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

}  // namespace bankfair::verify
