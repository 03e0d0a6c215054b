#pragma once

#include <span>
#include <vector>

#include "bankfair/domain.hpp"

// Slow, independent reference implementations used to check the library.
// None of them call into the code they check.
namespace bankfair::verify {

// Talmud awards found by scanning a threshold grid: the total award is
// piecewise linear in the threshold, so the grid is augmented with every
// kink (the half-claims) and the crossing is located by linear
// interpolation between adjacent grid points.
std::vector<double> talmud_by_grid(std::span<const double> claims, double estate,
                                   int grid_points = 4001);

// Objective maximised by the conjugate step for one provider:
// -penalty [plan - e]_+ + price e.
double conjugate_objective(double e, double price, double plan, double penalty);

struct GridMax {
  double argmax = 0.0;
  double value = 0.0;
};

// Maximises conjugate_objective over `points` evenly spaced values in
// [0, cap]. The first maximiser wins on ties.
GridMax conjugate_by_grid(double price, double plan, double cap, double penalty,
                          int points = 10001);

// Enumerates every K-subset of items and returns the winner under the
// documented ordering: largest adjusted total, then largest relevance total,
// then the lexicographically smallest sorted id set. Items come back sorted by
// (adjusted desc, relevance desc, id asc).
std::vector<ItemId> best_subset_by_enumeration(std::span<const double> relevance,
                                               std::span<const double> price,
                                               std::span<const ProviderId> item_provider,
                                               double expected_traffic, int list_size);

// Best achievable DCG over every ordered K-arrangement of the items.
double ideal_dcg_by_permutation(std::span<const double> relevance, int list_size);

}  // namespace bankfair::verify
