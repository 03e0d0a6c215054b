#include <numeric>

#include <gtest/gtest.h>

#include "bankfair/domain.hpp"
#include "bankfair/errors.hpp"
#include "bankfair/metrics.hpp"
#include "bankfair/random.hpp"
#include "bankfair/reranker.hpp"
#include "bankfair/verify/acceptance.hpp"
#include "bankfair/verify/oracles.hpp"

namespace bankfair {
namespace {

Catalog two_providers(int first, int second) {
  std::vector<ProviderId> owner(first, 0);
  owner.insert(owner.end(), second, 1);
  return Catalog::Create(owner, 2);
}

DualState dual_with_prices(std::vector<double> price, std::vector<double> penalty,
                           std::vector<double> cap, double step_size = 0.1) {
  DualState d = DualState::Initial(std::move(penalty), std::move(cap), step_size);
  d.prices = std::move(price);
  return d;
}

TEST(Penalties, UniformBranch) {
  const auto penalty = compute_penalties(Catalog::Create({0, 0, 0, 1, 2}, 3), 0.0);
  for (double l : penalty) EXPECT_NEAR(l, 1.0 / 3, 1e-12);
}

TEST(Penalties, InventoryBranchAndMix) {
  const Catalog c = two_providers(10, 5);
  EXPECT_EQ(compute_penalties(c, 1.0), (std::vector<double>{1.0, 2.0}));
  const auto mixed = compute_penalties(c, 0.5);
  EXPECT_NEAR(mixed[0], 0.75, 1e-12);
  EXPECT_NEAR(mixed[1], 1.25, 1e-12);
}

TEST(Caps, Examples) {
  const auto caps = compute_caps(two_providers(3, 1), 5, 10.0);
  EXPECT_NEAR(caps[0], 37.5, 1e-12);
  EXPECT_NEAR(caps[1], 12.5, 1e-12);
  EXPECT_EQ(compute_caps(two_providers(3, 1), 5, 0.0), (std::vector<double>{0, 0}));
  EXPECT_EQ(compute_caps(Catalog::Create({0, 0, 0}, 1), 4, 6.0), (std::vector<double>{24}));
}

TEST(DualState, InitialIsFeasibleAndRejectsBadInput) {
  const DualState d = DualState::Initial({0.5, 1}, {3, 4}, 0.2);
  EXPECT_TRUE(d.feasible());
  EXPECT_EQ(d.prices, (std::vector<double>{0, 0}));
  EXPECT_EQ(d.weight, (std::vector<double>{1, 1}));
  EXPECT_THROW(DualState::Initial({1}, {-1}, 0.1), Error);
  EXPECT_THROW(DualState::Initial({1}, {1}, 0.0), Error);
  EXPECT_THROW(DualState::Initial({1}, {1}, 0.1, {0.0}), Error);
}

TEST(SelectList, ZeroPriceIsPlainTopK) {
  const std::vector<double> rel{0.2, 0.9, 0.4, 0.9, 0.1};
  const Catalog c = Catalog::Create({0, 1, 0, 1, 1}, 2);
  const RankedList got = select_list(rel, DualState::Initial({1, 1}, {9, 9}, 0.1), c, 3.0, 3);
  EXPECT_EQ(got.items, (std::vector<ItemId>{1, 3, 2}));
  EXPECT_EQ(got, top_k(rel, 3));
  EXPECT_EQ(got.scores, (std::vector<double>{0.9, 0.9, 0.4}));
}

TEST(SelectList, PriceSwitchesTheWinner) {
  const std::vector<double> rel{0.9, 0.8};
  const Catalog c = Catalog::Create({0, 1}, 2);
  const RankedList got = select_list(rel, dual_with_prices({0.5, 0}, {1, 1}, {9, 9}), c, 1.0, 1);
  EXPECT_EQ(got.items, (std::vector<ItemId>{1}));
}

TEST(SelectList, NegativePriceLiftsAProvider) {
  const std::vector<double> rel{0.9, 0.8, 0.1};
  const Catalog c = Catalog::Create({0, 0, 1}, 2);
  const RankedList got = select_list(rel, dual_with_prices({0, -0.75}, {1, 1}, {9, 9}), c, 1.0, 2);
  // Adjusted values 0.9, 0.8, 0.85.
  EXPECT_EQ(got.items, (std::vector<ItemId>{0, 2}));
}

TEST(SelectList, RejectsOversizedList) {
  const std::vector<double> rel{0.9, 0.8};
  EXPECT_THROW(
      select_list(rel, DualState::Initial({1, 1}, {1, 1}, 0.1), Catalog::Create({0, 1}, 2), 1.0, 3),
      Error);
}

TEST(SelectList, MatchesEnumerationOnRandomInstances) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(4));
    const int n = k + static_cast<int>(rng.below(12 - k + 1));
    const int providers = 1 + static_cast<int>(rng.below(std::min(n, 3)));
    std::vector<ProviderId> owner(n);
    for (int i = 0; i < n; ++i)
      owner[i] = i < providers ? i : static_cast<ProviderId>(rng.below(providers));
    std::vector<double> rel(n);
    for (double& s : rel) s = static_cast<double>(rng.below(5)) / 4.0;
    DualState d = DualState::Initial(std::vector<double>(providers, 1.0),
                                     std::vector<double>(providers, 5.0), 0.1);
    for (double& m : d.prices) m = (static_cast<double>(rng.below(9)) - 4.0) / 8.0;
    const double expected_traffic = 2.0;
    EXPECT_EQ(select_list(rel, d, Catalog::Create(owner, providers), expected_traffic, k).items,
              verify::best_subset_by_enumeration(rel, d.prices, owner, expected_traffic, k))
        << "trial " << trial;
  }
}

TEST(Conjugate, ClosedFormBranches) {
  const std::vector<double> plan{4.0};
  EXPECT_EQ(conjugate_argmax(dual_with_prices({0.0}, {1}, {7}), plan).target_exposure[0], 7.0);
  EXPECT_EQ(conjugate_argmax(dual_with_prices({-0.1}, {1}, {7}), plan).target_exposure[0], 4.0);
  // Any price inside [-penalty, 0) keeps the plan, including below -M.
  EXPECT_EQ(conjugate_argmax(dual_with_prices({-0.9}, {1}, {7}), std::vector<double>{0.5})
                .target_exposure[0],
            0.5);
  // Plan above the cap is capped.
  EXPECT_EQ(conjugate_argmax(dual_with_prices({-0.1}, {1}, {3}), plan).target_exposure[0], 3.0);
}

TEST(Conjugate, ClosedFormMatchesGridSearch) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const double penalty = rng.uniform(0.01, 2.0);
    const double plan = rng.uniform(0.0, 5.0);
    const double cap = rng.uniform(plan, 10.0);
    const double price = rng.uniform(-penalty, 1.0);
    const DualState d = dual_with_prices({price}, {penalty}, {cap});
    const std::vector<double> plans{plan};
    const auto grid = verify::conjugate_by_grid(price, plan, cap, penalty);
    EXPECT_NEAR(conjugate_argmax(d, plans).target_exposure[0], grid.argmax, 1e-3);
    EXPECT_NEAR(conjugate_value(d, plans), grid.value, 1e-3);
  }
}

TEST(DualStep, FixedPointWhenGradientIsZero) {
  const DualState d = dual_with_prices({-0.2, 0.3}, {1, 1}, {5, 5});
  const std::vector<double> x{2, 1};
  EXPECT_EQ(dual_step(d, x, x).prices, d.prices);
}

TEST(DualStep, ProjectionHoldsAtTheBoundary) {
  const DualState d = dual_with_prices({-1.0}, {1}, {5});
  EXPECT_EQ(dual_step(d, std::vector<double>{0}, std::vector<double>{3}).prices[0], -1.0);
}

TEST(DualStep, HandEvaluatedStep) {
  const DualState d = dual_with_prices({0, 0}, {1, 1}, {5, 5}, 0.1);
  // g = -x + target_exposure = (2, -1).
  const DualState next = dual_step(d, std::vector<double>{0, 1}, std::vector<double>{2, 0});
  EXPECT_NEAR(next.prices[0], -0.2, 1e-12);
  EXPECT_NEAR(next.prices[1], 0.1, 1e-12);
}

TEST(DualStep, WeightScalesTheStep) {
  DualState d = dual_with_prices({0}, {1}, {5}, 0.1);
  d.weight = {2.0};
  EXPECT_NEAR(dual_step(d, std::vector<double>{0}, std::vector<double>{2}).prices[0], -0.1, 1e-12);
}

TEST(StepSize, DefaultShrinksWithTraffic) {
  EXPECT_NEAR(default_step_size(100.0), 1e-3, 1e-15);
  EXPECT_GT(default_step_size(10.0), default_step_size(1000.0));
  EXPECT_EQ(default_step_size(0.0), 1.0);
}

TEST(HashMu, SensitiveToEveryBit) {
  const std::vector<double> a{0.0, -0.5}, b{0.0, -0.5000000001};
  EXPECT_EQ(hash_prices(a), hash_prices(a));
  EXPECT_NE(hash_prices(a), hash_prices(b));
}

std::vector<UserRequest> users(int count, std::shared_ptr<const std::vector<double>> rel) {
  std::vector<UserRequest> out;
  for (int t = 0; t < count; ++t) out.push_back(UserRequest{"u" + std::to_string(t), 0, t, rel});
  return out;
}

TEST(RunInterval, ZeroPlanKeepsTopK) {
  SynthConfig cfg;
  cfg.num_items = 40;
  cfg.num_providers = 4;
  cfg.horizon = 1;
  cfg.traffic = {30};
  const Instance inst = synth_instance(cfg, 2);
  RerankConfig rc;
  rc.list_size = 5;
  const IntervalOutcome out =
      run_interval(inst.requests, IntervalPlan{std::vector<double>(4, 0.0)}, rc, inst.catalog, 30);
  for (std::size_t t = 0; t < inst.requests.size(); ++t) {
    EXPECT_EQ(out.lists[t], top_k(inst.requests[t].scores(), 5));
  }
  for (double m : out.final_dual.prices) EXPECT_EQ(m, 0.0);
}

TEST(RunInterval, ToyGuaranteesTheRequirement) {
  const Instance three = verify::fairness_toy(3);
  RerankConfig rc;
  rc.list_size = 5;
  const IntervalOutcome out =
      run_interval(three.requests, IntervalPlan{{4.0, 0.0}}, rc, three.catalog, 3.0);
  EXPECT_GE(out.ledger.earned[0], 4.0);
  EXPECT_EQ(out.ledger.earned[0] + out.ledger.earned[1], 15.0);
  EXPECT_EQ(out.price_hashes.size(), 3u);
}

TEST(RunInterval, LedgerTracksCumulativeAndShortfall) {
  const Instance inst = verify::fairness_toy(2);
  RerankConfig rc;
  rc.list_size = 5;
  const std::vector<double> prior{10, 20};
  const IntervalOutcome out =
      run_interval(inst.requests, IntervalPlan{{4.0, 0.0}}, rc, inst.catalog, 2.0, prior);
  for (int p = 0; p < 2; ++p) {
    EXPECT_EQ(out.ledger.cumulative[p], prior[p] + out.ledger.earned[p]);
  }
  EXPECT_EQ(out.ledger.unearned[0], 4.0 - out.ledger.earned[0]);
}

TEST(RunInterval, WarmStartUsesTheGivenPrices) {
  const Instance inst = verify::fairness_toy(1);
  RerankConfig rc;
  rc.list_size = 1;
  const std::vector<double> price{-0.5, 0.0};
  const IntervalOutcome out =
      run_interval(inst.requests, IntervalPlan{{1.0, 0.0}}, rc, inst.catalog, 1.0, {}, price);
  // 0.58 + 0.5 beats 0.9 at the first request.
  EXPECT_EQ(out.lists[0].items, (std::vector<ItemId>{0}));
}

TEST(RunInterval, ZeroPlanProviderCannotBeLifted) {
  const Instance inst = verify::fairness_toy(1);
  RerankConfig rc;
  rc.list_size = 1;
  const std::vector<double> price{-0.5, 0.0};
  const IntervalOutcome out =
      run_interval(inst.requests, IntervalPlan{{0.0, 0.0}}, rc, inst.catalog, 1.0, {}, price);
  EXPECT_EQ(out.lists[0].items, (std::vector<ItemId>{4}));
}

TEST(RunInterval, PerRequestTargetStaysFeasible) {
  const Instance inst = verify::fairness_toy(3);
  RerankConfig rc;
  rc.list_size = 5;
  rc.target = DualTarget::kPerRequest;
  const IntervalOutcome out =
      run_interval(inst.requests, IntervalPlan{{4.0, 0.0}}, rc, inst.catalog, 3.0);
  EXPECT_TRUE(out.final_dual.feasible());
}

TEST(RunInterval, RejectsMismatchedPlan) {
  const Instance inst = verify::fairness_toy(1);
  EXPECT_THROW(run_interval(inst.requests, IntervalPlan{{1.0}}, RerankConfig{}, inst.catalog, 1.0),
               Error);
}

TEST(RerankConfig, Validates) {
  RerankConfig rc;
  EXPECT_NO_THROW(rc.validate());
  rc.list_size = 0;
  EXPECT_THROW(rc.validate(), ConfigError);
  rc = RerankConfig{};
  rc.small_provider_weight = 1.5;
  EXPECT_THROW(rc.validate(), ConfigError);
  rc = RerankConfig{};
  rc.step_size = -1.0;
  EXPECT_THROW(rc.validate(), ConfigError);
}

TEST(DualTargetNames, RoundTrip) {
  for (auto t : {DualTarget::kOneSided, DualTarget::kPerRequest}) {
    EXPECT_EQ(parse_dual_target(dual_target_name(t)), t);
  }
  EXPECT_THROW(parse_dual_target("both"), ConfigError);
}

}  // namespace
}  // namespace bankfair
