#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "bankfair/domain.hpp"
#include "bankfair/errors.hpp"
#include "bankfair/random.hpp"

namespace bankfair {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("bankfair_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path file(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(Catalog, InventoryCountsItems) {
  const Catalog c = Catalog::Create({0, 1, 1, 2, 2, 2}, 3);
  EXPECT_EQ(c.num_items(), 6);
  EXPECT_EQ(std::vector<int>(c.inventory().begin(), c.inventory().end()),
            (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(c.provider_of(4), 2);
}

TEST(Catalog, ExposureOfCountsPerProvider) {
  const Catalog c = Catalog::Create({0, 1, 1, 2}, 3);
  const std::vector<ItemId> items{1, 2, 3};
  EXPECT_EQ(c.exposure_of(items), (std::vector<double>{0, 2, 1}));
}

TEST(Catalog, RejectsInvalidMappings) {
  EXPECT_THROW(Catalog::Create({0, 3}, 2), Error);
  EXPECT_THROW(Catalog::Create({0, 0}, 2), Error);  // provider 1 has no items
  EXPECT_THROW(Catalog::Create({}, 0), Error);
}

TEST(UserRequest, DegenerateWhenTooFewPositiveScores) {
  auto rel = std::make_shared<const std::vector<double>>(std::vector<double>{0.5, 0.0, 0.2});
  const UserRequest r{"u", 0, 0, rel};
  EXPECT_FALSE(r.degenerate(2));
  EXPECT_TRUE(r.degenerate(3));
}

TEST(FairnessPolicy, Validates) {
  EXPECT_NO_THROW((FairnessPolicy{{1, 0}, 0.9, 5}.validate()));
  EXPECT_THROW((FairnessPolicy{{-1}, 0.9, 5}.validate()), Error);
  EXPECT_THROW((FairnessPolicy{{1}, 1.5, 5}.validate()), Error);
  EXPECT_THROW((FairnessPolicy{{1}, 0.9, 0}.validate()), Error);
}

TEST(Synth, ToyScale) {
  SynthConfig cfg;
  cfg.num_items = 8;
  cfg.num_providers = 2;
  cfg.horizon = 2;
  cfg.traffic = {3, 2};
  const Instance inst = synth_instance(cfg, 1);
  EXPECT_EQ(std::vector<int>(inst.catalog.inventory().begin(), inst.catalog.inventory().end()),
            (std::vector<int>{4, 4}));
  ASSERT_EQ(inst.requests.size(), 5u);
  EXPECT_EQ(inst.interval_requests(0).size() * 5, 15u);
  EXPECT_EQ(inst.interval_requests(1).size() * 5, 10u);
}

TEST(Synth, DeterministicForAFixedSeed) {
  SynthConfig cfg;
  cfg.num_items = 30;
  cfg.num_providers = 3;
  cfg.horizon = 4;
  cfg.mean_traffic = 12;
  const Instance a = synth_instance(cfg, 42);
  const Instance b = synth_instance(cfg, 42);
  EXPECT_EQ(a.catalog, b.catalog);
  EXPECT_EQ(a.traffic, b.traffic);
  ASSERT_EQ(a.requests.size(), b.requests.size());
  for (std::size_t i = 0; i < a.requests.size(); ++i) {
    EXPECT_EQ(*a.requests[i].relevance, *b.requests[i].relevance);
    EXPECT_EQ(a.requests[i].user_id, b.requests[i].user_id);
  }
  const Instance c = synth_instance(cfg, 43);
  EXPECT_NE(*a.requests[0].relevance, *c.requests[0].relevance);
}

TEST(Synth, UniformRelevanceMeanIsOneHalf) {
  SynthConfig cfg;
  cfg.num_items = 100;
  cfg.num_providers = 4;
  cfg.horizon = 1;
  cfg.traffic = {100};
  const Instance inst = synth_instance(cfg, 9);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : inst.requests) {
    for (double s : r.scores()) {
      sum += s;
      ++count;
    }
  }
  EXPECT_EQ(count, 10000u);
  EXPECT_NEAR(sum / count, 0.5, 0.02);
}

TEST(Synth, InventorySkewFavoursEarlyProviders) {
  SynthConfig cfg;
  cfg.num_items = 60;
  cfg.num_providers = 3;
  cfg.inventory_skew = 1.0;
  cfg.horizon = 1;
  cfg.traffic = {1};
  const Instance inst = synth_instance(cfg, 1);
  const auto inv = inst.catalog.inventory();
  EXPECT_GT(inv[0], inv[1]);
  EXPECT_GT(inv[1], inv[2]);
  EXPECT_EQ(std::accumulate(inv.begin(), inv.end(), 0), 60);
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.num_items = 3;
  cfg.num_providers = 5;
  EXPECT_THROW(synth_instance(cfg, 1), ConfigError);
}

TEST(Synth, JsonRoundTrip) {
  SynthConfig cfg;
  cfg.num_items = 17;
  cfg.relevance.kind = RelevanceKind::kBeta;
  cfg.relevance.a = 3.0;
  cfg.traffic = {1, 2, 3};
  const nlohmann::json j = cfg;
  const auto back = j.get<SynthConfig>();
  EXPECT_EQ(back.num_items, 17);
  EXPECT_EQ(back.relevance.kind, RelevanceKind::kBeta);
  EXPECT_EQ(back.relevance.a, 3.0);
  EXPECT_EQ(back.traffic, cfg.traffic);
}

TEST(Resample, EqualCountsGiveEqualShares) {
  for (double temperature : {0.05, 0.5, 1.0}) {
    const auto p = resample_probabilities(TrafficSeries{{7, 7, 7, 7}}, temperature);
    for (double v : p) EXPECT_NEAR(v, 0.25, 1e-12);
  }
}

TEST(Resample, LowTemperatureConcentratesMass) {
  const auto p = resample_probabilities(TrafficSeries{{10, 0}}, 0.01);
  EXPECT_GE(100 * p[0], 99.0);
  const TrafficSeries out = resample_traffic(TrafficSeries{{10, 0}}, 0.01, 100, 4);
  EXPECT_GE(out.counts[0], 99);
  EXPECT_EQ(out.total(), 100);
}

TEST(Resample, MonteCarloMatchesSoftmax) {
  const TrafficSeries series{{120, 80, 200, 150, 60, 90, 170}};
  const auto p = resample_probabilities(series, 1.0);
  // Independent softmax of counts / max(counts).
  std::vector<double> expected(series.counts.size());
  double z = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    z += expected[i] = std::exp(series.counts[i] / 200.0);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(p[i], expected[i] / z, 1e-12);

  const std::int64_t draws = 100000;
  const TrafficSeries out = resample_traffic(series, 1.0, draws, 77);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double share = static_cast<double>(out.counts[i]) / draws;
    const double se = std::sqrt(p[i] * (1 - p[i]) / draws);
    EXPECT_NEAR(share, p[i], 5 * se) << "interval " << i;
  }
}

TEST(Resample, RejectsBadArguments) {
  EXPECT_THROW(resample_probabilities(TrafficSeries{{1}}, 0.0), DomainError);
  EXPECT_THROW(resample_probabilities(TrafficSeries{}, 0.5), ConfigError);
  EXPECT_THROW(resample_traffic(TrafficSeries{{1}}, 0.5, 0, 1), ConfigError);
}

TEST(Resample, RequestsFollowTheNewTraffic) {
  SynthConfig cfg;
  cfg.num_items = 10;
  cfg.num_providers = 2;
  cfg.traffic = {5, 5};
  cfg.horizon = 2;
  const Instance inst = synth_instance(cfg, 1);
  const Instance out = resample_requests(inst, TrafficSeries{{2, 7}}, 3);
  EXPECT_EQ(out.requests.size(), 9u);
  EXPECT_EQ(out.interval_requests(1).size(), 7u);
  EXPECT_EQ(out.interval_requests(1)[6].arrival_seq, 6);
}

TEST(Io, GroupsRowsIntoIntervals) {
  TempDir dir;
  write_file(dir.file("log.csv"),
             "user_id,item_id,provider_id,timestamp,score\n"
             "a,i1,p1,100,0.5\n"
             "b,i2,p1,200,0.7\n"
             "a,i2,p1,300,0.1\n");
  const LoadResult r = load_interactions(dir.file("log.csv").string());
  EXPECT_FALSE(r.no_requests);
  EXPECT_EQ(r.instance.traffic.counts, (std::vector<std::int64_t>{3}));
  EXPECT_EQ(r.instance.catalog.num_items(), 2);
  EXPECT_EQ(r.instance.catalog.num_providers(), 1);
  // Without a matrix a user's vector holds only their own logged scores.
  EXPECT_EQ(*r.instance.requests[1].relevance, (std::vector<double>{0.0, 0.7}));
}

TEST(Io, SixteenDailyIntervals) {
  TempDir dir;
  const std::int64_t first_day = 1650672000;  // 2022-04-23 00:00 UTC
  std::string csv = "user_id,item_id,provider_id,timestamp,score\n";
  for (int d = 0; d < 16; d += 3)
    csv += "u,i,p," + std::to_string(first_day + d * 86400 + 5) + ",0.5\n";
  csv += "u,i,p," + std::to_string(first_day + 15 * 86400 + 7) + ",0.5\n";
  write_file(dir.file("log.csv"), csv);
  const LoadResult r = load_interactions(dir.file("log.csv").string());
  EXPECT_EQ(r.instance.traffic.horizon(), 16);
  EXPECT_EQ(r.instance.traffic.counts[1], 0);
  EXPECT_EQ(r.instance.traffic.counts[15], 2);
}

TEST(Io, EmptyFileFlagsNoRequests) {
  TempDir dir;
  write_file(dir.file("log.csv"), "user_id,item_id,provider_id,timestamp,score\n");
  const LoadResult r = load_interactions(dir.file("log.csv").string());
  EXPECT_TRUE(r.no_requests);
  EXPECT_EQ(r.instance.traffic.horizon(), 0);
}

TEST(Io, MalformedRowReportsRowNumber) {
  TempDir dir;
  write_file(dir.file("log.csv"),
             "user_id,item_id,provider_id,timestamp,score\n"
             "a,i1,p1,100,0.5\n"
             "b,i2,p1,noon,0.7\n");
  try {
    load_interactions(dir.file("log.csv").string());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3);
  }
}

TEST(Io, ItemWithTwoProvidersIsInconsistent) {
  TempDir dir;
  write_file(dir.file("log.csv"),
             "user_id,item_id,provider_id,timestamp,score\n"
             "a,i1,p1,100,0.5\n"
             "b,i1,p2,200,0.7\n");
  EXPECT_THROW(load_interactions(dir.file("log.csv").string()), ConsistencyError);
}

TEST(Io, MissingFileIsAnIoError) {
  EXPECT_THROW(load_interactions("/nonexistent/bankfair/log.csv"), IoError);
}

TEST(Io, RoundTripReproducesTheInstance) {
  TempDir dir;
  SynthConfig cfg;
  cfg.num_items = 12;
  cfg.num_providers = 3;
  cfg.horizon = 3;
  cfg.mean_traffic = 6;
  const Instance inst = synth_instance(cfg, 5);
  write_interactions(dir.path().string(), inst);
  LoadOptions opts;
  opts.relevance_path = dir.file("relevance.bin").string();
  opts.items_path = dir.file("items.csv").string();
  const Instance back = load_interactions(dir.file("interactions.csv").string(), opts).instance;
  EXPECT_EQ(back.catalog.item_provider().size(), inst.catalog.item_provider().size());
  EXPECT_TRUE(std::equal(back.catalog.item_provider().begin(), back.catalog.item_provider().end(),
                         inst.catalog.item_provider().begin()));
  EXPECT_EQ(back.traffic, inst.traffic);
  ASSERT_EQ(back.requests.size(), inst.requests.size());
  for (std::size_t i = 0; i < inst.requests.size(); ++i) {
    EXPECT_EQ(back.requests[i].user_id, inst.requests[i].user_id);
    EXPECT_EQ(back.requests[i].interval, inst.requests[i].interval);
    EXPECT_EQ(*back.requests[i].relevance, *inst.requests[i].relevance);
  }
}

TEST(Io, RelevanceMatrixRoundTripBothWidths) {
  TempDir dir;
  const RelevanceMatrix m{2, 3, {0.5, 0.25, 1.0, 0.0, 0.125, 0.75}};
  for (int width : {4, 8}) {
    const auto path = dir.file("m" + std::to_string(width) + ".bin").string();
    write_relevance_matrix(path, m, width);
    const RelevanceMatrix back = read_relevance_matrix(path);
    EXPECT_EQ(back.num_users, 2u);
    EXPECT_EQ(back.values, m.values);
  }
}

TEST(Io, CorruptMatrixHeaderIsRejected) {
  TempDir dir;
  write_file(dir.file("bad.bin"), "XXXXnot a matrix");
  EXPECT_THROW(read_relevance_matrix(dir.file("bad.bin").string()), Error);
}

}  // namespace
}  // namespace bankfair
