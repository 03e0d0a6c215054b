#include "bankfair/report.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "bankfair/errors.hpp"

namespace bankfair {
namespace {

std::string num(double v) {
  return fmt::format("{:.17g}", v);
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << body;
}

}  // namespace

nlohmann::ordered_json report_to_json(const SimReport& r) {
  nlohmann::ordered_json j;
  j["ndcg_at_k"] = r.ndcg_at_k;
  j["vio_at_k"] = r.vio_at_k;
  j["esp_at_k"] = r.esp_at_k;
  j["claim_rate"] = r.claim_rate;
  j["num_users"] = r.per_user_ndcg.size();
  j["per_interval_accuracy"] = r.per_interval_accuracy;
  j["min_exposure"] = r.min_exposure;
  j["per_provider_cumulative_exposure"] = r.cumulative_exposure;
  auto& intervals = j["intervals"] = nlohmann::ordered_json::array();
  for (const auto& s : r.intervals) {
    nlohmann::ordered_json row;
    row["interval"] = s.interval;
    row["traffic"] = s.traffic;
    row["forecast"] = s.forecast;
    row["accuracy"] = s.accuracy;
    row["vio"] = s.vio;
    row["esp_partial"] = s.esp_partial;
    row["plan_total"] = s.plan_total;
    row["feasible_ratio"] = s.feasible_ratio;
    intervals.push_back(std::move(row));
  }
  j["config"] = r.config_echo;
  return j;
}

std::string intervals_csv(const SimReport& r) {
  std::string out = "interval,traffic,accuracy,vio,esp_partial\n";
  for (const auto& s : r.intervals) {
    out += fmt::format("{},{},{},{},{}\n", s.interval, s.traffic, num(s.accuracy), num(s.vio),
                       num(s.esp_partial));
  }
  return out;
}

std::string allocations_csv(const SimReport& r) {
  std::string out = "interval,provider,estate,claim,award,theta\n";
  for (const auto& a : r.allocations) {
    out += fmt::format("{},{},{},{},{},{}\n", a.interval, a.provider, num(a.estate), num(a.claim),
                       num(a.award), num(a.level));
  }
  return out;
}

std::string decisions_csv(const SimReport& r) {
  std::string out = "interval,t,user_id";
  const std::size_t k = r.decisions.empty() ? 0 : r.decisions.front().items.size();
  for (std::size_t i = 1; i <= k; ++i) out += fmt::format(",item_{}", i);
  out += ",mu_snapshot_hash\n";
  for (const auto& d : r.decisions) {
    out += fmt::format("{},{},{},{},{:016x}\n", d.interval, d.t, d.user_id, fmt::join(d.items, ","),
                       d.price_hash);
  }
  return out;
}

void write_report(const std::string& dir, const SimReport& report) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  write_file(fs::path(dir) / "report.json", report_to_json(report).dump(2) + "\n");
  write_file(fs::path(dir) / "intervals.csv", intervals_csv(report));
  write_file(fs::path(dir) / "allocations.csv", allocations_csv(report));
  if (!report.decisions.empty()) write_file(fs::path(dir) / "decisions.csv", decisions_csv(report));
}

}  // namespace bankfair
