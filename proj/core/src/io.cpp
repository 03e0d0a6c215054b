#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "bankfair/domain.hpp"
#include "bankfair/errors.hpp"

namespace bankfair {
namespace {

constexpr char kMagic[4] = {'B', 'F', 'R', 'M'};

static_assert(std::endian::native == std::endian::little,
              "relevance matrix I/O assumes a little-endian host");

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::int64_t parse_int(std::string_view s, const char* what, long row) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("malformed {} '{}'", what, s), row);
  }
  return v;
}

double parse_double(std::string_view s, const char* what, long row) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(fmt::format("malformed {} '{}'", what, s), row);
  }
  return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Dense ids in order of first appearance.
class Interner {
 public:
  int intern(std::string_view key) {
    auto [it, inserted] = index_.try_emplace(std::string(key), static_cast<int>(labels_.size()));
    if (inserted) labels_.emplace_back(key);
    return it->second;
  }
  int find(std::string_view key) const {
    auto it = index_.find(std::string(key));
    return it == index_.end() ? -1 : it->second;
  }
  int size() const { return static_cast<int>(labels_.size()); }
  std::vector<std::string> take() { return std::move(labels_); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> labels_;
};

struct Row {
  int user;
  int item;
  std::int64_t timestamp;
  double score;
  long line;
};

void assign_provider(std::vector<int>& item_provider, int item, int provider,
                     std::string_view item_label, long line) {
  if (item >= static_cast<int>(item_provider.size())) item_provider.resize(item + 1, -1);
  if (item_provider[item] == -1) {
    item_provider[item] = provider;
  } else if (item_provider[item] != provider) {
    throw ConsistencyError(
        fmt::format("item '{}' is listed under two providers (row {})", item_label, line));
  }
}

}  // namespace

LoadResult load_interactions(const std::string& path, const LoadOptions& options) {
  const CsvSchema& schema = options.schema;
  if (schema.interval_seconds <= 0) throw ConfigError("interval length must be > 0 seconds");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interactions file '" + path + "'");

  Interner items, providers, users;
  std::vector<int> item_provider;

  if (options.items_path) {
    std::ifstream listing(*options.items_path);
    if (!listing) throw IoError("cannot open item listing '" + *options.items_path + "'");
    std::string line;
    long line_no = 0;
    while (std::getline(listing, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto fields = split(line, ',');
      if (line_no == 1 && trim(fields[0]) == schema.item_column) continue;
      if (fields.size() < 2)
        throw ParseError("item listing row needs item_id,provider_id", line_no);
      const auto item_label = trim(fields[0]);
      const int item = items.intern(item_label);
      const int provider = providers.intern(trim(fields[1]));
      assign_provider(item_provider, item, provider, item_label, line_no);
    }
  }

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line) || trim(line).empty()) {
    return LoadResult{Instance{}, true};
  }
  ++line_no;
  const auto header = split(line, ',');
  auto column = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (trim(header[c]) == name) return c;
    }
    throw ParseError("missing column '" + name + "' in header", 1);
  };
  const std::size_t c_user = column(schema.user_column);
  const std::size_t c_item = column(schema.item_column);
  const std::size_t c_provider = column(schema.provider_column);
  const std::size_t c_ts = column(schema.timestamp_column);
  const std::size_t c_score = column(schema.score_column);
  const std::size_t width = std::max({c_user, c_item, c_provider, c_ts, c_score}) + 1;

  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() < width) {
      throw ParseError(fmt::format("expected at least {} fields, got {}", width, fields.size()),
                       line_no);
    }
    const auto item_label = trim(fields[c_item]);
    const auto provider_label = trim(fields[c_provider]);
    const auto user_label = trim(fields[c_user]);
    if (item_label.empty() || provider_label.empty() || user_label.empty()) {
      throw ParseError("empty identifier", line_no);
    }
    const std::int64_t ts = parse_int(fields[c_ts], "timestamp", line_no);
    const double score = parse_double(fields[c_score], "score", line_no);
    if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
      throw ParseError(fmt::format("score {} outside [0, 1]", score), line_no);
    }
    const int item = items.intern(item_label);
    const int provider = providers.intern(provider_label);
    assign_provider(item_provider, item, provider, item_label, line_no);
    rows.push_back(Row{users.intern(user_label), item, ts, score, line_no});
  }
  if (rows.empty()) return LoadResult{Instance{}, true};

  Instance inst;
  const int num_providers = providers.size();
  inst.catalog =
      Catalog::Create(std::move(item_provider), num_providers, items.take(), providers.take());
  const int num_items = inst.catalog.num_items();
  const std::vector<std::string> user_labels = users.take();

  std::vector<std::shared_ptr<const std::vector<double>>> user_scores(user_labels.size());
  if (options.relevance_path) {
    const RelevanceMatrix matrix = read_relevance_matrix(*options.relevance_path);
    if (matrix.num_items != static_cast<std::uint32_t>(num_items)) {
      throw ConsistencyError(fmt::format("relevance matrix has {} items, catalog has {}",
                                         matrix.num_items, num_items));
    }
    if (matrix.num_users < user_labels.size()) {
      throw ConsistencyError(fmt::format("relevance matrix has {} users, log has {}",
                                         matrix.num_users, user_labels.size()));
    }
    for (std::size_t u = 0; u < user_labels.size(); ++u) {
      const auto r = matrix.row(u);
      user_scores[u] = std::make_shared<const std::vector<double>>(r.begin(), r.end());
    }
  } else {
    std::vector<std::vector<double>> dense(user_labels.size(), std::vector<double>(num_items, 0.0));
    for (const Row& row : rows) dense[row.user][row.item] = row.score;
    for (std::size_t u = 0; u < dense.size(); ++u) {
      user_scores[u] = std::make_shared<const std::vector<double>>(std::move(dense[u]));
    }
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
  const std::int64_t first =
      floor_div(rows.front().timestamp - schema.origin, schema.interval_seconds);
  const std::int64_t last =
      floor_div(rows.back().timestamp - schema.origin, schema.interval_seconds);
  inst.traffic.counts.assign(static_cast<std::size_t>(last - first + 1), 0);
  inst.requests.reserve(rows.size());
  for (const Row& row : rows) {
    const int n =
        static_cast<int>(floor_div(row.timestamp - schema.origin, schema.interval_seconds) - first);
    const int t = static_cast<int>(inst.traffic.counts[n]++);
    inst.requests.push_back(UserRequest{user_labels[row.user], n, t, user_scores[row.user]});
  }
  return LoadResult{std::move(inst), false};
}

void write_interactions(const std::string& dir, const Instance& instance, const CsvSchema& schema) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  const Catalog& catalog = instance.catalog;

  {
    std::ofstream items(fs::path(dir) / "items.csv");
    if (!items) throw IoError("cannot write items.csv in '" + dir + "'");
    items << schema.item_column << ',' << schema.provider_column << '\n';
    for (ItemId i = 0; i < catalog.num_items(); ++i) {
      items << catalog.item_label(i) << ',' << catalog.provider_label(catalog.provider_of(i))
            << '\n';
    }
  }

  RelevanceMatrix matrix;
  matrix.num_items = static_cast<std::uint32_t>(catalog.num_items());
  std::unordered_map<std::string, bool> seen;

  std::ofstream out(fs::path(dir) / "interactions.csv");
  if (!out) throw IoError("cannot write interactions.csv in '" + dir + "'");
  out << schema.user_column << ',' << schema.item_column << ',' << schema.provider_column << ','
      << schema.timestamp_column << ',' << schema.score_column << '\n';
  for (const UserRequest& req : instance.requests) {
    const auto s = req.scores();
    const auto top = static_cast<ItemId>(std::max_element(s.begin(), s.end()) - s.begin());
    const std::int64_t count = std::max<std::int64_t>(1, instance.traffic.counts[req.interval]);
    const std::int64_t ts = schema.origin + req.interval * schema.interval_seconds +
                            req.arrival_seq * schema.interval_seconds / count;
    out << req.user_id << ',' << catalog.item_label(top) << ','
        << catalog.provider_label(catalog.provider_of(top)) << ',' << ts << ','
        << fmt::format("{:.17g}", s[top]) << '\n';
    if (seen.emplace(req.user_id, true).second) {
      matrix.values.insert(matrix.values.end(), s.begin(), s.end());
      ++matrix.num_users;
    }
  }
  write_relevance_matrix((fs::path(dir) / "relevance.bin").string(), matrix);
}

RelevanceMatrix read_relevance_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open relevance matrix '" + path + "'");
  char header[16];
  if (!in.read(header, sizeof header)) throw IoError("relevance matrix header truncated");
  if (std::memcmp(header, kMagic, 4) != 0) throw IoError("relevance matrix has bad magic");
  RelevanceMatrix m;
  std::uint32_t width = 0;
  std::memcpy(&m.num_users, header + 4, 4);
  std::memcpy(&m.num_items, header + 8, 4);
  std::memcpy(&width, header + 12, 4);
  if (width != 4 && width != 8) throw IoError("relevance matrix element width must be 4 or 8");
  const std::size_t n = static_cast<std::size_t>(m.num_users) * m.num_items;
  m.values.resize(n);
  if (width == 8) {
    if (!in.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(n * 8))) {
      throw IoError("relevance matrix body truncated");
    }
  } else {
    std::vector<float> buf(n);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4))) {
      throw IoError("relevance matrix body truncated");
    }
    std::copy(buf.begin(), buf.end(), m.values.begin());
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(m.values[k]) || m.values[k] < 0.0 || m.values[k] > 1.0) {
      throw ConsistencyError(
          fmt::format("relevance matrix entry {} (user {}, item {}) outside [0, 1]", m.values[k],
                      k / m.num_items, k % m.num_items));
    }
  }
  return m;
}

void write_relevance_matrix(const std::string& path, const RelevanceMatrix& m, int element_width) {
  if (element_width != 4 && element_width != 8) {
    throw ConfigError("relevance matrix element width must be 4 or 8");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write relevance matrix '" + path + "'");
  char header[16];
  const auto width = static_cast<std::uint32_t>(element_width);
  std::memcpy(header, kMagic, 4);
  std::memcpy(header + 4, &m.num_users, 4);
  std::memcpy(header + 8, &m.num_items, 4);
  std::memcpy(header + 12, &width, 4);
  out.write(header, sizeof header);
  if (element_width == 8) {
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * 8));
  } else {
    std::vector<float> buf(m.values.begin(), m.values.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
  }
}

}  // namespace bankfair
