#include "grorec/seqdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace grorec {

std::int64_t InteractionDataset::num_interactions() const {
  std::int64_t n = 0;
  for (const auto& s : sequences) n += static_cast<std::int64_t>(s.size());
  return n;
}

void InteractionDataset::validate() const {
  require(num_items > 0, "dataset has no items", ErrorCode::kPrecondition);
  require(!sequences.empty(), "dataset has no users", ErrorCode::kPrecondition);
  std::vector<char> used(static_cast<std::size_t>(num_items) + 1, 0);
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    if (sequences[u].size() < 3)
      fail(ErrorCode::kPrecondition, "user " + std::to_string(u + 1) + " has fewer than 3 items");
    for (ItemId i : sequences[u]) {
      if (i < 1 || i > num_items)
        fail(ErrorCode::kPrecondition, "item id " + std::to_string(i) + " outside [1, m]");
      used[i] = 1;
    }
  }
  for (ItemId i = 1; i <= num_items; ++i) {
    if (!used[i]) fail(ErrorCode::kPrecondition, "item id " + std::to_string(i) + " never occurs");
  }
}

Sequence SplitDataset::test_prefix(std::size_t user) const {
  Sequence s = train.at(user);
  s.push_back(val_target.at(user));
  return s;
}

InteractionFormat parse_interaction_format(const std::string& name) {
  if (name == "delimited-ratings") return InteractionFormat::kDelimitedRatings;
  if (name == "tsv-sequences") return InteractionFormat::kTsvSequences;
  fail(ErrorCode::kInvalidArgument, "unknown interaction format '" + name + "'");
}

std::string to_string(InteractionFormat f) {
  return f == InteractionFormat::kDelimitedRatings ? "delimited-ratings" : "tsv-sequences";
}

namespace {

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line_no,
                            const std::string& why) {
  fail(ErrorCode::kParse,
       path.string() + ":" + std::to_string(line_no) + ": malformed row (" + why + ")");
}

struct RawEvent {
  std::int64_t item;
  std::int64_t timestamp;
  std::size_t order;
};

// Raw per-user event lists keyed by original user id (ascending).
using RawUsers = std::map<std::int64_t, std::vector<RawEvent>>;

RawUsers read_ratings(std::istream& in, const std::filesystem::path& path, const std::string& sep) {
  RawUsers users;
  std::string line;
  std::size_t line_no = 0, order = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, sep);
    if (fields.size() != 4) malformed(path, line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    std::int64_t user = 0, item = 0, ts = 0;
    double rating = 0.0;
    if (!parse_number(fields[0], user)) malformed(path, line_no, "bad user id");
    if (!parse_number(fields[1], item)) malformed(path, line_no, "bad item id");
    if (!parse_number(fields[2], rating)) malformed(path, line_no, "bad rating");
    if (!parse_number(fields[3], ts)) malformed(path, line_no, "bad timestamp");
    users[user].push_back({item, ts, order++});
  }
  for (auto& [u, events] : users) {
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });
  }
  return users;
}

RawUsers read_tsv(std::istream& in, const std::filesystem::path& path) {
  RawUsers users;
  std::string line;
  std::size_t line_no = 0, order = 0;
  std::int64_t user = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto& events = users[++user];
    for (std::string_view tok : split(line, "\t")) {
      std::int64_t item = 0;
      if (!parse_number(tok, item)) malformed(path, line_no, "bad item id '" + std::string(tok) + "'");
      events.push_back({item, 0, order++});
    }
  }
  return users;
}

}  // namespace

InteractionDataset load_interactions(const std::filesystem::path& path, const LoadOptions& opts) {
  require(opts.min_seq_len >= 3, "min_seq_len must be >= 3");
  require(opts.min_item_count >= 1, "min_item_count must be >= 1");
  require(!opts.separator.empty(), "separator must be non-empty");
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());

  RawUsers raw = opts.format == InteractionFormat::kDelimitedRatings
                     ? read_ratings(in, path, opts.separator)
                     : read_tsv(in, path);

  // Implicit feedback: a repeated (user, item) pair keeps its earliest event.
  for (auto& [u, events] : raw) {
    std::unordered_set<std::int64_t> seen;
    std::erase_if(events, [&seen](const RawEvent& e) { return !seen.insert(e.item).second; });
  }

  std::map<std::int64_t, std::int64_t> item_count;
  for (const auto& [u, events] : raw)
    for (const auto& e : events) ++item_count[e.item];

  std::vector<std::vector<std::int64_t>> kept;
  for (const auto& [u, events] : raw) {
    std::vector<std::int64_t> seq;
    for (const auto& e : events)
      if (item_count[e.item] >= opts.min_item_count) seq.push_back(e.item);
    if (static_cast<int>(seq.size()) >= opts.min_seq_len) kept.push_back(std::move(seq));
  }
  if (kept.empty()) fail(ErrorCode::kPrecondition, "no users left after filtering " + path.string());

  std::map<std::int64_t, ItemId> remap;
  for (const auto& s : kept)
    for (std::int64_t i : s) remap.emplace(i, 0);
  ItemId next = 0;
  for (auto& [orig, dense] : remap) dense = ++next;

  InteractionDataset ds;
  ds.num_items = next;
  ds.sequences.reserve(kept.size());
  for (const auto& s : kept) {
    Sequence seq;
    seq.reserve(s.size());
    for (std::int64_t i : s) seq.push_back(remap.at(i));
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

void save_sequences(const InteractionDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& s : ds.sequences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << '\t';
      out << s[i];
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

SplitDataset leave_one_out_split(const InteractionDataset& ds) {
  SplitDataset split;
  split.num_items = ds.num_items;
  split.train.reserve(ds.sequences.size());
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    const Sequence& s = ds.sequences[u];
    if (s.size() < 3)
      fail(ErrorCode::kPrecondition,
           "leave_one_out_split: user " + std::to_string(u + 1) + " has fewer than 3 items");
    split.train.emplace_back(s.begin(), s.end() - 2);
    split.val_target.push_back(s[s.size() - 2]);
    split.test_target.push_back(s.back());
  }
  return split;
}

DatasetStats dataset_stats(const InteractionDataset& ds) {
  require(!ds.sequences.empty() && ds.num_items > 0, "dataset_stats: empty dataset");
  DatasetStats st;
  st.num_users = ds.num_users();
  st.num_items = ds.num_items;
  const double total = static_cast<double>(ds.num_interactions());
  st.avg_length = total / static_cast<double>(st.num_users);
  st.density = total / (static_cast<double>(st.num_users) * static_cast<double>(st.num_items));
  return st;
}

namespace {

constexpr int kLatentRank = 8;
constexpr double kContextWeight = 5.0;
constexpr double kTasteWeight = 1.5;
constexpr double kPopularitySlope = 0.6;

std::vector<double> unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = n01(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ItemId sample_logits(std::mt19937_64& rng, const std::vector<double>& logits,
                     const std::vector<char>& used) {
  double mx = -1e300;
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (!used[j]) mx = std::max(mx, logits[j]);
  std::vector<double> w(logits.size(), 0.0);
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (!used[j]) w[j] = std::exp(logits[j] - mx);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return static_cast<ItemId>(pick(rng) + 1);
}

}  // namespace

InteractionDataset synth_generate(const SynthOptions& opts) {
  require(opts.num_items >= 20, "synth_generate: num_items must be >= 20");
  require(opts.avg_len >= 4, "synth_generate: avg_len must be >= 4");
  require(opts.num_users >= 1, "synth_generate: num_users must be >= 1");
  require(opts.markov_order >= 0, "synth_generate: markov_order must be >= 0");

  std::mt19937_64 rng(opts.seed);
  const int m = opts.num_items;

  std::vector<std::vector<double>> item_vec(m);
  for (auto& v : item_vec) v = unit_vector(rng, kLatentRank);
  std::vector<int> pop_rank(m);
  std::iota(pop_rank.begin(), pop_rank.end(), 1);
  std::shuffle(pop_rank.begin(), pop_rank.end(), rng);
  std::vector<double> popularity(m);
  for (int j = 0; j < m; ++j) popularity[j] = -kPopularitySlope * std::log(static_cast<double>(pop_rank[j]));

  const int lo = std::max(3, opts.avg_len - opts.avg_len / 4);
  const int hi = std::min(m, opts.avg_len + opts.avg_len / 4);
  std::uniform_int_distribution<int> len_dist(std::min(lo, hi), hi);

  InteractionDataset ds;
  ds.sequences.reserve(opts.num_users);
  std::vector<double> logits(m);
  for (int u = 0; u < opts.num_users; ++u) {
    const std::vector<double> taste = unit_vector(rng, kLatentRank);
    const int len = len_dist(rng);
    std::vector<char> used(m, 0);
    Sequence seq;
    seq.reserve(len);
    for (int t = 0; t < len; ++t) {
      if (opts.markov_order == 0) {
        logits = popularity;
      } else {
        std::vector<double> ctx(kLatentRank, 0.0);
        const int n = std::min<int>(opts.markov_order, static_cast<int>(seq.size()));
        for (int back = 1; back <= n; ++back) {
          const auto& v = item_vec[seq[seq.size() - back] - 1];
          for (int r = 0; r < kLatentRank; ++r) ctx[r] += v[r] / n;
        }
        for (int j = 0; j < m; ++j) {
          logits[j] = popularity[j] + kTasteWeight * dot(taste, item_vec[j]);
          if (n > 0) logits[j] += kContextWeight * dot(ctx, item_vec[j]);
        }
      }
      const ItemId next = sample_logits(rng, logits, used);
      used[next - 1] = 1;
      seq.push_back(next);
    }
    ds.sequences.push_back(std::move(seq));
  }

  // Keep the id space dense even if some item was never drawn.
  std::vector<ItemId> remap(m + 1, 0);
  for (const auto& s : ds.sequences)
    for (ItemId i : s) remap[i] = 1;
  ItemId next = 0;
  for (ItemId i = 1; i <= m; ++i)
    if (remap[i]) remap[i] = ++next;
  for (auto& s : ds.sequences)
    for (ItemId& i : s) i = remap[i];
  ds.num_items = next;
  return ds;
}

}  // namespace grorec
