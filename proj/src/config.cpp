#include "grorec/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace grorec {

Defense parse_defense(const std::string& name) {
  if (name == "none") return Defense::kNone;
  if (name == "random") return Defense::kRandom;
  if (name == "reverse") return Defense::kReverse;
  if (name == "gro") return Defense::kGro;
  fail(ErrorCode::kInvalidArgument, "unknown defense '" + name + "'");
}

std::string to_string(Defense d) {
  switch (d) {
    case Defense::kNone: return "none";
    case Defense::kRandom: return "random";
    case Defense::kReverse: return "reverse";
    case Defense::kGro: return "gro";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(ErrorCode::kParse, key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) fail(ErrorCode::kParse, key + ": expected a number, got '" + v + "'");
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(ErrorCode::kParse, key + ": expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double d) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define INT_KEY(NAME, FIELD)                                                               \
  Key {                                                                                    \
    NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },               \
        [](ExperimentConfig& c, const std::string& v) {                                    \
          c.FIELD = parse_int<decltype(c.FIELD)>(NAME, v);                                 \
        }                                                                                  \
  }
#define DOUBLE_KEY(NAME, FIELD)                                                              \
  Key {                                                                                      \
    NAME, [](const ExperimentConfig& c) { return fmt_double(c.FIELD); },                     \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_double(NAME, v); }   \
  }
#define BOOL_KEY(NAME, FIELD)                                                              \
  Key {                                                                                    \
    NAME, [](const ExperimentConfig& c) { return fmt_bool(c.FIELD); },                     \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_bool(NAME, v); }   \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      INT_KEY("seed", seed),
      Key{"data.source", [](const ExperimentConfig& c) { return c.data.source; },
          [](ExperimentConfig& c, const std::string& v) { c.data.source = v; }},
      Key{"data.path", [](const ExperimentConfig& c) { return c.data.path; },
          [](ExperimentConfig& c, const std::string& v) { c.data.path = v; }},
      Key{"data.format", [](const ExperimentConfig& c) { return to_string(c.data.load.format); },
          [](ExperimentConfig& c, const std::string& v) { c.data.load.format = parse_interaction_format(v); }},
      Key{"data.separator", [](const ExperimentConfig& c) { return c.data.load.separator; },
          [](ExperimentConfig& c, const std::string& v) { c.data.load.separator = v; }},
      INT_KEY("data.min_seq_len", data.load.min_seq_len),
      INT_KEY("data.min_item_count", data.load.min_item_count),
      INT_KEY("data.synth.users", data.synth.num_users),
      INT_KEY("data.synth.items", data.synth.num_items),
      INT_KEY("data.synth.avg_len", data.synth.avg_len),
      INT_KEY("data.synth.markov_order", data.synth.markov_order),
      INT_KEY("data.synth.seed", data.synth.seed),
      Key{"model.target", [](const ExperimentConfig& c) { return to_string(c.target_arch); },
          [](ExperimentConfig& c, const std::string& v) { c.target_arch = parse_architecture(v); }},
      Key{"model.surrogate", [](const ExperimentConfig& c) { return to_string(c.surrogate_arch); },
          [](ExperimentConfig& c, const std::string& v) { c.surrogate_arch = parse_architecture(v); }},
      INT_KEY("model.dim", train.dim),
      INT_KEY("model.max_len", train.max_len),
      DOUBLE_KEY("train.lr", train.lr),
      INT_KEY("train.batch_size", train.batch_size),
      INT_KEY("train.max_epochs", train.max_epochs),
      INT_KEY("train.patience", train.patience),
      Key{"defense.list",
          [](const ExperimentConfig& c) {
            std::string s;
            for (Defense d : c.defenses) s += (s.empty() ? "" : ",") + to_string(d);
            return s;
          },
          [](ExperimentConfig& c, const std::string& v) { c.defenses = parse_defense_list(v); }},
      INT_KEY("gro.k", gro.k),
      DOUBLE_KEY("gro.lambda", gro.lambda),
      DOUBLE_KEY("gro.m_swap", gro.m_swap),
      DOUBLE_KEY("gro.m1", gro.margin_order),
      DOUBLE_KEY("gro.m2", gro.margin_negative),
      INT_KEY("gro.negatives", gro.negatives_per_position),
      DOUBLE_KEY("gro.lr_target", gro.lr_target),
      DOUBLE_KEY("gro.lr_student", gro.lr_student),
      INT_KEY("gro.epochs", gro.epochs),
      INT_KEY("gro.batch_size", gro.batch_size),
      INT_KEY("gro.warmup_epochs", gro.student_warmup_epochs),
      INT_KEY("gro.positions", gro.positions_per_window),
      Key{"gro.row_policy", [](const ExperimentConfig& c) { return to_string(c.gro.row_policy); },
          [](ExperimentConfig& c, const std::string& v) { c.gro.row_policy = parse_row_policy(v); }},
      INT_KEY("attack.n_queries", attack.n_queries),
      INT_KEY("attack.k_response", attack.k_response),
      INT_KEY("attack.max_query_len", attack.max_query_len),
      Key{"attack.strategy", [](const ExperimentConfig& c) { return to_string(c.attack.strategy); },
          [](ExperimentConfig& c, const std::string& v) { c.attack.strategy = parse_query_strategy(v); }},
      BOOL_KEY("attack.rank_weighted", attack.rank_weighted),
      DOUBLE_KEY("attack.m1", attack.margin_order),
      DOUBLE_KEY("attack.m2", attack.margin_negative),
      INT_KEY("attack.negatives", attack.negatives_per_position),
      DOUBLE_KEY("attack.lr", attack.lr),
      INT_KEY("attack.epochs", attack.epochs),
      INT_KEY("attack.batch_size", attack.batch_size),
      INT_KEY("attack.dim", attack.dim),
      INT_KEY("attack.max_len", attack.max_len),
      Key{"eval.ks",
          [](const ExperimentConfig& c) {
            std::string s;
            for (int k : c.eval_ks) s += (s.empty() ? "" : ",") + std::to_string(k);
            return s;
          },
          [](ExperimentConfig& c, const std::string& v) {
            c.eval_ks.clear();
            for (const auto& p : split_list(v)) c.eval_ks.push_back(parse_int<int>("eval.ks", p));
          }},
      Key{"out_dir", [](const ExperimentConfig& c) { return c.out_dir.string(); },
          [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  return keys;
}

#undef INT_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

}  // namespace

std::vector<Defense> parse_defense_list(const std::string& text) {
  std::vector<Defense> out;
  for (const auto& name : split_list(text)) {
    const Defense d = parse_defense(name);
    if (std::find(out.begin(), out.end(), d) != out.end())
      fail(ErrorCode::kInvalidArgument, "defense '" + name + "' listed twice");
    out.push_back(d);
  }
  require(!out.empty(), "defense list is empty");
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : key_table()) {
    if (k.name == key) {
      k.set(*this, value);
      return;
    }
  }
  fail(ErrorCode::kParse, "unknown config key '" + key + "'");
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  for (const auto& k : key_table()) {
    if (k.name == "out_dir") continue;
    out += k.name + " = " + k.get(*this) + "\n";
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_text()); }

void ExperimentConfig::validate() const {
  require(data.source == "synth" || data.source == "file", "data.source must be synth or file");
  if (data.source == "file") require(!data.path.empty(), "data.path is required for file data");
  require(data.synth.num_users >= 1 && data.synth.num_items >= 2, "data.synth: need users and items");
  require(train.dim >= 4 && train.max_len >= 1, "model: invalid dims");
  require(train.lr >= 0.0 && train.batch_size >= 1, "train: invalid lr or batch size");
  require(train.max_epochs >= 1 && train.patience >= 1, "train: max_epochs and patience must be >= 1");
  require(!defenses.empty(), "defense list is empty");
  require(!eval_ks.empty(), "eval.ks is empty");
  for (int k : eval_ks) require(k >= 1, "eval.ks entries must be >= 1");
  require(*std::max_element(eval_ks.begin(), eval_ks.end()) <= attack.k_response,
          "eval.ks must not exceed attack.k_response (the deployed list length)");
  gro.validate();
  attack.validate();
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kParse, where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) fail(ErrorCode::kParse, where + "duplicate key '" + key + "'");
    try {
      cfg.set(key, value);
    } catch (const Error& e) {
      fail(ErrorCode::kParse, where + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace grorec
