#include "grorec/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace grorec {

using ndiff::Graph;
using ndiff::Var;

Oracle::Oracle(std::shared_ptr<const SequenceModel> deployed, DefenseMode shield, int k_response)
    : deployed_(std::move(deployed)), shield_(shield), num_items_(0), k_response_(k_response) {
  require(deployed_ != nullptr, "oracle needs a deployed model");
  require(k_response >= 1, "oracle: k_response must be >= 1");
  num_items_ = deployed_->num_items();
}

RankingList Oracle::query(std::span<const ItemId> seq) {
  ++calls_;
  const ScoreVector scores = deployed_->score_next(seq);
  return shield_.apply(topk(scores, static_cast<std::size_t>(k_response_), seq));
}

QueryStrategy parse_query_strategy(const std::string& name) {
  if (name == "autoregressive") return QueryStrategy::kAutoregressive;
  if (name == "random") return QueryStrategy::kRandom;
  fail(ErrorCode::kInvalidArgument, "unknown query strategy '" + name + "'");
}

std::string to_string(QueryStrategy s) {
  return s == QueryStrategy::kAutoregressive ? "autoregressive" : "random";
}

void AttackConfig::validate() const {
  require(n_queries >= 1, "attack: n_queries must be >= 1");
  require(k_response >= 1, "attack: k_response must be >= 1");
  require(max_query_len >= 1, "attack: max_query_len must be >= 1");
  require(margin_order >= 0.0 && margin_negative >= 0.0, "attack: margins must be non-negative");
  require(negatives_per_position >= 1, "attack: negatives_per_position must be >= 1");
  require(lr >= 0.0, "attack: lr must be non-negative");
  require(epochs >= 0, "attack: epochs must be non-negative");
  require(batch_size >= 1, "attack: batch_size must be >= 1");
}

QueryLog generate_queries(Oracle& oracle, const AttackConfig& cfg) {
  cfg.validate();
  require(cfg.k_response == oracle.k_response(), "attack: k_response differs from the oracle's");
  const ItemId m = oracle.num_items();
  require(cfg.max_query_len + cfg.k_response <= m,
          "attack: max_query_len too long for the catalog and response length");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<ItemId> any_item(1, m);

  QueryLog log;
  log.strategy = cfg.strategy;
  log.k_response = cfg.k_response;
  log.records.reserve(cfg.n_queries);

  std::vector<double> rank_weights(cfg.k_response);
  for (int r = 0; r < cfg.k_response; ++r) rank_weights[r] = 1.0 / (r + 1);
  std::discrete_distribution<int> by_rank(rank_weights.begin(), rank_weights.end());
  std::uniform_int_distribution<int> uniform_pos(0, cfg.k_response - 1);

  for (int q = 0; q < cfg.n_queries; ++q) {
    Sequence seq;
    seq.reserve(cfg.max_query_len);
    if (cfg.strategy == QueryStrategy::kRandom) {
      for (int t = 0; t < cfg.max_query_len; ++t) seq.push_back(any_item(rng));
    } else {
      seq.push_back(any_item(rng));
      while (static_cast<int>(seq.size()) < cfg.max_query_len) {
        const RankingList resp = oracle.query(seq);
        const int pos = cfg.rank_weighted ? by_rank(rng) : uniform_pos(rng);
        seq.push_back(resp.items[pos]);
      }
    }
    RankingList final_resp = oracle.query(seq);
    log.records.push_back({std::move(seq), std::move(final_resp)});
  }
  return log;
}

void QueryLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  nlohmann::ordered_json header;
  header["format"] = "grorec-querylog";
  header["version"] = 1;
  header["strategy"] = to_string(strategy);
  header["k_response"] = k_response;
  header["records"] = records.size();
  out << header.dump() << '\n';
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["query"] = r.query;
    j["response"] = r.response.items;
    out << j.dump() << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

QueryLog QueryLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  QueryLog log;
  std::size_t expected = 0;
  try {
    if (!std::getline(in, line)) fail(ErrorCode::kParse, path.string() + ": empty query log");
    ++line_no;
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "grorec-querylog")
      fail(ErrorCode::kParse, path.string() + ": not a query log");
    log.strategy = parse_query_strategy(header.at("strategy").get<std::string>());
    log.k_response = header.at("k_response").get<int>();
    expected = header.at("records").get<std::size_t>();
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      QueryRecord r;
      r.query = j.at("query").get<Sequence>();
      r.response.items = j.at("response").get<std::vector<ItemId>>();
      if (static_cast<int>(r.response.items.size()) != log.k_response)
        fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": response length mismatch");
      log.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (log.records.size() != expected) fail(ErrorCode::kParse, path.string() + ": record count mismatch");
  return log;
}

namespace {

void check_negatives(const RankingList& observed, std::span<const ItemId> negatives, std::size_t m) {
  const std::size_t k = observed.k();
  require(k >= 1, "ranking loss: empty observed list");
  require(negatives.size() % k == 0 && !negatives.empty(),
          "ranking loss: need the same number of negatives for every observed position");
  std::vector<char> in_list(m + 1, 0);
  for (ItemId i : observed.items) {
    require(i >= 1 && static_cast<std::size_t>(i) <= m, "ranking loss: observed id out of range");
    in_list[i] = 1;
  }
  for (ItemId n : negatives) {
    require(n >= 1 && static_cast<std::size_t>(n) <= m, "ranking loss: negative id out of range");
    if (in_list[n])
      fail(ErrorCode::kInvalidArgument,
           "ranking loss: negative item " + std::to_string(n) + " overlaps the observed list");
  }
}

}  // namespace

double surrogate_ranking_loss(std::span<const double> scores, const RankingList& observed,
                              std::span<const ItemId> negatives, double m1, double m2) {
  check_negatives(observed, negatives, scores.size());
  const std::size_t k = observed.k();
  const std::size_t per = negatives.size() / k;
  auto s = [&](ItemId i) { return scores[i - 1]; };
  double loss = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i)
    loss += std::max(s(observed.items[i + 1]) - s(observed.items[i]) + m1, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t n = 0; n < per; ++n)
      loss += std::max(s(negatives[i * per + n]) - s(observed.items[i]) + m2, 0.0);
  return loss;
}

Var ranking_loss_node(Var scores, const RankingList& observed, std::span<const ItemId> negatives,
                      double m1, double m2) {
  Var col = scores.rows() == 1 ? ndiff::transpose(scores) : scores;
  require(col.cols() == 1, "ranking loss: scores must be a vector");
  check_negatives(observed, negatives, static_cast<std::size_t>(col.rows()));
  const int k = static_cast<int>(observed.k());
  const int per = static_cast<int>(negatives.size()) / k;

  std::vector<int> obs_rows(k), neg_rows(negatives.size()), owner(negatives.size());
  for (int i = 0; i < k; ++i) obs_rows[i] = observed.items[i] - 1;
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    neg_rows[j] = negatives[j] - 1;
    owner[j] = static_cast<int>(j) / per;
  }
  Var s = ndiff::gather_rows(col, obs_rows);
  Var neg_terms = ndiff::relu(ndiff::add_scalar(
      ndiff::sub(ndiff::gather_rows(col, neg_rows), ndiff::gather_rows(s, owner)), m2));
  Var total = ndiff::sum(neg_terms);
  if (k > 1) {
    Var pair_terms = ndiff::relu(
        ndiff::add_scalar(ndiff::sub(ndiff::slice_rows(s, 1, k), ndiff::slice_rows(s, 0, k - 1)), m1));
    total = ndiff::add(ndiff::sum(pair_terms), total);
  }
  return total;
}

std::vector<ItemId> sample_negatives(const RankingList& observed, ItemId num_items, int per_position,
                                     std::mt19937_64& rng) {
  std::vector<char> in_list(static_cast<std::size_t>(num_items) + 1, 0);
  for (ItemId i : observed.items) in_list[i] = 1;
  require(static_cast<std::size_t>(num_items) > observed.k(), "sample_negatives: no item outside the list");
  std::uniform_int_distribution<ItemId> any(1, num_items);
  std::vector<ItemId> out;
  out.reserve(observed.k() * per_position);
  for (std::size_t i = 0; i < observed.k() * static_cast<std::size_t>(per_position); ++i) {
    ItemId n;
    do {
      n = any(rng);
    } while (in_list[n]);
    out.push_back(n);
  }
  return out;
}

SequenceModel train_surrogate(const QueryLog& log, Architecture arch, ItemId num_items,
                              const AttackConfig& cfg) {
  cfg.validate();
  require(!log.records.empty(), "train_surrogate: empty query log", ErrorCode::kPrecondition);
  SequenceModel model = SequenceModel::init(arch, num_items, cfg.dim, cfg.max_len,
                                            derive_seed(cfg.seed, "surrogate-init"), ModelRole::kSurrogate);
  std::mt19937_64 rng(derive_seed(cfg.seed, "surrogate-train"));
  std::vector<std::size_t> order(log.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    model.zero_grad();
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const QueryRecord& rec = log.records[order[b]];
        const auto negs = sample_negatives(rec.response, num_items, cfg.negatives_per_position, rng);
        Graph g;
        Var h = model.hidden(g, rec.query);
        Var scores = model.output(g, ndiff::slice_rows(h, h.rows() - 1, h.rows()));
        Var loss = ranking_loss_node(scores, rec.response, negs, cfg.margin_order, cfg.margin_negative);
        if (!std::isfinite(loss.value().item()))
          fail(ErrorCode::kNumeric, "train_surrogate: non-finite loss (divergence)");
        g.backward(ndiff::scale(loss, inv));
      }
      model.sgd_step(cfg.lr, kClipNorm);
    }
    if (!model.all_finite()) fail(ErrorCode::kNumeric, "train_surrogate: non-finite parameters");
  }
  return model;
}

}  // namespace grorec
