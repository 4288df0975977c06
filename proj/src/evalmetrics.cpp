#include "grorec/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "json.hpp"

namespace grorec {

Rank rank_of_target(const SequenceModel& model, std::span<const ItemId> prefix, ItemId target,
                    OutputShield& shield, int k_eval) {
  if (target < 1 || target > model.num_items())
    fail(ErrorCode::kInvalidArgument, "rank_of_target: invalid target id " + std::to_string(target));
  if (std::find(prefix.begin(), prefix.end(), target) != prefix.end())
    fail(ErrorCode::kPrecondition, "rank_of_target: target item appears in the prefix");
  require(k_eval >= 1, "rank_of_target: k_eval must be >= 1");
  const ScoreVector scores = model.score_next(prefix);
  const RankingList delivered = shield.apply(topk(scores, static_cast<std::size_t>(k_eval), prefix));
  const auto it = std::find(delivered.items.begin(), delivered.items.end(), target);
  if (it == delivered.items.end()) return std::nullopt;
  return static_cast<int>(it - delivered.items.begin()) + 1;
}

HitNdcg hr_ndcg(std::span<const Rank> ranks, int k) {
  require(k >= 1, "hr_ndcg: k must be >= 1");
  require(!ranks.empty(), "hr_ndcg: empty rank list");
  double hits = 0.0, gain = 0.0;
  for (const Rank& r : ranks) {
    if (r && *r <= k) {
      hits += 1.0;
      gain += 1.0 / std::log2(static_cast<double>(*r) + 1.0);
    }
  }
  const double n = static_cast<double>(ranks.size());
  return {hits / n, gain / n};
}

std::vector<Rank> collect_ranks(const SequenceModel& model, const SplitDataset& split,
                                const EvalOptions& opts) {
  OutputShield shield(opts.shield);
  std::vector<Rank> ranks;
  ranks.reserve(split.num_users());
  for (std::size_t u = 0; u < split.num_users(); ++u) {
    if (opts.target == EvalTarget::kTest) {
      const Sequence prefix = split.test_prefix(u);
      ranks.push_back(rank_of_target(model, prefix, split.test_target[u], shield, opts.k_eval));
    } else {
      ranks.push_back(rank_of_target(model, split.train[u], split.val_target[u], shield, opts.k_eval));
    }
  }
  return ranks;
}

std::vector<int> top_list_overlap(const SequenceModel& a, const SequenceModel& b, const SplitDataset& split,
                                  int k) {
  require(k >= 1, "top_list_overlap: k must be >= 1");
  require(a.num_items() == b.num_items(), "top_list_overlap: catalogs differ");
  std::vector<int> out;
  out.reserve(split.num_users());
  for (std::size_t u = 0; u < split.num_users(); ++u) {
    const Sequence prefix = split.test_prefix(u);
    RankingList la = topk(a.score_next(prefix), static_cast<std::size_t>(k), prefix);
    RankingList lb = topk(b.score_next(prefix), static_cast<std::size_t>(k), prefix);
    std::sort(la.items.begin(), la.items.end());
    std::sort(lb.items.begin(), lb.items.end());
    std::vector<ItemId> common;
    std::set_intersection(la.items.begin(), la.items.end(), lb.items.begin(), lb.items.end(),
                          std::back_inserter(common));
    out.push_back(static_cast<int>(common.size()));
  }
  return out;
}

MetricsReport evaluate(const SequenceModel& model, const SplitDataset& split, const EvalOptions& opts) {
  require(!opts.ks.empty(), "evaluate: no cutoffs given");
  const int kmax = *std::max_element(opts.ks.begin(), opts.ks.end());
  require(opts.k_eval >= kmax, "evaluate: k_eval must be >= every cutoff");
  const std::vector<Rank> ranks = collect_ranks(model, split, opts);
  MetricsReport rep;
  rep.num_users = ranks.size();
  rep.model_role = opts.model_role;
  rep.defense = opts.defense;
  for (int k : opts.ks) rep.at_k[k] = hr_ndcg(ranks, k);
  return rep;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model_role;
  j["defense"] = defense;
  j["num_users"] = num_users;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
  for (const auto& [k, v] : at_k) {
    nlohmann::ordered_json e;
    e["k"] = k;
    e["hr"] = v.hr;
    e["ndcg"] = v.ndcg;
    metrics.push_back(e);
  }
  j["metrics"] = metrics;
  return j.dump(2);
}

}  // namespace grorec
