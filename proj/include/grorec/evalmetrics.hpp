#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grorec/recmodels.hpp"
#include "grorec/shield.hpp"

namespace grorec {

/// 1-based position in the delivered list, or nullopt for a miss.
using Rank = std::optional<int>;

struct HitNdcg {
  double hr = 0.0;
  double ndcg = 0.0;
};

struct MetricsReport {
  std::map<int, HitNdcg> at_k;
  std::size_t num_users = 0;
  std::string model_role;
  std::string defense;

  /// JSON with a fixed key order, stable across runs.
  std::string to_json() const;
};

/// Scores every item, drops the prefix items, takes the top k_eval, lets the
/// shield permute that list and reports where `target` ended up.
Rank rank_of_target(const SequenceModel& model, std::span<const ItemId> prefix, ItemId target,
                    OutputShield& shield, int k_eval);

/// HR = fraction with rank <= k; NDCG = mean of 1/log2(rank + 1) over hits
/// (single relevant item, ideal DCG = 1).
HitNdcg hr_ndcg(std::span<const Rank> ranks, int k);

enum class EvalTarget { kValidation, kTest };

struct EvalOptions {
  std::vector<int> ks{1, 5, 10, 20};
  /// Length of the list the deployed system returns (the shield permutes
  /// within it). Must be >= max(ks).
  int k_eval = 20;
  DefenseMode shield{};
  EvalTarget target = EvalTarget::kTest;
  std::string model_role = "target";
  std::string defense = "none";
};

/// Full-ranking leave-one-out evaluation over every user.
MetricsReport evaluate(const SequenceModel& model, const SplitDataset& split, const EvalOptions& opts);

/// Ranks for every user (same protocol as evaluate).
std::vector<Rank> collect_ranks(const SequenceModel& model, const SplitDataset& split,
                                const EvalOptions& opts);

/// Per user, |top-k(a) ∩ top-k(b)| on the test prefix (unshielded lists).
std::vector<int> top_list_overlap(const SequenceModel& a, const SequenceModel& b, const SplitDataset& split,
                                  int k);

}  // namespace grorec
