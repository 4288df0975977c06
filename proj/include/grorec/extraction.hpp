#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "grorec/ndiff.hpp"
#include "grorec/recmodels.hpp"
#include "grorec/shield.hpp"

namespace grorec {

/// The attacker's only view of a deployed model: ranked lists of
/// `k_response` items for a query sequence. Scores and parameters never
/// leave this class. Every call is counted.
class Oracle {
 public:
  Oracle(std::shared_ptr<const SequenceModel> deployed, DefenseMode shield, int k_response);

  RankingList query(std::span<const ItemId> seq);

  /// Catalog size; public knowledge for any recommender front end.
  ItemId num_items() const { return num_items_; }
  int k_response() const { return k_response_; }
  std::uint64_t calls() const { return calls_; }

 private:
  std::shared_ptr<const SequenceModel> deployed_;
  OutputShield shield_;
  ItemId num_items_;
  int k_response_;
  std::uint64_t calls_ = 0;
};

enum class QueryStrategy { kAutoregressive, kRandom };

QueryStrategy parse_query_strategy(const std::string& name);
std::string to_string(QueryStrategy s);

struct AttackConfig {
  int n_queries = 3000;
  int k_response = 100;
  int max_query_len = 20;
  QueryStrategy strategy = QueryStrategy::kAutoregressive;
  /// Autoregressive only: draw the next item with probability proportional
  /// to 1/rank instead of uniformly over the response.
  bool rank_weighted = false;
  double margin_order = 0.1;     // m1
  double margin_negative = 0.1;  // m2
  int negatives_per_position = 1;
  double lr = 0.05;
  int epochs = 30;
  int batch_size = 16;
  int dim = 32;
  int max_len = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct QueryRecord {
  Sequence query;
  RankingList response;
};

struct QueryLog {
  QueryStrategy strategy = QueryStrategy::kAutoregressive;
  int k_response = 0;
  std::vector<QueryRecord> records;

  /// Line-delimited JSON: a header object, then one
  /// {"query": [...], "response": [...]} object per record.
  void save(const std::filesystem::path& path) const;
  static QueryLog load(const std::filesystem::path& path);
};

/// Autoregressive: start from a uniform random item, then repeatedly query
/// and append an item drawn from the response until max_query_len; the final
/// response is recorded (one oracle call per appended item plus the
/// recording call). Random: i.i.d. uniform items, one recording call.
QueryLog generate_queries(Oracle& oracle, const AttackConfig& cfg);

/// Pairwise-margin ranking loss over an observed top-k list:
///   sum_{i<k} max(s_{i+1} - s_i + m1, 0) + sum_i sum_n max(s_neg(i,n) - s_i + m2, 0)
/// `negatives` holds negatives_per_position ids per observed position
/// (position-major) and must avoid every observed item.
double surrogate_ranking_loss(std::span<const double> scores, const RankingList& observed,
                              std::span<const ItemId> negatives, double m1, double m2);

/// The same loss as a graph node over a 1 x m or m x 1 score node.
ndiff::Var ranking_loss_node(ndiff::Var scores, const RankingList& observed,
                             std::span<const ItemId> negatives, double m1, double m2);

/// Uniform draws from outside `observed`, `per_position` per observed item.
std::vector<ItemId> sample_negatives(const RankingList& observed, ItemId num_items, int per_position,
                                     std::mt19937_64& rng);

/// Fits a fresh surrogate on (query, response) pairs with the ranking loss.
/// Negatives are re-drawn every epoch.
SequenceModel train_surrogate(const QueryLog& log, Architecture arch, ItemId num_items,
                              const AttackConfig& cfg);

}  // namespace grorec
