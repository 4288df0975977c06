#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grorec/common.hpp"

namespace grorec {

/// Per-user ordered item sequences over a dense item vocabulary [1, m].
/// User u (1-based) owns sequences[u - 1].
struct InteractionDataset {
  std::vector<Sequence> sequences;
  ItemId num_items = 0;

  std::int64_t num_users() const { return static_cast<std::int64_t>(sequences.size()); }
  std::int64_t num_interactions() const;

  /// Throws kPrecondition naming the first broken invariant: ids in range,
  /// every id used, every sequence of length >= 3.
  void validate() const;

  bool operator==(const InteractionDataset&) const = default;
};

/// Leave-one-out split: train = all but the last two items.
struct SplitDataset {
  std::vector<Sequence> train;
  std::vector<ItemId> val_target;
  std::vector<ItemId> test_target;
  ItemId num_items = 0;

  std::size_t num_users() const { return train.size(); }
  /// train ++ [val] : the prefix scored when predicting the test item.
  Sequence test_prefix(std::size_t user) const;
};

struct DatasetStats {
  std::int64_t num_users = 0;
  std::int64_t num_items = 0;
  double avg_length = 0.0;
  double density = 0.0;
};

enum class InteractionFormat {
  kDelimitedRatings,  // user<sep>item<sep>rating<sep>timestamp
  kTsvSequences,      // one user per line, tab-separated item ids
};

InteractionFormat parse_interaction_format(const std::string& name);
std::string to_string(InteractionFormat f);

struct LoadOptions {
  InteractionFormat format = InteractionFormat::kDelimitedRatings;
  std::string separator = "::";
  int min_seq_len = 3;
  int min_item_count = 5;
};

/// Reads interactions, orders them per user by timestamp (file order breaks
/// ties), drops items with fewer than min_item_count interactions, then users
/// left with fewer than min_seq_len, and re-densifies ids in ascending order
/// of the original ids. Ratings are treated as implicit feedback.
InteractionDataset load_interactions(const std::filesystem::path& path, const LoadOptions& opts);

/// Writes the tsv-sequences form of `ds`.
void save_sequences(const InteractionDataset& ds, const std::filesystem::path& path);

SplitDataset leave_one_out_split(const InteractionDataset& ds);

DatasetStats dataset_stats(const InteractionDataset& ds);

struct SynthOptions {
  int num_users = 500;
  int num_items = 200;
  int avg_len = 20;
  int markov_order = 1;
  std::uint64_t seed = 7;
};

/// Seeded generator: users walk an item-transition chain whose logits mix a
/// low-rank item-item affinity over the last `markov_order` items, a user
/// taste term and a Zipf-like popularity bias. Items never repeat inside a
/// sequence. markov_order = 0 draws every item from the popularity
/// (stationary) distribution, without replacement.
InteractionDataset synth_generate(const SynthOptions& opts);

}  // namespace grorec
