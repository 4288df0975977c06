#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "grorec/common.hpp"
#include "grorec/ndiff.hpp"
#include "grorec/seqdata.hpp"

namespace grorec {

enum class Architecture {
  kAttnLite,   // one causal self-attention block with a small residual MLP
  kRecurrent,  // one gated recurrent cell
};

enum class ModelRole { kTarget, kStudent, kSurrogate };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture a);
std::string to_string(ModelRole r);

/// Top-k recommendation: distinct items, best first.
struct RankingList {
  std::vector<ItemId> items;

  std::size_t k() const { return items.size(); }
  bool operator==(const RankingList&) const = default;
};

/// Next-item scorer over a fixed vocabulary of m items. Both architectures
/// expose the same surface and use a tied item-embedding output layer.
class SequenceModel {
 public:
  static SequenceModel init(Architecture arch, ItemId num_items, int dim, int max_len,
                            std::uint64_t seed, ModelRole role = ModelRole::kTarget);

  Architecture architecture() const { return arch_; }
  ModelRole role() const { return role_; }
  void set_role(ModelRole r) { role_ = r; }
  ItemId num_items() const { return num_items_; }
  int dim() const { return dim_; }
  int max_len() const { return max_len_; }

  /// Hidden states (L x d) for the last min(|seq|, max_len) items. Row t
  /// depends only on items 0..t of the truncated window. The non-const
  /// overload binds parameters for training; the const one reads them as
  /// constants.
  ndiff::Var hidden(ndiff::Graph& g, std::span<const ItemId> seq);
  ndiff::Var hidden(ndiff::Graph& g, std::span<const ItemId> seq) const;
  /// Scores (rows x m) from hidden states.
  ndiff::Var output(ndiff::Graph& g, ndiff::Var hidden);
  ndiff::Var output(ndiff::Graph& g, ndiff::Var hidden) const;

  /// Scores for the item following `seq`.
  ScoreVector score_next(std::span<const ItemId> seq) const;

  std::vector<ndiff::Parameter>& parameters() { return params_; }
  const std::vector<ndiff::Parameter>& parameters() const { return params_; }
  std::size_t num_scalars() const;

  void zero_grad();
  double grad_norm() const;
  /// Plain SGD with global gradient-norm clipping; clears gradients after.
  void sgd_step(double lr, double clip_norm);
  bool all_finite() const;

  void save(const std::filesystem::path& path) const;
  static SequenceModel load(const std::filesystem::path& path);

  /// Same architecture, dims and bit-identical parameters.
  bool same_parameters(const SequenceModel& o) const;

 private:
  template <class Bind>
  ndiff::Var hidden_impl(ndiff::Graph& g, std::span<const ItemId> seq, Bind bind) const;

  void check_sequence(std::span<const ItemId> seq) const;

  Architecture arch_ = Architecture::kAttnLite;
  ModelRole role_ = ModelRole::kTarget;
  ItemId num_items_ = 0;
  int dim_ = 0;
  int max_len_ = 0;
  std::vector<ndiff::Parameter> params_;
};

/// Gradient-norm clip used by every trainer.
inline constexpr double kClipNorm = 5.0;

/// The k best non-excluded items, descending by score; equal scores are
/// ordered by ascending item id.
RankingList topk(std::span<const double> scores, std::size_t k,
                 std::span<const ItemId> exclude = {});

/// One training window: `input` predicts `targets` position by position.
struct TrainingWindow {
  std::span<const ItemId> input;
  std::span<const ItemId> targets;
};

/// Cuts `seq` into windows of at most max_len inputs, covering every
/// next-item position (items 1..n-1) exactly once.
std::vector<TrainingWindow> training_windows(std::span<const ItemId> seq, int max_len);

/// Mean next-item cross-entropy over all training positions, no update.
double ce_eval_loss(const SequenceModel& model, const SplitDataset& split);

/// One shuffled SGD pass of next-item cross-entropy over the train prefixes.
/// Returns the mean per-position loss seen during the pass.
double ce_train_epoch(SequenceModel& model, const SplitDataset& split, double lr,
                      int batch_size, std::uint64_t seed);

/// Cross-entropy summed over a window's positions, bound for training.
ndiff::Var window_ce_loss(ndiff::Graph& g, SequenceModel& model, const TrainingWindow& w);

}  // namespace grorec
