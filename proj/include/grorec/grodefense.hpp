#pragma once

// Gradient-based ranking optimization: a training-time defense that makes a
// target model's top-k lists costly to imitate.
//
// Each training step turns the target's top-k list into a one-hot k x m
// swap matrix A, scores it with a student model that imitates the
// attacker, and differentiates the student's ranking loss with respect to
// A. The row-wise argmax of that gradient is the proposal A'; a hinge on
// the target's scores (the swap loss) pulls the target's ranking toward A'.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "grorec/ndiff.hpp"
#include "grorec/recmodels.hpp"
#include "grorec/seqdata.hpp"

namespace grorec {

/// One-hot k x m matrix: row i (0-based here) has its 1 in column a_i - 1.
/// Rows use pairwise distinct columns.
class SwapMatrix {
 public:
  SwapMatrix(std::vector<ItemId> ranked, ItemId num_items);

  int k() const { return static_cast<int>(ranked_.size()); }
  ItemId num_items() const { return num_items_; }
  const std::vector<ItemId>& items() const { return ranked_; }
  ndiff::Tensor dense() const;
  /// A * (1, 2, ..., m)^T.
  std::vector<double> times_item_ids() const;

 private:
  std::vector<ItemId> ranked_;
  ItemId num_items_;
};

/// d L_student / d A, k x m.
struct GradientMatrix {
  ndiff::Tensor entries;
};

/// Row-wise argmax of a gradient matrix. Rows may repeat an item.
struct ProposalMatrix {
  std::vector<ItemId> items;
  ItemId num_items = 0;
  /// Rows whose largest admissible gradient was <= 0.
  std::size_t nonpositive_rows = 0;

  int k() const { return static_cast<int>(items.size()); }
  ndiff::Tensor dense() const;
};

SwapMatrix topk_to_swap_matrix(const RankingList& ranking, ItemId num_items);

/// (A S)_i = S[a_i].
std::vector<double> swapped_scores(const SwapMatrix& a, std::span<const double> scores);

struct StudentSwapLoss {
  ndiff::Var swap;  // the k x m leaf holding A
  ndiff::Var loss;  // ranking loss on A * S_student
};

/// Ranking loss of the student, supervised by the list encoded in `a`,
/// evaluated on the matrix product A * S_student so that A is
/// differentiable. `student_scores` is a 1 x m or m x 1 node.
StudentSwapLoss student_loss_on_swap(ndiff::Graph& g, const SwapMatrix& a, ndiff::Var student_scores,
                                     std::span<const ItemId> negatives, double m1, double m2);

/// Back-propagates `sl.loss` and returns the gradient accumulated on A:
/// entry (i, j) = u_i * S_student[j] with u = dL/d(A S).
GradientMatrix grad_wrt_swap(ndiff::Graph& g, const StudentSwapLoss& sl);

/// What a row without any positive admissible gradient proposes.
enum class RowPolicy {
  kArgmax,    // its argmax anyway (ties -> smallest id)
  kPositive,  // no swap: keep the row's current item
};

RowPolicy parse_row_policy(const std::string& name);
std::string to_string(RowPolicy p);

/// Per row, the column with the largest gradient (ties -> smallest id),
/// skipping columns listed in `exclude`. kPositive needs `current`, the
/// swap matrix the gradient was taken at.
ProposalMatrix build_proposal(const GradientMatrix& grad, std::span<const ItemId> exclude = {},
                              RowPolicy policy = RowPolicy::kArgmax, const SwapMatrix* current = nullptr);

/// (1/k) sum_i max((A_i - A'_i) S_target + m_swap, 0) as a node; A and A'
/// are constants. `target_scores` is 1 x m or m x 1.
ndiff::Var swap_loss(const SwapMatrix& a, const ProposalMatrix& proposal, ndiff::Var target_scores,
                     double m_swap);

double swap_loss_value(const SwapMatrix& a, const ProposalMatrix& proposal,
                       std::span<const double> target_scores, double m_swap);

struct GroConfig {
  int k = 100;
  double lambda = 0.1;
  double m_swap = 0.1;
  double margin_order = 0.1;     // student m1
  double margin_negative = 0.1;  // student m2
  int negatives_per_position = 1;
  double lr_target = 0.05;
  double lr_student = 0.05;
  int epochs = 10;
  int batch_size = 16;
  /// Student-only epochs on the target's lists before joint training.
  int student_warmup_epochs = 0;
  /// Apply the defense to the last n positions of each window (0 = all).
  int positions_per_window = 0;
  bool freeze_student = false;
  RowPolicy row_policy = RowPolicy::kArgmax;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StepLosses {
  double target = 0.0;   // mean cross-entropy per position
  double student = 0.0;  // mean ranking loss per defended position
  double swap = 0.0;     // mean swap loss per defended position
};

struct CurvePoint {
  std::size_t step = 0;
  StepLosses losses;
  double lambda = 0.0;
  std::size_t proposal_rows = 0;
  std::size_t nonpositive_rows = 0;
};

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

/// Joint fine-tuning of a target and its student. The target follows
/// d(L_target + lambda L_swap)/d(theta); the student follows
/// d L_student / d(phi) only.
class GroTrainer {
 public:
  GroTrainer(SequenceModel& target, const GroConfig& cfg);

  /// One update on a batch of windows.
  StepLosses joint_step(std::span<const TrainingWindow> batch);
  /// Student update alone (target untouched).
  double student_step(std::span<const TrainingWindow> batch);
  /// Shuffles the split's training windows with `seed` and runs one pass
  /// (same window order and batching as ce_train_epoch).
  StepLosses train_epoch(const SplitDataset& split, std::uint64_t seed);
  double warmup_epoch(const SplitDataset& split, std::uint64_t seed);

  const SequenceModel& student() const { return student_; }
  SequenceModel& student() { return student_; }
  const std::vector<CurvePoint>& curve() const { return curve_; }
  std::size_t proposal_rows() const { return proposal_rows_; }
  std::size_t nonpositive_rows() const { return nonpositive_rows_; }

 private:
  struct Defended {
    int position;
    Sequence prefix;
    SwapMatrix a;
  };
  std::vector<Defended> defended_positions(const TrainingWindow& w, const ndiff::Tensor& target_logits) const;

  SequenceModel& target_;
  SequenceModel student_;
  GroConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<CurvePoint> curve_;
  std::size_t step_ = 0;
  std::size_t proposal_rows_ = 0;
  std::size_t nonpositive_rows_ = 0;
};

/// Validation HR@10 below this multiple of the random-guess rate marks a
/// target as not pretrained.
inline constexpr double kPretrainedHrFactor = 3.0;

/// Fine-tunes a copy of a converged target with the defense; the student is
/// discarded and the protected target returned.
SequenceModel train_with_gro(const SequenceModel& pretrained, const SplitDataset& data, const GroConfig& cfg,
                             std::vector<CurvePoint>* curve = nullptr);

struct Lemma1Report {
  bool applicable = false;
  std::size_t positions_checked = 0;
  std::size_t violations = 0;
  std::vector<int> violating_positions;  // 1-based
};

/// If the swap loss at m_swap = 0 is within `tol` of zero, checks a_i = a'_i
/// at every row i where a'_i does not occur in an earlier row of A'.
Lemma1Report lemma1_verify(const SwapMatrix& a, const ProposalMatrix& proposal,
                           std::span<const double> target_scores, double tol = 0.0);

/// Rows 1..p of A' where the first p rows of A' are pairwise distinct.
/// At zero swap loss (m_swap = 0) these rows always agree with A.
int distinct_proposal_prefix(const ProposalMatrix& proposal);

}  // namespace grorec
