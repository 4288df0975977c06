#include "grorec/grodefense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "grorec/evalmetrics.hpp"
#include "grorec/extraction.hpp"

namespace grorec {

using ndiff::Graph;
using ndiff::Tensor;
using ndiff::Var;

SwapMatrix::SwapMatrix(std::vector<ItemId> ranked, ItemId num_items)
    : ranked_(std::move(ranked)), num_items_(num_items) {
  require(num_items_ >= 1, "swap matrix: catalog must be non-empty");
  require(!ranked_.empty(), "swap matrix: empty ranking");
  require(static_cast<ItemId>(ranked_.size()) <= num_items_, "swap matrix: k exceeds the catalog size");
  std::vector<char> seen(static_cast<std::size_t>(num_items_) + 1, 0);
  for (ItemId i : ranked_) {
    require(i >= 1 && i <= num_items_, "swap matrix: item id " + std::to_string(i) + " out of range");
    if (seen[i]) fail(ErrorCode::kInvalidArgument, "swap matrix: duplicate item " + std::to_string(i));
    seen[i] = 1;
  }
}

Tensor SwapMatrix::dense() const {
  Tensor t(k(), num_items_);
  for (int r = 0; r < k(); ++r) t(r, ranked_[r] - 1) = 1.0;
  return t;
}

std::vector<double> SwapMatrix::times_item_ids() const {
  std::vector<double> out(ranked_.size());
  const Tensor a = dense();
  for (int r = 0; r < k(); ++r) {
    double acc = 0.0;
    for (ItemId j = 0; j < num_items_; ++j) acc += a(r, j) * static_cast<double>(j + 1);
    out[r] = acc;
  }
  return out;
}

Tensor ProposalMatrix::dense() const {
  Tensor t(k(), num_items);
  for (int r = 0; r < k(); ++r) t(r, items[r] - 1) = 1.0;
  return t;
}

SwapMatrix topk_to_swap_matrix(const RankingList& ranking, ItemId num_items) {
  return SwapMatrix(ranking.items, num_items);
}

std::vector<double> swapped_scores(const SwapMatrix& a, std::span<const double> scores) {
  require(scores.size() == static_cast<std::size_t>(a.num_items()), "swapped_scores: shape mismatch");
  std::vector<double> out;
  out.reserve(a.items().size());
  for (ItemId i : a.items()) out.push_back(scores[i - 1]);
  return out;
}

namespace {

Var as_column(Var scores, ItemId m, const char* who) {
  Var col = scores.rows() == 1 && scores.cols() != 1 ? ndiff::transpose(scores) : scores;
  require(col.cols() == 1 && col.rows() == m, std::string(who) + ": shape mismatch");
  return col;
}

}  // namespace

StudentSwapLoss student_loss_on_swap(Graph& g, const SwapMatrix& a, Var student_scores,
                                     std::span<const ItemId> negatives, double m1, double m2) {
  Var col = as_column(student_scores, a.num_items(), "student_loss_on_swap");
  const int k = a.k();
  require(!negatives.empty() && negatives.size() % k == 0,
          "student_loss_on_swap: need the same number of negatives for every position");
  std::vector<char> ranked(static_cast<std::size_t>(a.num_items()) + 1, 0);
  for (ItemId i : a.items()) ranked[i] = 1;
  const int per = static_cast<int>(negatives.size()) / k;
  std::vector<int> neg_rows(negatives.size()), owner(negatives.size());
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const ItemId n = negatives[j];
    require(n >= 1 && n <= a.num_items(), "student_loss_on_swap: negative id out of range");
    if (ranked[n])
      fail(ErrorCode::kInvalidArgument,
           "student_loss_on_swap: negative item " + std::to_string(n) + " overlaps the ranking");
    neg_rows[j] = n - 1;
    owner[j] = static_cast<int>(j) / per;
  }

  StudentSwapLoss out;
  out.swap = g.leaf(a.dense());
  Var s = ndiff::matmul(out.swap, col);  // k x 1, row i = S[a_i]
  Var total = ndiff::sum(ndiff::relu(
      ndiff::add_scalar(ndiff::sub(ndiff::gather_rows(col, neg_rows), ndiff::gather_rows(s, owner)), m2)));
  if (k > 1) {
    Var pairs = ndiff::relu(
        ndiff::add_scalar(ndiff::sub(ndiff::slice_rows(s, 1, k), ndiff::slice_rows(s, 0, k - 1)), m1));
    total = ndiff::add(ndiff::sum(pairs), total);
  }
  out.loss = total;
  return out;
}

GradientMatrix grad_wrt_swap(Graph& g, const StudentSwapLoss& sl) {
  require(sl.swap.valid() && sl.loss.valid() && sl.swap.graph() == &g && sl.loss.graph() == &g,
          "grad_wrt_swap: nodes belong to another graph");
  if (!g.depends_on(sl.loss, sl.swap))
    fail(ErrorCode::kPrecondition, "grad_wrt_swap: loss is not connected to the swap matrix");
  g.backward(sl.loss);
  const Tensor& grad = sl.swap.grad();
  if (grad.empty()) return {Tensor(sl.swap.rows(), sl.swap.cols())};
  return {grad};
}

RowPolicy parse_row_policy(const std::string& name) {
  if (name == "argmax") return RowPolicy::kArgmax;
  if (name == "positive") return RowPolicy::kPositive;
  fail(ErrorCode::kInvalidArgument, "unknown row policy '" + name + "'");
}

std::string to_string(RowPolicy p) { return p == RowPolicy::kArgmax ? "argmax" : "positive"; }

ProposalMatrix build_proposal(const GradientMatrix& grad, std::span<const ItemId> exclude, RowPolicy policy,
                              const SwapMatrix* current) {
  const Tensor& e = grad.entries;
  require(e.rows() >= 1 && e.cols() >= 1, "build_proposal: empty gradient matrix");
  if (policy == RowPolicy::kPositive)
    require(current != nullptr && current->k() == e.rows() && current->num_items() == e.cols(),
            "build_proposal: the positive policy needs the current swap matrix");
  std::vector<char> skip(static_cast<std::size_t>(e.cols()), 0);
  for (ItemId i : exclude) {
    require(i >= 1 && i <= e.cols(), "build_proposal: excluded id out of range");
    skip[i - 1] = 1;
  }
  ProposalMatrix p;
  p.num_items = e.cols();
  p.items.reserve(e.rows());
  for (int r = 0; r < e.rows(); ++r) {
    int best = -1;
    double best_v = 0.0;
    for (int c = 0; c < e.cols(); ++c) {
      const double v = e(r, c);
      if (!std::isfinite(v)) fail(ErrorCode::kNumeric, "build_proposal: non-finite gradient");
      if (skip[c]) continue;
      if (best < 0 || v > best_v) {
        best = c;
        best_v = v;
      }
    }
    require(best >= 0, "build_proposal: every column is excluded");
    if (best_v <= 0.0) {
      ++p.nonpositive_rows;
      if (policy == RowPolicy::kPositive) best = current->items()[r] - 1;
    }
    p.items.push_back(best + 1);
  }
  return p;
}

namespace {

void check_pair(const SwapMatrix& a, const ProposalMatrix& p) {
  require(a.k() == p.k() && a.num_items() == p.num_items, "swap loss: A and A' shapes differ");
  for (ItemId i : p.items) require(i >= 1 && i <= p.num_items, "swap loss: A' id out of range");
}

}  // namespace

Var swap_loss(const SwapMatrix& a, const ProposalMatrix& proposal, Var target_scores, double m_swap) {
  check_pair(a, proposal);
  Var col = as_column(target_scores, a.num_items(), "swap_loss");
  std::vector<int> rows_a(a.k()), rows_p(a.k());
  for (int i = 0; i < a.k(); ++i) {
    rows_a[i] = a.items()[i] - 1;
    rows_p[i] = proposal.items[i] - 1;
  }
  Var diff = ndiff::sub(ndiff::gather_rows(col, rows_a), ndiff::gather_rows(col, rows_p));
  return ndiff::scale(ndiff::sum(ndiff::relu(ndiff::add_scalar(diff, m_swap))), 1.0 / a.k());
}

double swap_loss_value(const SwapMatrix& a, const ProposalMatrix& proposal,
                       std::span<const double> target_scores, double m_swap) {
  check_pair(a, proposal);
  require(target_scores.size() == static_cast<std::size_t>(a.num_items()), "swap_loss: shape mismatch");
  double total = 0.0;
  for (int i = 0; i < a.k(); ++i)
    total += std::max(target_scores[a.items()[i] - 1] - target_scores[proposal.items[i] - 1] + m_swap, 0.0);
  return total / a.k();
}

void GroConfig::validate() const {
  require(k >= 1, "gro: k must be >= 1");
  require(lambda >= 0.0, "gro: lambda must be non-negative");
  require(m_swap >= 0.0, "gro: m_swap must be non-negative");
  require(margin_order >= 0.0 && margin_negative >= 0.0, "gro: student margins must be non-negative");
  require(negatives_per_position >= 1, "gro: negatives_per_position must be >= 1");
  require(lr_target >= 0.0 && lr_student >= 0.0, "gro: learning rates must be non-negative");
  require(epochs >= 0 && student_warmup_epochs >= 0, "gro: epochs must be non-negative");
  require(batch_size >= 1, "gro: batch_size must be >= 1");
  require(positions_per_window >= 0, "gro: positions_per_window must be non-negative");
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "step,l_target,l_student,l_swap,lambda\n";
  char buf[160];
  for (const auto& c : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", c.step, c.losses.target,
                  c.losses.student, c.losses.swap, c.lambda);
    out << buf;
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

GroTrainer::GroTrainer(SequenceModel& target, const GroConfig& cfg)
    : target_(target),
      student_(SequenceModel::init(target.architecture(), target.num_items(), target.dim(), target.max_len(),
                                   derive_seed(cfg.seed, "student-init"), ModelRole::kStudent)),
      cfg_(cfg),
      rng_(derive_seed(cfg.seed, "student-negatives")) {
  cfg_.validate();
  require(cfg_.k + target.max_len() <= target.num_items(),
          "gro: k plus the window length must not exceed the catalog size");
}

std::vector<GroTrainer::Defended> GroTrainer::defended_positions(const TrainingWindow& w,
                                                                 const Tensor& target_logits) const {
  const int len = static_cast<int>(w.targets.size());
  const int first = cfg_.positions_per_window > 0 ? std::max(0, len - cfg_.positions_per_window) : 0;
  std::vector<Defended> out;
  out.reserve(len - first);
  for (int p = first; p < len; ++p) {
    Sequence prefix(w.input.begin(), w.input.begin() + p + 1);
    RankingList top = topk(target_logits.row_span(p), static_cast<std::size_t>(cfg_.k), prefix);
    out.push_back({p, std::move(prefix), SwapMatrix(std::move(top.items), target_.num_items())});
  }
  return out;
}

namespace {

struct BatchSums {
  double ce = 0.0, student = 0.0, swap = 0.0;
  std::size_t positions = 0;
};

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) fail(ErrorCode::kNumeric, std::string("gro: non-finite ") + what + " (divergence)");
}

std::vector<TrainingWindow> shuffled_windows(const SplitDataset& split, int max_len, std::uint64_t seed) {
  std::vector<TrainingWindow> windows;
  for (const auto& seq : split.train)
    for (const auto& w : training_windows(seq, max_len)) windows.push_back(w);
  require(!windows.empty(), "gro: no training positions", ErrorCode::kPrecondition);
  std::mt19937_64 rng(seed);
  std::shuffle(windows.begin(), windows.end(), rng);
  return windows;
}

}  // namespace

StepLosses GroTrainer::joint_step(std::span<const TrainingWindow> batch) {
  require(!batch.empty(), "gro: empty batch", ErrorCode::kPrecondition);
  const ItemId m = target_.num_items();

  // Defended positions per window are known up front so both losses can be
  // normalized before the per-window backward passes.
  std::size_t batch_positions = 0, batch_defended = 0;
  for (const auto& w : batch) {
    const std::size_t len = w.targets.size();
    batch_positions += len;
    batch_defended += cfg_.positions_per_window > 0 ? std::min<std::size_t>(len, cfg_.positions_per_window) : len;
  }
  const double inv_pos = 1.0 / static_cast<double>(batch_positions);
  const double inv_def = 1.0 / static_cast<double>(batch_defended);

  BatchSums sums;
  std::size_t step_rows = 0, step_nonpositive = 0;
  for (const auto& w : batch) {
    Graph gt;
    Var logits_t = target_.output(gt, target_.hidden(gt, w.input));
    std::vector<int> targets(w.targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = w.targets[i] - 1;
    Var ce = ndiff::softmax_cross_entropy(logits_t, targets);
    check_finite(ce.value().item(), "target loss");
    const auto defended = defended_positions(w, logits_t.value());

    Graph gs;
    Var logits_s = student_.output(gs, student_.hidden(gs, w.input));
    std::vector<StudentSwapLoss> student_losses;
    student_losses.reserve(defended.size());
    Var student_total;
    for (const auto& d : defended) {
      const RankingList list{d.a.items()};
      const auto negs = sample_negatives(list, m, cfg_.negatives_per_position, rng_);
      student_losses.push_back(student_loss_on_swap(gs, d.a, ndiff::slice_rows(logits_s, d.position, d.position + 1),
                                                    negs, cfg_.margin_order, cfg_.margin_negative));
      const Var& l = student_losses.back().loss;
      student_total = student_total.valid() ? ndiff::add(student_total, l) : l;
    }
    check_finite(student_total.value().item(), "student loss");
    gs.backward(ndiff::scale(student_total, inv_def));

    Var swap_total;
    for (std::size_t i = 0; i < defended.size(); ++i) {
      const ProposalMatrix proposal = build_proposal({student_losses[i].swap.grad()}, defended[i].prefix,
                                                    cfg_.row_policy, &defended[i].a);
      step_rows += proposal.items.size();
      step_nonpositive += proposal.nonpositive_rows;
      const int p = defended[i].position;
      Var l = swap_loss(defended[i].a, proposal, ndiff::slice_rows(logits_t, p, p + 1), cfg_.m_swap);
      swap_total = swap_total.valid() ? ndiff::add(swap_total, l) : l;
    }
    check_finite(swap_total.value().item(), "swap loss");
    gt.backward(ndiff::add(ndiff::scale(ce, inv_pos), ndiff::scale(swap_total, cfg_.lambda * inv_def)));

    sums.ce += ce.value().item();
    sums.student += student_total.value().item();
    sums.swap += swap_total.value().item();
  }

  target_.sgd_step(cfg_.lr_target, kClipNorm);
  if (cfg_.freeze_student)
    student_.zero_grad();
  else
    student_.sgd_step(cfg_.lr_student, kClipNorm);
  if (!target_.all_finite() || !student_.all_finite())
    fail(ErrorCode::kNumeric, "gro: non-finite parameters (divergence)");

  StepLosses out{sums.ce * inv_pos, sums.student * inv_def, sums.swap * inv_def};
  proposal_rows_ += step_rows;
  nonpositive_rows_ += step_nonpositive;
  curve_.push_back({++step_, out, cfg_.lambda, step_rows, step_nonpositive});
  return out;
}

double GroTrainer::student_step(std::span<const TrainingWindow> batch) {
  require(!batch.empty(), "gro: empty batch", ErrorCode::kPrecondition);
  const ItemId m = target_.num_items();
  std::size_t batch_defended = 0;
  for (const auto& w : batch) {
    const std::size_t len = w.targets.size();
    batch_defended += cfg_.positions_per_window > 0 ? std::min<std::size_t>(len, cfg_.positions_per_window) : len;
  }
  const double inv_def = 1.0 / static_cast<double>(batch_defended);
  double total = 0.0;
  for (const auto& w : batch) {
    Graph gt(false);
    const SequenceModel& frozen = target_;
    Var logits_t = frozen.output(gt, frozen.hidden(gt, w.input));
    const auto defended = defended_positions(w, logits_t.value());
    Graph gs;
    Var logits_s = student_.output(gs, student_.hidden(gs, w.input));
    Var sum_l;
    for (const auto& d : defended) {
      const RankingList list{d.a.items()};
      const auto negs = sample_negatives(list, m, cfg_.negatives_per_position, rng_);
      Var l = ranking_loss_node(ndiff::slice_rows(logits_s, d.position, d.position + 1), list, negs,
                                cfg_.margin_order, cfg_.margin_negative);
      sum_l = sum_l.valid() ? ndiff::add(sum_l, l) : l;
    }
    check_finite(sum_l.value().item(), "student loss");
    gs.backward(ndiff::scale(sum_l, inv_def));
    total += sum_l.value().item();
  }
  student_.sgd_step(cfg_.lr_student, kClipNorm);
  if (!student_.all_finite()) fail(ErrorCode::kNumeric, "gro: non-finite student parameters (divergence)");
  return total * inv_def;
}

StepLosses GroTrainer::train_epoch(const SplitDataset& split, std::uint64_t seed) {
  const auto windows = shuffled_windows(split, target_.max_len(), seed);
  double ce = 0.0, student = 0.0, swap = 0.0;
  std::size_t positions = 0, defended = 0;
  for (std::size_t start = 0; start < windows.size(); start += cfg_.batch_size) {
    const std::size_t stop = std::min(windows.size(), start + cfg_.batch_size);
    const std::span<const TrainingWindow> batch(windows.data() + start, stop - start);
    std::size_t bp = 0, bd = 0;
    for (const auto& w : batch) {
      bp += w.targets.size();
      bd += cfg_.positions_per_window > 0 ? std::min<std::size_t>(w.targets.size(), cfg_.positions_per_window)
                                          : w.targets.size();
    }
    const StepLosses l = joint_step(batch);
    ce += l.target * bp;
    student += l.student * bd;
    swap += l.swap * bd;
    positions += bp;
    defended += bd;
  }
  return {ce / positions, student / defended, swap / defended};
}

double GroTrainer::warmup_epoch(const SplitDataset& split, std::uint64_t seed) {
  const auto windows = shuffled_windows(split, target_.max_len(), seed);
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < windows.size(); start += cfg_.batch_size) {
    const std::size_t stop = std::min(windows.size(), start + cfg_.batch_size);
    total += student_step({windows.data() + start, stop - start});
    ++steps;
  }
  return total / static_cast<double>(steps);
}

SequenceModel train_with_gro(const SequenceModel& pretrained, const SplitDataset& data, const GroConfig& cfg,
                             std::vector<CurvePoint>* curve) {
  cfg.validate();
  require(pretrained.num_items() == data.num_items, "gro: model and dataset catalogs differ");

  EvalOptions eo;
  eo.ks = {10};
  eo.k_eval = 10;
  eo.target = EvalTarget::kValidation;
  const double hr = evaluate(pretrained, data, eo).at_k.at(10).hr;
  const double random_hr = 10.0 / static_cast<double>(data.num_items);
  if (hr < kPretrainedHrFactor * random_hr)
    fail(ErrorCode::kPrecondition, "gro: target does not look pretrained (validation HR@10 " + std::to_string(hr) +
                                       " below " + std::to_string(kPretrainedHrFactor) + " x random)");

  SequenceModel target = pretrained;
  if (cfg.epochs == 0) return target;
  GroTrainer trainer(target, cfg);
  for (int e = 0; e < cfg.student_warmup_epochs; ++e)
    trainer.warmup_epoch(data, derive_seed(cfg.seed, "gro-warmup-" + std::to_string(e)));
  for (int e = 0; e < cfg.epochs; ++e)
    trainer.train_epoch(data, derive_seed(cfg.seed, "gro-epoch-" + std::to_string(e)));
  if (curve) *curve = trainer.curve();
  return target;
}

Lemma1Report lemma1_verify(const SwapMatrix& a, const ProposalMatrix& proposal,
                           std::span<const double> target_scores, double tol) {
  Lemma1Report r;
  if (swap_loss_value(a, proposal, target_scores, 0.0) > tol) return r;
  r.applicable = true;
  std::vector<char> seen(static_cast<std::size_t>(proposal.num_items) + 1, 0);
  for (int i = 0; i < proposal.k(); ++i) {
    const ItemId p = proposal.items[i];
    if (!seen[p]) {
      ++r.positions_checked;
      if (a.items()[i] != p) {
        ++r.violations;
        r.violating_positions.push_back(i + 1);
      }
    }
    seen[p] = 1;
  }
  return r;
}

int distinct_proposal_prefix(const ProposalMatrix& proposal) {
  std::vector<char> seen(static_cast<std::size_t>(proposal.num_items) + 1, 0);
  int n = 0;
  for (ItemId p : proposal.items) {
    if (seen[p]) break;
    seen[p] = 1;
    ++n;
  }
  return n;
}

}  // namespace grorec
