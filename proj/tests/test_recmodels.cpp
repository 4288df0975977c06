#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "grorec/evalmetrics.hpp"
#include "grorec/recmodels.hpp"

using namespace grorec;

namespace {

const SplitDataset& small_split() {
  static const SplitDataset s = leave_one_out_split(synth_generate({120, 40, 10, 1, 3}));
  return s;
}

}  // namespace

TEST(Init, SameSeedSameParameters) {
  for (auto arch : {Architecture::kAttnLite, Architecture::kRecurrent}) {
    const auto a = SequenceModel::init(arch, 50, 16, 10, 42);
    const auto b = SequenceModel::init(arch, 50, 16, 10, 42);
    const auto c = SequenceModel::init(arch, 50, 16, 10, 43);
    EXPECT_TRUE(a.same_parameters(b));
    EXPECT_FALSE(a.same_parameters(c));
  }
}

TEST(Init, ArchitecturesDifferButScoreAllItems) {
  const auto a = SequenceModel::init(Architecture::kAttnLite, 50, 16, 10, 1);
  const auto r = SequenceModel::init(Architecture::kRecurrent, 50, 16, 10, 1);
  EXPECT_NE(a.num_scalars(), r.num_scalars());
  const Sequence q{3, 7, 9};
  EXPECT_EQ(a.score_next(q).size(), 50u);
  EXPECT_EQ(r.score_next(q).size(), 50u);
}

TEST(Init, UntrainedNearRandomBaseline) {
  const auto split = leave_one_out_split(synth_generate({500, 200, 20, 1, 7}));
  const double baseline = 10.0 / 200.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto m = SequenceModel::init(Architecture::kAttnLite, 200, 32, 20, seed);
    EvalOptions opt;
    opt.ks = {10};
    const double hr = evaluate(m, split, opt).at_k.at(10).hr;
    EXPECT_NEAR(hr, baseline, 0.02) << "seed " << seed;
  }
}

TEST(ScoreNext, PureAndShaped) {
  const auto m = SequenceModel::init(Architecture::kRecurrent, 30, 8, 5, 9);
  const Sequence q{1, 2, 3, 4, 5, 6, 7};
  const auto s1 = m.score_next(q);
  EXPECT_EQ(s1.size(), 30u);
  EXPECT_EQ(s1, m.score_next(q));
}

TEST(ScoreNext, RejectsBadSequences) {
  const auto m = SequenceModel::init(Architecture::kAttnLite, 30, 8, 5, 9);
  EXPECT_THROW(m.score_next(Sequence{}), Error);
  EXPECT_THROW(m.score_next(Sequence{0}), Error);
  EXPECT_THROW(m.score_next(Sequence{31}), Error);
}

TEST(ScoreNext, CausalHiddenStates) {
  // Row t of the hidden states must not see items after t.
  const auto m = SequenceModel::init(Architecture::kAttnLite, 30, 8, 6, 4);
  const Sequence a{1, 2, 3, 4}, b{1, 2, 3, 9};
  ndiff::Graph g(false);
  const auto ha = m.hidden(g, a).value();
  const auto hb = m.hidden(g, b).value();
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < ha.cols(); ++j) EXPECT_EQ(ha(t, j), hb(t, j));
}

TEST(TopK, Examples) {
  const std::vector<double> s{0.1, 0.9, 0.5};
  EXPECT_EQ(topk(s, 2).items, (std::vector<ItemId>{2, 3}));
  const std::vector<ItemId> ex{2};
  EXPECT_EQ(topk(s, 2, ex).items, (std::vector<ItemId>{3, 1}));
  const std::vector<double> flat(5, 1.0);
  EXPECT_EQ(topk(flat, 3).items, (std::vector<ItemId>{1, 2, 3}));
}

TEST(TopK, MatchesFullSortOracle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 5 + static_cast<int>(rng() % 40);
    std::vector<double> s(m);
    for (auto& v : s) v = coarse(rng);
    std::vector<ItemId> ex;
    for (ItemId i = 1; i <= m; ++i)
      if (rng() % 5 == 0) ex.push_back(i);
    const std::size_t k = 1 + rng() % 8;

    std::vector<ItemId> all;
    for (ItemId i = 1; i <= m; ++i)
      if (std::find(ex.begin(), ex.end(), i) == ex.end()) all.push_back(i);
    std::sort(all.begin(), all.end(), [&](ItemId a, ItemId b) {
      return s[a - 1] != s[b - 1] ? s[a - 1] > s[b - 1] : a < b;
    });
    if (all.size() < k) {
      EXPECT_THROW(topk(s, k, ex), Error);
      continue;
    }
    all.resize(k);
    EXPECT_EQ(topk(s, k, ex).items, all);
  }
}

TEST(Windows, CoverEveryPositionOnce) {
  Sequence seq(23);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = static_cast<ItemId>(i + 1);
  const auto ws = training_windows(seq, 5);
  std::vector<ItemId> targets;
  for (const auto& w : ws) {
    EXPECT_LE(w.input.size(), 5u);
    EXPECT_EQ(w.input.size(), w.targets.size());
    for (std::size_t t = 0; t < w.input.size(); ++t) EXPECT_EQ(w.targets[t], w.input[t] + 1);
    targets.insert(targets.end(), w.targets.begin(), w.targets.end());
  }
  std::sort(targets.begin(), targets.end());
  EXPECT_EQ(targets, Sequence(seq.begin() + 1, seq.end()));
}

TEST(Train, ZeroLearningRateIsNoOp) {
  auto m = SequenceModel::init(Architecture::kAttnLite, 40, 8, 6, 5);
  const auto before = m;
  const double eval_loss = ce_eval_loss(m, small_split());
  const double loss = ce_train_epoch(m, small_split(), 0.0, 8, 1);
  EXPECT_TRUE(m.same_parameters(before));
  EXPECT_NEAR(loss, eval_loss, 1e-9);
}

TEST(Train, DeterministicEpoch) {
  auto a = SequenceModel::init(Architecture::kRecurrent, 40, 8, 6, 5);
  auto b = a;
  ce_train_epoch(a, small_split(), 0.1, 8, 77);
  ce_train_epoch(b, small_split(), 0.1, 8, 77);
  EXPECT_TRUE(a.same_parameters(b));
}

TEST(Train, LossDecreasesOnSynth) {
  auto m = SequenceModel::init(Architecture::kAttnLite, 40, 16, 10, 5);
  const double before = ce_eval_loss(m, small_split());
  for (int e = 0; e < 5; ++e) ce_train_epoch(m, small_split(), 0.3, 8, e);
  EXPECT_LT(ce_eval_loss(m, small_split()), before);
}

TEST(Train, SingleUserMemorization) {
  for (auto arch : {Architecture::kAttnLite, Architecture::kRecurrent}) {
    InteractionDataset ds{{{1, 2, 3, 4, 5, 6, 7, 8}}, 8};
    const auto split = leave_one_out_split(ds);
    auto m = SequenceModel::init(arch, 8, 16, 10, 3);
    double loss = 1e9;
    for (int e = 0; e < 200 && loss >= 0.1; ++e) ce_train_epoch(m, split, 0.5, 1, e);
    loss = ce_eval_loss(m, split);
    EXPECT_LT(loss, 0.1) << to_string(arch);
  }
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto m = SequenceModel::init(Architecture::kRecurrent, 25, 8, 4, 6, ModelRole::kSurrogate);
  const auto dir = std::filesystem::temp_directory_path() / "grorec_tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / "m.ckpt";
  m.save(p);
  const auto back = SequenceModel::load(p);
  EXPECT_TRUE(back.same_parameters(m));
  EXPECT_EQ(back.role(), ModelRole::kSurrogate);

  std::filesystem::resize_file(p, std::filesystem::file_size(p) / 2);
  EXPECT_THROW(SequenceModel::load(p), Error);
  EXPECT_THROW(SequenceModel::load(dir / "missing.ckpt"), Error);
}

TEST(Sgd, ClipsGlobalNorm) {
  auto m = SequenceModel::init(Architecture::kAttnLite, 20, 8, 4, 2);
  const auto before = m;
  for (auto& p : m.parameters()) {
    p.zero_grad();
    p.grad.fill(100.0);
  }
  m.sgd_step(1.0, kClipNorm);
  double sq = 0.0;
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    for (std::size_t j = 0; j < m.parameters()[i].value.size(); ++j) {
      const double d = m.parameters()[i].value[j] - before.parameters()[i].value[j];
      sq += d * d;
    }
  EXPECT_NEAR(std::sqrt(sq), kClipNorm, 1e-9);
}
