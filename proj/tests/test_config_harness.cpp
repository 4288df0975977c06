#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "grorec/config.hpp"
#include "grorec/harness.hpp"

using namespace grorec;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
# small enough for a unit test
seed = 11
data.synth.users = 150
data.synth.items = 60
data.synth.avg_len = 15
model.dim = 16
model.max_len = 8
train.lr = 0.5
train.max_epochs = 30
train.patience = 6
gro.k = 10
gro.epochs = 1
attack.n_queries = 40
attack.k_response = 20
attack.max_query_len = 5
attack.epochs = 2
attack.dim = 8
attack.max_len = 8
)";

ExperimentConfig tiny(const std::string& out) {
  ExperimentConfig c = parse_config(kTinyConfig);
  c.out_dir = fs::temp_directory_path() / "grorec_tests" / out;
  fs::remove_all(c.out_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsValidate) { ExperimentConfig{}.validate(); }

TEST(Config, ParseSetsKeysAndIgnoresComments) {
  const auto c = parse_config("gro.lambda = 0.5  # weight\n\n defense.list = none, gro\n");
  EXPECT_EQ(c.gro.lambda, 0.5);
  EXPECT_EQ(c.defenses, (std::vector<Defense>{Defense::kNone, Defense::kGro}));
}

TEST(Config, ErrorsCarryLineNumbers) {
  auto expect_parse_error = [](const std::string& text, const std::string& fragment) {
    try {
      parse_config(text, "cfg");
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParse);
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_parse_error("seed = 1\nbogus.key = 3\n", "cfg:2:");
  expect_parse_error("seed = 1\nseed = 2\n", "duplicate");
  expect_parse_error("gro.k = ten\n", "integer");
  expect_parse_error("just words\n", "key = value");
  expect_parse_error("defense.list = none,none\n", "twice");
}

TEST(Config, CanonicalRoundTripAndHash) {
  ExperimentConfig c;
  c.set("gro.lambda", "0.001");
  c.set("attack.rank_weighted", "true");
  const auto back = parse_config(c.canonical_text());
  EXPECT_EQ(back.canonical_text(), c.canonical_text());
  EXPECT_EQ(back.hash(), c.hash());
  ExperimentConfig d = c;
  d.out_dir = "elsewhere";
  EXPECT_EQ(d.hash(), c.hash());
  d.set("seed", "8");
  EXPECT_NE(d.hash(), c.hash());
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, EveryKeyRoundTrips) {
  const ExperimentConfig c;
  const auto text = c.canonical_text();
  for (const auto& k : config_keys()) {
    if (k == "out_dir") continue;
    EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
  }
}

TEST(Config, ValidateRejectsInconsistentSettings) {
  ExperimentConfig c;
  c.eval_ks = {1, 500};
  EXPECT_THROW(c.validate(), Error);
  c = ExperimentConfig{};
  c.data.source = "file";
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_defense_list(""), Error);
  EXPECT_THROW(parse_defense("shuffle"), Error);
}

TEST(Harness, PretrainReachesGateAndLogs) {
  const auto cfg = tiny("pretrain");
  const auto split = leave_one_out_split(load_dataset(cfg.data));
  std::vector<PretrainEpoch> log;
  const auto m = pretrain_target(cfg, split, &log);
  EXPECT_FALSE(log.empty());
  EXPECT_LE(log.size(), 30u);
  double best = 0.0;
  for (const auto& e : log) best = std::max(best, e.val_hr10);
  EXPECT_GE(best, 3.0 * 10.0 / 60.0);
  EXPECT_TRUE(m.all_finite());
}

TEST(Harness, DeployedShieldOnlyForOutputDefenses) {
  const ExperimentConfig cfg;
  EXPECT_EQ(deployed_shield(cfg, Defense::kGro, "eval").kind, ShieldKind::kNone);
  EXPECT_EQ(deployed_shield(cfg, Defense::kReverse, "eval").kind, ShieldKind::kReverse);
  EXPECT_NE(deployed_shield(cfg, Defense::kRandom, "eval").seed, deployed_shield(cfg, Defense::kRandom, "oracle").seed);
}

TEST(Harness, RunWritesArtifactsAndIsDeterministic) {
  auto cfg = tiny("run_a");
  const auto art = run_experiment(cfg);
  ASSERT_TRUE(art.ok());
  // 4 defenses x 2 models per cutoff.
  for (int k : cfg.eval_ks) {
    int rows = 0;
    for (const auto& r : art.summary) rows += r.k == k;
    EXPECT_EQ(rows, 8) << "k=" << k;
  }
  for (const char* f : {"summary.csv", "curves.csv", "fidelity.csv", "manifest.json", "config.txt",
                        "target_pretrained.ckpt", "target_gro.ckpt", "queries_none.jsonl", "surrogate_gro.ckpt",
                        "metrics_reverse_target.json"})
    EXPECT_TRUE(fs::exists(cfg.out_dir / f)) << f;
  EXPECT_EQ(slurp(cfg.out_dir / "summary.csv").substr(0, 25), "defense,model,k,hr,ndcg\nn");
  EXPECT_NE(art.find("gro", "surrogate", 10), nullptr);

  auto again = tiny("run_b");
  run_experiment(again);
  EXPECT_EQ(slurp(cfg.out_dir / "summary.csv"), slurp(again.out_dir / "summary.csv"));
  EXPECT_EQ(slurp(cfg.out_dir / "curves.csv"), slurp(again.out_dir / "curves.csv"));
}

TEST(Harness, FailingDefenseIsRecordedAndRunContinues) {
  auto cfg = tiny("run_fail");
  cfg.defenses = {Defense::kGro, Defense::kNone};
  cfg.gro.lr_target = 1e200;  // diverges on the first step
  const auto art = run_experiment(cfg);
  ASSERT_EQ(art.outcomes.size(), 2u);
  EXPECT_FALSE(art.outcomes[0].ok);
  EXPECT_EQ(art.outcomes[0].stage, "defend");
  EXPECT_TRUE(art.outcomes[1].ok);
  EXPECT_NE(slurp(cfg.out_dir / "manifest.json").find("defend"), std::string::npos);
}

TEST(Harness, DataFailureRaisesStageError) {
  auto cfg = tiny("run_nodata");
  cfg.data.source = "file";
  cfg.data.path = "/nonexistent/ratings.dat";
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "data");
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  EXPECT_TRUE(fs::exists(cfg.out_dir / "manifest.json"));
}

TEST(Sweep, EmptyListIsError) {
  const auto cfg = tiny("sweep_empty");
  EXPECT_THROW(sweep(cfg, SweepAxis::kLambda, {}), Error);
  EXPECT_FALSE(fs::exists(cfg.out_dir / "sweep.csv"));
  EXPECT_THROW(parse_sweep_axis("epochs"), Error);
}

TEST(Sweep, OneRunPerValue) {
  auto cfg = tiny("sweep_nq");
  cfg.defenses = {Defense::kNone};
  const auto pts = sweep(cfg, SweepAxis::kNQueries, {20, 30});
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) EXPECT_TRUE(p.ok) << p.error;
  EXPECT_TRUE(fs::exists(cfg.out_dir / "sweep.csv"));
  EXPECT_EQ(pts[1].artifacts.outcomes[0].oracle_calls, 30u * 5u);
}
