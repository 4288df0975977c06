// Exercises the shared library through grorec.h only.
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "grorec/grorec.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  grorec_string_free(s);
  return out;
}

grorec_config* tiny_config(const std::string& out) {
  grorec_config* c = nullptr;
  EXPECT_EQ(grorec_config_default(&c), GROREC_OK);
  const char* kv[][2] = {
      {"data.synth.users", "150"}, {"data.synth.items", "60"},  {"data.synth.avg_len", "15"},
      {"model.dim", "16"},         {"model.max_len", "8"},      {"train.lr", "0.5"},
      {"train.max_epochs", "30"},  {"train.patience", "6"},     {"gro.k", "10"},
      {"gro.epochs", "1"},         {"attack.n_queries", "30"},  {"attack.k_response", "20"},
      {"attack.max_query_len", "5"}, {"attack.epochs", "2"},    {"attack.dim", "8"},
      {"attack.max_len", "8"},
  };
  for (auto& p : kv) EXPECT_EQ(grorec_config_set(c, p[0], p[1]), GROREC_OK) << p[0];
  const fs::path dir = fs::temp_directory_path() / "grorec_tests" / out;
  fs::remove_all(dir);
  EXPECT_EQ(grorec_config_set(c, "out_dir", dir.c_str()), GROREC_OK);
  return c;
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(grorec_version(), "");
  EXPECT_STREQ(grorec_status_name(GROREC_E_PARSE), "parse");
}

TEST(CApi, ConfigGetSetAndErrors) {
  grorec_config* c = nullptr;
  ASSERT_EQ(grorec_config_default(&c), GROREC_OK);
  EXPECT_EQ(grorec_config_set(c, "gro.lambda", "0.25"), GROREC_OK);
  char* v = nullptr;
  ASSERT_EQ(grorec_config_get(c, "gro.lambda", &v), GROREC_OK);
  EXPECT_EQ(take(v), "0.25");
  EXPECT_EQ(grorec_config_set(c, "no.such.key", "1"), GROREC_E_PARSE);
  EXPECT_NE(std::string(grorec_last_error()).find("no.such.key"), std::string::npos);
  EXPECT_EQ(grorec_config_set(nullptr, "seed", "1"), GROREC_E_INVALID_ARGUMENT);
  uint64_t h1 = 0, h2 = 0;
  grorec_config_hash(c, &h1);
  grorec_config_set(c, "seed", "99");
  grorec_config_hash(c, &h2);
  EXPECT_NE(h1, h2);
  char* canon = nullptr;
  ASSERT_EQ(grorec_config_canonical(c, &canon), GROREC_OK);
  EXPECT_NE(take(canon).find("seed = 99"), std::string::npos);
  grorec_config_free(c);
  grorec_config_free(nullptr);
}

TEST(CApi, LoadMissingConfigIsIo) {
  grorec_config* c = nullptr;
  EXPECT_EQ(grorec_config_load("/nonexistent/x.conf", &c), GROREC_E_IO);
  EXPECT_EQ(c, nullptr);
}

TEST(CApi, DatasetStats) {
  grorec_config* c = tiny_config("capi_stats");
  grorec_dataset* ds = nullptr;
  ASSERT_EQ(grorec_dataset_from_config(c, &ds), GROREC_OK);
  grorec_dataset_stats st{};
  ASSERT_EQ(grorec_dataset_stats_get(ds, &st), GROREC_OK);
  EXPECT_EQ(st.users, 150);
  EXPECT_EQ(st.items, 60);
  EXPECT_GT(st.density, 0.0);
  grorec_dataset_free(ds);
  grorec_config_free(c);
}

TEST(CApi, StagedPipeline) {
  grorec_config* c = tiny_config("capi_pipeline");
  grorec_dataset* ds = nullptr;
  ASSERT_EQ(grorec_dataset_from_config(c, &ds), GROREC_OK);
  grorec_model* target = nullptr;
  ASSERT_EQ(grorec_train(c, ds, &target), GROREC_OK) << grorec_last_error();

  int32_t m = 0;
  grorec_model_num_items(target, &m);
  EXPECT_EQ(m, 60);
  const int32_t seq[] = {1, 2, 3};
  int32_t top[5];
  ASSERT_EQ(grorec_model_topk(target, seq, 3, 5, top), GROREC_OK);
  for (int32_t i : top) EXPECT_GT(i, 3);

  grorec_model* protected_target = nullptr;
  ASSERT_EQ(grorec_defend(c, ds, target, nullptr, &protected_target), GROREC_OK) << grorec_last_error();
  grorec_model* surrogate = nullptr;
  ASSERT_EQ(grorec_attack(c, protected_target, "gro", nullptr, &surrogate), GROREC_OK) << grorec_last_error();
  char* json = nullptr;
  ASSERT_EQ(grorec_evaluate(c, ds, surrogate, "gro", "surrogate", &json), GROREC_OK);
  EXPECT_NE(take(json).find("\"surrogate\""), std::string::npos);
  EXPECT_EQ(grorec_evaluate(c, ds, surrogate, "gro", "attacker", &json), GROREC_E_INVALID_ARGUMENT);
  EXPECT_EQ(grorec_attack(c, target, "blur", nullptr, &surrogate), GROREC_E_INVALID_ARGUMENT);

  const fs::path ckpt = fs::temp_directory_path() / "grorec_tests" / "capi_pipeline" / "t.ckpt";
  fs::create_directories(ckpt.parent_path());
  ASSERT_EQ(grorec_model_save(target, ckpt.c_str()), GROREC_OK);
  grorec_model* back = nullptr;
  ASSERT_EQ(grorec_model_load(ckpt.c_str(), &back), GROREC_OK);
  int32_t top2[5];
  grorec_model_topk(back, seq, 3, 5, top2);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(top[i], top2[i]);

  grorec_model_free(back);
  grorec_model_free(surrogate);
  grorec_model_free(protected_target);
  grorec_model_free(target);
  grorec_dataset_free(ds);
  grorec_config_free(c);
}

TEST(CApi, UntrainedTargetFailsDefendWithPrecondition) {
  grorec_config* c = tiny_config("capi_untrained");
  grorec_config_set(c, "train.max_epochs", "1");
  grorec_config_set(c, "train.lr", "0");
  grorec_dataset* ds = nullptr;
  ASSERT_EQ(grorec_dataset_from_config(c, &ds), GROREC_OK);
  grorec_model* target = nullptr;
  ASSERT_EQ(grorec_train(c, ds, &target), GROREC_OK);
  grorec_model* out = nullptr;
  EXPECT_EQ(grorec_defend(c, ds, target, nullptr, &out), GROREC_E_PRECONDITION);
  EXPECT_STREQ(grorec_last_stage(), "defend");
  grorec_model_free(target);
  grorec_dataset_free(ds);
  grorec_config_free(c);
}

TEST(CApi, RunReportsFailingStage) {
  grorec_config* c = tiny_config("capi_run_fail");
  grorec_config_set(c, "defense.list", "gro");
  grorec_config_set(c, "gro.lr_target", "1e200");
  EXPECT_EQ(grorec_run(c), GROREC_E_NUMERIC);
  EXPECT_STREQ(grorec_last_stage(), "defend");
  grorec_config_free(c);
}

TEST(CApi, SweepRejectsEmptyList) {
  grorec_config* c = tiny_config("capi_sweep");
  EXPECT_EQ(grorec_sweep(c, "lambda", nullptr, 0), GROREC_E_INVALID_ARGUMENT);
  EXPECT_EQ(grorec_sweep(c, "depth", nullptr, 0), GROREC_E_INVALID_ARGUMENT);
  grorec_config_free(c);
}
