#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "grorec/seqdata.hpp"

using namespace grorec;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "grorec_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST(Load, SharedItemsNoFiltering) {
  std::string body;
  for (int u = 1; u <= 3; ++u)
    for (int i = 1; i <= 5; ++i) body += std::to_string(u) + "::" + std::to_string(100 + i) + "::4::" + std::to_string(i) + "\n";
  LoadOptions opt;
  opt.min_item_count = 1;
  const auto ds = load_interactions(temp_file("shared.dat", body), opt);
  EXPECT_EQ(ds.num_users(), 3);
  EXPECT_EQ(ds.num_items, 5);
  for (const auto& s : ds.sequences) EXPECT_EQ(s, (Sequence{1, 2, 3, 4, 5}));
}

TEST(Load, RareItemDroppedAndIdsRedensified) {
  // (user, item, timestamp); item 7 occurs once.
  const std::vector<std::tuple<int, int, int>> rows = {
      {1, 3, 1}, {1, 5, 2}, {1, 7, 3}, {1, 9, 4}, {2, 9, 1},
      {2, 3, 2}, {2, 5, 3}, {3, 5, 1}, {3, 9, 2}, {3, 3, 3},
  };
  std::string body;
  for (auto [u, i, t] : rows) body += std::to_string(u) + "\t" + std::to_string(i) + "\t5\t" + std::to_string(t) + "\n";
  LoadOptions opt;
  opt.separator = "\t";
  opt.min_item_count = 2;
  const auto ds = load_interactions(temp_file("rare.tsv", body), opt);

  // Brute-force oracle: count, filter, remap ascending, order by time.
  std::map<int, int> count;
  for (auto [u, i, t] : rows) ++count[i];
  std::map<int, int> remap;
  for (auto [item, c] : count)
    if (c >= 2) remap.emplace(item, static_cast<int>(remap.size()) + 1);
  std::map<int, std::vector<std::pair<int, int>>> per_user;
  for (auto [u, i, t] : rows)
    if (remap.count(i)) per_user[u].push_back({t, remap[i]});
  std::vector<Sequence> expected;
  for (auto& [u, v] : per_user) {
    std::stable_sort(v.begin(), v.end());
    Sequence s;
    for (auto [t, i] : v) s.push_back(i);
    expected.push_back(s);
  }
  EXPECT_EQ(ds.num_items, 3);
  EXPECT_EQ(ds.sequences, expected);
}

TEST(Load, TsvSequencesRoundTrip) {
  const auto ds = synth_generate({30, 40, 8, 1, 3});
  const fs::path p = fs::temp_directory_path() / "grorec_tests" / "roundtrip.tsv";
  fs::create_directories(p.parent_path());
  save_sequences(ds, p);
  LoadOptions opt;
  opt.format = InteractionFormat::kTsvSequences;
  opt.min_item_count = 1;
  EXPECT_EQ(load_interactions(p, opt), ds);
}

TEST(Load, Errors) {
  EXPECT_THROW(load_interactions("/nonexistent/ratings.dat", LoadOptions{}), Error);
  try {
    load_interactions(temp_file("bad.dat", "1::x::3::4\n"), LoadOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
  }
  LoadOptions bad;
  bad.min_seq_len = 2;
  EXPECT_THROW(load_interactions(temp_file("ok.dat", "1::1::1::1\n"), bad), Error);
  EXPECT_THROW(parse_interaction_format("csv"), Error);
}

TEST(Split, Examples) {
  InteractionDataset ds{{{1, 2, 3, 4, 5}, {5, 4, 3}}, 5};
  const auto split = leave_one_out_split(ds);
  EXPECT_EQ(split.train[0], (Sequence{1, 2, 3}));
  EXPECT_EQ(split.val_target[0], 4);
  EXPECT_EQ(split.test_target[0], 5);
  EXPECT_EQ(split.train[1], (Sequence{5}));
  EXPECT_EQ(split.val_target[1], 4);
  EXPECT_EQ(split.test_target[1], 3);
  EXPECT_EQ(split.test_prefix(0), (Sequence{1, 2, 3, 4}));
}

TEST(Split, MinimumLength) {
  InteractionDataset ds{{{3, 2, 1}}, 3};
  const auto split = leave_one_out_split(ds);
  EXPECT_EQ(split.train[0], (Sequence{3}));
  EXPECT_EQ(split.val_target[0], 2);
  EXPECT_EQ(split.test_target[0], 1);
}

TEST(Split, ReconstructionProperty) {
  std::mt19937_64 rng(17);
  InteractionDataset ds;
  ds.num_items = 30;
  for (int u = 0; u < 100; ++u) {
    Sequence s(3 + rng() % 20);
    for (auto& i : s) i = 1 + static_cast<ItemId>(rng() % 30);
    ds.sequences.push_back(s);
  }
  const auto split = leave_one_out_split(ds);
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    Sequence r = split.train[u];
    r.push_back(split.val_target[u]);
    r.push_back(split.test_target[u]);
    EXPECT_EQ(r, ds.sequences[u]);
  }
}

TEST(Split, RejectsShortSequence) {
  InteractionDataset ds{{{1, 2}}, 2};
  EXPECT_THROW(leave_one_out_split(ds), Error);
}

TEST(Stats, HandCount) {
  InteractionDataset ds{{{1, 2, 3, 4}, {5, 6, 7, 8, 9, 10}}, 10};
  const auto st = dataset_stats(ds);
  EXPECT_EQ(st.num_users, 2);
  EXPECT_EQ(st.num_items, 10);
  EXPECT_DOUBLE_EQ(st.avg_length, 5.0);
  EXPECT_DOUBLE_EQ(st.density, 0.5);
}

TEST(Stats, SingleUserCoversAll) {
  InteractionDataset ds{{{3, 1, 2, 4}}, 4};
  EXPECT_DOUBLE_EQ(dataset_stats(ds).density, 1.0);
}

TEST(Validate, NamesBrokenInvariant) {
  InteractionDataset gap{{{1, 2, 4}}, 4};
  try {
    gap.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
    EXPECT_NE(std::string(e.what()).find("never occurs"), std::string::npos);
  }
  InteractionDataset range{{{1, 2, 9}}, 2};
  EXPECT_THROW(range.validate(), Error);
}

TEST(Synth, Deterministic) {
  const SynthOptions opt{500, 200, 20, 1, 7};
  EXPECT_EQ(synth_generate(opt), synth_generate(opt));
  SynthOptions other = opt;
  other.seed = 8;
  EXPECT_NE(synth_generate(opt), synth_generate(other));
}

TEST(Synth, ValidAndNoRepeats) {
  const auto ds = synth_generate({200, 60, 12, 2, 5});
  ds.validate();
  EXPECT_EQ(ds.num_items, 60);
  for (const auto& s : ds.sequences) EXPECT_EQ(std::set<ItemId>(s.begin(), s.end()).size(), s.size());
  EXPECT_NEAR(dataset_stats(ds).avg_length, 12.0, 3.0);
}

// A most-popular recommender must beat the uniform 10/m baseline.
TEST(Synth, PopularityOracleBeatsRandom) {
  const auto ds = synth_generate({500, 200, 20, 1, 7});
  const auto split = leave_one_out_split(ds);
  std::vector<int> freq(ds.num_items + 1, 0);
  for (const auto& s : split.train)
    for (ItemId i : s) ++freq[i];
  std::vector<ItemId> by_pop(ds.num_items);
  for (ItemId i = 1; i <= ds.num_items; ++i) by_pop[i - 1] = i;
  std::stable_sort(by_pop.begin(), by_pop.end(), [&](ItemId a, ItemId b) { return freq[a] > freq[b]; });
  int hits = 0;
  for (std::size_t u = 0; u < split.num_users(); ++u) {
    const Sequence prefix = split.test_prefix(u);
    const std::set<ItemId> seen(prefix.begin(), prefix.end());
    int taken = 0;
    for (ItemId i : by_pop) {
      if (seen.count(i)) continue;
      if (i == split.test_target[u]) ++hits;
      if (++taken == 10) break;
    }
  }
  const double hr = static_cast<double>(hits) / split.num_users();
  EXPECT_GT(hr, 10.0 / ds.num_items);
}

TEST(Synth, OrderZeroIsStationary) {
  const auto a = synth_generate({400, 50, 10, 0, 1});
  a.validate();
  // Without a chain, the first-item and later-item marginals coincide up to noise.
  std::vector<double> first(51, 0.0), rest(51, 0.0);
  double nf = 0, nr = 0;
  for (const auto& s : a.sequences) {
    first[s[0]] += 1;
    nf += 1;
    for (std::size_t t = 1; t < s.size(); ++t) rest[s[t]] += 1, nr += 1;
  }
  double tv = 0.0;
  for (int i = 1; i <= 50; ++i) tv += std::abs(first[i] / nf - rest[i] / nr);
  EXPECT_LT(tv / 2, 0.25);
}

TEST(Synth, RejectsBadOptions) {
  EXPECT_THROW(synth_generate({10, 5, 20, 1, 7}), Error);
  EXPECT_THROW(synth_generate({10, 50, 20, -1, 7}), Error);
}
