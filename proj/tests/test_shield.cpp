#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "grorec/shield.hpp"

using namespace grorec;

namespace {

RankingList iota_list(int k) {
  RankingList r;
  for (int i = 1; i <= k; ++i) r.items.push_back(100 + i);
  return r;
}

bool same_set(RankingList a, RankingList b) {
  std::sort(a.items.begin(), a.items.end());
  std::sort(b.items.begin(), b.items.end());
  return a == b;
}

// 0.999 quantile of chi-square with 23 degrees of freedom.
constexpr double kChi2Crit23 = 49.728;

double chi_square_over_perms(const std::map<std::vector<ItemId>, int>& counts, int draws) {
  const double expected = draws / 24.0;
  double stat = 0.0;
  for (const auto& [perm, c] : counts) stat += (c - expected) * (c - expected) / expected;
  stat += (24 - static_cast<int>(counts.size())) * expected;  // unseen permutations
  return stat;
}

}  // namespace

TEST(Shield, NoneIsIdentity) {
  const auto r = iota_list(7);
  EXPECT_EQ(apply_output_defense(r, {ShieldKind::kNone, 3}), r);
}

TEST(Shield, ReverseMovesLastToFirst) {
  const auto r = iota_list(10);
  const auto rev = apply_output_defense(r, {ShieldKind::kReverse, 0});
  EXPECT_EQ(rev.items.front(), r.items.back());
  EXPECT_EQ(rev.items.back(), r.items.front());
  EXPECT_EQ(apply_output_defense(rev, {ShieldKind::kReverse, 0}), r);
}

TEST(Shield, RandomIsSeededAndPreservesSet) {
  const auto r = iota_list(12);
  const DefenseMode mode{ShieldKind::kRandom, 99};
  EXPECT_EQ(apply_output_defense(r, mode), apply_output_defense(r, mode));
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_TRUE(same_set(apply_output_defense(r, {ShieldKind::kRandom, s}), r));
}

TEST(Shield, EmptyAndSingleton) {
  for (auto kind : {ShieldKind::kNone, ShieldKind::kRandom, ShieldKind::kReverse}) {
    EXPECT_TRUE(apply_output_defense(RankingList{}, {kind, 1}).items.empty());
    EXPECT_EQ(apply_output_defense(iota_list(1), {kind, 1}), iota_list(1));
  }
}

TEST(Shield, StatelessRandomUniformOverPermutations) {
  const auto r = iota_list(4);
  std::map<std::vector<ItemId>, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ++counts[apply_output_defense(r, {ShieldKind::kRandom, static_cast<std::uint64_t>(s)}).items];
  EXPECT_EQ(counts.size(), 24u);
  for (const auto& [perm, c] : counts) EXPECT_NEAR(c / double(draws), 1.0 / 24, 0.01);
  EXPECT_LT(chi_square_over_perms(counts, draws), kChi2Crit23);
}

TEST(Shield, StatefulRandomUniformOverPermutations) {
  OutputShield shield({ShieldKind::kRandom, 2024});
  const auto r = iota_list(4);
  std::map<std::vector<ItemId>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[shield.apply(r).items];
  EXPECT_LT(chi_square_over_perms(counts, draws), kChi2Crit23);
}

TEST(Shield, StatefulShieldsReplayFromSeed) {
  OutputShield a({ShieldKind::kRandom, 5}), b({ShieldKind::kRandom, 5});
  const auto r = iota_list(8);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.apply(r), b.apply(r));
}

TEST(Shield, ParseNames) {
  EXPECT_EQ(parse_shield("reverse"), ShieldKind::kReverse);
  EXPECT_EQ(to_string(parse_shield("random")), "random");
  EXPECT_THROW(parse_shield("gro"), Error);
}
