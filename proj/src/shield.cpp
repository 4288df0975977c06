#include "grorec/shield.hpp"

#include <algorithm>

namespace grorec {

ShieldKind parse_shield(const std::string& name) {
  if (name == "none") return ShieldKind::kNone;
  if (name == "random") return ShieldKind::kRandom;
  if (name == "reverse") return ShieldKind::kReverse;
  fail(ErrorCode::kInvalidArgument, "unknown output defense '" + name + "'");
}

std::string to_string(ShieldKind k) {
  switch (k) {
    case ShieldKind::kNone: return "none";
    case ShieldKind::kRandom: return "random";
    case ShieldKind::kReverse: return "reverse";
  }
  return "none";
}

namespace {

RankingList permute(const RankingList& ranking, ShieldKind kind, std::mt19937_64& rng) {
  RankingList out = ranking;
  switch (kind) {
    case ShieldKind::kNone:
      break;
    case ShieldKind::kRandom:
      std::shuffle(out.items.begin(), out.items.end(), rng);
      break;
    case ShieldKind::kReverse:
      std::reverse(out.items.begin(), out.items.end());
      break;
  }
  return out;
}

}  // namespace

RankingList apply_output_defense(const RankingList& ranking, const DefenseMode& mode) {
  std::mt19937_64 rng(mode.seed);
  return permute(ranking, mode.kind, rng);
}

RankingList OutputShield::apply(const RankingList& ranking) {
  return permute(ranking, mode_.kind, rng_);
}

}  // namespace grorec
