#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "grorec/recmodels.hpp"

namespace grorec {

enum class ShieldKind { kNone, kRandom, kReverse };

ShieldKind parse_shield(const std::string& name);
std::string to_string(ShieldKind k);

struct DefenseMode {
  ShieldKind kind = ShieldKind::kNone;
  std::uint64_t seed = 0;  // used by kRandom only
};

/// Stateless form: the permutation for kRandom is a pure function of
/// (list length, mode.seed).
RankingList apply_output_defense(const RankingList& ranking, const DefenseMode& mode);

/// Stateful form used by deployed systems: one generator per shield, so
/// successive lists get independent shuffles.
class OutputShield {
 public:
  explicit OutputShield(DefenseMode mode) : mode_(mode), rng_(mode.seed) {}

  RankingList apply(const RankingList& ranking);
  const DefenseMode& mode() const { return mode_; }

 private:
  DefenseMode mode_;
  std::mt19937_64 rng_;
};

}  // namespace grorec
