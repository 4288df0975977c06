#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grorec {

/// Dense 1-based item identifier. Column j-1 of every score vector holds item j.
using ItemId = std::int32_t;
using Sequence = std::vector<ItemId>;

/// Preference scores for all m items, ordered by item id (index = id - 1).
using ScoreVector = std::vector<double>;

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kParse,
  kNumeric,
  kPrecondition,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what,
                    ErrorCode code = ErrorCode::kInvalidArgument) {
  if (!cond) throw Error(code, what);
}

/// 64-bit FNV-1a. Used for config hashing and stage-seed derivation, so the
/// value must never change between releases.
constexpr std::uint64_t fnv1a64(std::string_view text,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-stage seed: depends only on (master, stage), so adding stages never
/// shifts the seeds of existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  return splitmix64(master ^ fnv1a64(stage));
}

}  // namespace grorec
