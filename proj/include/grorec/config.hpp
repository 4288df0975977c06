#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grorec/extraction.hpp"
#include "grorec/grodefense.hpp"
#include "grorec/recmodels.hpp"
#include "grorec/seqdata.hpp"

namespace grorec {

enum class Defense { kNone, kRandom, kReverse, kGro };

Defense parse_defense(const std::string& name);
std::string to_string(Defense d);
/// Comma-separated defense names, order kept, duplicates rejected.
std::vector<Defense> parse_defense_list(const std::string& text);

struct DataSpec {
  /// "synth" or "file".
  std::string source = "synth";
  std::string path;
  LoadOptions load;
  SynthOptions synth;
};

struct PretrainConfig {
  int dim = 32;
  int max_len = 20;
  double lr = 0.05;
  int batch_size = 16;
  int max_epochs = 60;
  /// Stop after this many epochs without a better validation HR@10.
  int patience = 5;
};

struct ExperimentConfig {
  DataSpec data;
  Architecture target_arch = Architecture::kAttnLite;
  Architecture surrogate_arch = Architecture::kAttnLite;
  PretrainConfig train;
  std::vector<Defense> defenses{Defense::kNone, Defense::kRandom, Defense::kReverse, Defense::kGro};
  GroConfig gro;
  AttackConfig attack;
  std::vector<int> eval_ks{1, 5, 10, 20};
  std::filesystem::path out_dir = "runs/default";
  std::uint64_t seed = 7;

  void validate() const;

  /// Sets one dotted key from its text form (same syntax as the file).
  void set(const std::string& key, const std::string& value);
  /// Every key in a fixed order, one "key = value" line each. The output
  /// directory is left out so relocating a run keeps its hash.
  std::string canonical_text() const;
  std::uint64_t hash() const;
};

/// Flat "key = value" lines; '#' starts a comment. Unknown or repeated keys
/// are parse errors carrying the line number.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Names accepted by ExperimentConfig::set, in canonical order.
std::vector<std::string> config_keys();

std::string hex64(std::uint64_t v);

}  // namespace grorec
