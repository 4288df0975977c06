#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grorec/config.hpp"
#include "grorec/evalmetrics.hpp"
#include "grorec/extraction.hpp"
#include "grorec/grodefense.hpp"
#include "grorec/recmodels.hpp"
#include "grorec/seqdata.hpp"

namespace grorec {

/// An Error raised inside a named pipeline stage (data, pretrain, defend,
/// attack, evaluate, persist).
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct SummaryRow {
  std::string defense;
  std::string model;  // "target" (as deployed) or "surrogate"
  int k = 0;
  double hr = 0.0;
  double ndcg = 0.0;
};

/// Tidy observation for plotting: one (phase, defense, step, metric, value).
struct CurveRow {
  std::string phase;
  std::string defense;
  std::size_t step = 0;
  std::string metric;
  double value = 0.0;
};

struct DefenseOutcome {
  std::string defense;
  bool ok = true;
  std::string stage;  // failing stage when !ok
  std::string error;
  ErrorCode code = ErrorCode::kInternal;
  /// Mean |top-10 of surrogate ∩ top-10 of deployed target| over test users,
  /// and the fraction of users with overlap >= 5.
  double overlap_at_10 = 0.0;
  double overlap_ge5 = 0.0;
  std::uint64_t oracle_calls = 0;
  std::size_t nonpositive_rows = 0;
  std::size_t proposal_rows = 0;
};

struct RunArtifacts {
  std::filesystem::path out_dir;
  std::uint64_t config_hash = 0;
  std::vector<SummaryRow> summary;
  std::vector<CurveRow> curves;
  std::vector<DefenseOutcome> outcomes;
  std::vector<std::string> files;  // relative to out_dir

  bool ok() const;
  const SummaryRow* find(const std::string& defense, const std::string& model, int k) const;
};

InteractionDataset load_dataset(const DataSpec& spec);

struct PretrainEpoch {
  int epoch = 0;
  double loss = 0.0;
  double val_hr10 = 0.0;
};

/// Cross-entropy training until validation HR@10 has not improved for
/// `patience` epochs (or max_epochs); returns the best epoch's parameters.
SequenceModel pretrain_target(const ExperimentConfig& cfg, const SplitDataset& split,
                              std::vector<PretrainEpoch>* log = nullptr);

/// train_with_gro with the run's GRO settings and derived seed.
SequenceModel defend_target(const ExperimentConfig& cfg, const SplitDataset& split, const SequenceModel& target,
                            std::vector<CurvePoint>* curve = nullptr);

/// Output shield a deployed model sits behind for `defense` (none for gro).
DefenseMode deployed_shield(const ExperimentConfig& cfg, Defense defense, const std::string& purpose);

/// Runs the extraction attack against `deployed` behind the defense's
/// shield. The query and surrogate seeds are shared by every defense.
SequenceModel attack_model(const ExperimentConfig& cfg, std::shared_ptr<const SequenceModel> deployed,
                           Defense defense, QueryLog* log_out = nullptr, std::uint64_t* calls_out = nullptr);

MetricsReport evaluate_model(const ExperimentConfig& cfg, const SplitDataset& split, const SequenceModel& model,
                             Defense defense, const std::string& role);

/// Full pipeline per defense. Writes summary.csv, curves.csv, fidelity.csv,
/// manifest.json, config.txt, checkpoints, query logs and metrics JSON into
/// cfg.out_dir. A failing defense is recorded with its stage and the run
/// continues; data or pretraining failures abort with a StageError after
/// the manifest is written.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

enum class SweepAxis { kLambda, kNQueries };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis a);

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string error;
  RunArtifacts artifacts;
};

/// One run per value (only the axis varied) in cfg.out_dir/<axis>=<value>,
/// plus a merged sweep.csv in cfg.out_dir. Failing points are recorded and
/// skipped.
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

}  // namespace grorec
