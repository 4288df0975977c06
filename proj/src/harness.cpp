#include "grorec/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace grorec {

namespace fs = std::filesystem;

bool RunArtifacts::ok() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const DefenseOutcome& o) { return o.ok; });
}

const SummaryRow* RunArtifacts::find(const std::string& defense, const std::string& model, int k) const {
  for (const auto& r : summary)
    if (r.defense == defense && r.model == model && r.k == k) return &r;
  return nullptr;
}

namespace {

// Runs `fn`, re-throwing any failure as a StageError tagged with `stage`.
template <class Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::kInternal, e.what()));
  }
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void write_curves_csv(const std::vector<CurveRow>& rows, const fs::path& path) {
  std::string text = "phase,defense,step,metric,value\n";
  for (const auto& r : rows)
    text += r.phase + "," + r.defense + "," + std::to_string(r.step) + "," + r.metric + "," +
            fmt(r.value, "%.10g") + "\n";
  write_text(path, text);
}

void write_fidelity_csv(const std::vector<DefenseOutcome>& outcomes, const fs::path& path) {
  std::string text = "defense,overlap_at_10,overlap_ge5,oracle_calls\n";
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    text += o.defense + "," + fmt(o.overlap_at_10) + "," + fmt(o.overlap_ge5) + "," +
            std::to_string(o.oracle_calls) + "\n";
  }
  write_text(path, text);
}

void write_manifest(const ExperimentConfig& cfg, const RunArtifacts& art, const DatasetStats* stats,
                    const std::string& fatal_stage, const std::string& fatal_error) {
  nlohmann::ordered_json j;
  j["format"] = "grorec-run";
  j["version"] = 1;
  j["config_hash"] = hex64(art.config_hash);
  j["seed"] = cfg.seed;
  const bool ok = fatal_stage.empty() && art.ok();
  j["status"] = ok ? "ok" : "failed";
  if (!fatal_stage.empty()) {
    j["failed_stage"] = fatal_stage;
    j["error"] = fatal_error;
  }
  if (stats) {
    j["dataset"] = {{"users", stats->num_users},
                    {"items", stats->num_items},
                    {"avg_length", stats->avg_length},
                    {"density", stats->density}};
  }
  nlohmann::ordered_json defenses = nlohmann::ordered_json::array();
  for (const auto& o : art.outcomes) {
    nlohmann::ordered_json d;
    d["defense"] = o.defense;
    d["status"] = o.ok ? "ok" : "failed";
    if (!o.ok) {
      d["stage"] = o.stage;
      d["error"] = o.error;
    } else {
      d["oracle_calls"] = o.oracle_calls;
      if (o.defense == "gro") {
        d["proposal_rows"] = o.proposal_rows;
        d["nonpositive_rows"] = o.nonpositive_rows;
      }
    }
    defenses.push_back(d);
  }
  j["defenses"] = defenses;
  j["files"] = art.files;
  write_text(art.out_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace

void write_summary_csv(const std::vector<SummaryRow>& rows, const fs::path& path) {
  std::string text = "defense,model,k,hr,ndcg\n";
  for (const auto& r : rows)
    text += r.defense + "," + r.model + "," + std::to_string(r.k) + "," + fmt(r.hr) + "," + fmt(r.ndcg) + "\n";
  write_text(path, text);
}

InteractionDataset load_dataset(const DataSpec& spec) {
  if (spec.source == "synth") return synth_generate(spec.synth);
  if (spec.source == "file") return load_interactions(spec.path, spec.load);
  fail(ErrorCode::kInvalidArgument, "unknown data.source '" + spec.source + "'");
}

SequenceModel pretrain_target(const ExperimentConfig& cfg, const SplitDataset& split,
                              std::vector<PretrainEpoch>* log) {
  const PretrainConfig& t = cfg.train;
  SequenceModel model = SequenceModel::init(cfg.target_arch, split.num_items, t.dim, t.max_len,
                                            derive_seed(cfg.seed, "pretrain-init"), ModelRole::kTarget);
  EvalOptions eo;
  eo.ks = {10};
  eo.k_eval = 10;
  eo.target = EvalTarget::kValidation;
  SequenceModel best = model;
  double best_hr = -1.0;
  int since_best = 0;
  for (int e = 0; e < t.max_epochs && since_best < t.patience; ++e) {
    const double loss =
        ce_train_epoch(model, split, t.lr, t.batch_size, derive_seed(cfg.seed, "pretrain-epoch-" + std::to_string(e)));
    const double hr = evaluate(model, split, eo).at_k.at(10).hr;
    if (log) log->push_back({e + 1, loss, hr});
    if (hr > best_hr) {
      best_hr = hr;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  return best;
}

SequenceModel defend_target(const ExperimentConfig& cfg, const SplitDataset& split, const SequenceModel& target,
                            std::vector<CurvePoint>* curve) {
  GroConfig g = cfg.gro;
  g.seed = derive_seed(cfg.seed, "gro");
  return train_with_gro(target, split, g, curve);
}

DefenseMode deployed_shield(const ExperimentConfig& cfg, Defense defense, const std::string& purpose) {
  DefenseMode mode;
  mode.seed = derive_seed(cfg.seed, "shield-" + purpose + "-" + to_string(defense));
  switch (defense) {
    case Defense::kRandom: mode.kind = ShieldKind::kRandom; break;
    case Defense::kReverse: mode.kind = ShieldKind::kReverse; break;
    case Defense::kNone:
    case Defense::kGro: mode.kind = ShieldKind::kNone; break;
  }
  return mode;
}

SequenceModel attack_model(const ExperimentConfig& cfg, std::shared_ptr<const SequenceModel> deployed,
                           Defense defense, QueryLog* log_out, std::uint64_t* calls_out) {
  Oracle oracle(deployed, deployed_shield(cfg, defense, "oracle"), cfg.attack.k_response);
  AttackConfig queries = cfg.attack;
  queries.seed = derive_seed(cfg.seed, "attack-queries");
  QueryLog log = generate_queries(oracle, queries);
  if (calls_out) *calls_out = oracle.calls();
  AttackConfig fit = cfg.attack;
  fit.seed = derive_seed(cfg.seed, "attack-surrogate");
  SequenceModel surrogate = train_surrogate(log, cfg.surrogate_arch, deployed->num_items(), fit);
  if (log_out) *log_out = std::move(log);
  return surrogate;
}

MetricsReport evaluate_model(const ExperimentConfig& cfg, const SplitDataset& split, const SequenceModel& model,
                             Defense defense, const std::string& role) {
  EvalOptions eo;
  eo.ks = cfg.eval_ks;
  eo.k_eval = cfg.attack.k_response;
  eo.target = EvalTarget::kTest;
  eo.model_role = role;
  eo.defense = to_string(defense);
  // Only the deployed target sits behind the shield; the attacker's own
  // surrogate answers directly.
  if (role == "target") eo.shield = deployed_shield(cfg, defense, "eval");
  return evaluate(model, split, eo);
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  art.config_hash = cfg.hash();
  staged("persist", [&] {
    fs::create_directories(art.out_dir);
    write_text(art.out_dir / "config.txt", cfg.canonical_text());
  });
  art.files.push_back("config.txt");

  DatasetStats stats;
  bool have_stats = false;
  SplitDataset split;
  SequenceModel target;
  try {
    const InteractionDataset ds = staged("data", [&] { return load_dataset(cfg.data); });
    stats = dataset_stats(ds);
    have_stats = true;
    split = staged("data", [&] { return leave_one_out_split(ds); });

    std::vector<PretrainEpoch> plog;
    target = staged("pretrain", [&] { return pretrain_target(cfg, split, &plog); });
    for (const auto& p : plog) {
      art.curves.push_back({"pretrain", "none", static_cast<std::size_t>(p.epoch), "loss", p.loss});
      art.curves.push_back({"pretrain", "none", static_cast<std::size_t>(p.epoch), "val_hr10", p.val_hr10});
    }
    staged("persist", [&] { target.save(art.out_dir / "target_pretrained.ckpt"); });
    art.files.push_back("target_pretrained.ckpt");
  } catch (const StageError& e) {
    write_curves_csv(art.curves, art.out_dir / "curves.csv");
    write_manifest(cfg, art, have_stats ? &stats : nullptr, e.stage(), e.what());
    throw;
  }

  for (Defense defense : cfg.defenses) {
    const std::string name = to_string(defense);
    DefenseOutcome outcome;
    outcome.defense = name;
    try {
      auto deployed = std::make_shared<SequenceModel>(target);
      if (defense == Defense::kGro) {
        std::vector<CurvePoint> curve;
        *deployed = staged("defend", [&] { return defend_target(cfg, split, target, &curve); });
        for (const auto& c : curve) {
          art.curves.push_back({"gro", name, c.step, "l_target", c.losses.target});
          art.curves.push_back({"gro", name, c.step, "l_student", c.losses.student});
          art.curves.push_back({"gro", name, c.step, "l_swap", c.losses.swap});
          art.curves.push_back({"gro", name, c.step, "lambda", c.lambda});
          art.curves.push_back({"gro", name, c.step, "nonpositive_rows", static_cast<double>(c.nonpositive_rows)});
          outcome.nonpositive_rows += c.nonpositive_rows;
          outcome.proposal_rows += c.proposal_rows;
        }
        staged("persist", [&] { deployed->save(art.out_dir / "target_gro.ckpt"); });
        art.files.push_back("target_gro.ckpt");
      }

      QueryLog log;
      const SequenceModel surrogate =
          staged("attack", [&] { return attack_model(cfg, deployed, defense, &log, &outcome.oracle_calls); });
      staged("persist", [&] {
        log.save(art.out_dir / ("queries_" + name + ".jsonl"));
        surrogate.save(art.out_dir / ("surrogate_" + name + ".ckpt"));
      });
      art.files.push_back("queries_" + name + ".jsonl");
      art.files.push_back("surrogate_" + name + ".ckpt");

      const MetricsReport rt = staged("evaluate", [&] { return evaluate_model(cfg, split, *deployed, defense, "target"); });
      const MetricsReport rs =
          staged("evaluate", [&] { return evaluate_model(cfg, split, surrogate, defense, "surrogate"); });
      const std::vector<int> overlap = staged("evaluate", [&] { return top_list_overlap(surrogate, *deployed, split, 10); });
      outcome.overlap_at_10 =
          std::accumulate(overlap.begin(), overlap.end(), 0.0) / static_cast<double>(overlap.size());
      outcome.overlap_ge5 = static_cast<double>(std::count_if(overlap.begin(), overlap.end(), [](int o) { return o >= 5; })) /
                            static_cast<double>(overlap.size());
      staged("persist", [&] {
        write_text(art.out_dir / ("metrics_" + name + "_target.json"), rt.to_json() + "\n");
        write_text(art.out_dir / ("metrics_" + name + "_surrogate.json"), rs.to_json() + "\n");
      });
      art.files.push_back("metrics_" + name + "_target.json");
      art.files.push_back("metrics_" + name + "_surrogate.json");
      for (const auto* rep : {&rt, &rs})
        for (const auto& [k, v] : rep->at_k) art.summary.push_back({name, rep->model_role, k, v.hr, v.ndcg});
    } catch (const StageError& e) {
      outcome.ok = false;
      outcome.stage = e.stage();
      outcome.error = e.what();
      outcome.code = e.code();
    }
    art.outcomes.push_back(outcome);
  }

  staged("persist", [&] {
    write_summary_csv(art.summary, art.out_dir / "summary.csv");
    write_curves_csv(art.curves, art.out_dir / "curves.csv");
    write_fidelity_csv(art.outcomes, art.out_dir / "fidelity.csv");
  });
  art.files.insert(art.files.end(), {"summary.csv", "curves.csv", "fidelity.csv", "manifest.json"});
  staged("persist", [&] { write_manifest(cfg, art, &stats, "", ""); });
  return art;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "lambda") return SweepAxis::kLambda;
  if (name == "n_queries") return SweepAxis::kNQueries;
  fail(ErrorCode::kInvalidArgument, "unknown sweep axis '" + name + "' (lambda or n_queries)");
}

std::string to_string(SweepAxis a) { return a == SweepAxis::kLambda ? "lambda" : "n_queries"; }

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values) {
  require(!values.empty(), "sweep: empty value list");
  for (double v : values) {
    if (axis == SweepAxis::kLambda) require(v >= 0.0, "sweep: lambda values must be non-negative");
    if (axis == SweepAxis::kNQueries)
      require(v >= 1.0 && v == static_cast<double>(static_cast<int>(v)), "sweep: n_queries values must be positive integers");
  }
  std::vector<SweepPoint> points;
  std::string merged = "axis,value,defense,model,k,hr,ndcg\n";
  for (double v : values) {
    SweepPoint pt;
    pt.value = v;
    ExperimentConfig run = cfg;
    std::string label;
    if (axis == SweepAxis::kLambda) {
      run.gro.lambda = v;
      label = fmt(v, "%g");
    } else {
      run.attack.n_queries = static_cast<int>(v);
      label = std::to_string(run.attack.n_queries);
    }
    run.out_dir = cfg.out_dir / (to_string(axis) + "=" + label);
    try {
      pt.artifacts = run_experiment(run);
      pt.ok = pt.artifacts.ok();
      if (!pt.ok) pt.error = "one or more defenses failed (see manifest)";
      for (const auto& r : pt.artifacts.summary)
        merged += to_string(axis) + "," + label + "," + r.defense + "," + r.model + "," + std::to_string(r.k) + "," +
                  fmt(r.hr) + "," + fmt(r.ndcg) + "\n";
    } catch (const Error& e) {
      pt.ok = false;
      pt.error = e.what();
    }
    points.push_back(std::move(pt));
  }
  staged("persist", [&] {
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "sweep.csv", merged);
  });
  return points;
}

}  // namespace grorec
