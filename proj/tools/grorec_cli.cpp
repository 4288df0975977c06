// grorec command-line front end. Talks to the library only through grorec.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grorec/grorec.h"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageExit = 64;

// Carries a failed call's status and stage out of a verb.
struct CallFailed {
  grorec_status status;
  std::string stage;
  std::string message;
};

void check(grorec_status s) {
  if (s != GROREC_OK) throw CallFailed{s, grorec_last_stage(), grorec_last_error()};
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
};

using Config = Handle<grorec_config, grorec_config_free>;
using Dataset = Handle<grorec_dataset, grorec_dataset_free>;
using Model = Handle<grorec_model, grorec_model_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  grorec_string_free(s);
  return out;
}

struct Common {
  std::string config_path;
  std::string seed;
  std::string out;
  std::string defense;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c, bool with_defense) {
  sub->add_option("--config", c.config_path, "Experiment config file (key = value lines)");
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  sub->add_option("--out", c.out, "Output directory (overrides out_dir)");
  if (with_defense) sub->add_option("--defense", c.defense, "Defense list: none,random,reverse,gro");
  sub->add_option("--set", c.overrides, "Extra config override key=value (repeatable)");
}

void load_config(const Common& c, Config& cfg) {
  if (c.config_path.empty())
    check(grorec_config_default(cfg.out()));
  else
    check(grorec_config_load(c.config_path.c_str(), cfg.out()));
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CallFailed{GROREC_E_INVALID_ARGUMENT, "config", "--set expects key=value"};
    check(grorec_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (!c.seed.empty()) check(grorec_config_set(cfg.p, "seed", c.seed.c_str()));
  if (!c.out.empty()) check(grorec_config_set(cfg.p, "out_dir", c.out.c_str()));
  if (!c.defense.empty()) check(grorec_config_set(cfg.p, "defense.list", c.defense.c_str()));
}

fs::path out_dir(const Config& cfg) {
  char* s = nullptr;
  check(grorec_config_get(cfg.p, "out_dir", &s));
  fs::path p = take(s);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw CallFailed{GROREC_E_IO, "persist", "cannot create " + p.string() + ": " + ec.message()};
  return p;
}

void write_stats(const Dataset& ds, const fs::path& path) {
  grorec_dataset_stats st{};
  check(grorec_dataset_stats_get(ds.p, &st));
  std::ofstream f(path);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\n  \"users\": %lld,\n  \"items\": %lld,\n  \"avg_length\": %.6f,\n  \"density\": %.8f\n}\n",
                static_cast<long long>(st.users), static_cast<long long>(st.items), st.avg_length, st.density);
  f << buf;
  if (!f) throw CallFailed{GROREC_E_IO, "persist", "cannot write " + path.string()};
  std::cout << buf;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string part = text.substr(pos, comma - pos);
    if (!part.empty()) {
      char* end = nullptr;
      const double v = std::strtod(part.c_str(), &end);
      if (end != part.c_str() + part.size())
        throw CallFailed{GROREC_E_INVALID_ARGUMENT, "sweep", "bad sweep value '" + part + "'"};
      out.push_back(v);
    }
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grorec: sequential recommenders, extraction attacks and ranking defenses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(grorec_version()));

  Common c;
  std::string model_path, role = "target", axis, values, lambda_values, nq_values;
  std::string input, format, separator;

  auto* ingest = app.add_subcommand("ingest", "Load an interaction file, write sequences.tsv and stats.json");
  add_common(ingest, c, false);
  ingest->add_option("--input", input, "Interaction file")->required();
  ingest->add_option("--format", format, "delimited-ratings or tsv-sequences");
  ingest->add_option("--separator", separator, "Field separator for delimited-ratings");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus, write sequences.tsv and stats.json");
  add_common(synth, c, false);

  auto* train = app.add_subcommand("train", "Pretrain the target model, write target.ckpt");
  add_common(train, c, false);

  auto* defend = app.add_subcommand("defend", "GRO fine-tuning of a pretrained target, write target_gro.ckpt");
  add_common(defend, c, false);
  defend->add_option("--model", model_path, "Pretrained target checkpoint")->required();

  auto* attack = app.add_subcommand("attack", "Extraction attack on a deployed model");
  add_common(attack, c, true);
  attack->add_option("--model", model_path, "Deployed model checkpoint")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Test-split HR@k / NDCG@k of a checkpoint");
  add_common(evaluate, c, true);
  evaluate->add_option("--model", model_path, "Model checkpoint")->required();
  evaluate->add_option("--role", role, "target (behind the shield) or surrogate");

  auto* run = app.add_subcommand("run", "Full pipeline for every configured defense");
  add_common(run, c, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat the pipeline over one axis");
  add_common(sweep_cmd, c, true);
  sweep_cmd->add_option("--axis", axis, "lambda or n_queries");
  sweep_cmd->add_option("--values", values, "Comma-separated axis values");
  sweep_cmd->add_option("--lambda", lambda_values, "Shorthand for --axis lambda --values ...");
  sweep_cmd->add_option("--n-queries", nq_values, "Shorthand for --axis n_queries --values ...");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    Config cfg;
    if (ingest->parsed()) {
      load_config(c, cfg);
      check(grorec_config_set(cfg.p, "data.source", "file"));
      check(grorec_config_set(cfg.p, "data.path", input.c_str()));
      if (!format.empty()) check(grorec_config_set(cfg.p, "data.format", format.c_str()));
      if (!separator.empty()) check(grorec_config_set(cfg.p, "data.separator", separator.c_str()));
      const fs::path dir = out_dir(cfg);
      Dataset ds;
      check(grorec_dataset_from_config(cfg.p, ds.out()));
      check(grorec_dataset_save(ds.p, (dir / "sequences.tsv").c_str()));
      write_stats(ds, dir / "stats.json");
    } else if (synth->parsed()) {
      load_config(c, cfg);
      check(grorec_config_set(cfg.p, "data.source", "synth"));
      const fs::path dir = out_dir(cfg);
      Dataset ds;
      check(grorec_dataset_from_config(cfg.p, ds.out()));
      check(grorec_dataset_save(ds.p, (dir / "sequences.tsv").c_str()));
      write_stats(ds, dir / "stats.json");
    } else if (train->parsed()) {
      load_config(c, cfg);
      check(grorec_config_validate(cfg.p));
      const fs::path dir = out_dir(cfg);
      Dataset ds;
      check(grorec_dataset_from_config(cfg.p, ds.out()));
      Model m;
      check(grorec_train(cfg.p, ds.p, m.out()));
      check(grorec_model_save(m.p, (dir / "target.ckpt").c_str()));
      std::cout << (dir / "target.ckpt").string() << "\n";
    } else if (defend->parsed()) {
      load_config(c, cfg);
      check(grorec_config_validate(cfg.p));
      const fs::path dir = out_dir(cfg);
      Dataset ds;
      check(grorec_dataset_from_config(cfg.p, ds.out()));
      Model target, out;
      check(grorec_model_load(model_path.c_str(), target.out()));
      check(grorec_defend(cfg.p, ds.p, target.p, (dir / "gro_curve.csv").c_str(), out.out()));
      check(grorec_model_save(out.p, (dir / "target_gro.ckpt").c_str()));
      std::cout << (dir / "target_gro.ckpt").string() << "\n";
    } else if (attack->parsed()) {
      load_config(c, cfg);
      check(grorec_config_validate(cfg.p));
      const fs::path dir = out_dir(cfg);
      const std::string d = c.defense.empty() ? "none" : c.defense;
      Model deployed, surrogate;
      check(grorec_model_load(model_path.c_str(), deployed.out()));
      check(grorec_attack(cfg.p, deployed.p, d.c_str(), (dir / ("queries_" + d + ".jsonl")).c_str(),
                          surrogate.out()));
      check(grorec_model_save(surrogate.p, (dir / ("surrogate_" + d + ".ckpt")).c_str()));
      std::cout << (dir / ("surrogate_" + d + ".ckpt")).string() << "\n";
    } else if (evaluate->parsed()) {
      load_config(c, cfg);
      check(grorec_config_validate(cfg.p));
      const fs::path dir = out_dir(cfg);
      const std::string d = c.defense.empty() ? "none" : c.defense;
      Dataset ds;
      check(grorec_dataset_from_config(cfg.p, ds.out()));
      Model m;
      check(grorec_model_load(model_path.c_str(), m.out()));
      char* json = nullptr;
      check(grorec_evaluate(cfg.p, ds.p, m.p, d.c_str(), role.c_str(), &json));
      const std::string text = take(json);
      std::ofstream f(dir / ("metrics_" + d + "_" + role + ".json"));
      f << text << "\n";
      std::cout << text << "\n";
    } else if (run->parsed()) {
      load_config(c, cfg);
      check(grorec_run(cfg.p));
      std::cout << (out_dir(cfg) / "summary.csv").string() << "\n";
    } else if (sweep_cmd->parsed()) {
      load_config(c, cfg);
      if (!lambda_values.empty()) {
        axis = "lambda";
        values = lambda_values;
      } else if (!nq_values.empty()) {
        axis = "n_queries";
        values = nq_values;
      }
      if (axis.empty()) throw CallFailed{GROREC_E_INVALID_ARGUMENT, "sweep", "no sweep axis given"};
      const std::vector<double> v = parse_values(values);
      check(grorec_sweep(cfg.p, axis.c_str(), v.data(), v.size()));
      std::cout << (out_dir(cfg) / "sweep.csv").string() << "\n";
    }
  } catch (const CallFailed& f) {
    std::cerr << "grorec: [" << (f.stage.empty() ? "cli" : f.stage) << "] " << grorec_status_name(f.status) << ": "
              << f.message << "\n";
    return static_cast<int>(f.status);
  }
  return 0;
}
