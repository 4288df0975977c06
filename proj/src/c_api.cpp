#include "grorec/grorec.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "grorec/harness.hpp"

struct grorec_config {
  grorec::ExperimentConfig cfg;
};

struct grorec_dataset {
  grorec::InteractionDataset data;
};

struct grorec_model {
  std::shared_ptr<grorec::SequenceModel> model;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_stage;

grorec_status to_status(grorec::ErrorCode c) {
  using grorec::ErrorCode;
  switch (c) {
    case ErrorCode::kInvalidArgument: return GROREC_E_INVALID_ARGUMENT;
    case ErrorCode::kIo: return GROREC_E_IO;
    case ErrorCode::kParse: return GROREC_E_PARSE;
    case ErrorCode::kNumeric: return GROREC_E_NUMERIC;
    case ErrorCode::kPrecondition: return GROREC_E_PRECONDITION;
    case ErrorCode::kInternal: return GROREC_E_INTERNAL;
  }
  return GROREC_E_INTERNAL;
}

template <class Fn>
grorec_status guarded(const char* stage, Fn&& fn) {
  g_last_error.clear();
  g_last_stage.clear();
  try {
    fn();
    return GROREC_OK;
  } catch (const grorec::StageError& e) {
    g_last_error = e.what();
    g_last_stage = e.stage();
    return to_status(e.code());
  } catch (const grorec::Error& e) {
    g_last_error = e.what();
    g_last_stage = stage;
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    g_last_stage = stage;
    return GROREC_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    g_last_stage = stage;
    return GROREC_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) grorec::fail(grorec::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

grorec::SplitDataset split_of(const grorec_dataset* ds) { return grorec::leave_one_out_split(ds->data); }

}  // namespace

extern "C" {

const char* grorec_version(void) { return "0.1.0"; }

const char* grorec_status_name(grorec_status s) {
  switch (s) {
    case GROREC_OK: return "ok";
    case GROREC_E_INVALID_ARGUMENT: return "invalid-argument";
    case GROREC_E_IO: return "io";
    case GROREC_E_PARSE: return "parse";
    case GROREC_E_NUMERIC: return "numeric";
    case GROREC_E_PRECONDITION: return "precondition";
    case GROREC_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* grorec_last_error(void) { return g_last_error.c_str(); }
const char* grorec_last_stage(void) { return g_last_stage.c_str(); }
void grorec_string_free(char* s) { std::free(s); }

grorec_status grorec_config_default(grorec_config** out) {
  return guarded("config", [&] {
    need(out, "out");
    *out = new grorec_config{};
  });
}

grorec_status grorec_config_load(const char* path, grorec_config** out) {
  return guarded("config", [&] {
    need(path, "path");
    need(out, "out");
    auto c = std::make_unique<grorec_config>();
    c->cfg = grorec::load_config(path);
    *out = c.release();
  });
}

grorec_status grorec_config_set(grorec_config* cfg, const char* key, const char* value) {
  return guarded("config", [&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

grorec_status grorec_config_get(const grorec_config* cfg, const char* key, char** out) {
  return guarded("config", [&] {
    need(cfg, "cfg");
    need(key, "key");
    need(out, "out");
    if (std::string(key) == "out_dir") {
      *out = dup_string(cfg->cfg.out_dir.string());
      return;
    }
    const std::string prefix = std::string(key) + " = ";
    const std::string text = cfg->cfg.canonical_text();
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t eol = text.find('\n', pos);
      const std::string line = text.substr(pos, eol - pos);
      if (line.rfind(prefix, 0) == 0) {
        *out = dup_string(line.substr(prefix.size()));
        return;
      }
      pos = eol + 1;
    }
    grorec::fail(grorec::ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  });
}

grorec_status grorec_config_canonical(const grorec_config* cfg, char** out) {
  return guarded("config", [&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup_string(cfg->cfg.canonical_text());
  });
}

grorec_status grorec_config_hash(const grorec_config* cfg, uint64_t* out) {
  return guarded("config", [&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = cfg->cfg.hash();
  });
}

grorec_status grorec_config_validate(const grorec_config* cfg) {
  return guarded("config", [&] {
    need(cfg, "cfg");
    cfg->cfg.validate();
  });
}

void grorec_config_free(grorec_config* cfg) { delete cfg; }

grorec_status grorec_dataset_from_config(const grorec_config* cfg, grorec_dataset** out) {
  return guarded("data", [&] {
    need(cfg, "cfg");
    need(out, "out");
    auto d = std::make_unique<grorec_dataset>();
    d->data = grorec::load_dataset(cfg->cfg.data);
    *out = d.release();
  });
}

grorec_status grorec_dataset_save(const grorec_dataset* ds, const char* path) {
  return guarded("persist", [&] {
    need(ds, "ds");
    need(path, "path");
    grorec::save_sequences(ds->data, path);
  });
}

grorec_status grorec_dataset_stats_get(const grorec_dataset* ds, grorec_dataset_stats* out) {
  return guarded("data", [&] {
    need(ds, "ds");
    need(out, "out");
    const grorec::DatasetStats s = grorec::dataset_stats(ds->data);
    *out = {s.num_users, s.num_items, s.avg_length, s.density};
  });
}

void grorec_dataset_free(grorec_dataset* ds) { delete ds; }

grorec_status grorec_model_load(const char* path, grorec_model** out) {
  return guarded("load", [&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<grorec_model>();
    m->model = std::make_shared<grorec::SequenceModel>(grorec::SequenceModel::load(path));
    *out = m.release();
  });
}

grorec_status grorec_model_save(const grorec_model* m, const char* path) {
  return guarded("persist", [&] {
    need(m, "model");
    need(path, "path");
    m->model->save(path);
  });
}

grorec_status grorec_model_topk(const grorec_model* m, const int32_t* seq, size_t len, int k, int32_t* out_items) {
  return guarded("evaluate", [&] {
    need(m, "model");
    need(out_items, "out_items");
    if (len > 0) need(seq, "seq");
    grorec::require(k >= 1, "k must be >= 1");
    const std::span<const grorec::ItemId> s(seq, len);
    const grorec::RankingList top = grorec::topk(m->model->score_next(s), static_cast<std::size_t>(k), s);
    std::copy(top.items.begin(), top.items.end(), out_items);
  });
}

grorec_status grorec_model_num_items(const grorec_model* m, int32_t* out) {
  return guarded("load", [&] {
    need(m, "model");
    need(out, "out");
    *out = m->model->num_items();
  });
}

void grorec_model_free(grorec_model* m) { delete m; }

grorec_status grorec_train(const grorec_config* cfg, const grorec_dataset* ds, grorec_model** out) {
  return guarded("pretrain", [&] {
    need(cfg, "cfg");
    need(ds, "ds");
    need(out, "out");
    cfg->cfg.validate();
    auto m = std::make_unique<grorec_model>();
    m->model = std::make_shared<grorec::SequenceModel>(grorec::pretrain_target(cfg->cfg, split_of(ds)));
    *out = m.release();
  });
}

grorec_status grorec_defend(const grorec_config* cfg, const grorec_dataset* ds, const grorec_model* target,
                            const char* curve_csv, grorec_model** out) {
  return guarded("defend", [&] {
    need(cfg, "cfg");
    need(ds, "ds");
    need(target, "target");
    need(out, "out");
    cfg->cfg.validate();
    std::vector<grorec::CurvePoint> curve;
    auto m = std::make_unique<grorec_model>();
    m->model = std::make_shared<grorec::SequenceModel>(
        grorec::defend_target(cfg->cfg, split_of(ds), *target->model, &curve));
    if (curve_csv) grorec::write_curve_csv(curve, curve_csv);
    *out = m.release();
  });
}

grorec_status grorec_attack(const grorec_config* cfg, const grorec_model* deployed, const char* defense,
                            const char* query_log, grorec_model** surrogate_out) {
  return guarded("attack", [&] {
    need(cfg, "cfg");
    need(deployed, "deployed");
    need(defense, "defense");
    need(surrogate_out, "surrogate_out");
    cfg->cfg.validate();
    grorec::QueryLog log;
    auto m = std::make_unique<grorec_model>();
    m->model = std::make_shared<grorec::SequenceModel>(
        grorec::attack_model(cfg->cfg, deployed->model, grorec::parse_defense(defense), &log));
    if (query_log) log.save(query_log);
    *surrogate_out = m.release();
  });
}

grorec_status grorec_evaluate(const grorec_config* cfg, const grorec_dataset* ds, const grorec_model* m,
                              const char* defense, const char* role, char** json_out) {
  return guarded("evaluate", [&] {
    need(cfg, "cfg");
    need(ds, "ds");
    need(m, "model");
    need(defense, "defense");
    need(role, "role");
    need(json_out, "json_out");
    const std::string r = role;
    grorec::require(r == "target" || r == "surrogate", "role must be target or surrogate");
    const grorec::MetricsReport rep =
        grorec::evaluate_model(cfg->cfg, split_of(ds), *m->model, grorec::parse_defense(defense), r);
    *json_out = dup_string(rep.to_json());
  });
}

grorec_status grorec_run(const grorec_config* cfg) {
  std::string failed_stage;
  const grorec_status st = guarded("run", [&] {
    need(cfg, "cfg");
    const grorec::RunArtifacts art = grorec::run_experiment(cfg->cfg);
    for (const auto& o : art.outcomes) {
      if (!o.ok) {
        failed_stage = o.stage;
        grorec::fail(o.code, "defense " + o.defense + " failed: " + o.error);
      }
    }
  });
  if (!failed_stage.empty()) g_last_stage = failed_stage;
  return st;
}

grorec_status grorec_sweep(const grorec_config* cfg, const char* axis, const double* values, size_t n) {
  return guarded("sweep", [&] {
    need(cfg, "cfg");
    need(axis, "axis");
    if (n > 0) need(values, "values");
    const auto points = grorec::sweep(cfg->cfg, grorec::parse_sweep_axis(axis), std::vector<double>(values, values + n));
    std::string failed;
    for (const auto& p : points)
      if (!p.ok) failed += (failed.empty() ? "" : "; ") + std::to_string(p.value) + ": " + p.error;
    if (!failed.empty()) grorec::fail(grorec::ErrorCode::kInternal, "sweep points failed: " + failed);
  });
}

}  // extern "C"
