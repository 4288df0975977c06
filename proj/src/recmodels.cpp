#include "grorec/recmodels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace grorec {

using ndiff::Graph;
using ndiff::Parameter;
using ndiff::Tensor;
using ndiff::Var;

Architecture parse_architecture(const std::string& name) {
  if (name == "attn-lite") return Architecture::kAttnLite;
  if (name == "recurrent") return Architecture::kRecurrent;
  fail(ErrorCode::kInvalidArgument, "unknown architecture '" + name + "'");
}

std::string to_string(Architecture a) {
  return a == Architecture::kAttnLite ? "attn-lite" : "recurrent";
}

std::string to_string(ModelRole r) {
  switch (r) {
    case ModelRole::kTarget: return "target";
    case ModelRole::kStudent: return "student";
    case ModelRole::kSurrogate: return "surrogate";
  }
  return "target";
}

namespace {

// Parameter slots, by architecture.
enum AttnSlot { kAE = 0, kAPos, kAWq, kAWk, kAWv, kAW1, kAB1, kAW2 };
enum RecSlot { kRE = 0, kRWz, kRWr, kRWn, kRUz, kRUr, kRUn, kRBz, kRBr, kRBn, kRWo };

struct Shape {
  const char* name;
  int rows;
  int cols;
};

std::vector<Shape> layout(Architecture arch, int m, int d, int max_len) {
  if (arch == Architecture::kAttnLite) {
    return {{"item_embedding", m, d}, {"position_embedding", max_len, d},
            {"w_query", d, d},        {"w_key", d, d},
            {"w_value", d, d},        {"mlp_w1", d, d},
            {"mlp_b1", 1, d},         {"mlp_w2", d, d}};
  }
  return {{"item_embedding", m, d}, {"w_update", d, d}, {"w_reset", d, d},
          {"w_candidate", d, d},    {"u_update", d, d}, {"u_reset", d, d},
          {"u_candidate", d, d},    {"b_update", 1, d}, {"b_reset", 1, d},
          {"b_candidate", 1, d},    {"w_out", d, d}};
}

}  // namespace

SequenceModel SequenceModel::init(Architecture arch, ItemId num_items, int dim, int max_len,
                                  std::uint64_t seed, ModelRole role) {
  require(dim >= 4, "init_model: embedding width must be >= 4");
  require(num_items >= 1, "init_model: num_items must be >= 1");
  require(max_len >= 1, "init_model: max_len must be >= 1");
  SequenceModel m;
  m.arch_ = arch;
  m.role_ = role;
  m.num_items_ = num_items;
  m.dim_ = dim;
  m.max_len_ = max_len;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const Shape& s : layout(arch, num_items, dim, max_len)) {
    Parameter p;
    p.name = s.name;
    p.value = Tensor(s.rows, s.cols);
    for (double& v : p.value.values()) v = u(rng);
    p.zero_grad();
    m.params_.push_back(std::move(p));
  }
  return m;
}

void SequenceModel::check_sequence(std::span<const ItemId> seq) const {
  if (seq.empty()) fail(ErrorCode::kInvalidArgument, "score_next: empty sequence");
  for (ItemId i : seq) {
    if (i < 1 || i > num_items_)
      fail(ErrorCode::kInvalidArgument, "item id " + std::to_string(i) + " out of range");
  }
}

template <class Bind>
Var SequenceModel::hidden_impl(Graph& g, std::span<const ItemId> seq, Bind bind) const {
  check_sequence(seq);
  if (static_cast<int>(seq.size()) > max_len_) seq = seq.subspan(seq.size() - max_len_);
  const int len = static_cast<int>(seq.size());
  std::vector<int> rows(seq.size());
  for (int t = 0; t < len; ++t) rows[t] = seq[t] - 1;
  Var x = ndiff::gather_rows(bind(0), rows);

  if (arch_ == Architecture::kAttnLite) {
    std::vector<int> pos(len);
    std::iota(pos.begin(), pos.end(), 0);
    x = ndiff::add(x, ndiff::gather_rows(bind(kAPos), pos));
    Var q = ndiff::matmul(x, bind(kAWq));
    Var k = ndiff::matmul(x, bind(kAWk));
    Var v = ndiff::matmul(x, bind(kAWv));
    Var att = ndiff::softmax_rows(ndiff::scale(ndiff::matmul_nt(q, k), 1.0 / std::sqrt(dim_)), true);
    Var h = ndiff::add(x, ndiff::matmul(att, v));
    Var ff = ndiff::relu(ndiff::add_row(ndiff::matmul(h, bind(kAW1)), bind(kAB1)));
    return ndiff::add(h, ndiff::matmul(ff, bind(kAW2)));
  }

  Var xz = ndiff::add_row(ndiff::matmul(x, bind(kRWz)), bind(kRBz));
  Var xr = ndiff::add_row(ndiff::matmul(x, bind(kRWr)), bind(kRBr));
  Var xn = ndiff::add_row(ndiff::matmul(x, bind(kRWn)), bind(kRBn));
  Var uz = bind(kRUz), ur = bind(kRUr), un = bind(kRUn);
  Var h = g.constant(Tensor(1, dim_));
  std::vector<Var> states;
  states.reserve(len);
  for (int t = 0; t < len; ++t) {
    Var z = ndiff::sigmoid(ndiff::add(ndiff::slice_rows(xz, t, t + 1), ndiff::matmul(h, uz)));
    Var r = ndiff::sigmoid(ndiff::add(ndiff::slice_rows(xr, t, t + 1), ndiff::matmul(h, ur)));
    Var n = ndiff::tanh(ndiff::add(ndiff::slice_rows(xn, t, t + 1), ndiff::matmul(ndiff::mul(r, h), un)));
    h = ndiff::add(n, ndiff::mul(z, ndiff::sub(h, n)));
    states.push_back(h);
  }
  return ndiff::concat_rows(states);
}

Var SequenceModel::hidden(Graph& g, std::span<const ItemId> seq) {
  return hidden_impl(g, seq, [&](int slot) { return g.param(params_[slot]); });
}

Var SequenceModel::hidden(Graph& g, std::span<const ItemId> seq) const {
  return hidden_impl(g, seq, [&](int slot) { return g.constant_ref(params_[slot].value); });
}

Var SequenceModel::output(Graph& g, Var h) {
  if (arch_ == Architecture::kRecurrent) h = ndiff::matmul(h, g.param(params_[kRWo]));
  return ndiff::matmul_nt(h, g.param(params_[0]));
}

Var SequenceModel::output(Graph& g, Var h) const {
  if (arch_ == Architecture::kRecurrent) h = ndiff::matmul(h, g.constant_ref(params_[kRWo].value));
  return ndiff::matmul_nt(h, g.constant_ref(params_[0].value));
}

ScoreVector SequenceModel::score_next(std::span<const ItemId> seq) const {
  Graph g(false);
  Var h = hidden(g, seq);
  Var last = ndiff::slice_rows(h, h.rows() - 1, h.rows());
  const Tensor& s = output(g, last).value();
  return ScoreVector(s.values().begin(), s.values().end());
}

std::size_t SequenceModel::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void SequenceModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double SequenceModel::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.values()) s += g * g;
  return std::sqrt(s);
}

void SequenceModel::sgd_step(double lr, double clip_norm) {
  const double norm = grad_norm();
  const double factor = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (auto& p : params_) {
    if (p.grad.same_shape(p.value)) {
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * factor * p.grad[i];
    }
    p.zero_grad();
  }
}

bool SequenceModel::all_finite() const {
  for (const auto& p : params_)
    for (double v : p.value.values())
      if (!std::isfinite(v)) return false;
  return true;
}

bool SequenceModel::same_parameters(const SequenceModel& o) const {
  if (arch_ != o.arch_ || num_items_ != o.num_items_ || dim_ != o.dim_ || max_len_ != o.max_len_ ||
      params_.size() != o.params_.size())
    return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!(params_[i].value == o.params_[i].value)) return false;
  return true;
}

// Checkpoint layout (host byte order, little-endian on supported targets):
//   char[8]  magic "GRORECM1"
//   int32    version (1), architecture, role, num_items, dim, max_len, n_params
//   per parameter: int32 name_len, name bytes, int32 rows, int32 cols,
//                  rows*cols float64 values in row-major order
namespace {

constexpr char kMagic[8] = {'G', 'R', 'O', 'R', 'E', 'C', 'M', '1'};
constexpr std::int32_t kCheckpointVersion = 1;

void put_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::int32_t get_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorCode::kParse, "checkpoint truncated");
  return v;
}

}  // namespace

void SequenceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_i32(out, kCheckpointVersion);
  put_i32(out, static_cast<std::int32_t>(arch_));
  put_i32(out, static_cast<std::int32_t>(role_));
  put_i32(out, num_items_);
  put_i32(out, dim_);
  put_i32(out, max_len_);
  put_i32(out, static_cast<std::int32_t>(params_.size()));
  for (const auto& p : params_) {
    put_i32(out, static_cast<std::int32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_i32(out, p.value.rows());
    put_i32(out, p.value.cols());
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

SequenceModel SequenceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    fail(ErrorCode::kParse, path.string() + " is not a grorec checkpoint");
  if (get_i32(in) != kCheckpointVersion) fail(ErrorCode::kParse, "unsupported checkpoint version");
  const std::int32_t arch = get_i32(in), role = get_i32(in);
  if (arch < 0 || arch > 1 || role < 0 || role > 2) fail(ErrorCode::kParse, "corrupt checkpoint header");
  SequenceModel m;
  m.arch_ = static_cast<Architecture>(arch);
  m.role_ = static_cast<ModelRole>(role);
  m.num_items_ = get_i32(in);
  m.dim_ = get_i32(in);
  m.max_len_ = get_i32(in);
  const std::int32_t n = get_i32(in);
  const auto expected = layout(m.arch_, m.num_items_, m.dim_, m.max_len_);
  if (n != static_cast<std::int32_t>(expected.size())) fail(ErrorCode::kParse, "checkpoint parameter count mismatch");
  for (std::int32_t i = 0; i < n; ++i) {
    const std::int32_t name_len = get_i32(in);
    if (name_len < 0 || name_len > 256) fail(ErrorCode::kParse, "corrupt parameter name");
    Parameter p;
    p.name.resize(name_len);
    in.read(p.name.data(), name_len);
    const std::int32_t rows = get_i32(in), cols = get_i32(in);
    if (p.name != expected[i].name || rows != expected[i].rows || cols != expected[i].cols)
      fail(ErrorCode::kParse, "checkpoint parameter '" + p.name + "' does not match architecture");
    p.value = Tensor(rows, cols);
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) fail(ErrorCode::kParse, "checkpoint truncated");
    p.zero_grad();
    m.params_.push_back(std::move(p));
  }
  return m;
}

RankingList topk(std::span<const double> scores, std::size_t k, std::span<const ItemId> exclude) {
  const std::size_t m = scores.size();
  std::vector<char> excluded(m + 1, 0);
  std::size_t n_excluded = 0;
  for (ItemId i : exclude) {
    if (i >= 1 && static_cast<std::size_t>(i) <= m && !excluded[i]) {
      excluded[i] = 1;
      ++n_excluded;
    }
  }
  if (k > m - n_excluded)
    fail(ErrorCode::kInvalidArgument, "topk: k = " + std::to_string(k) + " exceeds " +
                                          std::to_string(m - n_excluded) + " candidate items");
  std::vector<ItemId> cand;
  cand.reserve(m - n_excluded);
  for (std::size_t j = 1; j <= m; ++j)
    if (!excluded[j]) cand.push_back(static_cast<ItemId>(j));
  auto better = [&](ItemId a, ItemId b) {
    const double sa = scores[a - 1], sb = scores[b - 1];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), better);
  cand.resize(k);
  return RankingList{std::move(cand)};
}

std::vector<TrainingWindow> training_windows(std::span<const ItemId> seq, int max_len) {
  std::vector<TrainingWindow> out;
  std::size_t end = seq.empty() ? 0 : seq.size() - 1;  // last input index + 1
  while (end > 0) {
    const std::size_t begin = end > static_cast<std::size_t>(max_len) ? end - max_len : 0;
    out.push_back({seq.subspan(begin, end - begin), seq.subspan(begin + 1, end - begin)});
    end = begin;
  }
  return out;
}

Var window_ce_loss(Graph& g, SequenceModel& model, const TrainingWindow& w) {
  Var logits = model.output(g, model.hidden(g, w.input));
  std::vector<int> targets(w.targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = w.targets[i] - 1;
  return ndiff::softmax_cross_entropy(logits, targets);
}

double ce_eval_loss(const SequenceModel& model, const SplitDataset& split) {
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& seq : split.train) {
    for (const auto& w : training_windows(seq, model.max_len())) {
      Graph g(false);
      Var logits = model.output(g, model.hidden(g, w.input));
      std::vector<int> targets(w.targets.size());
      for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = w.targets[i] - 1;
      total += ndiff::softmax_cross_entropy(logits, targets).value().item();
      positions += targets.size();
    }
  }
  require(positions > 0, "ce_eval_loss: no training positions", ErrorCode::kPrecondition);
  return total / static_cast<double>(positions);
}

double ce_train_epoch(SequenceModel& model, const SplitDataset& split, double lr, int batch_size,
                      std::uint64_t seed) {
  require(batch_size >= 1, "ce_train_epoch: batch_size must be >= 1");
  require(lr >= 0.0, "ce_train_epoch: lr must be non-negative");
  std::vector<TrainingWindow> windows;
  for (const auto& seq : split.train)
    for (const auto& w : training_windows(seq, model.max_len())) windows.push_back(w);
  require(!windows.empty(), "ce_train_epoch: no training positions", ErrorCode::kPrecondition);
  std::mt19937_64 rng(seed);
  std::shuffle(windows.begin(), windows.end(), rng);

  double total = 0.0;
  std::size_t positions = 0;
  model.zero_grad();
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t stop = std::min(windows.size(), start + batch_size);
    std::size_t batch_positions = 0;
    for (std::size_t i = start; i < stop; ++i) batch_positions += windows[i].targets.size();
    for (std::size_t i = start; i < stop; ++i) {
      Graph g;
      Var loss = window_ce_loss(g, model, windows[i]);
      const double v = loss.value().item();
      if (!std::isfinite(v)) fail(ErrorCode::kNumeric, "ce_train_epoch: non-finite loss (divergence)");
      total += v;
      g.backward(ndiff::scale(loss, 1.0 / static_cast<double>(batch_positions)));
    }
    positions += batch_positions;
    model.sgd_step(lr, kClipNorm);
  }
  if (!model.all_finite()) fail(ErrorCode::kNumeric, "ce_train_epoch: non-finite parameters (divergence)");
  return total / static_cast<double>(positions);
}

}  // namespace grorec
