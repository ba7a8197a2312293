#include "cfil/flow/flow_model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "cfil/numcore/errors.hpp"

namespace cfil::flow {

using numcore::Act;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

std::vector<int> identity_perm(int dim) {
  std::vector<int> p(dim);
  for (int i = 0; i < dim; ++i) p[i] = i;
  return p;
}

std::vector<int> reversed_perm(int dim) {
  std::vector<int> p(dim);
  for (int i = 0; i < dim; ++i) p[i] = dim - 1 - i;
  return p;
}

std::vector<int> invert_perm(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

bool is_identity(const std::vector<int>& p) {
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] != static_cast<int>(i)) return false;
  return true;
}

double clamp_scale(double s) { return std::clamp(s, -kLogScaleClamp, kLogScaleClamp); }

}  // namespace

Var MafLayer::forward_node(Graph& g, const ParamStore& store, Var x, Var* logdet) const {
  Var xp = is_identity(perm) ? x : g.permute_cols(x, perm);
  Var st = numcore::mlp_forward_masked(g, store, prefix, net, xp, masks.masks);
  Var s = g.clamp(g.slice_cols(st, 0, dim), -kLogScaleClamp, kLogScaleClamp);
  Var t = g.slice_cols(st, dim, 2 * dim);
  Var z = g.add(g.mul(xp, g.exp(s)), t);
  *logdet = g.row_sum(s);
  return z;
}

void MafLayer::forward_row(const ParamStore& store, std::span<const double> x, std::vector<double>& z,
                           double* logdet) const {
  std::vector<double> xp(dim);
  for (int j = 0; j < dim; ++j) xp[j] = x[perm[j]];
  const auto st = eval_mlp_masked(store, prefix, net, xp, masks.masks);
  z.resize(dim);
  double ld = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double s = clamp_scale(st[i]);
    z[i] = xp[i] * std::exp(s) + st[dim + i];
    ld += s;
  }
  if (logdet) *logdet += ld;
}

std::vector<double> MafLayer::invert(const ParamStore& store, std::span<const double> z) const {
  std::vector<double> xp(dim, 0.0);
  for (int i = 0; i < dim; ++i) {
    // Entry i of the conditioner output only reads xp[0..i), already solved.
    const auto st = eval_mlp_masked(store, prefix, net, xp, masks.masks);
    const double s = clamp_scale(st[i]);
    xp[i] = (z[i] - st[dim + i]) * std::exp(-s);
  }
  std::vector<double> x(dim);
  for (int j = 0; j < dim; ++j) x[perm[j]] = xp[j];
  return x;
}

Var CouplingLayer::forward_node(Graph& g, const ParamStore& store, Var x, Var* logdet) const {
  Var xp = is_identity(perm) ? x : g.permute_cols(x, perm);
  Var head = g.slice_cols(xp, 0, split);
  Var tail = g.slice_cols(xp, split, dim);
  Var s = g.clamp(numcore::mlp_forward(g, store, s_prefix, s_net, head), -kLogScaleClamp, kLogScaleClamp);
  Var t = numcore::mlp_forward(g, store, t_prefix, t_net, head);
  Var out_tail = g.add(g.mul(tail, g.exp(s)), t);
  *logdet = g.row_sum(s);
  return g.concat_cols(head, out_tail);
}

void CouplingLayer::forward_row(const ParamStore& store, std::span<const double> x, std::vector<double>& y,
                                double* logdet) const {
  std::vector<double> xp(dim);
  for (int j = 0; j < dim; ++j) xp[j] = x[perm[j]];
  std::span<const double> head(xp.data(), static_cast<size_t>(split));
  const auto s = numcore::eval_mlp(store, s_prefix, s_net, head);
  const auto t = numcore::eval_mlp(store, t_prefix, t_net, head);
  y.assign(xp.begin(), xp.end());
  double ld = 0.0;
  for (int i = split; i < dim; ++i) {
    const double si = clamp_scale(s[i - split]);
    y[i] = xp[i] * std::exp(si) + t[i - split];
    ld += si;
  }
  if (logdet) *logdet += ld;
}

std::vector<double> CouplingLayer::invert(const ParamStore& store, std::span<const double> y) const {
  std::vector<double> xp(dim);
  for (int i = 0; i < split; ++i) xp[i] = y[i];
  std::span<const double> head(xp.data(), static_cast<size_t>(split));
  const auto s = numcore::eval_mlp(store, s_prefix, s_net, head);
  const auto t = numcore::eval_mlp(store, t_prefix, t_net, head);
  for (int i = split; i < dim; ++i)
    xp[i] = (y[i] - t[i - split]) * std::exp(-clamp_scale(s[i - split]));
  std::vector<double> x(dim);
  for (int j = 0; j < dim; ++j) x[perm[j]] = xp[j];
  return x;
}

void FlowModel::build(FlowKind kind, int dim, int depth, const std::vector<int>& hidden, uint64_t seed) {
  if (dim < 1) throw ArgumentError("FlowModel: dim must be positive");
  if (depth < 1) throw ArgumentError("FlowModel: depth must be positive");
  if (kind == FlowKind::Coupling && dim < 2) throw ArgumentError("FlowModel: coupling layers need dim >= 2");
  dim_ = dim;
  kind_ = kind;
  depth_ = depth;
  hidden_ = hidden;
  seed_ = seed;
  params_ = std::make_unique<ParamStore>();
  Rng root(seed);

  for (int l = 0; l < depth; ++l) {
    Rng lr = root.split(static_cast<uint64_t>(l));
    const std::string lp = "l" + std::to_string(l) + ".";
    std::vector<int> perm = l % 2 == 0 ? identity_perm(dim) : reversed_perm(dim);
    if (kind == FlowKind::Maf) {
      MafLayer layer;
      layer.dim = dim;
      layer.perm = perm;
      layer.inv_perm = invert_perm(perm);
      layer.prefix = lp;
      std::vector<int> sizes{dim};
      std::vector<Act> acts;
      for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back(Act::Tanh);
      }
      sizes.push_back(2 * dim);
      acts.push_back(Act::Identity);
      layer.net = MlpSpec{sizes, acts};
      layer.masks = build_made_masks(dim, hidden, lr.raw());
      numcore::init_mlp(*params_, lp, layer.net, lr, /*zero_last=*/true);
      layers_.emplace_back(std::move(layer));
    } else {
      CouplingLayer layer;
      layer.dim = dim;
      layer.split = dim / 2;
      layer.perm = perm;
      layer.inv_perm = invert_perm(perm);
      layer.s_prefix = lp + "s.";
      layer.t_prefix = lp + "t.";
      std::vector<int> sizes{layer.split};
      std::vector<Act> acts;
      for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back(Act::Tanh);
      }
      sizes.push_back(dim - layer.split);
      acts.push_back(Act::Identity);
      layer.s_net = MlpSpec{sizes, acts};
      layer.t_net = layer.s_net;
      numcore::init_mlp(*params_, layer.s_prefix, layer.s_net, lr, /*zero_last=*/true);
      numcore::init_mlp(*params_, layer.t_prefix, layer.t_net, lr, /*zero_last=*/true);
      layers_.emplace_back(std::move(layer));
    }
  }
}

FlowModel FlowModel::make_maf(int dim, int depth, std::vector<int> hidden, uint64_t seed) {
  FlowModel m;
  m.build(FlowKind::Maf, dim, depth, hidden, seed);
  return m;
}

FlowModel FlowModel::make_coupling(int dim, int depth, std::vector<int> hidden, uint64_t seed) {
  FlowModel m;
  m.build(FlowKind::Coupling, dim, depth, hidden, seed);
  return m;
}

Var FlowModel::log_prob_node(Graph& g, Var x) const {
  if (x.cols() != dim_) throw DimensionError("FlowModel::log_prob: input dimension mismatch");
  Var cur = x;
  Var logdet{};
  bool have_logdet = false;
  for (const FlowLayer& layer : layers_) {
    Var ld{};
    cur = std::visit([&](const auto& l) { return l.forward_node(g, *params_, cur, &ld); }, layer);
    logdet = have_logdet ? g.add(logdet, ld) : ld;
    have_logdet = true;
  }
  Var base = g.add_scalar(g.scale(g.row_sum(g.square(cur)), -0.5), -0.5 * dim_ * kLog2Pi);
  return g.add(base, logdet);
}

std::vector<double> FlowModel::log_prob_batch(const Tensor& xs) const {
  Graph g;
  Var lp = log_prob_node(g, g.constant(xs));
  std::vector<double> out(xs.rows());
  for (int i = 0; i < xs.rows(); ++i) out[i] = lp.value().at(i, 0);
  return out;
}

double FlowModel::log_prob(std::span<const double> x) const {
  Tensor t = Tensor::from_row(x);
  return log_prob_batch(t)[0];
}

std::vector<double> FlowModel::forward_row(std::span<const double> x, double* logdet) const {
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  if (logdet) *logdet = 0.0;
  for (const FlowLayer& layer : layers_) {
    std::visit([&](const auto& l) { l.forward_row(*params_, cur, next, logdet); }, layer);
    cur = next;
  }
  return cur;
}

std::vector<double> FlowModel::inverse_row(std::span<const double> z) const {
  std::vector<double> cur(z.begin(), z.end());
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = std::visit([&](const auto& l) { return l.invert(*params_, cur); }, *it);
  return cur;
}

Tensor FlowModel::sample(int n, uint64_t seed) const {
  if (n < 1) throw ArgumentError("FlowModel::sample: n must be positive");
  Rng rng(seed);
  Tensor out(n, dim_);
  std::vector<double> z(dim_);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim_; ++j) z[j] = rng.normal();
    const auto x = inverse_row(z);
    for (int j = 0; j < dim_; ++j) out.at(i, j) = x[j];
  }
  return out;
}

double FlowModel::fit_mle_step(const Tensor& batch, double lr) {
  if (batch.rows() == 0) throw ArgumentError("fit_mle_step: empty batch");
  if (batch.cols() != dim_) throw DimensionError("fit_mle_step: batch dimension mismatch");
  try {
    Graph g;
    Var loss = g.neg(g.mean(log_prob_node(g, g.constant(batch))));
    const double pre = loss.scalar();
    g.backward(loss);
    GradMap grads = g.grads_for(*params_);
    opt_.step(*params_, grads, lr);
    return pre;
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " [fit_mle_step, batch of " + std::to_string(batch.rows()) +
                       " x " + std::to_string(batch.cols()) + "]");
  }
}

void FlowModel::save(const std::string& path_prefix) const {
  params_->save(path_prefix + ".params");
  std::ofstream f(path_prefix + ".arch");
  if (!f) throw StateError("FlowModel::save: cannot open '" + path_prefix + ".arch'");
  f << "cfil-flow v1\n";
  f << "kind " << (kind_ == FlowKind::Maf ? "maf" : "coupling") << "\n";
  f << "dim " << dim_ << "\n";
  f << "depth " << depth_ << "\n";
  f << "hidden";
  for (int h : hidden_) f << " " << h;
  f << "\n";
  f << "seed " << seed_ << "\n";
}

FlowModel FlowModel::load(const std::string& path_prefix) {
  std::ifstream f(path_prefix + ".arch");
  if (!f) throw StateError("FlowModel::load: cannot open '" + path_prefix + ".arch'");
  std::string magic, version;
  f >> magic >> version;
  if (magic != "cfil-flow" || version != "v1") throw StateError("FlowModel::load: bad arch header");
  std::string key, kind;
  int dim = 0, depth = 0;
  uint64_t seed = 0;
  std::vector<int> hidden;
  f >> key >> kind >> key >> dim >> key >> depth >> key;
  {
    std::string line;
    std::getline(f, line);
    size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      size_t end = line.find(' ', pos);
      if (end == std::string::npos) end = line.size();
      hidden.push_back(std::stoi(line.substr(pos, end - pos)));
      pos = end;
    }
  }
  f >> key >> seed;
  FlowModel m;
  m.build(kind == "maf" ? FlowKind::Maf : FlowKind::Coupling, dim, depth, hidden, seed);
  ParamStore loaded = ParamStore::load(path_prefix + ".params");
  if (loaded.names() != m.params_->names()) throw StateError("FlowModel::load: parameter names mismatch");
  m.params_->unflatten(loaded.flatten());
  return m;
}

}  // namespace cfil::flow
