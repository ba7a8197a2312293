#include "cfil/numcore/graph.hpp"

#include <algorithm>
#include <cmath>

#include "cfil/numcore/errors.hpp"

namespace cfil::numcore {

const Tensor& Var::value() const { return g->value(id); }
int Var::rows() const { return value().rows(); }
int Var::cols() const { return value().cols(); }

double Var::scalar() const {
  const Tensor& t = value();
  if (t.rows() != 1 || t.cols() != 1) throw DimensionError("Var::scalar: node is not 1x1");
  return t.at(0, 0);
}

const char* Graph::op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Const: return "const";
    case Op::Linear: return "linear";
    case Op::MatmulNT: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Min: return "min";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MulScalarNode: return "mul_scalar";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Softplus: return "softplus";
    case Op::Square: return "square";
    case Op::Clamp: return "clamp";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::RowSum: return "row_sum";
    case Op::LogMeanExp: return "log_mean_exp";
    case Op::SliceCols: return "slice_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::PermuteCols: return "permute_cols";
  }
  return "?";
}

void Graph::check_finite(const Node& n) const {
  if (!n.value.all_finite())
    throw NumericError(std::string(op_name(n.op)) + " produced non-finite value" +
                       (n.pname.empty() ? "" : " (" + n.pname + ")"));
}

int Graph::push(Node n) {
  check_finite(n);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Graph::make(Op op, int a, int b, Tensor value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  n.requires_grad = (a >= 0 && nodes_[a].requires_grad) || (b >= 0 && nodes_[b].requires_grad);
  return Var{this, push(std::move(n))};
}

Var Graph::param(const ParamStore& store, const std::string& name) {
  const auto key = std::make_pair(&store, name);
  auto it = leaf_index_.find(key);
  if (it != leaf_index_.end()) return Var{this, it->second};
  Node n;
  n.op = Op::Leaf;
  n.value = store.at(name);
  n.requires_grad = frozen_.count(&store) == 0;
  n.store = &store;
  n.pname = name;
  const int id = push(std::move(n));
  leaf_index_[key] = id;
  return Var{this, id};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(value);
  return Var{this, push(std::move(n))};
}

Var Graph::constant_scalar(double v) {
  Tensor t(1, 1);
  t.at(0, 0) = v;
  return constant(std::move(t));
}

Var Graph::linear(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.cols() != wv.cols()) throw DimensionError("linear: input/weight shape mismatch");
  if (bv.rows() != 1 || bv.cols() != wv.rows()) throw DimensionError("linear: bias shape mismatch");
  const int n = xv.rows(), in = xv.cols(), out = wv.rows();
  Tensor y(n, out);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.data() + static_cast<size_t>(i) * in;
    double* yi = y.data() + static_cast<size_t>(i) * out;
    for (int j = 0; j < out; ++j) {
      const double* wj = wv.data() + static_cast<size_t>(j) * in;
      double acc = bv.data()[j];
      for (int k = 0; k < in; ++k) acc += xi[k] * wj[k];
      yi[j] = acc;
    }
  }
  Var v = make(Op::Linear, x.id, w.id, std::move(y));
  nodes_[v.id].c = b.id;
  nodes_[v.id].requires_grad = nodes_[v.id].requires_grad || nodes_[b.id].requires_grad;
  return v;
}

Var Graph::matmul_nt(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.cols() != wv.cols()) throw DimensionError("matmul: shape mismatch");
  const int n = xv.rows(), in = xv.cols(), out = wv.rows();
  Tensor y(n, out);
  for (int i = 0; i < n; ++i) {
    const double* xi = xv.data() + static_cast<size_t>(i) * in;
    double* yi = y.data() + static_cast<size_t>(i) * out;
    for (int j = 0; j < out; ++j) {
      const double* wj = wv.data() + static_cast<size_t>(j) * in;
      double acc = 0.0;
      for (int k = 0; k < in; ++k) acc += xi[k] * wj[k];
      yi[j] = acc;
    }
  }
  return make(Op::MatmulNT, x.id, w.id, std::move(y));
}

Var Graph::add(Var a, Var b) {
  if (!a.value().same_shape(b.value())) throw DimensionError("add: shape mismatch");
  Tensor y = a.value();
  const double* bd = b.value().data();
  double* yd = y.data();
  for (size_t i = 0; i < y.size(); ++i) yd[i] += bd[i];
  return make(Op::Add, a.id, b.id, std::move(y));
}

Var Graph::sub(Var a, Var b) {
  if (!a.value().same_shape(b.value())) throw DimensionError("sub: shape mismatch");
  Tensor y = a.value();
  const double* bd = b.value().data();
  double* yd = y.data();
  for (size_t i = 0; i < y.size(); ++i) yd[i] -= bd[i];
  return make(Op::Sub, a.id, b.id, std::move(y));
}

Var Graph::mul(Var a, Var b) {
  if (!a.value().same_shape(b.value())) throw DimensionError("mul: shape mismatch");
  Tensor y = a.value();
  const double* bd = b.value().data();
  double* yd = y.data();
  for (size_t i = 0; i < y.size(); ++i) yd[i] *= bd[i];
  return make(Op::Mul, a.id, b.id, std::move(y));
}

Var Graph::minimum(Var a, Var b) {
  if (!a.value().same_shape(b.value())) throw DimensionError("min: shape mismatch");
  Tensor y = a.value();
  const double* bd = b.value().data();
  double* yd = y.data();
  for (size_t i = 0; i < y.size(); ++i) yd[i] = std::min(yd[i], bd[i]);
  return make(Op::Min, a.id, b.id, std::move(y));
}

Var Graph::neg(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v = -v;
  return make(Op::Neg, a.id, -1, std::move(y));
}

Var Graph::scale(Var a, double c) {
  Tensor y = a.value();
  for (double& v : y.flat()) v *= c;
  Var v = make(Op::Scale, a.id, -1, std::move(y));
  nodes_[v.id].p0 = c;
  return v;
}

Var Graph::add_scalar(Var a, double c) {
  Tensor y = a.value();
  for (double& v : y.flat()) v += c;
  return make(Op::AddScalar, a.id, -1, std::move(y));
}

Var Graph::mul_scalar_node(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw DimensionError("mul_scalar: scale node must be 1x1");
  const double sv = s.value().at(0, 0);
  Tensor y = a.value();
  for (double& v : y.flat()) v *= sv;
  return make(Op::MulScalarNode, a.id, s.id, std::move(y));
}

Var Graph::exp(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v = std::exp(v);
  return make(Op::Exp, a.id, -1, std::move(y));
}

Var Graph::log(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v = std::log(v);
  return make(Op::Log, a.id, -1, std::move(y));
}

Var Graph::tanh(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v = std::tanh(v);
  return make(Op::Tanh, a.id, -1, std::move(y));
}

Var Graph::relu(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v = v > 0.0 ? v : 0.0;
  return make(Op::Relu, a.id, -1, std::move(y));
}

Var Graph::softplus(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) {
    if (v > 30.0) continue;            // softplus(v) ~= v
    v = v < -30.0 ? std::exp(v) : std::log1p(std::exp(v));
  }
  return make(Op::Softplus, a.id, -1, std::move(y));
}

Var Graph::square(Var a) {
  Tensor y = a.value();
  for (double& v : y.flat()) v *= v;
  return make(Op::Square, a.id, -1, std::move(y));
}

Var Graph::clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ArgumentError("clamp: lo > hi");
  Tensor y = a.value();
  for (double& v : y.flat()) v = std::clamp(v, lo, hi);
  Var v = make(Op::Clamp, a.id, -1, std::move(y));
  nodes_[v.id].p0 = lo;
  nodes_[v.id].p1 = hi;
  return v;
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : a.value().flat()) s += v;
  Tensor y(1, 1);
  y.at(0, 0) = s;
  return make(Op::Sum, a.id, -1, std::move(y));
}

Var Graph::mean(Var a) {
  if (a.value().size() == 0) throw DimensionError("mean: empty tensor");
  double s = 0.0;
  for (double v : a.value().flat()) s += v;
  Tensor y(1, 1);
  y.at(0, 0) = s / static_cast<double>(a.value().size());
  return make(Op::Mean, a.id, -1, std::move(y));
}

Var Graph::row_sum(Var a) {
  const Tensor& av = a.value();
  Tensor y(av.rows(), 1);
  for (int i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    const double* ai = av.data() + static_cast<size_t>(i) * av.cols();
    for (int j = 0; j < av.cols(); ++j) s += ai[j];
    y.at(i, 0) = s;
  }
  return make(Op::RowSum, a.id, -1, std::move(y));
}

Var Graph::log_mean_exp(Var a) {
  const Tensor& av = a.value();
  if (av.size() == 0) throw DimensionError("log_mean_exp: empty tensor");
  double m = av.data()[0];
  for (double v : av.flat()) m = std::max(m, v);
  double s = 0.0;
  for (double v : av.flat()) s += std::exp(v - m);
  Tensor y(1, 1);
  y.at(0, 0) = m + std::log(s / static_cast<double>(av.size()));
  return make(Op::LogMeanExp, a.id, -1, std::move(y));
}

Var Graph::slice_cols(Var a, int c0, int c1) {
  const Tensor& av = a.value();
  if (c0 < 0 || c1 > av.cols() || c0 >= c1) throw ArgumentError("slice_cols: bad range");
  Tensor y(av.rows(), c1 - c0);
  for (int i = 0; i < av.rows(); ++i)
    for (int j = c0; j < c1; ++j) y.at(i, j - c0) = av.at(i, j);
  Var v = make(Op::SliceCols, a.id, -1, std::move(y));
  nodes_[v.id].i0 = c0;
  nodes_[v.id].i1 = c1;
  return v;
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row mismatch");
  Tensor y(av.rows(), av.cols() + bv.cols());
  for (int i = 0; i < av.rows(); ++i) {
    for (int j = 0; j < av.cols(); ++j) y.at(i, j) = av.at(i, j);
    for (int j = 0; j < bv.cols(); ++j) y.at(i, av.cols() + j) = bv.at(i, j);
  }
  return make(Op::ConcatCols, a.id, b.id, std::move(y));
}

Var Graph::permute_cols(Var a, std::vector<int> perm) {
  const Tensor& av = a.value();
  if (static_cast<int>(perm.size()) != av.cols()) throw DimensionError("permute_cols: bad permutation size");
  Tensor y(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) y.at(i, j) = av.at(i, perm[j]);
  Var v = make(Op::PermuteCols, a.id, -1, std::move(y));
  nodes_[v.id].perm = std::move(perm);
  return v;
}

void Graph::backward(Var loss) {
  if (backward_done_) throw StateError("Graph::backward: called twice");
  backward_done_ = true;
  Node& top = nodes_[loss.id];
  if (top.value.rows() != 1 || top.value.cols() != 1) throw DimensionError("backward: loss must be 1x1");
  if (!top.value.all_finite()) throw NumericError("backward: loss is non-finite");

  for (Node& n : nodes_)
    if (n.requires_grad) n.grad = Tensor(n.value.rows(), n.value.cols());
  if (!top.requires_grad) return;  // loss does not depend on any trainable leaf
  top.grad.at(0, 0) = 1.0;

  auto need = [&](int id) { return id >= 0 && nodes_[id].requires_grad; };

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Const:
        break;
      case Op::Linear:
      case Op::MatmulNT: {
        const Node& xn = nodes_[n.a];
        const Node& wn = nodes_[n.b];
        const int rows = xn.value.rows(), in = xn.value.cols(), out = wn.value.rows();
        if (need(n.a)) {
          Tensor& gx = nodes_[n.a].grad;
          for (int i = 0; i < rows; ++i) {
            double* gxi = gx.data() + static_cast<size_t>(i) * in;
            const double* gi = g.data() + static_cast<size_t>(i) * out;
            for (int j = 0; j < out; ++j) {
              const double gj = gi[j];
              if (gj == 0.0) continue;
              const double* wj = wn.value.data() + static_cast<size_t>(j) * in;
              for (int k = 0; k < in; ++k) gxi[k] += gj * wj[k];
            }
          }
        }
        if (need(n.b)) {
          Tensor& gw = nodes_[n.b].grad;
          for (int i = 0; i < rows; ++i) {
            const double* xi = xn.value.data() + static_cast<size_t>(i) * in;
            const double* gi = g.data() + static_cast<size_t>(i) * out;
            for (int j = 0; j < out; ++j) {
              const double gj = gi[j];
              if (gj == 0.0) continue;
              double* gwj = gw.data() + static_cast<size_t>(j) * in;
              for (int k = 0; k < in; ++k) gwj[k] += gj * xi[k];
            }
          }
        }
        if (n.op == Op::Linear && need(n.c)) {
          Tensor& gb = nodes_[n.c].grad;
          for (int i = 0; i < rows; ++i) {
            const double* gi = g.data() + static_cast<size_t>(i) * out;
            for (int j = 0; j < out; ++j) gb.data()[j] += gi[j];
          }
        }
        break;
      }
      case Op::Add: {
        if (need(n.a)) {
          double* ga = nodes_[n.a].grad.data();
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i];
        }
        if (need(n.b)) {
          double* gb = nodes_[n.b].grad.data();
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g.data()[i];
        }
        break;
      }
      case Op::Sub: {
        if (need(n.a)) {
          double* ga = nodes_[n.a].grad.data();
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i];
        }
        if (need(n.b)) {
          double* gb = nodes_[n.b].grad.data();
          for (size_t i = 0; i < g.size(); ++i) gb[i] -= g.data()[i];
        }
        break;
      }
      case Op::Mul: {
        if (need(n.a)) {
          double* ga = nodes_[n.a].grad.data();
          const double* bv = nodes_[n.b].value.data();
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] * bv[i];
        }
        if (need(n.b)) {
          double* gb = nodes_[n.b].grad.data();
          const double* av = nodes_[n.a].value.data();
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g.data()[i] * av[i];
        }
        break;
      }
      case Op::Min: {
        const double* av = nodes_[n.a].value.data();
        const double* bv = nodes_[n.b].value.data();
        if (need(n.a)) {
          double* ga = nodes_[n.a].grad.data();
          for (size_t i = 0; i < g.size(); ++i)
            if (av[i] <= bv[i]) ga[i] += g.data()[i];
        }
        if (need(n.b)) {
          double* gb = nodes_[n.b].grad.data();
          for (size_t i = 0; i < g.size(); ++i)
            if (av[i] > bv[i]) gb[i] += g.data()[i];
        }
        break;
      }
      case Op::Neg: {
        double* ga = nodes_[n.a].grad.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] -= g.data()[i];
        break;
      }
      case Op::Scale: {
        double* ga = nodes_[n.a].grad.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += n.p0 * g.data()[i];
        break;
      }
      case Op::AddScalar: {
        double* ga = nodes_[n.a].grad.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i];
        break;
      }
      case Op::MulScalarNode: {
        const double sv = nodes_[n.b].value.at(0, 0);
        const double* av = nodes_[n.a].value.data();
        if (need(n.a)) {
          double* ga = nodes_[n.a].grad.data();
          for (size_t i = 0; i < g.size(); ++i) ga[i] += sv * g.data()[i];
        }
        if (need(n.b)) {
          double acc = 0.0;
          for (size_t i = 0; i < g.size(); ++i) acc += g.data()[i] * av[i];
          nodes_[n.b].grad.at(0, 0) += acc;
        }
        break;
      }
      case Op::Exp: {
        double* ga = nodes_[n.a].grad.data();
        const double* yv = n.value.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] * yv[i];
        break;
      }
      case Op::Log: {
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] / av[i];
        break;
      }
      case Op::Tanh: {
        double* ga = nodes_[n.a].grad.data();
        const double* yv = n.value.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] * (1.0 - yv[i] * yv[i]);
        break;
      }
      case Op::Relu: {
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < g.size(); ++i)
          if (av[i] > 0.0) ga[i] += g.data()[i];
        break;
      }
      case Op::Softplus: {
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g.data()[i] / (1.0 + std::exp(-av[i]));
        break;
      }
      case Op::Square: {
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g.data()[i];
        break;
      }
      case Op::Clamp: {
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < g.size(); ++i)
          if (av[i] > n.p0 && av[i] < n.p1) ga[i] += g.data()[i];
        break;
      }
      case Op::Sum: {
        const double gv = g.at(0, 0);
        for (double& v : nodes_[n.a].grad.flat()) v += gv;
        break;
      }
      case Op::Mean: {
        const double gv = g.at(0, 0) / static_cast<double>(nodes_[n.a].value.size());
        for (double& v : nodes_[n.a].grad.flat()) v += gv;
        break;
      }
      case Op::RowSum: {
        Tensor& ga = nodes_[n.a].grad;
        for (int i = 0; i < ga.rows(); ++i) {
          const double gv = g.at(i, 0);
          double* gi = ga.data() + static_cast<size_t>(i) * ga.cols();
          for (int j = 0; j < ga.cols(); ++j) gi[j] += gv;
        }
        break;
      }
      case Op::LogMeanExp: {
        const double gv = g.at(0, 0);
        const double f = n.value.at(0, 0);
        const double invn = 1.0 / static_cast<double>(nodes_[n.a].value.size());
        double* ga = nodes_[n.a].grad.data();
        const double* av = nodes_[n.a].value.data();
        for (size_t i = 0; i < nodes_[n.a].value.size(); ++i)
          ga[i] += gv * invn * std::exp(av[i] - f);
        break;
      }
      case Op::SliceCols: {
        Tensor& ga = nodes_[n.a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at(i, n.i0 + j) += g.at(i, j);
        break;
      }
      case Op::ConcatCols: {
        const int ca = nodes_[n.a].value.cols();
        if (need(n.a)) {
          Tensor& ga = nodes_[n.a].grad;
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (need(n.b)) {
          Tensor& gb = nodes_[n.b].grad;
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < gb.cols(); ++j) gb.at(i, j) += g.at(i, ca + j);
        }
        break;
      }
      case Op::PermuteCols: {
        Tensor& ga = nodes_[n.a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at(i, n.perm[j]) += g.at(i, j);
        break;
      }
    }
  }
}

GradMap Graph::grads_for(const ParamStore& store) const {
  GradMap out(store);
  for (const Node& n : nodes_) {
    if (n.op != Op::Leaf || n.store != &store || !n.requires_grad) continue;
    if (n.grad.size() == n.value.size()) out.at(n.pname) = n.grad;
  }
  if (!out.all_finite()) throw NumericError("grads_for: non-finite gradient");
  return out;
}

GradMap grad_scalar(const ParamStore& params, const std::function<Var(Graph&)>& loss_fn) {
  Graph g;
  Var loss = loss_fn(g);
  g.backward(loss);
  return g.grads_for(params);
}

}  // namespace cfil::numcore
