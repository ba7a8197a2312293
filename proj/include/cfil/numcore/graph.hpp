#pragma once

#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfil/numcore/param_store.hpp"
#include "cfil/numcore/tensor.hpp"

namespace cfil::numcore {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  const Tensor& value() const;
  int rows() const;
  int cols() const;
  double scalar() const;  // value of a 1x1 node
};

// Reverse-mode autodiff over matrix-valued nodes. Built define-by-run: ops
// append nodes, backward() fills gradients for all reachable leaves.
class Graph {
 public:
  // Leaves and constants.
  Var param(const ParamStore& store, const std::string& name);
  Var constant(Tensor value);
  Var constant_row(std::span<const double> v) { return constant(Tensor::from_row(v)); }
  Var constant_scalar(double v);

  // Stores listed here contribute no parameter gradients (their leaves are
  // treated as constants); gradients still flow through ops that use them.
  void freeze_store(const ParamStore* store) { frozen_.insert(store); }

  // y = x * W^T + b, with W (out x in) and b (1 x out) broadcast over rows.
  Var linear(Var x, Var w, Var b);
  Var matmul_nt(Var x, Var w);  // x * W^T without bias

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var minimum(Var a, Var b);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var mul_scalar_node(Var a, Var s);  // s is 1x1; y = s * a

  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var softplus(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);

  Var sum(Var a);       // 1x1
  Var mean(Var a);      // 1x1
  Var row_sum(Var a);   // (n x m) -> (n x 1)
  Var log_mean_exp(Var a);  // over all entries, max-shifted; 1x1

  Var slice_cols(Var a, int c0, int c1);       // columns [c0, c1)
  Var concat_cols(Var a, Var b);
  Var permute_cols(Var a, std::vector<int> perm);

  // Backprop from a scalar node. May be called once per graph.
  void backward(Var loss);

  // Gradient of a leaf after backward(); zero tensor if the leaf was unused.
  GradMap grads_for(const ParamStore& store) const;

  const Tensor& value(int id) const { return nodes_[id].value; }
  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf, Const, Linear, MatmulNT, Add, Sub, Mul, Min, Neg, Scale, AddScalar, MulScalarNode,
    Exp, Log, Tanh, Relu, Softplus, Square, Clamp,
    Sum, Mean, RowSum, LogMeanExp, SliceCols, ConcatCols, PermuteCols,
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    double p0 = 0.0, p1 = 0.0;
    int i0 = 0, i1 = 0;
    std::vector<int> perm;
    const ParamStore* store = nullptr;
    std::string pname;
  };

  static const char* op_name(Op op);
  int push(Node n);
  Var make(Op op, int a, int b, Tensor value);
  void check_finite(const Node& n) const;
  const Node& node(int id) const { return nodes_[id]; }

  std::vector<Node> nodes_;
  std::set<const ParamStore*> frozen_;
  std::map<std::pair<const ParamStore*, std::string>, int> leaf_index_;
  bool backward_done_ = false;
};

// Gradient of a scalar loss with respect to every parameter in `params`.
// `loss_fn` builds the loss from graph ops; it receives the graph to add
// leaves and constants to. Throws NumericError if the loss is non-finite.
GradMap grad_scalar(const ParamStore& params, const std::function<Var(Graph&)>& loss_fn);

}  // namespace cfil::numcore
