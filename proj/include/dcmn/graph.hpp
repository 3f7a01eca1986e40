#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcmn/tensor.hpp"

namespace dcmn {

class Graph;

/// Handle to a value recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient accumulated by Graph::backward (empty if not tracked).
  std::span<const double> grad() const;
};

/// Reverse-mode tape. Nodes are appended in execution order, which is a
/// valid topological order; backward walks it in reverse.
///
/// A Graph is single-use: record, call backward once, then reset() before
/// recording again.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  /// With `track_gradients` false, parameters are recorded as plain leaves
  /// and no backward closures are kept.
  explicit Graph(Precision precision = Precision::f64, bool track_gradients = true)
      : precision_(precision), track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Precision precision() const { return precision_; }

  Var constant(Tensor value);
  /// Leaf bound to an external tensor. If the tensor tracks gradients,
  /// backward adds into its grad buffer.
  Var parameter(Tensor& param);

  Var record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  void backward(Var loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  /// Mutable gradient of an input node; empty if that node needs none.
  std::span<double> grad_of(std::size_t id) { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::string& op(std::size_t id) const { return nodes_[id].op; }

  /// Description of the first node holding a NaN/Inf, if any.
  std::optional<std::string> first_non_finite() const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
  };

  Precision precision_;
  bool track_;
  // deque keeps references from Var::value() valid while recording.
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// Differentiable operations. Every op records one node on the graph of its
// first operand; all operands must belong to the same graph.

/// (r x k)(k x c) -> (r x c); a rank-1 left operand is treated as a row.
Var matmul(Var a, Var b);
Var transpose(Var a);
/// Numerically stable softmax along `axis`.
Var softmax(Var x, std::size_t axis);
/// Column-wise maximum over the rows of a matrix; gradient goes to the first
/// maximal row of each column.
Var row_max_pool(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var scale(Var x, double factor);
/// Adds a vector along the last axis of `x`.
Var add_bias(Var x, Var bias);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(Var x, Shape shape);
Var sum(Var x);
Var dot(Var a, Var b);
/// Rows of `table` selected by `ids`.
Var embedding(Var table, std::span<const std::size_t> ids);
/// -log softmax(logits)[label]
Var cross_entropy(Var logits, std::size_t label);

/// 1 - x, built from a constant and sub.
Var one_minus(Var x);
/// g*a + (1-g)*b
Var gated_mix(Var gate, Var a, Var b);

double sigmoid_value(double x);

}  // namespace dcmn
