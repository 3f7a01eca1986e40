#include "dcmn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcmn {

const Tensor& Var::value() const { return graph->value(id); }
std::span<const double> Var::grad() const { return graph->grad(id); }

Var Graph::constant(Tensor value) {
  for (double& v : value.data()) v = round_to(precision_, v);
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor& param) {
  Node n;
  n.op = "parameter";
  n.value = param;
  n.value.set_requires_grad(false);
  for (double& v : n.value.data()) v = round_to(precision_, v);
  if (track_ && param.requires_grad()) {
    n.param = &param;
    n.needs_grad = true;
    n.grad.assign(n.value.size(), 0.0);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, std::vector<std::size_t> inputs,
                  BackwardFn fn) {
  for (double& v : value.data()) v = round_to(precision_, v);
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                             [&](std::size_t i) { return nodes_[i].needs_grad; });
  if (n.needs_grad) {
    n.grad.assign(n.value.size(), 0.0);
    n.backward = std::move(fn);
  }
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error("backward: loss belongs to another graph");
  if (backward_done_) throw Error("backward called twice on the same graph without reset");
  const Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1)
    throw ShapeError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  backward_done_ = true;
  if (!root.needs_grad) return;
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      auto g = n.param->grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

void Graph::reset() {
  nodes_.clear();
  backward_done_ = false;
}

std::optional<std::string> Graph::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].value.all_finite())
      return "node " + std::to_string(i) + " (" + nodes_[i].op + ", shape " +
             to_string(nodes_[i].value.shape()) + ")";
  return std::nullopt;
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

Graph& graph_of(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw Error("operands recorded on different graphs");
  return *a.graph;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

// Accumulates `src` into the grad of node `id` if that node is tracked.
void accumulate(Graph& g, std::size_t id, std::span<const double> src) {
  auto dst = g.grad_of(id);
  if (dst.empty()) return;
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

struct MatDims {
  std::size_t rows, cols;
};

MatDims as_matrix(const Tensor& t) { return {t.rows(), t.cols()}; }

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.cols() != bv.dim(0))
    throw ShapeError("matmul: cannot multiply " + to_string(av.shape()) + " by " +
                     to_string(bv.shape()));
  const auto [r, k] = as_matrix(av);
  const std::size_t c = bv.cols();
  Shape out_shape = av.rank() == 1 ? Shape{c} : Shape{r, c};
  Tensor out(out_shape);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] += x * bv[p * c + j];
    }
  const std::size_t ia = a.id, ib = b.id;
  return g.record("matmul", std::move(out), {ia, ib}, [=](Graph& gr, std::size_t self) {
    const auto go = gr.grad(self);
    const Tensor& A = gr.value(ia);
    const Tensor& B = gr.value(ib);
    if (auto ga = gr.grad_of(ia); !ga.empty())
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) s += go[i * c + j] * B[p * c + j];
          ga[i * k + p] += s;
        }
    if (auto gb = gr.grad_of(ib); !gb.empty())
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = A[i * k + p];
          for (std::size_t j = 0; j < c; ++j) gb[p * c + j] += x * go[i * c + j];
        }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  const auto [r, c] = as_matrix(av);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::size_t ia = a.id;
  return a.graph->record("transpose", std::move(out), {ia}, [=](Graph& gr, std::size_t self) {
    const auto go = gr.grad(self);
    auto ga = gr.grad_of(ia);
    if (ga.empty()) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
  });
}

Var softmax(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank())
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     to_string(xv.shape()));
  // View as [outer, extent, inner] with the reduced axis in the middle.
  const std::size_t extent = xv.dim(axis);
  const std::size_t inner = (xv.rank() == 2 && axis == 0) ? xv.cols() : 1;
  const std::size_t outer = xv.size() / (extent * inner);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * extent * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < extent; ++e) mx = std::max(mx, xv[base + e * inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = std::exp(xv[base + e * inner] - mx);
        out[base + e * inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < extent; ++e) out[base + e * inner] /= z;
    }
  const std::size_t ix = x.id;
  return x.graph->record("softmax", std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
    auto gx = gr.grad_of(ix);
    if (gx.empty()) return;
    const auto go = gr.grad(self);
    const Tensor& y = gr.value(self);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * extent * inner + in;
        double d = 0.0;
        for (std::size_t e = 0; e < extent; ++e) d += go[base + e * inner] * y[base + e * inner];
        for (std::size_t e = 0; e < extent; ++e) {
          const std::size_t idx = base + e * inner;
          gx[idx] += y[idx] * (go[idx] - d);
        }
      }
  });
}

Var row_max_pool(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("row_max_pool: expects a matrix, got " + to_string(xv.shape()));
  const std::size_t r = xv.dim(0), c = xv.dim(1);
  Tensor out({c});
  std::vector<std::size_t> argmax(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = xv[j];
    for (std::size_t i = 1; i < r; ++i)
      if (xv[i * c + j] > best) {
        best = xv[i * c + j];
        argmax[j] = i;
      }
    out[j] = best;
  }
  const std::size_t ix = x.id;
  return x.graph->record("row_max_pool", std::move(out), {ix},
                         [=, argmax = std::move(argmax)](Graph& gr, std::size_t self) {
                           auto gx = gr.grad_of(ix);
                           if (gx.empty()) return;
                           const auto go = gr.grad(self);
                           for (std::size_t j = 0; j < c; ++j) gx[argmax[j] * c + j] += go[j];
                         });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += b.value()[k];
  const std::size_t ia = a.id, ib = b.id;
  return g.record("add", std::move(out), {ia, ib}, [=](Graph& gr, std::size_t self) {
    accumulate(gr, ia, gr.grad(self));
    accumulate(gr, ib, gr.grad(self));
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= b.value()[k];
  const std::size_t ia = a.id, ib = b.id;
  return g.record("sub", std::move(out), {ia, ib}, [=](Graph& gr, std::size_t self) {
    const auto go = gr.grad(self);
    accumulate(gr, ia, go);
    if (auto gb = gr.grad_of(ib); !gb.empty())
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= go[k];
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= b.value()[k];
  const std::size_t ia = a.id, ib = b.id;
  return g.record("mul", std::move(out), {ia, ib}, [=](Graph& gr, std::size_t self) {
    const auto go = gr.grad(self);
    const Tensor& A = gr.value(ia);
    const Tensor& B = gr.value(ib);
    if (auto ga = gr.grad_of(ia); !ga.empty())
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += go[k] * B[k];
    if (auto gb = gr.grad_of(ib); !gb.empty())
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += go[k] * A[k];
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id;
  return x.graph->record("relu", std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
    auto gx = gr.grad_of(ix);
    if (gx.empty()) return;
    const auto go = gr.grad(self);
    const Tensor& X = gr.value(ix);
    for (std::size_t k = 0; k < gx.size(); ++k)
      if (X[k] > 0.0) gx[k] += go[k];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = sigmoid_value(v);
  const std::size_t ix = x.id;
  return x.graph->record("sigmoid", std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
    auto gx = gr.grad_of(ix);
    if (gx.empty()) return;
    const auto go = gr.grad(self);
    const Tensor& y = gr.value(self);
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += go[k] * y[k] * (1.0 - y[k]);
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ix = x.id;
  return x.graph->record("scale", std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
    auto gx = gr.grad_of(ix);
    if (gx.empty()) return;
    const auto go = gr.grad(self);
    for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += factor * go[k];
  });
}

Var add_bias(Var x, Var bias) {
  Graph& g = graph_of(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || bv.size() != xv.cols())
    throw ShapeError("add_bias: bias " + to_string(bv.shape()) + " does not match last axis of " +
                     to_string(xv.shape()));
  Tensor out = xv;
  const std::size_t c = xv.cols();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += bv[k % c];
  const std::size_t ix = x.id, ib = bias.id;
  return g.record("add_bias", std::move(out), {ix, ib}, [=](Graph& gr, std::size_t self) {
    const auto go = gr.grad(self);
    accumulate(gr, ix, go);
    if (auto gb = gr.grad_of(ib); !gb.empty())
      for (std::size_t k = 0; k < go.size(); ++k) gb[k % c] += go[k];
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: empty list of parts");
  Graph& g = *parts[0].graph;
  const Tensor& first = parts[0].value();
  if (axis >= first.rank())
    throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for shape " +
                     to_string(first.shape()));
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw Error("concat: parts recorded on different graphs");
    const Tensor& v = p.value();
    if (v.rank() != first.rank())
      throw ShapeError("concat: rank mismatch " + to_string(first.shape()) + " vs " +
                       to_string(v.shape()));
    for (std::size_t ax = 0; ax < v.rank(); ++ax)
      if (ax != axis && v.dim(ax) != first.dim(ax))
        throw ShapeError("concat: non-concat axis mismatch " + to_string(first.shape()) +
                         " vs " + to_string(v.shape()));
    total += v.dim(axis);
  }
  Shape s = first.shape();
  s[axis] = total;
  Tensor out(s);
  // Rows of the [outer, total*inner] view.
  const std::size_t outer = axis == 0 ? 1 : first.dim(0);
  const std::size_t inner = (first.rank() == 2 && axis == 0) ? first.cols() : 1;
  const std::size_t row_len = total * inner;
  std::vector<std::size_t> ids, offsets, widths;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t w = v.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data().begin() + o * w, w, out.data().begin() + o * row_len + offset);
    ids.push_back(p.id);
    offsets.push_back(offset);
    widths.push_back(w);
    offset += w;
  }
  std::vector<std::size_t> inputs = ids;
  return g.record("concat", std::move(out), std::move(inputs),
                  [=](Graph& gr, std::size_t self) {
                    const auto go = gr.grad(self);
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                      auto gp = gr.grad_of(ids[p]);
                      if (gp.empty()) continue;
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t k = 0; k < widths[p]; ++k)
                          gp[o * widths[p] + k] += go[o * row_len + offsets[p] + k];
                    }
                  });
}

Var reshape(Var x, Shape shape) {
  if (shape_size(shape) != x.value().size())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  Tensor out(std::move(shape), x.value().values());
  const std::size_t ix = x.id;
  return x.graph->record("reshape", std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
    accumulate(gr, ix, gr.grad(self));
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id;
  return x.graph->record("sum", Tensor::scalar(s), {ix}, [=](Graph& gr, std::size_t self) {
    auto gx = gr.grad_of(ix);
    const double go = gr.grad(self)[0];
    for (double& v : gx) v += go;
  });
}

Var dot(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (a.value().size() != b.value().size())
    throw ShapeError("dot: size mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double s = 0.0;
  for (std::size_t k = 0; k < a.value().size(); ++k) s += a.value()[k] * b.value()[k];
  const std::size_t ia = a.id, ib = b.id;
  return g.record("dot", Tensor::scalar(s), {ia, ib}, [=](Graph& gr, std::size_t self) {
    const double go = gr.grad(self)[0];
    const Tensor& A = gr.value(ia);
    const Tensor& B = gr.value(ib);
    if (auto ga = gr.grad_of(ia); !ga.empty())
      for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += go * B[k];
    if (auto gb = gr.grad_of(ib); !gb.empty())
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += go * A[k];
  });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding: table must be a matrix");
  if (ids.empty()) throw ShapeError("embedding: empty id sequence");
  const std::size_t c = tv.cols();
  Tensor out({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.dim(0))
      throw ShapeError("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(tv.dim(0)) + " rows");
    std::copy_n(tv.data().begin() + ids[i] * c, c, out.data().begin() + i * c);
  }
  const std::size_t it = table.id;
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return table.graph->record("embedding", std::move(out), {it},
                             [=, rows = std::move(rows)](Graph& gr, std::size_t self) {
                               auto gt = gr.grad_of(it);
                               if (gt.empty()) return;
                               const auto go = gr.grad(self);
                               for (std::size_t i = 0; i < rows.size(); ++i)
                                 for (std::size_t j = 0; j < c; ++j)
                                   gt[rows[i] * c + j] += go[i * c + j];
                             });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  if (z.rank() != 1) throw ShapeError("cross_entropy: logits must be a vector");
  if (label >= z.size())
    throw ShapeError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(z.size()) + " logits");
  const double mx = *std::max_element(z.data().begin(), z.data().end());
  double s = 0.0;
  for (double v : z.data()) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  const std::size_t iz = logits.id;
  return logits.graph->record(
      "cross_entropy", Tensor::scalar(lse - z[label]), {iz}, [=](Graph& gr, std::size_t self) {
        auto gz = gr.grad_of(iz);
        if (gz.empty()) return;
        const double go = gr.grad(self)[0];
        const Tensor& Z = gr.value(iz);
        for (std::size_t k = 0; k < gz.size(); ++k) {
          const double p = std::exp(Z[k] - lse);
          gz[k] += go * (p - (k == label ? 1.0 : 0.0));
        }
      });
}

Var one_minus(Var x) {
  Var ones = x.graph->constant(Tensor(x.shape(), 1.0));
  return sub(ones, x);
}

Var gated_mix(Var gate, Var a, Var b) { return add(mul(gate, a), mul(one_minus(gate), b)); }

}  // namespace dcmn
