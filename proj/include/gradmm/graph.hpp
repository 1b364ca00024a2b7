#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradmm/tensor.hpp"

namespace gradmm {

enum class Op {
  kLeaf,
  kConstant,
  kMatmul,
  kTranspose,
  kAdd,
  kMul,
  kScale,
  kEmbeddingGather,
  kLayerNorm,
  kGelu,
  kSoftmax,
  kCrossEntropyRows,
  kReshape,
  kSlice,
  kConcat,
  kReduceMean,
  kL2Norm,
  kDot,
  kDiv,
};

// Reverse-mode tape over dense tensors. A graph is built by one worker,
// forward values are computed eagerly, and backward() replays the tape in
// reverse topological (= insertion) order exactly once.
class Graph {
 public:
  struct Node {
    Op op;
    std::vector<int> inputs;
    std::vector<int> iattrs;  // op-specific ints (axis, start, len, target ids)
    double dattr = 0.0;       // op-specific scalar (scale factor)
    Tensor value;
    bool needs_grad = false;
  };

  int leaf(Tensor t, bool requires_grad = true) {
    return push({Op::kLeaf, {}, {}, 0.0, std::move(t), requires_grad});
  }
  int constant(Tensor t) { return push({Op::kConstant, {}, {}, 0.0, std::move(t), false}); }

  // C[m,n] = A[m,k] * B[k,n]
  int matmul(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 && ta.shape[1] == tb.shape[0],
            "matmul", ta, tb);
    Tensor out({ta.shape[0], tb.shape[1]});
    matmul_into(out.data.data(), ta, tb);
    return push_op(Op::kMatmul, {a, b}, std::move(out));
  }

  int transpose(int a) {
    const Tensor& t = val(a);
    require(t.shape.size() == 2, "transpose", t, t);
    Tensor out({t.shape[1], t.shape[0]});
    for (int r = 0; r < t.shape[0]; ++r)
      for (int c = 0; c < t.shape[1]; ++c) out.at(c, r) = t.at(r, c);
    return push_op(Op::kTranspose, {a}, std::move(out));
  }

  // Same shape, or B a 1-D row of length A.cols broadcast over A's leading dim.
  int add(int a, int b) { return binary(Op::kAdd, a, b); }
  int mul(int a, int b) { return binary(Op::kMul, a, b); }

  int scale(int a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    int id = push_op(Op::kScale, {a}, std::move(out));
    nodes_[id].dattr = c;
    return id;
  }

  // table[|V|,d] gathered by ids -> [n,d]. Gradient scatters into the table.
  int embedding_gather(int table, const std::vector<int>& ids) {
    const Tensor& t = val(table);
    require(t.shape.size() == 2, "embedding_gather", t, t);
    Tensor out({static_cast<int>(ids.size()), t.shape[1]});
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= t.shape[0])
        throw std::invalid_argument("embedding_gather: id " + std::to_string(ids[i]) +
                                    " out of range for table " + shape_str(t.shape));
      for (int c = 0; c < t.shape[1]; ++c) out.at(static_cast<int>(i), c) = t.at(ids[i], c);
    }
    Node n{Op::kEmbeddingGather, {table}, ids, 0.0, std::move(out), false};
    return push(std::move(n));
  }

  // Row-wise normalization to mean 0, variance 1 (population). No affine here;
  // gain/bias are applied with mul/add by the caller.
  int layer_norm(int a) {
    const Tensor& t = val(a);
    require(t.shape.size() == 2, "layer_norm", t, t);
    Tensor out(t.shape);
    const int n = t.shape[0], d = t.shape[1];
    for (int r = 0; r < n; ++r) {
      double m = 0.0;
      for (int c = 0; c < d; ++c) m += t.at(r, c);
      m /= d;
      double var = 0.0;
      for (int c = 0; c < d; ++c) var += (t.at(r, c) - m) * (t.at(r, c) - m);
      var /= d;
      double inv = 1.0 / std::sqrt(var + kLnEps);
      for (int c = 0; c < d; ++c) out.at(r, c) = (t.at(r, c) - m) * inv;
    }
    return push_op(Op::kLayerNorm, {a}, std::move(out));
  }

  int gelu(int a) {
    Tensor out = val(a);
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v / kSqrt2));
    return push_op(Op::kGelu, {a}, std::move(out));
  }

  // Row-wise softmax over the last dimension.
  int softmax(int a) {
    const Tensor& t = val(a);
    Tensor out(t.shape);
    const int n = t.rows(), d = t.cols();
    for (int r = 0; r < n; ++r) {
      double mx = t.data[static_cast<std::size_t>(r) * d];
      for (int c = 1; c < d; ++c) mx = std::max(mx, t.data[static_cast<std::size_t>(r) * d + c]);
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        double e = std::exp(t.data[static_cast<std::size_t>(r) * d + c] - mx);
        out.data[static_cast<std::size_t>(r) * d + c] = e;
        s += e;
      }
      for (int c = 0; c < d; ++c) out.data[static_cast<std::size_t>(r) * d + c] /= s;
    }
    return push_op(Op::kSoftmax, {a}, std::move(out));
  }

  // Per-row -log softmax(logits)[target]. logits [n,V] (or [V]) -> [n].
  int cross_entropy_rows(int logits, const std::vector<int>& targets) {
    const Tensor& t = val(logits);
    const int n = t.rows(), v = t.cols();
    if (static_cast<int>(targets.size()) != n)
      throw std::invalid_argument("cross_entropy_rows: " + std::to_string(targets.size()) +
                                  " targets for " + std::to_string(n) + " rows");
    Tensor out({n});
    for (int r = 0; r < n; ++r) {
      if (targets[r] < 0 || targets[r] >= v)
        throw std::invalid_argument("cross_entropy_rows: target out of range");
      double mx = t.data[static_cast<std::size_t>(r) * v];
      for (int c = 1; c < v; ++c) mx = std::max(mx, t.data[static_cast<std::size_t>(r) * v + c]);
      double s = 0.0;
      for (int c = 0; c < v; ++c) s += std::exp(t.data[static_cast<std::size_t>(r) * v + c] - mx);
      out.at(r) = std::log(s) + mx - t.data[static_cast<std::size_t>(r) * v + targets[r]];
    }
    Node nd{Op::kCrossEntropyRows, {logits}, targets, 0.0, std::move(out), false};
    return push(std::move(nd));
  }

  int reshape(int a, std::vector<int> shape) {
    const Tensor& t = val(a);
    if (Tensor::numel_of(shape) != t.numel())
      throw std::invalid_argument("reshape: cannot view " + shape_str(t.shape) + " as " +
                                  shape_str(shape));
    Tensor out(shape, t.data);
    return push_op(Op::kReshape, {a}, std::move(out));
  }

  // 2-D slice along dim (0 = rows, 1 = cols), half-open [start, start+len).
  int slice(int a, int dim, int start, int len) {
    const Tensor& t = val(a);
    require(t.shape.size() == 2 && (dim == 0 || dim == 1), "slice", t, t);
    if (start < 0 || len < 1 || start + len > t.shape[dim])
      throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                  std::to_string(start + len) + ") out of bounds for " +
                                  shape_str(t.shape));
    Tensor out(dim == 0 ? std::vector<int>{len, t.shape[1]}
                        : std::vector<int>{t.shape[0], len});
    for (int r = 0; r < out.shape[0]; ++r)
      for (int c = 0; c < out.shape[1]; ++c)
        out.at(r, c) = dim == 0 ? t.at(start + r, c) : t.at(r, start + c);
    Node n{Op::kSlice, {a}, {dim, start, len}, 0.0, std::move(out), false};
    return push(std::move(n));
  }

  // Concatenate two 2-D tensors along dim.
  int concat(int a, int b, int dim) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.shape.size() == 2 && tb.shape.size() == 2 &&
                ta.shape[1 - dim] == tb.shape[1 - dim],
            "concat", ta, tb);
    std::vector<int> shape = ta.shape;
    shape[dim] += tb.shape[dim];
    Tensor out(shape);
    for (int r = 0; r < out.shape[0]; ++r)
      for (int c = 0; c < out.shape[1]; ++c) {
        if (dim == 0)
          out.at(r, c) = r < ta.shape[0] ? ta.at(r, c) : tb.at(r - ta.shape[0], c);
        else
          out.at(r, c) = c < ta.shape[1] ? ta.at(r, c) : tb.at(r, c - ta.shape[1]);
      }
    Node n{Op::kConcat, {a, b}, {dim, ta.shape[dim]}, 0.0, std::move(out), false};
    return push(std::move(n));
  }

  int reduce_mean(int a) {
    const Tensor& t = val(a);
    double s = 0.0;
    for (double v : t.data) s += v;
    return push_op(Op::kReduceMean, {a}, Tensor::scalar(s / static_cast<double>(t.numel())));
  }

  int l2_norm(int a) {
    return push_op(Op::kL2Norm, {a}, Tensor::scalar(val(a).l2_norm()));
  }

  int dot(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.numel() == tb.numel(), "dot", ta, tb);
    double s = 0.0;
    for (long long i = 0; i < ta.numel(); ++i) s += ta.data[i] * tb.data[i];
    return push_op(Op::kDot, {a, b}, Tensor::scalar(s));
  }

  // Scalar division a/b.
  int div(int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require(ta.numel() == 1 && tb.numel() == 1, "div", ta, tb);
    return push_op(Op::kDiv, {a, b}, Tensor::scalar(ta.item() / tb.item()));
  }

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar output w.r.t. every node that (transitively) depends
  // on a differentiable leaf. Detached leaves get an empty gradient slot, which
  // callers read as zero.
  std::vector<Tensor> backward(int out) const {
    const Tensor& o = val(out);
    if (o.numel() != 1)
      throw std::invalid_argument("backward: output must be scalar, got " + shape_str(o.shape));
    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<std::size_t>(out)] = Tensor::scalar(1.0);
    for (int id = out; id >= 0; --id) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      Tensor& g = grads[static_cast<std::size_t>(id)];
      if (g.data.empty() || !n.needs_grad) continue;
      propagate(n, g, grads);
    }
    return grads;
  }

  static Tensor grad_of(const std::vector<Tensor>& grads, int id, const Tensor& like) {
    const Tensor& g = grads[static_cast<std::size_t>(id)];
    return g.data.empty() ? Tensor(like.shape) : g;
  }

 private:
  static constexpr double kLnEps = 1e-5;
  static constexpr double kSqrt2 = 1.4142135623730951;

  std::vector<Node> nodes_;

  int push(Node n) {
    if (!n.value.all_finite())
      throw std::runtime_error("non-finite value produced by graph op");
    for (int in : n.inputs)
      if (nodes_[static_cast<std::size_t>(in)].needs_grad) n.needs_grad = true;
    if (n.op == Op::kLeaf) { /* needs_grad already set from requires_grad */ }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_op(Op op, std::vector<int> inputs, Tensor value) {
    return push({op, std::move(inputs), {}, 0.0, std::move(value), false});
  }

  int binary(Op op, int a, int b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    bool bcast = ta.shape.size() == 2 && tb.shape.size() == 1 && tb.shape[0] == ta.shape[1];
    if (!bcast && !same_shape(ta, tb)) require(false, op == Op::kAdd ? "add" : "mul", ta, tb);
    Tensor out = ta;
    const int d = ta.cols();
    for (long long i = 0; i < out.numel(); ++i) {
      double bv = bcast ? tb.data[static_cast<std::size_t>(i % d)] : tb.data[i];
      out.data[i] = op == Op::kAdd ? out.data[i] + bv : out.data[i] * bv;
    }
    return push_op(op, {a, b}, std::move(out));
  }

  static void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
    if (!ok)
      throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                  shape_str(a.shape) + " and " + shape_str(b.shape));
  }

  static void matmul_into(double* out, const Tensor& a, const Tensor& b) {
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    for (int i = 0; i < m; ++i) {
      double* orow = out + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = a.data[static_cast<std::size_t>(i) * k + p];
        const double* brow = b.data.data() + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }

  void accumulate(std::vector<Tensor>& grads, int id, Tensor delta) const {
    Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.data.empty()) {
      g = std::move(delta);
    } else {
      for (long long i = 0; i < g.numel(); ++i) g.data[i] += delta.data[i];
    }
  }

  void propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatmul: {
        const Tensor& a = val(n.inputs[0]);
        const Tensor& b = val(n.inputs[1]);
        const int m = a.shape[0], k = a.shape[1], c = b.shape[1];
        if (wants(n.inputs[0], grads)) {
          Tensor da(a.shape);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) {
              const double gv = g.data[static_cast<std::size_t>(i) * c + j];
              for (int p = 0; p < k; ++p)
                da.data[static_cast<std::size_t>(i) * k + p] +=
                    gv * b.data[static_cast<std::size_t>(p) * c + j];
            }
          accumulate(grads, n.inputs[0], std::move(da));
        }
        if (wants(n.inputs[1], grads)) {
          Tensor db(b.shape);
          for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
              const double av = a.data[static_cast<std::size_t>(i) * k + p];
              for (int j = 0; j < c; ++j)
                db.data[static_cast<std::size_t>(p) * c + j] +=
                    av * g.data[static_cast<std::size_t>(i) * c + j];
            }
          accumulate(grads, n.inputs[1], std::move(db));
        }
        break;
      }
      case Op::kTranspose: {
        const Tensor& v = n.value;
        Tensor da({v.shape[1], v.shape[0]});
        for (int r = 0; r < v.shape[0]; ++r)
          for (int c = 0; c < v.shape[1]; ++c) da.at(c, r) = g.at(r, c);
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kAdd: {
        if (wants(n.inputs[0], grads)) accumulate(grads, n.inputs[0], g);
        if (wants(n.inputs[1], grads)) accumulate(grads, n.inputs[1], reduce_like(g, val(n.inputs[1])));
        break;
      }
      case Op::kMul: {
        const Tensor& a = val(n.inputs[0]);
        const Tensor& b = val(n.inputs[1]);
        const bool bcast = b.shape.size() == 1 && a.shape.size() == 2;
        const int d = a.cols();
        if (wants(n.inputs[0], grads)) {
          Tensor da(a.shape);
          for (long long i = 0; i < a.numel(); ++i)
            da.data[i] = g.data[i] * (bcast ? b.data[static_cast<std::size_t>(i % d)] : b.data[i]);
          accumulate(grads, n.inputs[0], std::move(da));
        }
        if (wants(n.inputs[1], grads)) {
          Tensor db(b.shape);
          for (long long i = 0; i < a.numel(); ++i) {
            std::size_t bi = bcast ? static_cast<std::size_t>(i % d) : static_cast<std::size_t>(i);
            db.data[bi] += g.data[i] * a.data[i];
          }
          accumulate(grads, n.inputs[1], std::move(db));
        }
        break;
      }
      case Op::kScale: {
        Tensor da = g;
        for (double& v : da.data) v *= n.dattr;
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kEmbeddingGather: {
        if (!wants(n.inputs[0], grads)) break;
        const Tensor& tbl = val(n.inputs[0]);
        Tensor dt(tbl.shape);
        const int d = tbl.shape[1];
        for (std::size_t i = 0; i < n.iattrs.size(); ++i)
          for (int c = 0; c < d; ++c)
            dt.at(n.iattrs[i], c) += g.at(static_cast<int>(i), c);
        accumulate(grads, n.inputs[0], std::move(dt));
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& x = val(n.inputs[0]);
        const Tensor& y = n.value;
        Tensor dx(x.shape);
        const int rows = x.shape[0], d = x.shape[1];
        for (int r = 0; r < rows; ++r) {
          double m = 0.0;
          for (int c = 0; c < d; ++c) m += x.at(r, c);
          m /= d;
          double var = 0.0;
          for (int c = 0; c < d; ++c) var += (x.at(r, c) - m) * (x.at(r, c) - m);
          var /= d;
          double inv = 1.0 / std::sqrt(var + kLnEps);
          double gmean = 0.0, gymean = 0.0;
          for (int c = 0; c < d; ++c) {
            gmean += g.at(r, c);
            gymean += g.at(r, c) * y.at(r, c);
          }
          gmean /= d;
          gymean /= d;
          for (int c = 0; c < d; ++c)
            dx.at(r, c) = inv * (g.at(r, c) - gmean - y.at(r, c) * gymean);
        }
        accumulate(grads, n.inputs[0], std::move(dx));
        break;
      }
      case Op::kGelu: {
        const Tensor& x = val(n.inputs[0]);
        Tensor dx(x.shape);
        for (long long i = 0; i < x.numel(); ++i) {
          double v = x.data[i];
          double cdf = 0.5 * (1.0 + std::erf(v / kSqrt2));
          double pdf = std::exp(-0.5 * v * v) / 2.5066282746310002;  // sqrt(2*pi)
          dx.data[i] = g.data[i] * (cdf + v * pdf);
        }
        accumulate(grads, n.inputs[0], std::move(dx));
        break;
      }
      case Op::kSoftmax: {
        const Tensor& y = n.value;
        Tensor dx(y.shape);
        const int rows = y.rows(), d = y.cols();
        for (int r = 0; r < rows; ++r) {
          double s = 0.0;
          for (int c = 0; c < d; ++c)
            s += g.data[static_cast<std::size_t>(r) * d + c] *
                 y.data[static_cast<std::size_t>(r) * d + c];
          for (int c = 0; c < d; ++c)
            dx.data[static_cast<std::size_t>(r) * d + c] =
                y.data[static_cast<std::size_t>(r) * d + c] *
                (g.data[static_cast<std::size_t>(r) * d + c] - s);
        }
        accumulate(grads, n.inputs[0], std::move(dx));
        break;
      }
      case Op::kCrossEntropyRows: {
        const Tensor& logits = val(n.inputs[0]);
        const int rows = logits.rows(), v = logits.cols();
        Tensor dl(logits.shape);
        for (int r = 0; r < rows; ++r) {
          double mx = logits.data[static_cast<std::size_t>(r) * v];
          for (int c = 1; c < v; ++c)
            mx = std::max(mx, logits.data[static_cast<std::size_t>(r) * v + c]);
          double s = 0.0;
          for (int c = 0; c < v; ++c)
            s += std::exp(logits.data[static_cast<std::size_t>(r) * v + c] - mx);
          for (int c = 0; c < v; ++c) {
            double p = std::exp(logits.data[static_cast<std::size_t>(r) * v + c] - mx) / s;
            dl.data[static_cast<std::size_t>(r) * v + c] =
                g.at(r) * (p - (c == n.iattrs[static_cast<std::size_t>(r)] ? 1.0 : 0.0));
          }
        }
        accumulate(grads, n.inputs[0], std::move(dl));
        break;
      }
      case Op::kReshape: {
        Tensor da(val(n.inputs[0]).shape, g.data);
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kSlice: {
        const Tensor& a = val(n.inputs[0]);
        const int dim = n.iattrs[0], start = n.iattrs[1];
        Tensor da(a.shape);
        for (int r = 0; r < g.shape[0]; ++r)
          for (int c = 0; c < g.shape[1]; ++c) {
            if (dim == 0)
              da.at(start + r, c) = g.at(r, c);
            else
              da.at(r, start + c) = g.at(r, c);
          }
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kConcat: {
        const int dim = n.iattrs[0], split = n.iattrs[1];
        const Tensor& a = val(n.inputs[0]);
        const Tensor& b = val(n.inputs[1]);
        if (wants(n.inputs[0], grads)) {
          Tensor da(a.shape);
          for (int r = 0; r < a.shape[0]; ++r)
            for (int c = 0; c < a.shape[1]; ++c) da.at(r, c) = g.at(r, c);
          accumulate(grads, n.inputs[0], std::move(da));
        }
        if (wants(n.inputs[1], grads)) {
          Tensor db(b.shape);
          for (int r = 0; r < b.shape[0]; ++r)
            for (int c = 0; c < b.shape[1]; ++c)
              db.at(r, c) = dim == 0 ? g.at(split + r, c) : g.at(r, split + c);
          accumulate(grads, n.inputs[1], std::move(db));
        }
        break;
      }
      case Op::kReduceMean: {
        const Tensor& a = val(n.inputs[0]);
        Tensor da(a.shape);
        const double gv = g.item() / static_cast<double>(a.numel());
        for (double& v : da.data) v = gv;
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kL2Norm: {
        const Tensor& a = val(n.inputs[0]);
        const double norm = n.value.item();
        Tensor da(a.shape);
        if (norm > 0.0) {
          const double gv = g.item() / norm;
          for (long long i = 0; i < a.numel(); ++i) da.data[i] = gv * a.data[i];
        }
        accumulate(grads, n.inputs[0], std::move(da));
        break;
      }
      case Op::kDot: {
        const Tensor& a = val(n.inputs[0]);
        const Tensor& b = val(n.inputs[1]);
        const double gv = g.item();
        if (wants(n.inputs[0], grads)) {
          Tensor da(a.shape);
          for (long long i = 0; i < a.numel(); ++i) da.data[i] = gv * b.data[i];
          accumulate(grads, n.inputs[0], std::move(da));
        }
        if (wants(n.inputs[1], grads)) {
          Tensor db(b.shape);
          for (long long i = 0; i < b.numel(); ++i) db.data[i] = gv * a.data[i];
          accumulate(grads, n.inputs[1], std::move(db));
        }
        break;
      }
      case Op::kDiv: {
        const double av = val(n.inputs[0]).item();
        const double bv = val(n.inputs[1]).item();
        const double gv = g.item();
        if (wants(n.inputs[0], grads)) accumulate(grads, n.inputs[0], Tensor::scalar(gv / bv));
        if (wants(n.inputs[1], grads))
          accumulate(grads, n.inputs[1], Tensor::scalar(-gv * av / (bv * bv)));
        break;
      }
    }
  }

  bool wants(int id, const std::vector<Tensor>&) const {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  }

  static Tensor reduce_like(const Tensor& g, const Tensor& target) {
    if (same_shape(g, target)) return g;
    // Broadcast add: sum gradient over the leading dimension.
    Tensor out(target.shape);
    const int d = target.shape[0];
    for (long long i = 0; i < g.numel(); ++i) out.data[static_cast<std::size_t>(i % d)] += g.data[i];
    return out;
  }
};

}  // namespace gradmm
