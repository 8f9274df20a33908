#include "xlft/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "kernels.hpp"
#include "xlft/error.hpp"

namespace xlft {

const Tensor& Var::value() const {
  if (!graph_) throw Error(ErrorCategory::precondition, "value() on an empty Var");
  return graph_->value(*this);
}

void Graph::check_owned(Var v, std::string_view op) const {
  if (!v.valid() || &v.graph() != this || v.id() >= nodes_.size()) {
    throw Error(ErrorCategory::precondition,
                std::string(op) + ": input does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, false, {}, -1});
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(std::string_view name) {
  if (!source_) throw Error(ErrorCategory::precondition, "graph has no bound ParamSet");
  const std::size_t idx = source_->index_of(name);
  if (param_nodes_.size() < source_->size()) param_nodes_.resize(source_->size(), -1);
  if (param_nodes_[idx] >= 0) return Var(this, static_cast<std::size_t>(param_nodes_[idx]));
  const ParamEntry& entry = (*source_)[idx];
  nodes_.push_back(Node{"param", entry.value, {}, entry.trainable, {},
                        static_cast<std::ptrdiff_t>(idx)});
  param_nodes_[idx] = static_cast<std::ptrdiff_t>(nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

const Tensor* Graph::grad(Var v) const {
  const auto& n = nodes_.at(v.id());
  return n.grad.empty() ? nullptr : &n.grad;
}

Var Graph::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                  BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    check_owned(in, op);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(
      Node{std::string(op), std::move(value), {}, needs, needs ? std::move(backward) : nullptr, -1});
  return Var(this, nodes_.size() - 1);
}

Tensor* Graph::accum(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return &n.grad;
}

void Graph::backward(Var root) {
  check_owned(root, "backward");
  Node& r = nodes_[root.id()];
  if (r.value.size() != 1) {
    throw Error(ErrorCategory::shape,
                "backward: root must be a scalar, got " + shape_to_string(r.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (r.requires_grad) {
    r.grad = Tensor::zeros_like(r.value);
    r.grad[0] = 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }
  if (!sink_) return;
  for (std::size_t p = 0; p < sink_->size(); ++p) {
    ParamEntry& entry = (*sink_)[p];
    if (!entry.trainable) {
      entry.grad.reset();
      continue;
    }
    const std::ptrdiff_t node = p < param_nodes_.size() ? param_nodes_[p] : -1;
    if (node >= 0 && !nodes_[node].grad.empty()) {
      entry.grad = nodes_[node].grad;
    } else {
      entry.grad = Tensor::zeros_like(entry.value);
    }
  }
}

namespace ops {

namespace {

[[noreturn]] void shape_error(std::string_view op, std::initializer_list<const Tensor*> ins,
                              std::string_view detail = {}) {
  std::string msg = std::string(op) + ": incompatible shapes";
  for (const Tensor* t : ins) msg += " " + shape_to_string(t->shape());
  if (!detail.empty()) msg += " (" + std::string(detail) + ")";
  throw Error(ErrorCategory::shape, msg);
}

void require_matrix(std::string_view op, const Tensor& t) {
  if (t.rank() != 2) shape_error(op, {&t}, "expected a matrix");
}

Graph& graph_of(std::string_view op, Var a) {
  if (!a.valid()) throw Error(ErrorCategory::precondition, std::string(op) + ": empty Var");
  return a.graph();
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of("matmul", a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) shape_error("matmul", {&A, &B});
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  kernels::gemm_nn(A.data().data(), B.data().data(), out.data().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return g.record("matmul", std::move(out), {a, b}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* da = g.accum(ia)) {
      kernels::gemm_nt(dy.data().data(), g.node_value(ib).data().data(), da->data().data(), m, n,
                       k);
    }
    if (Tensor* db = g.accum(ib)) {
      kernels::gemm_tn(g.node_value(ia).data().data(), dy.data().data(), db->data().data(), m, k,
                       n);
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of("add", a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) shape_error("add", {&A, &B});
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record("add", std::move(out), {a, b}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    for (std::size_t id : {ia, ib}) {
      if (Tensor* d = g.accum(id)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*d)[i] += dy[i];
      }
    }
  });
}

Var add_bias(Var x, Var bias) {
  Graph& g = graph_of("add_bias", x);
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (X.rank() != 2 || b.size() != X.dim(1)) shape_error("add_bias", {&X, &b});
  Tensor out = X;
  const std::size_t rows = X.dim(0), cols = X.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += b[c];
  }
  const std::size_t ix = x.id(), ibias = bias.id();
  return g.record("add_bias", std::move(out), {x, bias}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* dx = g.accum(ix)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
    }
    if (Tensor* db = g.accum(ibias)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dy[r * cols + c];
      }
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of("mul", a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) shape_error("mul", {&A, &B});
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record("mul", std::move(out), {a, b}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* da = g.accum(ia)) {
      const Tensor& Bv = g.node_value(ib);
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * Bv[i];
    }
    if (Tensor* db = g.accum(ib)) {
      const Tensor& Av = g.node_value(ia);
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * Av[i];
    }
  });
}

Var scale(Var x, double factor) {
  Graph& g = graph_of("scale", x);
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  const std::size_t ix = x.id();
  return g.record("scale", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* dx = g.accum(ix)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += factor * dy[i];
    }
  });
}

Var relu(Var x) {
  Graph& g = graph_of("relu", x);
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t ix = x.id();
  return g.record("relu", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* dx = g.accum(ix)) {
      const Tensor& in = g.node_value(ix);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (in[i] > 0.0) (*dx)[i] += dy[i];
      }
    }
  });
}

Var tanh(Var x) {
  Graph& g = graph_of("tanh", x);
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  const std::size_t ix = x.id();
  return g.record("tanh", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    if (Tensor* dx = g.accum(ix)) {
      const Tensor& y = g.node_value(self);
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i] * (1.0 - y[i] * y[i]);
    }
  });
}

namespace {

void softmax_rows(const Tensor& in, Tensor& out) {
  const std::size_t rows = in.rows(), cols = in.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data().data() + r * cols;
    double* y = out.data().data() + r * cols;
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
}

}  // namespace

Var softmax(Var x) {
  Graph& g = graph_of("softmax", x);
  const Tensor& X = x.value();
  Tensor out = Tensor::zeros_like(X);
  softmax_rows(X, out);
  const std::size_t ix = x.id();
  const std::size_t rows = X.rows(), cols = X.cols();
  return g.record("softmax", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    Tensor* dx = g.accum(ix);
    if (!dx) return;
    const Tensor& dy = g.out_grad(self);
    const Tensor& y = g.node_value(self);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        (*dx)[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - dot);
      }
    }
  });
}

Var log_softmax(Var x) {
  Graph& g = graph_of("log_softmax", x);
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  Tensor out = Tensor::zeros_like(X);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * cols;
    double mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(xr[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xr[c] - lse;
  }
  const std::size_t ix = x.id();
  return g.record("log_softmax", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    Tensor* dx = g.accum(ix);
    if (!dx) return;
    const Tensor& dy = g.out_grad(self);
    const Tensor& y = g.node_value(self);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) total += dy[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        (*dx)[r * cols + c] += dy[r * cols + c] - std::exp(y[r * cols + c]) * total;
      }
    }
  });
}

Var mean_pool(Var x, std::size_t group) {
  Graph& g = graph_of("mean_pool", x);
  const Tensor& X = x.value();
  require_matrix("mean_pool", X);
  if (group == 0 || X.dim(0) % group != 0) {
    shape_error("mean_pool", {&X}, "row count not divisible by group " + std::to_string(group));
  }
  const std::size_t batch = X.dim(0) / group, cols = X.dim(1);
  Tensor out({batch, cols});
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < group; ++t) {
      for (std::size_t c = 0; c < cols; ++c) out.at(b, c) += X.at(b * group + t, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(b, c) *= inv;
  }
  const std::size_t ix = x.id();
  return g.record("mean_pool", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    Tensor* dx = g.accum(ix);
    if (!dx) return;
    const Tensor& dy = g.out_grad(self);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < group; ++t) {
        for (std::size_t c = 0; c < cols; ++c) dx->at(b * group + t, c) += dy.at(b, c) * inv;
      }
    }
  });
}

Var gather_rows(Var table, std::vector<std::size_t> rows) {
  Graph& g = graph_of("gather_rows", table);
  const Tensor& T = table.value();
  require_matrix("gather_rows", T);
  if (rows.empty()) throw Error(ErrorCategory::shape, "gather_rows: empty index list");
  const std::size_t cols = T.dim(1);
  Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= T.dim(0)) {
      shape_error("gather_rows", {&T}, "row index " + std::to_string(rows[i]) + " out of range");
    }
    std::copy_n(T.data().data() + rows[i] * cols, cols, out.data().data() + i * cols);
  }
  const std::size_t it = table.id();
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(rows));
  return g.record("gather_rows", std::move(out), {table}, [=](Graph& g, std::size_t self) {
    Tensor* dt = g.accum(it);
    if (!dt) return;
    const Tensor& dy = g.out_grad(self);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      double* dst = dt->data().data() + (*idx)[i] * cols;
      const double* src = dy.data().data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCategory::shape, "concat_rows: no inputs");
  Graph& g = graph_of("concat_rows", parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    require_matrix("concat_rows", t);
    if (t.dim(1) != cols) shape_error("concat_rows", {&parts[0].value(), &t});
    total += t.dim(0);
  }
  Tensor out({total, cols});
  std::vector<std::size_t> ids, offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    std::copy(t.data().begin(), t.data().end(), out.data().begin() + offset * cols);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += t.dim(0);
  }
  return g.record("concat_rows", std::move(out), parts, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor* d = g.accum(ids[k]);
      if (!d) continue;
      const double* src = dy.data().data() + offsets[k] * cols;
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += src[i];
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of("layer_norm", x);
  const Tensor& X = x.value();
  require_matrix("layer_norm", X);
  const std::size_t rows = X.dim(0), cols = X.dim(1);
  if (gain.value().size() != cols || bias.value().size() != cols) {
    shape_error("layer_norm", {&X, &gain.value(), &bias.value()});
  }
  const Tensor& G = gain.value();
  const Tensor& Bv = bias.value();
  auto xhat = std::make_shared<Tensor>(Shape{rows, cols});
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (xr[c] - mu) * is;
      xhat->at(r, c) = h;
      out.at(r, c) = G[c] * h + Bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record("layer_norm", std::move(out), {x, gain, bias}, [=](Graph& g, std::size_t self) {
    const Tensor& dy = g.out_grad(self);
    const Tensor& Gv = g.node_value(ig);
    if (Tensor* dg = g.accum(ig)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*dg)[c] += dy.at(r, c) * xhat->at(r, c);
      }
    }
    if (Tensor* db = g.accum(ib)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dy.at(r, c);
      }
    }
    if (Tensor* dx = g.accum(ix)) {
      const double n = static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_d = 0.0, mean_dh = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double d = dy.at(r, c) * Gv[c];
          mean_d += d;
          mean_dh += d * xhat->at(r, c);
        }
        mean_d /= n;
        mean_dh /= n;
        for (std::size_t c = 0; c < cols; ++c) {
          const double d = dy.at(r, c) * Gv[c];
          dx->at(r, c) += (*inv_std)[r] * (d - mean_d - xhat->at(r, c) * mean_dh);
        }
      }
    }
  });
}

Var self_attention(Var qkv, std::span<const std::uint8_t> key_mask, std::size_t batch,
                   std::size_t seq_len, std::size_t num_heads) {
  Graph& g = graph_of("self_attention", qkv);
  const Tensor& X = qkv.value();
  require_matrix("self_attention", X);
  if (num_heads == 0 || X.dim(0) != batch * seq_len || X.dim(1) % (3 * num_heads) != 0 ||
      key_mask.size() != batch * seq_len) {
    shape_error("self_attention", {&X},
                "batch " + std::to_string(batch) + ", seq_len " + std::to_string(seq_len) +
                    ", heads " + std::to_string(num_heads) + ", mask " +
                    std::to_string(key_mask.size()));
  }
  const std::size_t width = X.dim(1);
  const std::size_t hidden = width / 3;
  const std::size_t head_dim = hidden / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  auto mask = std::make_shared<const std::vector<std::uint8_t>>(key_mask.begin(), key_mask.end());
  // Attention probabilities [batch, heads, query, key].
  auto probs = std::make_shared<std::vector<double>>(batch * num_heads * seq_len * seq_len, 0.0);

  Tensor out({batch * seq_len, hidden});
  const double* x = X.data().data();
  std::vector<double> scores(seq_len);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* mrow = mask->data() + b * seq_len;
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t qoff = h * head_dim, koff = hidden + h * head_dim,
                        voff = 2 * hidden + h * head_dim;
      for (std::size_t t = 0; t < seq_len; ++t) {
        const double* q = x + (b * seq_len + t) * width + qoff;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u < seq_len; ++u) {
          if (!mrow[u]) continue;
          const double* k = x + (b * seq_len + u) * width + koff;
          double s = 0.0;
          for (std::size_t d = 0; d < head_dim; ++d) s += q[d] * k[d];
          scores[u] = s * scale;
          mx = std::max(mx, scores[u]);
        }
        double* p = probs->data() + ((b * num_heads + h) * seq_len + t) * seq_len;
        double total = 0.0;
        for (std::size_t u = 0; u < seq_len; ++u) {
          if (!mrow[u]) continue;
          p[u] = std::exp(scores[u] - mx);
          total += p[u];
        }
        double* o = out.data().data() + (b * seq_len + t) * hidden + h * head_dim;
        for (std::size_t u = 0; u < seq_len; ++u) {
          if (!mrow[u]) continue;
          p[u] /= total;
          const double* v = x + (b * seq_len + u) * width + voff;
          for (std::size_t d = 0; d < head_dim; ++d) o[d] += p[u] * v[d];
        }
      }
    }
  }

  const std::size_t ix = qkv.id();
  return g.record("self_attention", std::move(out), {qkv}, [=](Graph& g, std::size_t self) {
    Tensor* dX = g.accum(ix);
    if (!dX) return;
    const Tensor& dy = g.out_grad(self);
    const double* xv = g.node_value(ix).data().data();
    double* dx = dX->data().data();
    std::vector<double> dp(seq_len);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::uint8_t* mrow = mask->data() + b * seq_len;
      for (std::size_t h = 0; h < num_heads; ++h) {
        const std::size_t qoff = h * head_dim, koff = hidden + h * head_dim,
                          voff = 2 * hidden + h * head_dim;
        for (std::size_t t = 0; t < seq_len; ++t) {
          const double* p = probs->data() + ((b * num_heads + h) * seq_len + t) * seq_len;
          const double* dout = dy.data().data() + (b * seq_len + t) * hidden + h * head_dim;
          double dot = 0.0;
          for (std::size_t u = 0; u < seq_len; ++u) {
            if (!mrow[u]) continue;
            const double* v = xv + (b * seq_len + u) * width + voff;
            double* dv = dx + (b * seq_len + u) * width + voff;
            double s = 0.0;
            for (std::size_t d = 0; d < head_dim; ++d) {
              s += dout[d] * v[d];
              dv[d] += p[u] * dout[d];
            }
            dp[u] = s;
            dot += p[u] * s;
          }
          const double* q = xv + (b * seq_len + t) * width + qoff;
          double* dq = dx + (b * seq_len + t) * width + qoff;
          for (std::size_t u = 0; u < seq_len; ++u) {
            if (!mrow[u]) continue;
            const double ds = p[u] * (dp[u] - dot) * scale;
            const double* k = xv + (b * seq_len + u) * width + koff;
            double* dk = dx + (b * seq_len + u) * width + koff;
            for (std::size_t d = 0; d < head_dim; ++d) {
              dq[d] += ds * k[d];
              dk[d] += ds * q[d];
            }
          }
        }
      }
    }
  });
}

Var pick(Var x, std::span<const std::size_t> index) {
  Graph& g = graph_of("pick", x);
  const Tensor& X = x.value();
  require_matrix("pick", X);
  if (index.size() != X.dim(0)) {
    shape_error("pick", {&X}, std::to_string(index.size()) + " indices");
  }
  const std::size_t cols = X.dim(1);
  Tensor out({index.size()});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= cols) {
      shape_error("pick", {&X}, "index " + std::to_string(index[r]) + " out of range");
    }
    out[r] = X.at(r, index[r]);
  }
  auto idx = std::make_shared<const std::vector<std::size_t>>(index.begin(), index.end());
  const std::size_t ix = x.id();
  return g.record("pick", std::move(out), {x}, [=](Graph& g, std::size_t self) {
    Tensor* dx = g.accum(ix);
    if (!dx) return;
    const Tensor& dy = g.out_grad(self);
    for (std::size_t r = 0; r < idx->size(); ++r) dx->at(r, (*idx)[r]) += dy[r];
  });
}

Var sum(Var x) {
  Graph& g = graph_of("sum", x);
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const std::size_t ix = x.id();
  return g.record("sum", Tensor::scalar(total), {x}, [=](Graph& g, std::size_t self) {
    Tensor* dx = g.accum(ix);
    if (!dx) return;
    const double d = g.out_grad(self)[0];
    for (auto& v : dx->data()) v += d;
  });
}

Var mean(Var x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

}  // namespace ops

}  // namespace xlft
