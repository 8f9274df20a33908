#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlft/params.hpp"
#include "xlft/tensor.hpp"

namespace xlft {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of forward operations for reverse-mode differentiation.
//
// Nodes are appended in execution order, so the tape is already a
// topological order and backward() walks it in reverse. Parameter leaves are
// bound by name to a ParamSet; backward() writes d(root)/d(param) into the
// grad slot of every trainable entry and clears the grad of frozen ones.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  // backward() writes gradients into `params`.
  explicit Graph(ParamSet* params) : source_(params), sink_(params) {}
  // Read-only binding for inference; backward() leaves `params` untouched.
  explicit Graph(const ParamSet& params) : source_(&params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to params[name]; repeated calls return the same node.
  Var param(std::string_view name);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  // Gradient accumulated at a node by the last backward(); null if unreached.
  const Tensor* grad(Var v) const;

  void backward(Var root);

  std::size_t node_count() const noexcept { return nodes_.size(); }

  // ---- op-implementation interface ----
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& node_value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }
  // Gradient accumulator of an input node, zero-initialised on first use.
  // Returns null when the node does not require a gradient.
  Tensor* accum(std::size_t id);

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::ptrdiff_t param_index = -1;
  };

  void check_owned(Var v, std::string_view op) const;

  const ParamSet* source_ = nullptr;
  ParamSet* sink_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::ptrdiff_t> param_nodes_;  // ParamSet index -> node id or -1
};

// Differentiable operations. Shape errors name the operation and shapes.
namespace ops {

// [M,K] x [K,N] -> [M,N]
Var matmul(Var a, Var b);
// Elementwise sum of equal shapes.
Var add(Var a, Var b);
// x[N,H] + bias[H] broadcast over rows.
Var add_bias(Var x, Var bias);
// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var relu(Var x);
Var tanh(Var x);
// Softmax / log-softmax over the last axis, max-subtracted.
Var softmax(Var x);
Var log_softmax(Var x);
// [B*T, H] -> [B, H]: mean over consecutive groups of `group` rows.
Var mean_pool(Var x, std::size_t group);
// Row gather; used for embedding lookup. table [V,H] -> [n,H].
Var gather_rows(Var table, std::vector<std::size_t> rows);
// Stack matrices with equal column counts.
Var concat_rows(std::span<const Var> parts);
// Normalise each row, then scale by gain[H] and shift by bias[H].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Multi-head scaled dot-product self-attention over a packed [B*T, 3H]
// projection laid out as (queries | keys | values). key_mask[b*T+t] == 0 hides
// position t of example b from every query of that example.
Var self_attention(Var qkv, std::span<const std::uint8_t> key_mask, std::size_t batch,
                   std::size_t seq_len, std::size_t num_heads);
// out[b] = x[b, index[b]] for x of shape [B, C].
Var pick(Var x, std::span<const std::size_t> index);
Var sum(Var x);
Var mean(Var x);

}  // namespace ops

}  // namespace xlft
