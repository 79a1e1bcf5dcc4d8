#pragma once

// Tape-based reverse-mode differentiation over the ops in ops.hpp.
//
// A Graph records every op as it is evaluated (so the tape is already in
// topological order) and walks it backwards once from a scalar loss.
// Gradients for trainable tensors are accumulated into their Parameter.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualscope/ops.hpp"
#include "dualscope/tensor.hpp"

namespace dualscope {

/// A trainable tensor plus its gradient and Adam moment estimates.
template <typename T>
struct Parameter {
  std::string name;
  BasicTensor4<T> value;
  BasicTensor4<T> gradient;
  BasicTensor4<T> adam_m;
  BasicTensor4<T> adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string param_name, BasicTensor4<T> initial)
      : name(std::move(param_name)),
        value(std::move(initial)),
        gradient(value.shape()),
        adam_m(value.shape()),
        adam_v(value.shape()) {}

  void zero_grad() { gradient.fill(T{0}); }
  [[nodiscard]] std::size_t size() const noexcept { return value.size(); }
};

/// Per-class multipliers for the categorical cross-entropy.
struct LossConfig {
  std::vector<double> class_weights;

  static LossConfig uniform(std::size_t classes) { return LossConfig{std::vector<double>(classes, 1.0)}; }
  /// Throws std::invalid_argument unless every weight is positive and finite.
  void validate(std::size_t classes) const;
};

/// Mean over the batch of w[y] * -log softmax(logits)[y], evaluated with
/// log-sum-exp in double precision. `logits` is [n,1,1,C].
template <typename T>
double cce_loss_value(const BasicTensor4<T>& logits, std::span<const int> labels, const LossConfig& config);

template <typename T>
class Graph {
 public:
  using Tensor = BasicTensor4<T>;

  /// Handle to a node of this graph. Default-constructed handles are "none".
  struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
    [[nodiscard]] bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Constant leaf; no gradient flows into it.
  Var input(Tensor value);
  /// Trainable leaf. The parameter must outlive the graph.
  Var param(Parameter<T>& p);

  Var conv2d(Var x, Var weights, Var bias, const ConvSpec& spec);
  Var depthwise_conv2d(Var x, Var weights, const ConvSpec& spec);
  Var pointwise_conv2d(Var x, Var weights, Var bias);
  Var separable_conv(Var x, Var depthwise_weights, Var pointwise_weights, Var bias, const ConvSpec& spec);
  Var relu(Var x);
  Var max_pool2d(Var x, std::size_t window, std::size_t stride);
  Var global_avg_pool(Var x);
  Var dense(Var x, Var weights, Var bias);
  Var softmax(Var x);
  Var concat_channels(Var a, Var b);
  Var add(Var a, Var b);
  Var pad_same(Var x, std::size_t f);
  /// Multiplies by a constant; handy for loss scaling.
  Var scale(Var x, double factor);
  /// Scalar [1,1,1,1] weighted categorical cross-entropy of logits [n,1,1,C].
  Var cce_loss(Var logits, std::span<const int> labels, const LossConfig& config);

  [[nodiscard]] const Tensor& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. v; zero-filled if v did
  /// not receive any.
  [[nodiscard]] Tensor grad(Var v) const;
  [[nodiscard]] std::string_view op_name(Var v) const;
  [[nodiscard]] const std::vector<std::size_t>& parents(Var v) const;
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every node and adds parameter gradients
  /// into Parameter::gradient. `loss` must be a single-element node.
  /// Throws std::logic_error if no forward pass was recorded or the graph
  /// has already been differentiated.
  void backward(Var loss);

 private:
  struct Node {
    std::string_view op;
    std::vector<std::size_t> parents;
    Tensor value;
    Tensor grad;  // empty until something flows in
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::function<void(Graph&, std::size_t)> backward_fn;
  };

  Var push(std::string_view op, std::vector<std::size_t> parents, Tensor value,
           std::function<void(Graph&, std::size_t)> backward_fn);
  const Node& node(Var v) const;
  bool needs_grad(Var v) const { return v.valid() && nodes_[v.id].requires_grad; }
  void flow(std::size_t target, Tensor g);
  void flow(std::size_t target, const std::vector<T>& g);

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

extern template struct Parameter<float>;
extern template struct Parameter<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace dualscope
