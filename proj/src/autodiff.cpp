#include "dualscope/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualscope {

void LossConfig::validate(std::size_t classes) const {
  if (class_weights.size() != classes) {
    throw std::invalid_argument("loss config has " + std::to_string(class_weights.size()) +
                                " class weights for " + std::to_string(classes) + " classes");
  }
  for (const double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be positive and finite");
  }
}

namespace {

template <typename T>
void check_labels(const BasicTensor4<T>& logits, std::span<const int> labels, const LossConfig& config) {
  const Shape4& s = logits.shape();
  if (s.h != 1 || s.w != 1) throw ShapeError("cce_loss expects logits [n,1,1,C], got " + to_string(s));
  if (labels.size() != s.n) {
    throw ShapeError("cce_loss: " + std::to_string(labels.size()) + " labels for batch of " + std::to_string(s.n));
  }
  if (s.n == 0) throw ShapeError("cce_loss: empty batch");
  config.validate(s.c);
  for (const int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= s.c) {
      throw std::out_of_range("cce_loss: label " + std::to_string(y) + " outside [0, " + std::to_string(s.c) + ")");
    }
  }
}

// log(sum_j exp(x_j)) for one row, stabilised by the row max.
template <typename T>
double log_sum_exp(const T* x, std::size_t n) {
  const double mx = static_cast<double>(*std::max_element(x, x + n));
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += std::exp(static_cast<double>(x[j]) - mx);
  return mx + std::log(sum);
}

}  // namespace

template <typename T>
double cce_loss_value(const BasicTensor4<T>& logits, std::span<const int> labels, const LossConfig& config) {
  check_labels(logits, labels, config);
  const std::size_t n = logits.shape().n;
  const std::size_t c = logits.shape().c;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * c;
    const auto y = static_cast<std::size_t>(labels[i]);
    total += config.class_weights[y] * (log_sum_exp(row, c) - static_cast<double>(row[y]));
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

template <typename T>
auto Graph<T>::push(std::string_view op, std::vector<std::size_t> parents, Tensor value,
                    std::function<void(Graph&, std::size_t)> backward_fn) -> Var {
  if (differentiated_) throw std::logic_error("graph was already differentiated; build a new one");
  Node n;
  n.op = op;
  for (const std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  n.value = std::move(value);
  n.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
auto Graph<T>::node(Var v) const -> const Node& {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("variable does not belong to this graph");
  return nodes_[v.id];
}

template <typename T>
void Graph<T>::flow(std::size_t target, Tensor g) {
  Node& n = nodes_[target];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
  } else {
    ops::accumulate(n.grad, g);
  }
}

template <typename T>
void Graph<T>::flow(std::size_t target, const std::vector<T>& g) {
  Node& n = nodes_[target];
  if (!n.requires_grad) return;
  flow(target, Tensor(n.value.shape(), g));
}

template <typename T>
auto Graph<T>::input(Tensor value) -> Var {
  return push("input", {}, std::move(value), nullptr);
}

template <typename T>
auto Graph<T>::param(Parameter<T>& p) -> Var {
  Var v = push("param", {}, p.value, nullptr);
  nodes_[v.id].requires_grad = true;
  nodes_[v.id].param = &p;
  return v;
}

template <typename T>
auto Graph<T>::conv2d(Var x, Var weights, Var bias, const ConvSpec& spec) -> Var {
  const Tensor& b = bias.valid() ? node(bias).value : Tensor{};
  Tensor out = ops::conv2d(node(x).value, node(weights).value, b.data(), spec);
  std::vector<std::size_t> parents{x.id, weights.id};
  if (bias.valid()) parents.push_back(bias.id);
  return push("conv2d", std::move(parents), std::move(out), [spec](Graph& g, std::size_t id) {
    const auto parents = g.nodes_[id].parents;
    const bool has_bias = parents.size() == 3;
    auto grads = ops::conv2d_backward(g.nodes_[parents[0]].value, g.nodes_[parents[1]].value, has_bias, spec,
                                      g.nodes_[id].grad, g.nodes_[parents[0]].requires_grad);
    if (!grads.input.empty()) g.flow(parents[0], std::move(grads.input));
    g.flow(parents[1], std::move(grads.weights));
    if (has_bias) g.flow(parents[2], grads.bias);
  });
}

template <typename T>
auto Graph<T>::depthwise_conv2d(Var x, Var weights, const ConvSpec& spec) -> Var {
  Tensor out = ops::depthwise_conv2d(node(x).value, node(weights).value, spec);
  return push("depthwise_conv2d", {x.id, weights.id}, std::move(out), [spec](Graph& g, std::size_t id) {
    const auto parents = g.nodes_[id].parents;
    auto grads = ops::depthwise_conv2d_backward(g.nodes_[parents[0]].value, g.nodes_[parents[1]].value, spec,
                                                g.nodes_[id].grad, g.nodes_[parents[0]].requires_grad);
    if (!grads.input.empty()) g.flow(parents[0], std::move(grads.input));
    g.flow(parents[1], std::move(grads.weights));
  });
}

template <typename T>
auto Graph<T>::pointwise_conv2d(Var x, Var weights, Var bias) -> Var {
  const Shape4& ws = node(weights).value.shape();
  if (ws.n != 1 || ws.h != 1) throw ShapeError("pointwise_conv2d: weights " + to_string(ws) + " must be [1,1,c_in,c_out]");
  return conv2d(x, weights, bias, ConvSpec{1, 1, Padding::Valid});
}

template <typename T>
auto Graph<T>::separable_conv(Var x, Var depthwise_weights, Var pointwise_weights, Var bias, const ConvSpec& spec)
    -> Var {
  return pointwise_conv2d(depthwise_conv2d(x, depthwise_weights, spec), pointwise_weights, bias);
}

template <typename T>
auto Graph<T>::relu(Var x) -> Var {
  return push("relu", {x.id}, ops::relu(node(x).value), [](Graph& g, std::size_t id) {
    const std::size_t p = g.nodes_[id].parents[0];
    g.flow(p, ops::relu_backward(g.nodes_[p].value, g.nodes_[id].grad));
  });
}

template <typename T>
auto Graph<T>::max_pool2d(Var x, std::size_t window, std::size_t stride) -> Var {
  std::vector<std::size_t> argmax;
  Tensor out = ops::max_pool2d(node(x).value, window, stride, &argmax);
  return push("max_pool2d", {x.id}, std::move(out), [argmax = std::move(argmax)](Graph& g, std::size_t id) {
    const std::size_t p = g.nodes_[id].parents[0];
    g.flow(p, ops::max_pool2d_backward<T>(g.nodes_[p].value.shape(), argmax, g.nodes_[id].grad));
  });
}

template <typename T>
auto Graph<T>::global_avg_pool(Var x) -> Var {
  return push("global_avg_pool", {x.id}, ops::global_avg_pool(node(x).value), [](Graph& g, std::size_t id) {
    const std::size_t p = g.nodes_[id].parents[0];
    g.flow(p, ops::global_avg_pool_backward<T>(g.nodes_[p].value.shape(), g.nodes_[id].grad));
  });
}

template <typename T>
auto Graph<T>::dense(Var x, Var weights, Var bias) -> Var {
  const Tensor& b = bias.valid() ? node(bias).value : Tensor{};
  Tensor out = ops::dense(node(x).value, node(weights).value, b.data());
  std::vector<std::size_t> parents{x.id, weights.id};
  if (bias.valid()) parents.push_back(bias.id);
  return push("dense", std::move(parents), std::move(out), [](Graph& g, std::size_t id) {
    const auto parents = g.nodes_[id].parents;
    const bool has_bias = parents.size() == 3;
    auto grads = ops::dense_backward(g.nodes_[parents[0]].value, g.nodes_[parents[1]].value, has_bias,
                                     g.nodes_[id].grad, g.nodes_[parents[0]].requires_grad);
    if (!grads.input.empty()) g.flow(parents[0], std::move(grads.input));
    g.flow(parents[1], std::move(grads.weights));
    if (has_bias) g.flow(parents[2], grads.bias);
  });
}

template <typename T>
auto Graph<T>::softmax(Var x) -> Var {
  return push("softmax", {x.id}, ops::softmax(node(x).value), [](Graph& g, std::size_t id) {
    const std::size_t p = g.nodes_[id].parents[0];
    g.flow(p, ops::softmax_backward(g.nodes_[id].value, g.nodes_[id].grad));
  });
}

template <typename T>
auto Graph<T>::concat_channels(Var a, Var b) -> Var {
  const std::size_t ca = node(a).value.shape().c;
  Tensor out = ops::concat_channels(node(a).value, node(b).value);
  return push("concat_channels", {a.id, b.id}, std::move(out), [ca](Graph& g, std::size_t id) {
    const auto parents = g.nodes_[id].parents;
    auto [ga, gb] = ops::concat_channels_backward(ca, g.nodes_[id].grad);
    g.flow(parents[0], std::move(ga));
    g.flow(parents[1], std::move(gb));
  });
}

template <typename T>
auto Graph<T>::add(Var a, Var b) -> Var {
  Tensor out = ops::add(node(a).value, node(b).value);
  return push("add", {a.id, b.id}, std::move(out), [](Graph& g, std::size_t id) {
    const auto parents = g.nodes_[id].parents;
    g.flow(parents[0], g.nodes_[id].grad);
    g.flow(parents[1], g.nodes_[id].grad);
  });
}

template <typename T>
auto Graph<T>::pad_same(Var x, std::size_t f) -> Var {
  return push("pad_same", {x.id}, ops::pad_same(node(x).value, f), [f](Graph& g, std::size_t id) {
    const std::size_t p = g.nodes_[id].parents[0];
    g.flow(p, ops::pad_same_backward<T>(g.nodes_[p].value.shape(), f, g.nodes_[id].grad));
  });
}

template <typename T>
auto Graph<T>::scale(Var x, double factor) -> Var {
  Tensor out = node(x).value;
  for (T& v : out.data()) v = static_cast<T>(static_cast<double>(v) * factor);
  return push("scale", {x.id}, std::move(out), [factor](Graph& g, std::size_t id) {
    Tensor gin = g.nodes_[id].grad;
    for (T& v : gin.data()) v = static_cast<T>(static_cast<double>(v) * factor);
    g.flow(g.nodes_[id].parents[0], std::move(gin));
  });
}

template <typename T>
auto Graph<T>::cce_loss(Var logits, std::span<const int> labels, const LossConfig& config) -> Var {
  const Tensor& z = node(logits).value;
  const double loss = cce_loss_value(z, labels, config);
  std::vector<int> ys(labels.begin(), labels.end());
  std::vector<double> weights = config.class_weights;
  return push("cce_loss", {logits.id}, Tensor(Shape4{1, 1, 1, 1}, static_cast<T>(loss)),
              [ys = std::move(ys), weights = std::move(weights)](Graph& g, std::size_t id) {
                const std::size_t p = g.nodes_[id].parents[0];
                const Tensor& z = g.nodes_[p].value;
                const std::size_t n = z.shape().n;
                const std::size_t c = z.shape().c;
                const double upstream = static_cast<double>(g.nodes_[id].grad[0]);
                Tensor gz(z.shape());
                for (std::size_t i = 0; i < n; ++i) {
                  const T* row = z.ptr() + i * c;
                  const double lse = log_sum_exp(row, c);
                  const auto y = static_cast<std::size_t>(ys[i]);
                  const double coeff = upstream * weights[y] / static_cast<double>(n);
                  for (std::size_t j = 0; j < c; ++j) {
                    const double prob = std::exp(static_cast<double>(row[j]) - lse);
                    gz[i * c + j] = static_cast<T>(coeff * (prob - (j == y ? 1.0 : 0.0)));
                  }
                }
                g.flow(p, std::move(gz));
              });
}

template <typename T>
auto Graph<T>::value(Var v) const -> const Tensor& {
  return node(v).value;
}

template <typename T>
auto Graph<T>::grad(Var v) const -> Tensor {
  const Node& n = node(v);
  return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
}

template <typename T>
std::string_view Graph<T>::op_name(Var v) const {
  return node(v).op;
}

template <typename T>
const std::vector<std::size_t>& Graph<T>::parents(Var v) const {
  return node(v).parents;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (nodes_.empty()) throw std::logic_error("backward called before any forward pass was recorded");
  if (differentiated_) throw std::logic_error("backward already ran on this graph");
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::logic_error("backward target must be a scalar, got " + to_string(root.value.shape()));
  }
  differentiated_ = true;
  if (!root.requires_grad) return;
  nodes_[loss.id].grad = Tensor(root.value.shape(), T{1});
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.param != nullptr) {
      ops::accumulate(n.param->gradient, n.grad);
    } else if (n.backward_fn) {
      n.backward_fn(*this, id);
    }
  }
}

template struct Parameter<float>;
template struct Parameter<double>;
template class Graph<float>;
template class Graph<double>;
template double cce_loss_value(const Tensor4&, std::span<const int>, const LossConfig&);
template double cce_loss_value(const Tensor4d&, std::span<const int>, const LossConfig&);

}  // namespace dualscope
