#include "dualscope/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dualscope/ops.hpp"
#include "toml_io.hpp"

namespace dualscope {

void ModelConfig::validate() const {
  if (entry_kernels.empty() || entry_kernels.size() > 2) {
    throw std::invalid_argument("entry_kernels must list one or two kernel sizes");
  }
  for (const std::size_t k : entry_kernels) {
    if (k == 9) throw std::invalid_argument("9x9 entry kernels are not supported");
    if (k != 1 && k != 3 && k != 5 && k != 7) {
      throw std::invalid_argument("entry kernel " + std::to_string(k) + " is not one of 1, 3, 5, 7");
    }
  }
  if (entry_kernels.size() == 2 && !(entry_kernels[0] < entry_kernels[1])) {
    throw std::invalid_argument("dual-channel entry kernels must be listed smaller first");
  }
  if (image_size < 4) throw std::invalid_argument("image_size must be at least 4");
  if (stem_channels == 0) throw std::invalid_argument("stem_channels must be positive");
  if (num_lobe_classes != kLobeClassCount) throw std::invalid_argument("num_lobe_classes is fixed at 6");
}

std::string ModelConfig::kernel_label() const {
  if (entry_kernels.size() == 2) {
    return std::to_string(entry_kernels[0]) + " & " + std::to_string(entry_kernels[1]);
  }
  const std::string k = entry_kernels.empty() ? "?" : std::to_string(entry_kernels[0]);
  return k + " × " + k;
}

std::string ModelConfig::to_toml() const {
  std::ostringstream os;
  os << "[model]\n";
  os << "image_size = " << image_size << "\n";
  os << "entry_kernels = [";
  for (std::size_t i = 0; i < entry_kernels.size(); ++i) os << (i ? ", " : "") << entry_kernels[i];
  os << "]\n";
  os << "stem_channels = " << stem_channels << "\n";
  os << "middle_blocks = " << middle_blocks << "\n";
  os << "num_lobe_classes = " << num_lobe_classes << "\n";
  os << "share_lobe_weights = " << (share_lobe_weights ? "true" : "false") << "\n";
  os << "mirror_right = " << (mirror_right ? "true" : "false") << "\n";
  return os.str();
}

ModelConfig detail::model_config_from_table(const TomlTable& t) {
  ModelConfig c;
  c.image_size = static_cast<std::size_t>(detail::toml_int(t, "model.image_size", static_cast<long long>(c.image_size)));
  c.entry_kernels.clear();
  for (const long long k : detail::toml_int_list(t, "model.entry_kernels", {1, 7})) {
    c.entry_kernels.push_back(static_cast<std::size_t>(k));
  }
  c.stem_channels =
      static_cast<std::size_t>(detail::toml_int(t, "model.stem_channels", static_cast<long long>(c.stem_channels)));
  c.middle_blocks =
      static_cast<std::size_t>(detail::toml_int(t, "model.middle_blocks", static_cast<long long>(c.middle_blocks)));
  c.num_lobe_classes = static_cast<std::size_t>(
      detail::toml_int(t, "model.num_lobe_classes", static_cast<long long>(c.num_lobe_classes)));
  c.share_lobe_weights = detail::toml_bool(t, "model.share_lobe_weights", c.share_lobe_weights);
  c.mirror_right = detail::toml_bool(t, "model.mirror_right", c.mirror_right);
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_toml(const std::string& text) { return detail::model_config_from_table(detail::parse_toml(text)); }

namespace {

// Without normalisation layers plain He scaling compounds: the depthwise
// stage is linear (no ReLU before the pointwise), and every residual add
// grows the variance, so the untrained softmax saturates. The depthwise
// filters use gain 1 and the last pointwise of each residual branch 1/2.
// The head starts tiny (gain 0.02) so the first predictions sit near
// uniform whatever the image; Adam grows it within a few steps.
constexpr double kDepthwiseGain = 1.0;
constexpr double kResidualGain = 0.5;
constexpr double kHeadGain = 0.02;

// Uniform in [-limit, limit) from the top 53 bits of the generator, with
// limit = sqrt(3 * gain / fan_in). gain 2 is He-uniform.
class HeUniform {
 public:
  explicit HeUniform(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  BasicTensor4<T> draw(Shape4 shape, std::size_t fan_in, double gain = 2.0) {
    const double limit = std::sqrt(3.0 * gain / static_cast<double>(fan_in));
    BasicTensor4<T> t(shape);
    for (T& v : t.data()) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      v = static_cast<T>((2.0 * u - 1.0) * limit);
    }
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

template <typename T>
LobeClassifier<T> LobeClassifier<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  LobeClassifier m;
  m.config_ = config;
  HeUniform init(seed);
  auto& P = m.params_;
  // Reserve up front so Parameter addresses stay fixed for graph references.
  P.reserve(2 * config.entry_kernels.size() + 6 * config.middle_blocks + 5);

  auto add = [&P](std::string name, BasicTensor4<T> value) {
    P.emplace_back(std::move(name), std::move(value));
    return P.size() - 1;
  };
  auto add_bias = [&add](const std::string& name, std::size_t channels) {
    return add(name, BasicTensor4<T>(Shape4{1, 1, 1, channels}));
  };
  auto add_separable = [&](const std::string& prefix, std::size_t c_in, std::size_t c_out, double pw_gain) {
    Separable s{};
    s.depthwise = add(prefix + ".dw", init.template draw<T>(Shape4{3, 3, c_in, 1}, 9, kDepthwiseGain));
    s.pointwise = add(prefix + ".pw", init.template draw<T>(Shape4{1, 1, c_in, c_out}, c_in, pw_gain));
    s.bias = add_bias(prefix + ".b", c_out);
    return s;
  };

  const std::size_t S = config.stem_channels;
  for (std::size_t e = 0; e < config.entry_kernels.size(); ++e) {
    const std::size_t k = config.entry_kernels[e];
    const std::string prefix = "stem" + std::to_string(e) + "_k" + std::to_string(k);
    Stem st{k, 0, 0};
    st.weights = add(prefix + ".w", init.template draw<T>(Shape4{k, k, 1, S}, k * k));
    st.bias = add_bias(prefix + ".b", S);
    m.stems_.push_back(st);
  }
  const std::size_t M = config.merged_channels();
  for (std::size_t b = 0; b < config.middle_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    Block blk{};
    blk.first = add_separable(prefix + ".sep1", M, M, 2.0);
    blk.second = add_separable(prefix + ".sep2", M, M, kResidualGain);
    m.blocks_.push_back(blk);
  }
  m.exit_ = add_separable("exit", M, 2 * M, 2.0);
  m.head_weights_ = add("head.w", init.template draw<T>(Shape4{1, 1, 2 * M, config.num_lobe_classes}, 2 * M, kHeadGain));
  m.head_bias_ = add_bias("head.b", config.num_lobe_classes);
  return m;
}

template <typename T>
void LobeClassifier<T>::check_input(const Shape4& s) const {
  if (s.h != config_.image_size || s.w != config_.image_size || s.c != 1) {
    throw ShapeError("lobe classifier expects [n," + std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + ",1] images, got " + to_string(s));
  }
}

template <typename T>
auto LobeClassifier<T>::logits(Graph<T>& g, Var images) -> Var {
  check_input(g.value(images).shape());
  auto p = [&](std::size_t idx) { return g.param(params_[idx]); };
  const ConvSpec same3{3, 1, Padding::Same};

  Var merged;
  for (const Stem& st : stems_) {
    Var y = g.conv2d(images, p(st.weights), p(st.bias), ConvSpec{st.kernel, 1, Padding::Same});
    y = g.max_pool2d(g.relu(y), 2, 2);
    merged = merged.valid() ? g.concat_channels(merged, y) : y;
  }
  Var h = merged;
  for (const Block& blk : blocks_) {
    Var t = g.relu(g.separable_conv(h, p(blk.first.depthwise), p(blk.first.pointwise), p(blk.first.bias), same3));
    t = g.separable_conv(t, p(blk.second.depthwise), p(blk.second.pointwise), p(blk.second.bias), same3);
    h = g.relu(g.add(h, t));
  }
  Var e = g.relu(g.separable_conv(h, p(exit_.depthwise), p(exit_.pointwise), p(exit_.bias), same3));
  return g.dense(g.global_avg_pool(e), p(head_weights_), p(head_bias_));
}

template <typename T>
auto LobeClassifier<T>::forward_logits(const Tensor& images) const -> Tensor {
  check_input(images.shape());
  auto v = [&](std::size_t idx) -> const Tensor& { return params_[idx].value; };
  const ConvSpec same3{3, 1, Padding::Same};

  Tensor merged;
  for (const Stem& st : stems_) {
    Tensor y = ops::conv2d(images, v(st.weights), v(st.bias).data(), ConvSpec{st.kernel, 1, Padding::Same});
    y = ops::max_pool2d(ops::relu(y), 2, 2);
    merged = merged.empty() ? std::move(y) : ops::concat_channels(merged, y);
  }
  Tensor h = std::move(merged);
  for (const Block& blk : blocks_) {
    Tensor t = ops::relu(ops::separable_conv(h, v(blk.first.depthwise), v(blk.first.pointwise),
                                             v(blk.first.bias).data(), same3));
    t = ops::separable_conv(t, v(blk.second.depthwise), v(blk.second.pointwise), v(blk.second.bias).data(), same3);
    h = ops::relu(ops::add(h, t));
  }
  Tensor e = ops::relu(ops::separable_conv(h, v(exit_.depthwise), v(exit_.pointwise), v(exit_.bias).data(), same3));
  return ops::dense(ops::global_avg_pool(e), v(head_weights_), v(head_bias_).data());
}

template <typename T>
auto LobeClassifier<T>::forward_lobe(const Tensor& images) const -> Tensor {
  return ops::softmax(forward_logits(images));
}

template <typename T>
std::vector<Parameter<T>*> LobeClassifier<T>::parameter_ptrs() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> LobeClassifier<T>::parameter_ptrs() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t LobeClassifier<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
Parameter<T>& LobeClassifier<T>::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename T>
void LobeClassifier<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------

template <typename T>
GlandClassifier<T> GlandClassifier<T>::build(const ModelConfig& config, std::uint64_t seed) {
  GlandClassifier g(LobeClassifier<T>::build(config, seed), std::nullopt);
  if (!config.share_lobe_weights) {
    // Distinct stream for the right-lobe model.
    g.right_ = LobeClassifier<T>::build(config, seed ^ 0x9e3779b97f4a7c15ULL);
  }
  return g;
}

template <typename T>
std::vector<Parameter<T>*> GlandClassifier<T>::parameter_ptrs() {
  auto out = left_.parameter_ptrs();
  if (right_) {
    auto r = right_->parameter_ptrs();
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> GlandClassifier<T>::parameter_ptrs() const {
  auto out = left_.parameter_ptrs();
  if (right_) {
    auto r = right_->parameter_ptrs();
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

template <typename T>
BasicTensor4<T> GlandClassifier<T>::forward_gland(const BasicTensor4<T>& left_images,
                                                  const BasicTensor4<T>& right_images) const {
  return dualscope::forward_gland(left(), right(), left_images, right_images);
}

template <typename T>
BasicTensor4<T> fuse_prob_tensors(const BasicTensor4<T>& left_probs, const BasicTensor4<T>& right_probs) {
  const Shape4 expect{left_probs.shape().n, 1, 1, kLobeClassCount};
  if (left_probs.shape() != expect || right_probs.shape() != expect) {
    throw ShapeError("fuse_prob_tensors: expected two [n,1,1,6] tensors, got " + to_string(left_probs.shape()) +
                     " and " + to_string(right_probs.shape()));
  }
  BasicTensor4<T> out(Shape4{expect.n, 1, 1, kGlandClassCount});
  for (std::size_t i = 0; i < expect.n; ++i) {
    LobeProbs pl{};
    LobeProbs pr{};
    for (std::size_t c = 0; c < kLobeClassCount; ++c) {
      pl[c] = static_cast<double>(left_probs[i * kLobeClassCount + c]);
      pr[c] = static_cast<double>(right_probs[i * kLobeClassCount + c]);
    }
    const GlandProbs q = fuse_probs(pl, pr);
    for (std::size_t g = 0; g < kGlandClassCount; ++g) out[i * kGlandClassCount + g] = static_cast<T>(q[g]);
  }
  return out;
}

template <typename T>
BasicTensor4<T> forward_gland(const LobeClassifier<T>& left_model, const LobeClassifier<T>& right_model,
                              const BasicTensor4<T>& left_images, const BasicTensor4<T>& right_images) {
  if (left_model.config().share_lobe_weights && &left_model != &right_model) {
    throw std::invalid_argument("forward_gland: shared lobe weights require the same model for both lobes");
  }
  if (left_images.shape() != right_images.shape()) {
    throw ShapeError("forward_gland: left " + to_string(left_images.shape()) + " vs right " +
                     to_string(right_images.shape()));
  }
  const auto pl = left_model.forward_lobe(left_images);
  const auto pr = right_model.config().mirror_right ? right_model.forward_lobe(ops::mirror_horizontal(right_images))
                                                    : right_model.forward_lobe(right_images);
  return fuse_prob_tensors(pl, pr);
}

template class LobeClassifier<float>;
template class LobeClassifier<double>;
template class GlandClassifier<float>;
template class GlandClassifier<double>;
template Tensor4 fuse_prob_tensors(const Tensor4&, const Tensor4&);
template Tensor4d fuse_prob_tensors(const Tensor4d&, const Tensor4d&);
template Tensor4 forward_gland(const LobeClassifier<float>&, const LobeClassifier<float>&, const Tensor4&,
                               const Tensor4&);
template Tensor4d forward_gland(const LobeClassifier<double>&, const LobeClassifier<double>&, const Tensor4d&,
                                const Tensor4d&);

}  // namespace dualscope
