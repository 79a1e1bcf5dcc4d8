#pragma once

// Single- and dual-channel lobe classifiers and the whole-gland forward pass.
//
// Layout of a lobe classifier with entry kernels {k1, k2}:
//
//   image [n,S,S,1]
//     ├─ conv k1 (Same) → ReLU → maxpool 2/2 ─┐
//     └─ conv k2 (Same) → ReLU → maxpool 2/2 ─┴─ concat → M = 2 * stem channels
//   middle block × B:  x + sep3x3(ReLU(sep3x3(x))) → ReLU
//   exit:              sep3x3 (M → 2M) → ReLU → global avg pool → dense 6
//
// A single-kernel config has one stem and no concat.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualscope/autodiff.hpp"
#include "dualscope/labels.hpp"
#include "dualscope/tensor.hpp"

namespace dualscope {

struct ModelConfig {
  std::size_t image_size = 64;
  std::vector<std::size_t> entry_kernels{1, 7};
  std::size_t stem_channels = 16;
  std::size_t middle_blocks = 4;
  std::size_t num_lobe_classes = kLobeClassCount;
  bool share_lobe_weights = true;
  bool mirror_right = false;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  [[nodiscard]] bool dual_channel() const noexcept { return entry_kernels.size() == 2; }
  [[nodiscard]] std::size_t merged_channels() const noexcept { return stem_channels * entry_kernels.size(); }

  /// "1 & 7" for two kernels, "7 × 7" for one.
  [[nodiscard]] std::string kernel_label() const;

  [[nodiscard]] std::string to_toml() const;
  static ModelConfig from_toml(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
class LobeClassifier {
 public:
  using Tensor = BasicTensor4<T>;
  using Var = typename Graph<T>::Var;

  /// Deterministic fan-in scaled uniform initialisation from `seed` (He
  /// gain for ReLU-fed layers, reduced gain for the depthwise stage, residual
  /// branch output and head); biases start at 0.
  static LobeClassifier build(const ModelConfig& config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }

  /// Records the forward pass in `g` and returns logits [n,1,1,6].
  Var logits(Graph<T>& g, Var images);

  /// Inference without recording gradients.
  [[nodiscard]] Tensor forward_logits(const Tensor& images) const;
  /// Softmax probabilities [n,1,1,6].
  [[nodiscard]] Tensor forward_lobe(const Tensor& images) const;

  [[nodiscard]] std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  [[nodiscard]] const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  [[nodiscard]] std::vector<Parameter<T>*> parameter_ptrs();
  [[nodiscard]] std::vector<const Parameter<T>*> parameter_ptrs() const;
  /// Total number of scalar weights.
  [[nodiscard]] std::size_t parameter_count() const noexcept;

  Parameter<T>& parameter(const std::string& name);
  void zero_grad();

 private:
  struct Stem {
    std::size_t kernel;
    std::size_t weights;  // indices into params_
    std::size_t bias;
  };
  struct Separable {
    std::size_t depthwise;
    std::size_t pointwise;
    std::size_t bias;
  };
  struct Block {
    Separable first;
    Separable second;
  };

  void check_input(const Shape4& s) const;

  ModelConfig config_;
  std::vector<Parameter<T>> params_;
  std::vector<Stem> stems_;
  std::vector<Block> blocks_;
  Separable exit_{};
  std::size_t head_weights_ = 0;
  std::size_t head_bias_ = 0;
};

/// One classifier shared by both lobes, or one per lobe.
template <typename T>
class GlandClassifier {
 public:
  static GlandClassifier build(const ModelConfig& config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const noexcept { return left_.config(); }
  [[nodiscard]] LobeClassifier<T>& left() noexcept { return left_; }
  [[nodiscard]] LobeClassifier<T>& right() noexcept { return right_ ? *right_ : left_; }
  [[nodiscard]] const LobeClassifier<T>& left() const noexcept { return left_; }
  [[nodiscard]] const LobeClassifier<T>& right() const noexcept { return right_ ? *right_ : left_; }

  /// Every distinct parameter, left model first.
  [[nodiscard]] std::vector<Parameter<T>*> parameter_ptrs();
  [[nodiscard]] std::vector<const Parameter<T>*> parameter_ptrs() const;

  /// [n,1,1,16] gland class probabilities.
  [[nodiscard]] BasicTensor4<T> forward_gland(const BasicTensor4<T>& left_images,
                                              const BasicTensor4<T>& right_images) const;

 private:
  GlandClassifier(LobeClassifier<T> left, std::optional<LobeClassifier<T>> right)
      : left_(std::move(left)), right_(std::move(right)) {}

  LobeClassifier<T> left_;
  std::optional<LobeClassifier<T>> right_;
};

/// Fuses per-lobe probabilities of two classifiers into gland probabilities.
/// When the config shares lobe weights, `left_model` and `right_model` must
/// be the same object. Right images are mirrored first if configured.
template <typename T>
BasicTensor4<T> forward_gland(const LobeClassifier<T>& left_model, const LobeClassifier<T>& right_model,
                              const BasicTensor4<T>& left_images, const BasicTensor4<T>& right_images);

/// Row-wise fuse_probs over two [n,1,1,6] probability tensors.
template <typename T>
BasicTensor4<T> fuse_prob_tensors(const BasicTensor4<T>& left_probs, const BasicTensor4<T>& right_probs);

extern template class LobeClassifier<float>;
extern template class LobeClassifier<double>;
extern template class GlandClassifier<float>;
extern template class GlandClassifier<double>;

}  // namespace dualscope
