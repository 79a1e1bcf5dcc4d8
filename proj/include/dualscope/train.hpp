#pragma once

// Mini-batch training of a gland classifier on per-lobe labels, and
// batched inference.
//
// A batch of B patients contributes 2B lobe images. With shared weights
// they go through the one classifier together and the loss is the mean
// weighted cross-entropy over all 2B lobes; with separate models the loss
// is the mean of the left and right model losses.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dualscope/autodiff.hpp"
#include "dualscope/data.hpp"
#include "dualscope/labels.hpp"
#include "dualscope/model.hpp"
#include "dualscope/optim.hpp"

namespace dualscope {

enum class ClassWeightMode { Uniform, InverseFrequency };

/// "uniform" / "inverse_frequency"; throws std::invalid_argument.
ClassWeightMode parse_class_weight_mode(std::string_view text);
std::string_view name(ClassWeightMode mode) noexcept;

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;  // batch order
  double warm_lr = 1e-2;
  double fixed_lr = 1e-5;
  std::size_t decay_epochs = 10;
  ClassWeightMode class_weights = ClassWeightMode::InverseFrequency;
  AdamConfig adam;

  /// Throws std::invalid_argument.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Lobe-class weights from the left and right labels of `samples`.
/// Inverse frequency is scaled to mean 1 over the classes that occur;
/// classes that never occur get weight 1.
LossConfig lobe_class_weights(std::span<const LobeSample> samples, ClassWeightMode mode);

struct EpochStats {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains in place. Bit-reproducible for a given model, data and config.
std::vector<EpochStats> train(GlandClassifier<float>& model, std::span<const LobeSample> samples,
                              const TrainConfig& config, const EpochCallback& on_epoch = {});

struct GlandPrediction {
  LobeClass left = LobeClass::Normal;
  LobeClass right = LobeClass::Normal;
  GlandClass gland = GlandClass::Normal;  // argmax of the fused distribution
  GlandProbs probs{};
};

std::vector<GlandPrediction> predict(const GlandClassifier<float>& model, std::span<const LobeSample> samples,
                                     std::size_t batch_size = 16);

/// Fraction of samples whose predicted gland class equals the label.
double gland_accuracy(std::span<const LobeSample> samples, std::span<const GlandPrediction> predictions);

}  // namespace dualscope
