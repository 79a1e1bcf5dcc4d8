#include "dualscope/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rng.hpp"

namespace dualscope {
namespace {

Tensor4 stack_images(std::span<const LobeSample> samples, std::span<const std::size_t> idx, bool right, bool mirror) {
  std::vector<const Tensor4*> ptrs;
  std::vector<Tensor4> mirrored;
  mirrored.reserve(idx.size());
  for (const std::size_t i : idx) {
    const Tensor4& img = right ? samples[i].right_image : samples[i].left_image;
    if (mirror) {
      mirrored.push_back(ops::mirror_horizontal(img));
      ptrs.push_back(&mirrored.back());
    } else {
      ptrs.push_back(&img);
    }
  }
  return stack_batch(std::span<const Tensor4* const>(ptrs));
}

}  // namespace

ClassWeightMode parse_class_weight_mode(std::string_view text) {
  if (text == "uniform") return ClassWeightMode::Uniform;
  if (text == "inverse_frequency") return ClassWeightMode::InverseFrequency;
  throw std::invalid_argument("unknown class weight mode '" + std::string(text) +
                              "' (expected uniform or inverse_frequency)");
}

std::string_view name(ClassWeightMode mode) noexcept {
  return mode == ClassWeightMode::Uniform ? "uniform" : "inverse_frequency";
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (decay_epochs == 0) throw std::invalid_argument("decay_epochs must be >= 1");
  if (!(warm_lr > 0.0) || !(fixed_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw std::invalid_argument("Adam needs 0 <= beta < 1 and epsilon > 0");
  }
}

LossConfig lobe_class_weights(std::span<const LobeSample> samples, ClassWeightMode mode) {
  LossConfig cfg = LossConfig::uniform(kLobeClassCount);
  if (mode == ClassWeightMode::Uniform) return cfg;
  const LobeHistogram h = lobe_histogram(samples);
  std::array<double, kLobeClassCount> inv{};
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kLobeClassCount; ++c) {
    const std::size_t n = h.left[c] + h.right[c];
    if (n == 0) continue;
    inv[c] = 1.0 / static_cast<double>(n);
    sum += inv[c];
    ++present;
  }
  for (std::size_t c = 0; c < kLobeClassCount; ++c) {
    if (inv[c] > 0.0) cfg.class_weights[c] = inv[c] * static_cast<double>(present) / sum;
  }
  return cfg;
}

std::vector<EpochStats> train(GlandClassifier<float>& model, std::span<const LobeSample> samples,
                              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  const LossConfig loss_cfg = lobe_class_weights(samples, config.class_weights);
  const bool shared = model.config().share_lobe_weights;
  const bool mirror = model.config().mirror_right;
  auto params = model.parameter_ptrs();
  for (auto* p : params) p->zero_grad();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(detail::splitmix64(config.seed ^ 0x747261696eULL));

  std::vector<EpochStats> history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.warm_lr, config.fixed_lr, config.decay_epochs);
    detail::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      std::vector<int> left_labels;
      std::vector<int> right_labels;
      for (const std::size_t i : idx) {
        left_labels.push_back(static_cast<int>(code(samples[i].left_label)));
        right_labels.push_back(static_cast<int>(code(samples[i].right_label)));
      }
      Tensor4 left = stack_images(samples, idx, false, false);
      Tensor4 right = stack_images(samples, idx, true, mirror);

      Graph<float> g;
      Graph<float>::Var loss;
      if (shared) {
        const Tensor4* both[] = {&left, &right};
        std::vector<int> labels = left_labels;
        labels.insert(labels.end(), right_labels.begin(), right_labels.end());
        const auto x = g.input(stack_batch(std::span<const Tensor4* const>(both)));
        loss = g.cce_loss(model.left().logits(g, x), labels, loss_cfg);
      } else {
        const auto ll = g.cce_loss(model.left().logits(g, g.input(std::move(left))), left_labels, loss_cfg);
        const auto lr_ = g.cce_loss(model.right().logits(g, g.input(std::move(right))), right_labels, loss_cfg);
        loss = g.scale(g.add(ll, lr_), 0.5);
      }
      loss_sum += static_cast<double>(g.value(loss)[0]);
      ++batches;
      g.backward(loss);
      for (auto* p : params) {
        adam_step(*p, lr, config.adam);
        p->zero_grad();
      }
    }
    EpochStats stats{epoch, lr, loss_sum / static_cast<double>(batches)};
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

std::vector<GlandPrediction> predict(const GlandClassifier<float>& model, std::span<const LobeSample> samples,
                                     std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  const bool mirror = model.config().mirror_right;
  std::vector<GlandPrediction> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor4 pl = model.left().forward_lobe(stack_images(samples, idx, false, false));
    const Tensor4 pr = model.right().forward_lobe(stack_images(samples, idx, true, mirror));
    for (std::size_t b = 0; b < count; ++b) {
      LobeProbs l{};
      LobeProbs r{};
      for (std::size_t c = 0; c < kLobeClassCount; ++c) {
        l[c] = static_cast<double>(pl.at(b, 0, 0, c));
        r[c] = static_cast<double>(pr.at(b, 0, 0, c));
      }
      // Renormalise in double so float rounding cannot trip the sum check.
      const double sl = std::accumulate(l.begin(), l.end(), 0.0);
      const double sr = std::accumulate(r.begin(), r.end(), 0.0);
      for (auto& v : l) v /= sl;
      for (auto& v : r) v /= sr;
      GlandPrediction p;
      p.left = argmax_lobe(l);
      p.right = argmax_lobe(r);
      p.probs = fuse_probs(l, r);
      p.gland = argmax_gland(p.probs);
      out.push_back(p);
    }
  }
  return out;
}

double gland_accuracy(std::span<const LobeSample> samples, std::span<const GlandPrediction> predictions) {
  if (samples.size() != predictions.size()) throw std::invalid_argument("sample and prediction counts differ");
  if (samples.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) hit += samples[i].gland_label == predictions[i].gland ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(samples.size());
}

}  // namespace dualscope
