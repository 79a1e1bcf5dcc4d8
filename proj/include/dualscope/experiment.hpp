#pragma once

// Experiment configuration and the commands behind the CLI: synth, train,
// crossval, ablate, report. Every command is a pure function of its config,
// seeds and dataset bytes.
//
// TOML layout (all keys optional):
//
//   [dataset]   manifest, preset, per_class, noise_sigma, seed
//   [model]     see ModelConfig::to_toml
//   [training]  epochs, batch_size, seed, warm_lr, fixed_lr, decay_epochs,
//               class_weights, adam_beta1, adam_beta2, adam_epsilon
//   [cv]        k, seed, averaging
//   [ablation]  epochs
//   [run]       out, jobs

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualscope/data.hpp"
#include "dualscope/eval.hpp"
#include "dualscope/model.hpp"
#include "dualscope/synth.hpp"
#include "dualscope/train.hpp"

namespace dualscope {

struct DatasetConfig {
  std::string manifest;  // empty: generate the synthetic preset
  std::string preset = "balanced16";  // or "paper-shaped"
  std::size_t per_class = 20;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct CvConfig {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  Averaging averaging = Averaging::Macro;
  friend bool operator==(const CvConfig&, const CvConfig&) = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig training;
  CvConfig cv;
  std::size_t ablation_epochs = 30;
  std::filesystem::path out = "run";
  std::size_t jobs = 1;

  /// Throws std::invalid_argument.
  void validate() const;

  [[nodiscard]] std::string to_toml() const;
  /// `overrides` maps dotted keys ("training.epochs") to values; list
  /// values are comma separated. Unknown keys are rejected with FormatError.
  static ExperimentConfig from_toml(const std::string& text, const std::map<std::string, std::string>& overrides = {});

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Every dotted key accepted in the TOML file and as an override.
std::span<const std::string_view> experiment_config_keys() noexcept;

using Logger = std::function<void(std::string_view)>;

SyntheticSpec synthetic_spec(const DatasetConfig& dataset, std::size_t image_size);

/// The manifest if one is set, otherwise the synthetic preset at the
/// model's image size.
std::vector<LobeSample> load_dataset(const ExperimentConfig& config);

/// Per-lobe and per-gland class counts as a small text table.
std::string histogram_text(std::span<const LobeSample> samples);

/// Writes the dataset to `out` and returns the histogram text.
std::string run_synth(const SyntheticSpec& spec, const std::filesystem::path& out);

struct TrainResult {
  double train_gland_accuracy = 0.0;
  std::vector<EpochStats> history;
};

/// Trains one model on all samples. Writes config.toml, model.toml,
/// checkpoint.bin and train_log.csv under config.out.
TrainResult run_train(const ExperimentConfig& config, std::span<const LobeSample> samples, const Logger& log = {});

struct CrossvalResult {
  RunReport report;
  RunReport untrained;  // freshly initialised fold models on the same folds
  std::vector<PredictionRecord> predictions;
  std::vector<std::string> warnings;
};

/// Stratified k-fold run. Fold i builds its model from training.seed + i,
/// trains on the other folds and predicts the held-out fold. Writes
/// config.toml, folds/fold<i>/{checkpoint.bin,model.toml},
/// predictions.csv, metrics.csv, per_class_f1.csv and report.md under
/// config.out. Up to config.jobs folds run at once. A failing fold aborts
/// the run with std::runtime_error naming the fold.
CrossvalResult run_crossval(const ExperimentConfig& config, std::span<const LobeSample> samples,
                            const Logger& log = {});

struct AblationRow {
  std::string label;  // "1 & 7", "7 × 7", ...
  ModelConfig model;
  CrossvalResult result;
};

/// The four dual-kernel pairs and three single kernels of the comparison.
std::vector<std::vector<std::size_t>> ablation_kernel_sets();

/// Cross-validates every kernel set for ablation_epochs epochs into
/// config.out/<slug>/ and writes config.out/ablation.md.
std::vector<AblationRow> run_ablate(const ExperimentConfig& config, std::span<const LobeSample> samples,
                                    const Logger& log = {});

std::string ablation_markdown(std::span<const AblationRow> rows);

/// Re-evaluates run_dir/predictions.csv by subgroup and writes
/// subgroup_<attr>.md and subgroup_<attr>_f1.csv into run_dir.
SubgroupResult run_report(const std::filesystem::path& run_dir, Attribute attribute, const Logger& log = {});

}  // namespace dualscope
