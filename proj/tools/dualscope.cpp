// dualscope: synthesise phantom datasets, train, cross-validate, compare
// entry kernels and break results down by subgroup.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "dualscope/experiment.hpp"
#include "dualscope/kernels.hpp"

namespace {

using dualscope::ExperimentConfig;

// Options shared by train, crossval and ablate. Every config key is also a
// flag of the same dotted name; the short flags below win over both.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> dotted;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::size_t> image_size;
  std::optional<std::size_t> epochs;
  std::optional<std::string> kernels;
  std::optional<std::string> preset;
  std::optional<std::size_t> per_class;
  std::optional<std::string> manifest;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "TOML experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed for data, model initialisation and fold assignment");
    app.add_option("--jobs", jobs, "Folds trained concurrently");
    app.add_option("--out", out, "Output directory");
    app.add_option("--image-size", image_size, "Lobe image side length");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--kernels", kernels, "Entry kernel sizes, e.g. \"1,7\" or \"7\"");
    app.add_option("--preset", preset, "Synthetic preset: balanced16 or paper-shaped");
    app.add_option("--per-class", per_class, "Samples per gland class for balanced16");
    app.add_option("--manifest", manifest, "Manifest CSV instead of a synthetic preset");
    for (const auto key : dualscope::experiment_config_keys()) {
      const std::string k(key);
      app.add_option_function<std::string>("--" + k, [this, k](const std::string& v) { dotted[k] = v; })
          ->group("Config keys");
    }
  }

  ExperimentConfig resolve() const {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      std::ostringstream s;
      s << f.rdbuf();
      text = s.str();
    }
    auto o = dotted;
    if (seed) {
      for (const char* k : {"dataset.seed", "training.seed", "cv.seed"}) o[k] = std::to_string(*seed);
    }
    if (jobs) o["run.jobs"] = std::to_string(*jobs);
    if (out) o["run.out"] = *out;
    if (image_size) o["model.image_size"] = std::to_string(*image_size);
    if (epochs) {
      o["training.epochs"] = std::to_string(*epochs);
      o["ablation.epochs"] = std::to_string(*epochs);
    }
    if (kernels) o["model.entry_kernels"] = *kernels;
    if (preset) o["dataset.preset"] = *preset;
    if (per_class) o["dataset.per_class"] = std::to_string(*per_class);
    if (manifest) o["dataset.manifest"] = *manifest;
    return ExperimentConfig::from_toml(text, o);
  }
};

void log_line(std::string_view line) { std::cerr << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-kernel lobe classifier: data synthesis, training and evaluation"};
  app.require_subcommand(1);
  bool show_isa = false;
  app.add_flag("--show-isa", show_isa, "Print the selected SIMD kernel variant");

  auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset (PGM images + manifest)");
  std::string synth_preset = "balanced16";
  std::size_t synth_per_class = 20;
  std::size_t synth_size = 64;
  double synth_sigma = 0.05;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--preset", synth_preset, "balanced16 or paper-shaped")
      ->check(CLI::IsMember({"balanced16", "paper-shaped"}));
  synth->add_option("--per-class", synth_per_class, "Samples per gland class (balanced16)");
  synth->add_option("--image-size", synth_size, "Image side length");
  synth->add_option("--noise-sigma", synth_sigma, "Gaussian pixel noise");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one model on the whole dataset");
  train_flags.attach(*train);

  ConfigFlags cv_flags;
  auto* crossval = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
  cv_flags.attach(*crossval);

  ConfigFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Cross-validate all entry-kernel combinations");
  ablate_flags.attach(*ablate);

  auto* report = app.add_subcommand("report", "Subgroup tables from a finished cross-validation run");
  std::string run_dir;
  std::string by = "gender";
  report->add_option("run-dir", run_dir, "Cross-validation output directory")->required();
  report->add_option("--by", by, "gender or age_group")->check(CLI::IsMember({"gender", "age_group"}));

  CLI11_PARSE(app, argc, argv);
  if (show_isa) std::cerr << "kernels: " << dualscope::kernels::active().name << "\n";

  try {
    if (*synth) {
      dualscope::DatasetConfig d;
      d.preset = synth_preset;
      d.per_class = synth_per_class;
      d.noise_sigma = synth_sigma;
      d.seed = synth_seed;
      std::cout << dualscope::run_synth(dualscope::synthetic_spec(d, synth_size), synth_out);
    } else if (*train) {
      const auto cfg = train_flags.resolve();
      const auto samples = dualscope::load_dataset(cfg);
      const auto r = dualscope::run_train(cfg, samples, log_line);
      std::cout << "training-set gland accuracy " << r.train_gland_accuracy << "\n";
    } else if (*crossval) {
      const auto cfg = cv_flags.resolve();
      const auto samples = dualscope::load_dataset(cfg);
      const auto r = dualscope::run_crossval(cfg, samples, log_line);
      std::cout << dualscope::run_markdown("Cross-validation: " + cfg.model.kernel_label(), r.report);
    } else if (*ablate) {
      const auto cfg = ablate_flags.resolve();
      const auto samples = dualscope::load_dataset(cfg);
      const auto rows = dualscope::run_ablate(cfg, samples, log_line);
      std::cout << dualscope::ablation_markdown(rows);
    } else if (*report) {
      const auto r = dualscope::run_report(run_dir, dualscope::parse_attribute(by), log_line);
      std::cout << dualscope::subgroup_markdown(r);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
