#include "dualscope/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dualscope/checkpoint.hpp"
#include "dualscope/error.hpp"
#include "toml_io.hpp"

namespace dualscope {
namespace {

constexpr std::string_view kKeys[] = {
    "dataset.manifest",         "dataset.preset",        "dataset.per_class",     "dataset.noise_sigma",
    "dataset.seed",             "model.image_size",      "model.entry_kernels",   "model.stem_channels",
    "model.middle_blocks",      "model.num_lobe_classes", "model.share_lobe_weights", "model.mirror_right",
    "training.epochs",          "training.batch_size",   "training.seed",         "training.warm_lr",
    "training.fixed_lr",        "training.decay_epochs", "training.class_weights", "training.adam_beta1",
    "training.adam_beta2",      "training.adam_epsilon", "cv.k",                  "cv.seed",
    "cv.averaging",             "ablation.epochs",       "run.out",               "run.jobs",
};

std::size_t count_key(const detail::TomlTable& t, const std::string& key, std::size_t fallback) {
  const long long v = detail::toml_int(t, key, static_cast<long long>(fallback));
  if (v < 0) throw FormatError("'" + key + "' must not be negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t seed_key(const detail::TomlTable& t, const std::string& key, std::uint64_t fallback) {
  const std::string text = detail::toml_string(t, key, std::to_string(fallback));
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError("'" + key + "' must be a non-negative integer");
  }
  return v;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out + "\"";
}

// Shortest form that reads back exactly; always TOML-float shaped.
std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string slug(const std::vector<std::size_t>& kernels) {
  std::string s = "k";
  for (std::size_t i = 0; i < kernels.size(); ++i) s += (i ? "_" : "") + std::to_string(kernels[i]);
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

std::span<const std::string_view> experiment_config_keys() noexcept { return kKeys; }

void ExperimentConfig::validate() const {
  if (dataset.manifest.empty() && dataset.preset != "balanced16" && dataset.preset != "paper-shaped") {
    throw std::invalid_argument("unknown dataset preset '" + dataset.preset + "' (expected balanced16 or paper-shaped)");
  }
  if (!(dataset.noise_sigma >= 0.0)) throw std::invalid_argument("dataset.noise_sigma must be >= 0");
  model.validate();
  training.validate();
  if (cv.k < 2) throw std::invalid_argument("cv.k must be >= 2");
  if (jobs == 0) throw std::invalid_argument("run.jobs must be >= 1");
  if (out.empty()) throw std::invalid_argument("run.out must not be empty");
}

std::string ExperimentConfig::to_toml() const {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "manifest = " << quoted(dataset.manifest) << "\n";
  os << "preset = " << quoted(dataset.preset) << "\n";
  os << "per_class = " << dataset.per_class << "\n";
  os << "noise_sigma = " << number(dataset.noise_sigma) << "\n";
  os << "seed = " << dataset.seed << "\n\n";
  os << model.to_toml() << "\n";
  os << "[training]\n";
  os << "epochs = " << training.epochs << "\n";
  os << "batch_size = " << training.batch_size << "\n";
  os << "seed = " << training.seed << "\n";
  os << "warm_lr = " << number(training.warm_lr) << "\n";
  os << "fixed_lr = " << number(training.fixed_lr) << "\n";
  os << "decay_epochs = " << training.decay_epochs << "\n";
  os << "class_weights = " << quoted(std::string(name(training.class_weights))) << "\n";
  os << "adam_beta1 = " << number(training.adam.beta1) << "\n";
  os << "adam_beta2 = " << number(training.adam.beta2) << "\n";
  os << "adam_epsilon = " << number(training.adam.epsilon) << "\n\n";
  os << "[cv]\n";
  os << "k = " << cv.k << "\n";
  os << "seed = " << cv.seed << "\n";
  os << "averaging = " << quoted(cv.averaging == Averaging::Macro ? "macro" : "micro") << "\n\n";
  os << "[ablation]\n";
  os << "epochs = " << ablation_epochs << "\n\n";
  os << "[run]\n";
  os << "out = " << quoted(out.generic_string()) << "\n";
  os << "jobs = " << jobs << "\n";
  return os.str();
}

ExperimentConfig ExperimentConfig::from_toml(const std::string& text,
                                             const std::map<std::string, std::string>& overrides) {
  detail::TomlTable t = detail::parse_toml(text);
  const auto known = [](const std::string& key) {
    return std::find(std::begin(kKeys), std::end(kKeys), key) != std::end(kKeys);
  };
  for (const auto& [key, value] : t) {
    if (!known(key)) throw FormatError("unknown configuration key '" + key + "'");
  }
  for (const auto& [key, value] : overrides) {
    if (!known(key)) throw FormatError("unknown configuration key '" + key + "'");
    std::vector<std::string> parts;
    if (key == "model.entry_kernels") {
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) parts.push_back(part);
    } else {
      parts.push_back(value);
    }
    t[key] = parts;
  }

  ExperimentConfig c;
  auto& d = c.dataset;
  d.manifest = detail::toml_string(t, "dataset.manifest", d.manifest);
  d.preset = detail::toml_string(t, "dataset.preset", d.preset);
  d.per_class = count_key(t, "dataset.per_class", d.per_class);
  d.noise_sigma = detail::toml_double(t, "dataset.noise_sigma", d.noise_sigma);
  d.seed = seed_key(t, "dataset.seed", d.seed);
  c.model = detail::model_config_from_table(t);
  auto& tr = c.training;
  tr.epochs = count_key(t, "training.epochs", tr.epochs);
  tr.batch_size = count_key(t, "training.batch_size", tr.batch_size);
  tr.seed = seed_key(t, "training.seed", tr.seed);
  tr.warm_lr = detail::toml_double(t, "training.warm_lr", tr.warm_lr);
  tr.fixed_lr = detail::toml_double(t, "training.fixed_lr", tr.fixed_lr);
  tr.decay_epochs = count_key(t, "training.decay_epochs", tr.decay_epochs);
  tr.class_weights =
      parse_class_weight_mode(detail::toml_string(t, "training.class_weights", std::string(name(tr.class_weights))));
  tr.adam.beta1 = detail::toml_double(t, "training.adam_beta1", tr.adam.beta1);
  tr.adam.beta2 = detail::toml_double(t, "training.adam_beta2", tr.adam.beta2);
  tr.adam.epsilon = detail::toml_double(t, "training.adam_epsilon", tr.adam.epsilon);
  c.cv.k = count_key(t, "cv.k", c.cv.k);
  c.cv.seed = seed_key(t, "cv.seed", c.cv.seed);
  const std::string averaging = detail::toml_string(t, "cv.averaging", "macro");
  if (averaging != "macro" && averaging != "micro") {
    throw FormatError("cv.averaging must be \"macro\" or \"micro\", got '" + averaging + "'");
  }
  c.cv.averaging = averaging == "macro" ? Averaging::Macro : Averaging::Micro;
  c.ablation_epochs = count_key(t, "ablation.epochs", c.ablation_epochs);
  c.out = detail::toml_string(t, "run.out", c.out.generic_string());
  c.jobs = count_key(t, "run.jobs", c.jobs);
  c.validate();
  return c;
}

SyntheticSpec synthetic_spec(const DatasetConfig& dataset, std::size_t image_size) {
  if (dataset.preset == "paper-shaped") return SyntheticSpec::paper_shaped(image_size, dataset.noise_sigma, dataset.seed);
  if (dataset.preset == "balanced16") {
    return SyntheticSpec::balanced16(dataset.per_class, image_size, dataset.noise_sigma, dataset.seed);
  }
  throw std::invalid_argument("unknown dataset preset '" + dataset.preset + "'");
}

std::vector<LobeSample> load_dataset(const ExperimentConfig& config) {
  if (!config.dataset.manifest.empty()) return load_manifest(config.dataset.manifest, config.model.image_size);
  return synth_generate(synthetic_spec(config.dataset, config.model.image_size));
}

std::string histogram_text(std::span<const LobeSample> samples) {
  const LobeHistogram lobes = lobe_histogram(samples);
  const auto glands = gland_histogram(samples);
  std::ostringstream s;
  s << samples.size() << " samples\n\n";
  s << std::left << std::setw(22) << "lobe class" << std::right << std::setw(7) << "left" << std::setw(7) << "right"
    << "\n";
  for (std::size_t c = 0; c < kLobeClassCount; ++c) {
    s << std::left << std::setw(22) << kLobeClassNames[c] << std::right << std::setw(7) << lobes.left[c]
      << std::setw(7) << lobes.right[c] << "\n";
  }
  s << "\n" << std::left << std::setw(22) << "gland class" << std::right << std::setw(7) << "count" << "\n";
  for (std::size_t g = 0; g < kGlandClassCount; ++g) {
    s << std::left << std::setw(22) << kGlandClassNames[g] << std::right << std::setw(7) << glands[g] << "\n";
  }
  std::array<std::size_t, 3> genders{};
  for (const auto& smp : samples) ++genders[static_cast<std::size_t>(smp.gender)];
  s << "\nfemale " << genders[0] << ", male " << genders[1] << ", unknown " << genders[2] << "\n";
  return s.str();
}

std::string run_synth(const SyntheticSpec& spec, const std::filesystem::path& out) {
  const auto samples = synth_generate(spec);
  write_dataset(out, samples);
  return histogram_text(samples);
}

TrainResult run_train(const ExperimentConfig& config, std::span<const LobeSample> samples, const Logger& log) {
  config.validate();
  std::filesystem::create_directories(config.out);
  write_text(config.out / "config.toml", config.to_toml());
  auto model = GlandClassifier<float>::build(config.model, config.training.seed);
  TrainResult result;
  result.history = train(model, samples, config.training, [&](const EpochStats& s) {
    emit(log, "epoch " + std::to_string(s.epoch + 1) + "/" + std::to_string(config.training.epochs) +
                  "  lr " + number(s.learning_rate) + "  loss " + fixed(s.mean_loss, 6));
  });
  const auto preds = predict(model, samples);
  result.train_gland_accuracy = gland_accuracy(samples, preds);

  const auto params = std::as_const(model).parameter_ptrs();
  save_checkpoint(config.out / "checkpoint.bin", snapshot(params));
  write_text(config.out / "model.toml", config.model.to_toml());
  std::ostringstream csv;
  csv << "epoch,lr,loss\n";
  for (const auto& s : result.history) csv << s.epoch << "," << number(s.learning_rate) << "," << number(s.mean_loss) << "\n";
  write_text(config.out / "train_log.csv", csv.str());
  emit(log, "training-set gland accuracy " + fixed(result.train_gland_accuracy, 4));
  return result;
}

CrossvalResult run_crossval(const ExperimentConfig& config, std::span<const LobeSample> samples, const Logger& log) {
  config.validate();
  std::vector<GlandClass> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.gland_label);
  const FoldSplit split = stratified_kfold(labels, config.cv.k, config.cv.seed);

  std::filesystem::create_directories(config.out / "folds");
  write_text(config.out / "config.toml", config.to_toml());

  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    const std::lock_guard lock(log_mutex);
    emit(log, line);
  };
  for (const auto& w : split.warnings) say("warning: " + w);

  const std::size_t k = config.cv.k;
  std::vector<std::vector<GlandPrediction>> trained(k);
  std::vector<std::vector<GlandPrediction>> untrained(k);
  std::vector<std::exception_ptr> errors(k);

  auto run_fold = [&](std::size_t fold) {
    const auto& held = split.folds[fold];
    const auto train_idx = training_indices(split, fold, samples.size());
    std::vector<LobeSample> train_set;
    train_set.reserve(train_idx.size());
    for (const std::size_t i : train_idx) train_set.push_back(samples[i]);
    std::vector<LobeSample> test_set;
    test_set.reserve(held.size());
    for (const std::size_t i : held) test_set.push_back(samples[i]);

    TrainConfig tc = config.training;
    tc.seed = config.training.seed + fold;
    auto model = GlandClassifier<float>::build(config.model, config.training.seed + fold);
    untrained[fold] = predict(model, test_set);
    train(model, train_set, tc, [&](const EpochStats& s) {
      say("fold " + std::to_string(fold) + " epoch " + std::to_string(s.epoch + 1) + "/" + std::to_string(tc.epochs) +
          "  lr " + number(s.learning_rate) + "  loss " + fixed(s.mean_loss, 6));
    });
    trained[fold] = predict(model, test_set);

    const auto dir = config.out / "folds" / ("fold" + std::to_string(fold));
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "checkpoint.bin", snapshot(std::as_const(model).parameter_ptrs()));
    write_text(dir / "model.toml", config.model.to_toml());
    say("fold " + std::to_string(fold) + " held-out gland accuracy " + fixed(gland_accuracy(test_set, trained[fold]), 4));
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t fold = next++; fold < k; fold = next++) {
      try {
        run_fold(fold);
      } catch (...) {
        errors[fold] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < std::min(config.jobs, k); ++j) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t fold = 0; fold < k; ++fold) {
    if (!errors[fold]) continue;
    try {
      std::rethrow_exception(errors[fold]);
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(fold) + " failed: " + e.what());
    }
  }

  CrossvalResult result;
  result.warnings = split.warnings;
  std::vector<FoldReport> folds;
  std::vector<FoldReport> baseline;
  for (std::size_t fold = 0; fold < k; ++fold) {
    ConfusionMatrix cm(kGlandClassCount);
    ConfusionMatrix cm0(kGlandClassCount);
    const auto& held = split.folds[fold];
    for (std::size_t j = 0; j < held.size(); ++j) {
      const LobeSample& s = samples[held[j]];
      const GlandPrediction& p = trained[fold][j];
      cm.add(code(s.gland_label), code(p.gland));
      cm0.add(code(s.gland_label), code(untrained[fold][j].gland));
      result.predictions.push_back(PredictionRecord{held[j], s.patient_id, fold, s.gender, s.age_group, s.left_label,
                                                    s.right_label, s.gland_label, p.left, p.right, p.gland});
    }
    folds.push_back(make_fold_report(fold, cm, config.cv.averaging));
    baseline.push_back(make_fold_report(fold, cm0, config.cv.averaging));
  }
  std::sort(result.predictions.begin(), result.predictions.end(),
            [](const PredictionRecord& a, const PredictionRecord& b) { return a.index < b.index; });
  result.report = aggregate(std::move(folds));
  result.untrained = aggregate(std::move(baseline));

  write_predictions_csv(config.out / "predictions.csv", result.predictions);
  write_metrics_csv(config.out / "metrics.csv", result.report);
  const auto f1_rows = class_f1_rows(result.report);
  write_class_f1_csv(config.out / "per_class_f1.csv", f1_rows);
  std::string md = run_markdown("Cross-validation: " + config.model.kernel_label(), result.report);
  md += "\nUntrained baseline accuracy (same folds, initial weights): " +
        format_mean_std(result.untrained.mean[0], result.untrained.stddev[0]) + "\n";
  for (const auto& w : result.warnings) md += "\nWarning: " + w + "\n";
  write_text(config.out / "report.md", md);
  say("mean held-out gland accuracy " + format_mean_std(result.report.mean[0], result.report.stddev[0]));
  return result;
}

std::vector<std::vector<std::size_t>> ablation_kernel_sets() {
  return {{1, 5}, {1, 7}, {3, 5}, {3, 7}, {3}, {5}, {7}};
}

std::string ablation_markdown(std::span<const AblationRow> rows) {
  std::vector<TableRow> table;
  for (const auto& r : rows) table.push_back({r.label, &r.result.report});
  std::ostringstream s;
  s << "# Entry-kernel comparison\n\n";
  s << metrics_table("Kernel size", table);
  s << "\n## Untrained baseline accuracy\n\n| Kernel size | Accuracy | Untrained |\n|---|---|---|\n";
  for (const auto& r : rows) {
    s << "| " << r.label << " | " << format_mean_std(r.result.report.mean[0], r.result.report.stddev[0]) << " | "
      << format_mean_std(r.result.untrained.mean[0], r.result.untrained.stddev[0]) << " |\n";
  }
  return s.str();
}

std::vector<AblationRow> run_ablate(const ExperimentConfig& config, std::span<const LobeSample> samples,
                                    const Logger& log) {
  config.validate();
  std::filesystem::create_directories(config.out);
  std::vector<AblationRow> rows;
  for (const auto& kernels : ablation_kernel_sets()) {
    ExperimentConfig cell = config;
    cell.model.entry_kernels = kernels;
    cell.training.epochs = config.ablation_epochs;
    cell.out = config.out / slug(kernels);
    const std::string label = cell.model.kernel_label();
    emit(log, "== " + label);
    rows.push_back(AblationRow{label, cell.model, run_crossval(cell, samples, log)});
  }
  write_text(config.out / "ablation.md", ablation_markdown(rows));
  return rows;
}

SubgroupResult run_report(const std::filesystem::path& run_dir, Attribute attribute, const Logger& log) {
  const auto pred_path = run_dir / "predictions.csv";
  if (!std::filesystem::exists(pred_path)) {
    throw std::runtime_error("no predictions file at " + pred_path.string());
  }
  Averaging averaging = Averaging::Macro;
  if (std::filesystem::exists(run_dir / "config.toml")) {
    averaging = ExperimentConfig::from_toml(read_text(run_dir / "config.toml")).cv.averaging;
  }
  const auto records = read_predictions_csv(pred_path);
  const SubgroupResult result = subgroup_eval(records, attribute, averaging);
  const std::string attr = attribute == Attribute::Gender ? "gender" : "age_group";
  write_text(run_dir / ("subgroup_" + attr + ".md"), subgroup_markdown(result));
  write_class_f1_csv(run_dir / ("subgroup_" + attr + "_f1.csv"), subgroup_class_f1_rows(result));
  for (const auto& n : result.notices) emit(log, "note: " + n);
  for (const auto& r : result.rows) {
    emit(log, r.group + " (n=" + std::to_string(r.samples) + "): accuracy " +
                  format_mean_std(r.report.mean[0], r.report.stddev[0]));
  }
  return result;
}

}  // namespace dualscope
