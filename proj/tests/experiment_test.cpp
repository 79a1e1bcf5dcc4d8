#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dualscope/experiment.hpp"
#include "support.hpp"

using namespace dualscope;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.dataset.per_class = 2;
  c.model.image_size = 16;
  c.model.stem_channels = 4;
  c.model.middle_blocks = 1;
  c.training.epochs = 2;
  c.training.decay_epochs = 2;
  c.cv.k = 2;
  c.ablation_epochs = 1;
  c.out = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + DUALSCOPE_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST(Config, TomlRoundTripAndOverrides) {
  auto c = tiny("some/dir");
  c.model.entry_kernels = {3, 5};
  c.training.warm_lr = 0.005;
  c.training.class_weights = ClassWeightMode::Uniform;
  c.cv.averaging = Averaging::Micro;
  c.dataset.preset = "paper-shaped";
  EXPECT_EQ(ExperimentConfig::from_toml(c.to_toml()), c);

  const auto o = ExperimentConfig::from_toml(c.to_toml(), {{"model.entry_kernels", "1,7"}, {"cv.k", "5"}});
  EXPECT_EQ(o.model.entry_kernels, (std::vector<std::size_t>{1, 7}));
  EXPECT_EQ(o.cv.k, 5u);

  EXPECT_THROW(ExperimentConfig::from_toml("[training]\nepochz = 3\n"), FormatError);
  EXPECT_THROW(ExperimentConfig::from_toml("", {{"cv.k", "1"}}), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_toml("", {{"model.entry_kernels", "9"}}), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_toml("", {{"cv.averaging", "weighted"}}), FormatError);
  EXPECT_EQ(experiment_config_keys().size(), 28u);
}

TEST(Crossval, WritesOutputsAndIsReproducible) {
  const auto dir = dualscope::testing::scratch_dir("cv");
  auto cfg = tiny(dir / "a");
  const auto samples = load_dataset(cfg);
  ASSERT_EQ(samples.size(), 32u);
  const auto r = run_crossval(cfg, samples);
  for (const char* f : {"config.toml", "predictions.csv", "metrics.csv", "per_class_f1.csv", "report.md",
                        "folds/fold0/checkpoint.bin", "folds/fold1/model.toml"})
    EXPECT_TRUE(fs::exists(cfg.out / f)) << f;
  EXPECT_EQ(r.report.folds.size(), 2u);
  EXPECT_EQ(r.predictions.size(), 32u);
  for (std::size_t m = 0; m < kMetricCount; ++m)
    if (!std::isnan(r.report.mean[m])) {
      EXPECT_GE(r.report.mean[m], 0.0);
      EXPECT_LE(r.report.mean[m], 1.0);
    }

  // Same config, run with two fold workers: identical bytes.
  auto again = cfg;
  again.out = dir / "b";
  again.jobs = 2;
  run_crossval(again, samples);
  for (const char* f : {"metrics.csv", "predictions.csv", "folds/fold0/checkpoint.bin", "folds/fold1/checkpoint.bin"})
    EXPECT_EQ(slurp(cfg.out / f), slurp(again.out / f)) << f;

  const auto sub = run_report(cfg.out, Attribute::Gender);
  EXPECT_TRUE(fs::exists(cfg.out / "subgroup_gender.md"));
  EXPECT_TRUE(fs::exists(cfg.out / "subgroup_gender_f1.csv"));
  std::size_t n = 0;
  for (const auto& row : sub.rows) n += row.samples;
  EXPECT_EQ(n, 32u);
  EXPECT_THROW(run_report(dir / "missing", Attribute::Gender), std::runtime_error);
}

TEST(Crossval, FailingFoldIsNamed) {
  auto cfg = tiny(dualscope::testing::scratch_dir("cv_fail") / "x");
  auto samples = load_dataset(cfg);
  samples[5].left_image = Tensor4(Shape4{1, 8, 8, 1});
  try {
    run_crossval(cfg, samples);
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("fold"), std::string::npos);
  }
}

TEST(Train, TrainWritesArtifacts) {
  auto cfg = tiny(dualscope::testing::scratch_dir("train") / "t");
  const auto samples = load_dataset(cfg);
  const auto r = run_train(cfg, samples);
  EXPECT_EQ(r.history.size(), 2u);
  for (const char* f : {"config.toml", "model.toml", "checkpoint.bin", "train_log.csv"})
    EXPECT_TRUE(fs::exists(cfg.out / f)) << f;
  EXPECT_GE(r.train_gland_accuracy, 0.0);
  EXPECT_LE(r.train_gland_accuracy, 1.0);
}

TEST(Train, ClassWeights) {
  const auto samples = synth_generate(SyntheticSpec::paper_shaped(4));
  const auto w = lobe_class_weights(samples, ClassWeightMode::InverseFrequency);
  double mean = 0;
  for (const double x : w.class_weights) mean += x / 6.0;
  EXPECT_NEAR(mean, 1.0, 1e-12);
  // adenoma (102 lobes) is rarer than cystic (607)
  EXPECT_GT(w.class_weights[code(LobeClass::Adenoma)], w.class_weights[code(LobeClass::Cystic)]);
  EXPECT_NEAR(w.class_weights[code(LobeClass::Adenoma)] / w.class_weights[code(LobeClass::Cystic)], 607.0 / 102.0,
              1e-12);
  for (const double x : lobe_class_weights(samples, ClassWeightMode::Uniform).class_weights) EXPECT_EQ(x, 1.0);
}

TEST(Ablate, SevenRowsInOrder) {
  auto cfg = tiny(dualscope::testing::scratch_dir("ablate"));
  const auto samples = load_dataset(cfg);
  const auto rows = run_ablate(cfg, samples);
  const std::vector<std::string> labels{"1 & 5", "1 & 7", "3 & 5", "3 & 7", "3 × 3", "5 × 5", "7 × 7"};
  ASSERT_EQ(rows.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(rows[i].label, labels[i]);
  const auto md = slurp(cfg.out / "ablation.md");
  for (const auto& l : labels) EXPECT_NE(md.find("| " + l + " |"), std::string::npos) << l;
}

TEST(Cli, EndToEnd) {
  const auto dir = dualscope::testing::scratch_dir("cli");
  const auto log = dir / "log.txt";
  ASSERT_EQ(run_cli("synth --preset balanced16 --per-class 1 --image-size 12 --seed 3 --out \"" +
                        (dir / "d1").string() + "\"",
                    log),
            0)
      << slurp(log);
  ASSERT_EQ(run_cli("synth --preset balanced16 --per-class 1 --image-size 12 --seed 3 --out \"" +
                        (dir / "d2").string() + "\"",
                    log),
            0);
  EXPECT_EQ(slurp(dir / "d1/manifest.csv"), slurp(dir / "d2/manifest.csv"));
  EXPECT_EQ(slurp(dir / "d1/images/S00000_L.pgm"), slurp(dir / "d2/images/S00000_L.pgm"));

  const std::string cv_args = "crossval --manifest \"" + (dir / "d1/manifest.csv").string() +
                              "\" --image-size 12 --epochs 1 --cv.k 2 --model.stem_channels 2 "
                              "--model.middle_blocks 1 --out \"" + (dir / "run").string() + "\"";
  ASSERT_EQ(run_cli(cv_args, log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("Accuracy"), std::string::npos);
  ASSERT_EQ(run_cli("report \"" + (dir / "run").string() + "\" --by age_group", log), 0) << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "run/subgroup_age_group.md"));

  EXPECT_NE(run_cli("crossval --model.entry_kernels 9 --out \"" + (dir / "bad").string() + "\"", log), 0);
  EXPECT_NE(slurp(log).find("9x9"), std::string::npos);
  EXPECT_NE(run_cli("report \"" + (dir / "nowhere").string() + "\"", log), 0);
  EXPECT_NE(run_cli("frobnicate", log), 0);
}
