// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            criteria 1-7, 9, 10
//   acceptance 8          only criterion 8 (the slow cross-validation run)
//   acceptance all        everything
//
// Exit status is non-zero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dualscope/autodiff.hpp"
#include "dualscope/checkpoint.hpp"
#include "dualscope/eval.hpp"
#include "dualscope/experiment.hpp"
#include "dualscope/labels.hpp"
#include "dualscope/ops.hpp"
#include "dualscope/synth.hpp"
#include "dualscope/train.hpp"
#include "gradcheck_cases.hpp"
#include "support.hpp"

using namespace dualscope;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// --- 1 ----------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t coords = 0;
  std::size_t kinks = 0;
  for (const auto& c : testing::op_gradient_checks(20)) {
    coords += c.result.coordinates;
    kinks += c.result.kinks;
    if (c.result.worst > worst) {
      worst = c.result.worst;
      where = c.name + " " + c.result.where;
    }
  }
  const auto m = testing::model_gradient_check(20);
  coords += m.coordinates;
  kinks += m.kinks;
  if (m.worst > worst) {
    worst = m.worst;
    where = "model " + m.where;
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= 1e-4 && secs < 60.0;
  return {ok, "max rel err " + fmt(worst, 3) + " over " + std::to_string(coords) + " coords, " +
                  std::to_string(kinks) + " re-measured past a kink, " + fmt(secs, 3) + " s" +
                  (where.empty() ? "" : " (worst: " + where + ")")};
}

// --- 2 ----------------------------------------------------------------------

Outcome shape_oracle() {
  std::size_t cases = 0;
  for (std::size_t n = 7; n <= 64; ++n)
    for (const std::size_t f : {1, 3, 5, 7})
      for (const std::size_t s : {1, 2}) {
        const std::size_t expect = (n - f) / s + 1;
        Tensor4 x(Shape4{1, n, n, 1}, 1.0f);
        Tensor4 w(Shape4{f, f, 1, 1}, 1.0f);
        const auto y = ops::conv2d(x, w, std::span<const float>{}, ConvSpec{f, s, Padding::Valid});
        if (y.shape().h != expect || y.shape().w != expect || out_extent(n, f, s) != expect) {
          return {false, "n=" + std::to_string(n) + " f=" + std::to_string(f) + " s=" + std::to_string(s) +
                             ": got " + std::to_string(y.shape().h) + ", want " + std::to_string(expect)};
        }
        ++cases;
      }
  return {true, std::to_string(cases) + " (n, f, s) cases exact"};
}

// --- 3 ----------------------------------------------------------------------

GlandClass rule_oracle(std::size_t l, std::size_t r) {
  if (l == r) return static_cast<GlandClass>(l);
  if (l == 0 || r == 0) return static_cast<GlandClass>(l + r);
  const std::size_t a = std::min(l, r);
  const std::size_t b = std::max(l, r);
  std::size_t code = 6;
  for (std::size_t i = 1; i <= 5; ++i)
    for (std::size_t j = i + 1; j <= 5; ++j, ++code)
      if (i == a && j == b) return static_cast<GlandClass>(code);
  return GlandClass::Normal;
}

Outcome fusion_algebra() {
  const auto t0 = Clock::now();
  std::set<std::size_t> image;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const auto l = static_cast<LobeClass>(i);
      const auto r = static_cast<LobeClass>(j);
      const GlandClass g = fuse_labels(l, r);
      if (g != rule_oracle(i, j)) return {false, "pair " + std::to_string(i) + "," + std::to_string(j) + " wrong"};
      if (g != fuse_labels(r, l)) return {false, "not symmetric at " + std::to_string(i) + "," + std::to_string(j)};
      LobeProbs pl{};
      LobeProbs pr{};
      pl[i] = 1.0;
      pr[j] = 1.0;
      const auto q = fuse_probs(pl, pr);
      for (std::size_t k = 0; k < kGlandClassCount; ++k) {
        if (q[k] != (k == code(g) ? 1.0 : 0.0)) return {false, "one-hot fuse_probs mismatch"};
      }
      image.insert(code(g));
    }
  if (fuse_labels(LobeClass::Normal, LobeClass::Cancer) != GlandClass::Cancer) return {false, "normal+cancer"};
  if (image.size() != kGlandClassCount) return {false, "not surjective"};
  const double secs = seconds_since(t0);
  return {secs < 1.0, "36 pairs, 16 classes reached, " + fmt(secs * 1e3, 3) + " ms"};
}

// --- 4 ----------------------------------------------------------------------

Outcome loss_oracle() {
  Tensor4d z(Shape4{4, 1, 1, 6});
  const std::vector<int> y{0, 1, 4, 5};
  const double l = cce_loss_value(z, y, LossConfig::uniform(6));
  const double err = std::abs(l - std::log(6.0));

  std::mt19937_64 rng(4);
  const auto logits = testing::random_tensor<double>(Shape4{4, 1, 1, 6}, rng, -3.0, 3.0);
  const LossConfig w{{0.3, 1.7, 0.9, 2.2, 1.1, 0.6}};
  LossConfig w2 = w;
  for (double& v : w2.class_weights) v *= 2.0;
  const double a = cce_loss_value(logits, y, w);
  const double b = cce_loss_value(logits, y, w2);
  return {err <= 1e-6 && b == 2.0 * a,
          "|L - ln 6| = " + fmt(err, 3) + ", doubled weights ratio " + fmt(b / a, 17)};
}

// --- 5 ----------------------------------------------------------------------

MetricValues pair_counting(const std::vector<std::size_t>& t, const std::vector<std::size_t>& p, std::size_t classes) {
  MetricValues out;
  out.fill(std::nan(""));
  double hits = 0;
  for (std::size_t i = 0; i < t.size(); ++i) hits += t[i] == p[i];
  out[0] = hits / static_cast<double>(t.size());
  std::array<double, kMetricCount> sum{};
  std::array<int, kMetricCount> n{};
  auto put = [&](Metric m, double num, double den) {
    if (den > 0) {
      sum[static_cast<std::size_t>(m)] += num / den;
      ++n[static_cast<std::size_t>(m)];
    }
  };
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += t[i] == c && p[i] == c;
      tn += t[i] != c && p[i] != c;
      fp += t[i] != c && p[i] == c;
      fn += t[i] == c && p[i] != c;
    }
    if (tp + fp + fn == 0) continue;
    put(Metric::OvrAccuracy, tp + tn, tp + tn + fp + fn);
    put(Metric::Ppv, tp, tp + fp);
    put(Metric::Sensitivity, tp, tp + fn);
    put(Metric::Specificity, tn, tn + fp);
    put(Metric::Npv, tn, tn + fn);
  }
  for (std::size_t m = 1; m < kMetricCount; ++m)
    if (n[m] > 0) out[m] = sum[m] / n[m];
  const double pp = out[static_cast<std::size_t>(Metric::Ppv)];
  const double ss = out[static_cast<std::size_t>(Metric::Sensitivity)];
  out[static_cast<std::size_t>(Metric::F1)] = pp + ss == 0 ? 0.0 : 2 * pp * ss / (pp + ss);
  return out;
}

Outcome metrics_oracle() {
  ConfusionMatrix cm(3);
  const std::size_t rows[3][3] = {{5, 1, 0}, {2, 3, 1}, {0, 0, 4}};
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) cm.add(t, p, rows[t][p]);
  const OvrCounts k = one_vs_rest_counts(cm, 0);
  if (!(k == OvrCounts{5, 8, 2, 1})) {
    return {false, "class 0 counts TP=" + std::to_string(k.tp) + " FP=" + std::to_string(k.fp) +
                       " FN=" + std::to_string(k.fn) + " TN=" + std::to_string(k.tn)};
  }
  std::mt19937_64 rng(2718);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 2 + rng() % 15;
    const std::size_t n = 10 + rng() % 300;
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng() % classes;
      p[i] = rng() % 2 ? t[i] : rng() % classes;
    }
    const auto got = fold_metrics(ConfusionMatrix::from_pairs(t, p, classes));
    const auto want = pair_counting(t, p, classes);
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (std::isnan(want[m]) != std::isnan(got[m])) return {false, "definedness differs for " + std::string(kMetricNames[m])};
      if (!std::isnan(want[m])) worst = std::max(worst, std::abs(got[m] - want[m]));
    }
  }
  return {worst <= 1e-12, "worked example TP=5 FP=2 FN=1 TN=8; 50 random cases, max |diff| " + fmt(worst, 3)};
}

// --- 6 ----------------------------------------------------------------------

Outcome stratification() {
  const auto samples = synth_generate(SyntheticSpec::paper_shaped(4));
  std::vector<std::size_t> left;
  std::vector<std::size_t> gland;
  for (const auto& s : samples) {
    left.push_back(code(s.left_label));
    gland.push_back(code(s.gland_label));
  }
  const LobeHistogram h = lobe_histogram(samples);
  const std::array<std::size_t, 6> want{199, 68, 299, 178, 55, 178};
  if (h.left != want) return {false, "preset left-lobe counts differ from 199/68/299/178/55/178"};

  std::size_t worst = 0;
  for (const auto* labels : {&left, &gland}) {
    const auto split = stratified_kfold(std::span<const std::size_t>(*labels), 10, 0);
    std::set<std::size_t> classes(labels->begin(), labels->end());
    for (const std::size_t c : classes) {
      std::size_t lo = SIZE_MAX, hi = 0;
      for (const auto& f : split.folds) {
        std::size_t n = 0;
        for (const std::size_t i : f) n += (*labels)[i] == c;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      worst = std::max(worst, hi - lo);
    }
  }
  return {worst <= 1, "max per-class fold spread " + std::to_string(worst) + " (left-lobe and gland labels, k=10)"};
}

// --- 7 / 10 -----------------------------------------------------------------

struct OverfitRun {
  double accuracy = 0.0;
  std::vector<double> losses;
  std::vector<std::uint8_t> checkpoint;
  double seconds = 0.0;
};

OverfitRun overfit_run() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.image_size = 32;
  mc.entry_kernels = {1, 7};
  TrainConfig tc;
  tc.epochs = 100;
  tc.decay_epochs = 100;
  tc.batch_size = 2;
  tc.seed = 0;
  const auto samples = synth_generate(SyntheticSpec::balanced16(10, 32, 0.05, 0));
  auto model = GlandClassifier<float>::build(mc, 0);
  OverfitRun r;
  const auto history = train(model, samples, tc, [](const EpochStats& s) {
    if ((s.epoch + 1) % 10 == 0) std::cerr << "  overfit epoch " << s.epoch + 1 << " loss " << s.mean_loss << "\n";
  });
  for (const auto& h : history) r.losses.push_back(h.mean_loss);
  r.accuracy = gland_accuracy(samples, predict(model, samples));
  r.checkpoint = encode_checkpoint(snapshot(std::as_const(model).parameter_ptrs()));
  r.seconds = seconds_since(t0);
  return r;
}

Outcome overfit(const OverfitRun& r) {
  return {r.accuracy >= 0.95, "training-set gland accuracy " + fmt(r.accuracy) + " after 100 epochs on 160 samples, " +
                                  fmt(r.seconds, 3) + " s"};
}

Outcome determinism(const OverfitRun& a, const OverfitRun& b) {
  const bool same_ckpt = a.checkpoint == b.checkpoint;
  bool same_metrics = a.accuracy == b.accuracy && a.losses.size() == b.losses.size();
  for (std::size_t i = 0; same_metrics && i < a.losses.size(); ++i) same_metrics = a.losses[i] == b.losses[i];
  return {same_ckpt && same_metrics, std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") + " (" +
                                         std::to_string(a.checkpoint.size()) + " bytes), metrics " +
                                         (same_metrics ? "identical" : "differ")};
}

// --- 8 ----------------------------------------------------------------------

Outcome generalization(const std::filesystem::path& out) {
  const auto t0 = Clock::now();
  ExperimentConfig c;
  c.dataset.preset = "balanced16";
  c.dataset.per_class = 20;
  c.dataset.noise_sigma = 0.05;
  c.model.image_size = 32;
  c.model.entry_kernels = {1, 7};
  c.training.epochs = 30;
  c.training.decay_epochs = 30;
  c.cv.k = 5;
  c.out = out;
  c.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto samples = load_dataset(c);
  const auto r = run_crossval(c, samples, [](std::string_view line) {
    if (line.find("held-out") != std::string_view::npos) std::cerr << "  " << line << "\n";
  });
  const double acc = r.report.mean[static_cast<std::size_t>(Metric::Accuracy)];
  const double secs = seconds_since(t0);
  return {acc >= 0.60 && secs < 90 * 60.0, "mean held-out gland accuracy " +
                                               format_mean_std(acc, r.report.stddev[0]) + " on " +
                                               std::to_string(samples.size()) + " samples, untrained " +
                                               format_mean_std(r.untrained.mean[0], r.untrained.stddev[0]) + ", " +
                                               fmt(secs, 4) + " s"};
}

// --- 9 ----------------------------------------------------------------------

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  std::getline(ss, cell, '|');  // before the leading bar
  while (std::getline(ss, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!cells.empty() && cells.back().empty()) cells.pop_back();
  return cells;
}

Outcome ablation_harness(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.dataset.per_class = 2;
  c.model.image_size = 16;
  c.model.stem_channels = 4;
  c.model.middle_blocks = 1;
  c.cv.k = 2;
  c.ablation_epochs = 1;
  c.training.decay_epochs = 1;
  c.out = out;
  const auto samples = load_dataset(c);
  const auto rows = run_ablate(c, samples);
  std::ifstream f(out / "ablation.md");
  std::vector<std::string> table;
  for (std::string line; std::getline(f, line);) {
    if (line.rfind("|", 0) == 0) table.push_back(line);
    else if (!table.empty()) break;  // first table only
  }
  const std::vector<std::string> head{"Kernel size", "Accuracy", "Precision (PPV)", "Recall (Sensitivity)",
                                      "Specificity", "NPV", "F1"};
  const std::vector<std::string> labels{"1 & 5", "1 & 7", "3 & 5", "3 & 7", "3 × 3", "5 × 5", "7 × 7"};
  if (table.size() != 2 + labels.size()) return {false, "table has " + std::to_string(table.size()) + " lines"};
  if (split_cells(table[0]) != head) return {false, "header mismatch: " + table[0]};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto cells = split_cells(table[2 + i]);
    if (cells.size() != head.size() || cells[0] != labels[i]) return {false, "row " + std::to_string(i) + ": " + table[2 + i]};
    for (std::size_t j = 1; j < cells.size(); ++j) {
      if (cells[j] != "n/a" && cells[j].find(" ± ") == std::string::npos) return {false, "cell not mean ± std: " + cells[j]};
    }
  }
  return {rows.size() == 7, "7 rows x 6 metric columns, mean ± std cells"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected{1, 2, 3, 4, 5, 6, 7, 9, 10};
  if (argc > 1) {
    selected.clear();
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a == "all") {
        for (int c = 1; c <= 10; ++c) selected.insert(c);
      } else {
        selected.insert(std::stoi(a));
      }
    }
  }
  const auto scratch = std::filesystem::temp_directory_path() / "dualscope_acceptance";
  std::filesystem::remove_all(scratch);
  std::filesystem::create_directories(scratch);

  const char* names[] = {"",
                         "gradient correctness",
                         "shape oracle",
                         "fusion algebra",
                         "loss oracle",
                         "metrics oracle",
                         "stratification",
                         "overfit run",
                         "generalization smoke",
                         "ablation harness",
                         "determinism"};
  int failures = 0;
  auto report = [&](int n, const Outcome& o) {
    std::cout << "criterion " << n << " [PRIMARY] " << names[n] << ": " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << ")" << std::endl;
    failures += o.pass ? 0 : 1;
  };
  auto guarded = [&](int n, const std::function<Outcome()>& fn) {
    if (!selected.count(n)) return;
    try {
      report(n, fn());
    } catch (const std::exception& e) {
      report(n, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, gradient_correctness);
  guarded(2, shape_oracle);
  guarded(3, fusion_algebra);
  guarded(4, loss_oracle);
  guarded(5, metrics_oracle);
  guarded(6, stratification);

  std::optional<OverfitRun> first;
  if (selected.count(7) || selected.count(10)) {
    try {
      first = overfit_run();
    } catch (const std::exception& e) {
      if (selected.count(7)) report(7, {false, std::string("exception: ") + e.what()});
    }
  }
  if (first) guarded(7, [&] { return overfit(*first); });
  guarded(8, [&] { return generalization(scratch / "crossval"); });
  guarded(9, [&] { return ablation_harness(scratch / "ablate"); });
  guarded(10, [&] {
    if (!first) return Outcome{false, "first run failed"};
    return determinism(*first, overfit_run());
  });
  return failures == 0 ? 0 : 1;
}
