#include "dualscope/eval.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "csv.hpp"
#include "dualscope/error.hpp"
#include "rng.hpp"

namespace dualscope {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double s) {
  if (std::isnan(p) || std::isnan(s)) return kNaN;
  if (p + s == 0.0) return 0.0;
  return 2.0 * p * s / (p + s);
}

// Shortest decimal that reads back to the same double.
std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& where) {
  if (text == "nan") return kNaN;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(where + ": '" + text + "' is not a number");
  }
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& where) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError(where + ": '" + text + "' is not a count");
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

// Lines of a CSV after checking the header; yields (row number, cells).
std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(const std::filesystem::path& path,
                                                                       std::string_view header) {
  std::ifstream f = open_in(path);
  std::string line;
  if (!std::getline(f, line) || detail::trim(line) != header) {
    throw FormatError(path.string() + ": header must be '" + std::string(header) + "'");
  }
  const std::size_t columns = detail::split_csv_line(header).size();
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != columns) {
      throw FormatError(path.string() + " row " + std::to_string(row) + ": expected " + std::to_string(columns) +
                        " columns, found " + std::to_string(cells.size()));
    }
    out.emplace_back(row, std::move(cells));
  }
  return out;
}

std::string class_f1_header() {
  std::string h = "row";
  for (const auto n : kGlandClassNames) h += "," + std::string(n);
  return h;
}

}  // namespace

// --- confusion matrix ------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                            std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("truth and prediction lengths differ (" + std::to_string(truth.size()) + " vs " +
                                std::to_string(predicted.size()) + ")");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  if (truth >= classes_ || predicted >= classes_) {
    throw std::out_of_range("class code out of range for a " + std::to_string(classes_) + "-class matrix");
  }
  counts_[truth * classes_ + predicted] += count;
}

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= classes_ || predicted >= classes_) throw std::out_of_range("confusion matrix index");
  return counts_[truth * classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes_; ++c) t += counts_[c * classes_ + c];
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

OvrCounts one_vs_rest_counts(const ConfusionMatrix& cm, std::size_t c) {
  OvrCounts r;
  r.tp = cm.at(c, c);
  r.fp = cm.column_sum(c) - r.tp;
  r.fn = cm.row_sum(c) - r.tp;
  r.tn = cm.total() - r.tp - r.fp - r.fn;
  return r;
}

// --- metrics ---------------------------------------------------------------

namespace {

struct MacroResult {
  MetricValues values{};
  std::vector<std::string> undefined;
};

MacroResult compute_metrics(const ConfusionMatrix& cm, Averaging averaging) {
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("cannot compute metrics of an empty confusion matrix");
  MacroResult out;
  out.values.fill(kNaN);
  out.values[static_cast<std::size_t>(Metric::Accuracy)] = static_cast<double>(cm.trace()) / static_cast<double>(total);

  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    if (cm.row_sum(c) > 0 || cm.column_sum(c) > 0) present.push_back(c);
  }

  if (averaging == Averaging::Micro) {
    OvrCounts sum;
    for (const std::size_t c : present) {
      const OvrCounts k = one_vs_rest_counts(cm, c);
      sum.tp += k.tp;
      sum.tn += k.tn;
      sum.fp += k.fp;
      sum.fn += k.fn;
    }
    auto& v = out.values;
    v[static_cast<std::size_t>(Metric::OvrAccuracy)] = ratio(sum.tp + sum.tn, sum.tp + sum.tn + sum.fp + sum.fn);
    v[static_cast<std::size_t>(Metric::Ppv)] = ratio(sum.tp, sum.tp + sum.fp);
    v[static_cast<std::size_t>(Metric::Sensitivity)] = ratio(sum.tp, sum.tp + sum.fn);
    v[static_cast<std::size_t>(Metric::Specificity)] = ratio(sum.tn, sum.tn + sum.fp);
    v[static_cast<std::size_t>(Metric::Npv)] = ratio(sum.tn, sum.tn + sum.fn);
  } else {
    std::array<double, kMetricCount> sums{};
    std::array<std::size_t, kMetricCount> counts{};
    auto put = [&](Metric m, double value, std::size_t c) {
      const auto i = static_cast<std::size_t>(m);
      if (std::isnan(value)) {
        const std::string cls = cm.classes() == kGlandClassCount ? std::string(kGlandClassNames[c]) : std::to_string(c);
        out.undefined.push_back(std::string(kMetricNames[i]) + "[" + cls + "]");
        return;
      }
      sums[i] += value;
      ++counts[i];
    };
    for (const std::size_t c : present) {
      const OvrCounts k = one_vs_rest_counts(cm, c);
      put(Metric::OvrAccuracy, ratio(k.tp + k.tn, total), c);
      put(Metric::Ppv, ratio(k.tp, k.tp + k.fp), c);
      put(Metric::Sensitivity, ratio(k.tp, k.tp + k.fn), c);
      put(Metric::Specificity, ratio(k.tn, k.tn + k.fp), c);
      put(Metric::Npv, ratio(k.tn, k.tn + k.fn), c);
    }
    for (const Metric m : {Metric::OvrAccuracy, Metric::Ppv, Metric::Sensitivity, Metric::Specificity, Metric::Npv}) {
      const auto i = static_cast<std::size_t>(m);
      out.values[i] = counts[i] == 0 ? kNaN : sums[i] / static_cast<double>(counts[i]);
    }
  }
  out.values[static_cast<std::size_t>(Metric::F1)] =
      f1_of(out.values[static_cast<std::size_t>(Metric::Ppv)], out.values[static_cast<std::size_t>(Metric::Sensitivity)]);
  return out;
}

}  // namespace

MetricValues fold_metrics(const ConfusionMatrix& cm, Averaging averaging) { return compute_metrics(cm, averaging).values; }

std::vector<std::optional<double>> per_class_f1(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const OvrCounts k = one_vs_rest_counts(cm, c);
    if (k.tp + k.fn == 0) continue;
    out[c] = 2.0 * static_cast<double>(k.tp) / static_cast<double>(2 * k.tp + k.fp + k.fn);
  }
  return out;
}

FoldReport make_fold_report(std::size_t fold, const ConfusionMatrix& cm, Averaging averaging) {
  MacroResult m = compute_metrics(cm, averaging);
  FoldReport r{fold, cm, m.values, per_class_f1(cm), std::move(m.undefined)};
  return r;
}

RunReport aggregate(std::vector<FoldReport> folds) {
  if (folds.empty()) throw std::invalid_argument("aggregate needs at least one fold");
  RunReport r;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::vector<double> xs;
    for (const auto& f : folds) {
      if (!std::isnan(f.metrics[m])) xs.push_back(f.metrics[m]);
    }
    if (xs.empty()) {
      r.mean[m] = r.variance[m] = r.stddev[m] = kNaN;
      continue;
    }
    double sum = 0.0;
    for (const double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double sq = 0.0;
    for (const double x : xs) sq += (x - mean) * (x - mean);
    r.mean[m] = mean;
    r.variance[m] = sq / static_cast<double>(xs.size());
    r.stddev[m] = std::sqrt(r.variance[m]);
  }
  const std::size_t classes = folds.front().class_f1.size();
  r.mean_class_f1.assign(classes, std::nullopt);
  for (std::size_t c = 0; c < classes; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
      if (c < f.class_f1.size() && f.class_f1[c]) {
        sum += *f.class_f1[c];
        ++n;
      }
    }
    if (n > 0) r.mean_class_f1[c] = sum / static_cast<double>(n);
  }
  r.folds = std::move(folds);
  return r;
}

// --- stratified folds ------------------------------------------------------

FoldSplit stratified_kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2, got " + std::to_string(k));
  if (k > labels.size()) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " + std::to_string(labels.size()) +
                                " samples");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  FoldSplit split;
  split.folds.resize(k);
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(label + 1)));
    detail::shuffle(members.begin(), members.end(), rng);
    for (const std::size_t idx : members) {
      split.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
    if (members.size() < k) {
      split.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                               " samples, fewer than k = " + std::to_string(k) + "; some folds lack it");
    }
  }
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

FoldSplit stratified_kfold(std::span<const GlandClass> labels, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> codes(labels.size());
  std::transform(labels.begin(), labels.end(), codes.begin(), [](GlandClass g) { return code(g); });
  return stratified_kfold(std::span<const std::size_t>(codes), k, seed);
}

std::vector<std::size_t> training_indices(const FoldSplit& split, std::size_t i, std::size_t total) {
  std::vector<bool> held(total, false);
  for (const std::size_t idx : split.folds.at(i)) held.at(idx) = true;
  std::vector<std::size_t> out;
  out.reserve(total);
  for (std::size_t j = 0; j < total; ++j) {
    if (!held[j]) out.push_back(j);
  }
  return out;
}

// --- predictions and subgroups --------------------------------------------

ConfusionMatrix gland_confusion(std::span<const PredictionRecord> records) {
  ConfusionMatrix cm(kGlandClassCount);
  for (const auto& r : records) cm.add(code(r.gland_true), code(r.gland_pred));
  return cm;
}

Attribute parse_attribute(std::string_view text) {
  if (text == "gender") return Attribute::Gender;
  if (text == "age_group") return Attribute::AgeGroup;
  throw std::invalid_argument("unknown attribute '" + std::string(text) + "' (expected gender or age_group)");
}

SubgroupResult subgroup_eval(std::span<const PredictionRecord> records, Attribute attribute, Averaging averaging) {
  SubgroupResult result;
  result.attribute = attribute;
  const std::size_t values = attribute == Attribute::Gender ? kGenderNames.size() : kAgeGroupNames.size();
  for (std::size_t v = 0; v < values; ++v) {
    const bool unknown = v + 1 == values;
    const std::string group(attribute == Attribute::Gender ? kGenderNames[v] : kAgeGroupNames[v]);
    std::map<std::size_t, std::vector<PredictionRecord>> by_fold;
    std::size_t n = 0;
    for (const auto& r : records) {
      const std::size_t rv = attribute == Attribute::Gender ? static_cast<std::size_t>(r.gender)
                                                            : static_cast<std::size_t>(r.age_group);
      if (rv != v) continue;
      by_fold[r.fold].push_back(r);
      ++n;
    }
    if (n == 0) {
      if (!unknown) result.notices.push_back("group '" + group + "' has no samples; skipped");
      continue;
    }
    std::vector<FoldReport> folds;
    for (const auto& [fold, recs] : by_fold) folds.push_back(make_fold_report(fold, gland_confusion(recs), averaging));
    result.rows.push_back(SubgroupRow{group, n, aggregate(std::move(folds))});
  }
  return result;
}

// --- files -----------------------------------------------------------------

void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
  std::ofstream f = open_out(path);
  f << kPredictionsHeader << "\n";
  for (const auto& r : records) {
    f << r.index << "," << r.patient_id << "," << r.fold << "," << name(r.gender) << "," << name(r.age_group) << ","
      << name(r.left_true) << "," << name(r.right_true) << "," << name(r.gland_true) << "," << name(r.left_pred)
      << "," << name(r.right_pred) << "," << name(r.gland_pred) << "\n";
  }
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for (const auto& [row, c] : read_csv(path, kPredictionsHeader)) {
    const std::string where = path.string() + " row " + std::to_string(row);
    try {
      PredictionRecord r;
      r.index = parse_count(c[0], where);
      r.patient_id = c[1];
      r.fold = parse_count(c[2], where);
      r.gender = parse_gender(c[3]);
      r.age_group = parse_age_group(c[4]);
      r.left_true = parse_lobe_class(c[5]);
      r.right_true = parse_lobe_class(c[6]);
      r.gland_true = parse_gland_class(c[7]);
      r.left_pred = parse_lobe_class(c[8]);
      r.right_pred = parse_lobe_class(c[9]);
      r.gland_pred = parse_gland_class(c[10]);
      if (r.gland_true != fuse_labels(r.left_true, r.right_true)) {
        throw FormatError("gland_true '" + std::string(name(r.gland_true)) + "' contradicts the lobe labels");
      }
      out.push_back(std::move(r));
    } catch (const FormatError& e) {
      if (std::string_view(e.what()).starts_with(where)) throw;
      throw FormatError(where + ": " + e.what());
    } catch (const UnknownLabelError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<MetricRow> metric_rows(const RunReport& report) {
  std::vector<MetricRow> rows;
  for (const auto& f : report.folds) {
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      rows.push_back({std::to_string(f.fold), std::string(kMetricNames[m]), f.metrics[m]});
    }
  }
  const std::pair<const char*, const MetricValues*> summary[] = {
      {"mean", &report.mean}, {"variance", &report.variance}, {"std", &report.stddev}};
  for (const auto& [label, values] : summary) {
    for (std::size_t m = 0; m < kMetricCount; ++m) rows.push_back({label, std::string(kMetricNames[m]), (*values)[m]});
  }
  return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const RunReport& report) {
  std::ofstream f = open_out(path);
  f << "fold,metric,value\n";
  for (const auto& r : metric_rows(report)) f << r.fold << "," << r.metric << "," << format_double(r.value) << "\n";
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::vector<MetricRow> out;
  for (const auto& [row, c] : read_csv(path, "fold,metric,value")) {
    const std::string where = path.string() + " row " + std::to_string(row);
    if (std::find(kMetricNames.begin(), kMetricNames.end(), c[1]) == kMetricNames.end()) {
      throw FormatError(where + ": unknown metric '" + c[1] + "'");
    }
    out.push_back({c[0], c[1], parse_double(c[2], where)});
  }
  return out;
}

std::vector<ClassF1Row> class_f1_rows(const RunReport& report) {
  std::vector<ClassF1Row> rows;
  for (const auto& f : report.folds) rows.push_back({"fold" + std::to_string(f.fold), f.class_f1});
  rows.push_back({"mean", report.mean_class_f1});
  return rows;
}

void write_class_f1_csv(const std::filesystem::path& path, std::span<const ClassF1Row> rows) {
  std::ofstream f = open_out(path);
  f << class_f1_header() << "\n";
  for (const auto& r : rows) {
    f << r.row;
    for (std::size_t c = 0; c < kGlandClassCount; ++c) {
      f << ",";
      if (c < r.values.size() && r.values[c]) f << format_double(*r.values[c]);
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<ClassF1Row> read_class_f1_csv(const std::filesystem::path& path) {
  std::vector<ClassF1Row> out;
  const std::string header = class_f1_header();
  for (const auto& [row, c] : read_csv(path, header)) {
    const std::string where = path.string() + " row " + std::to_string(row);
    ClassF1Row r{c[0], std::vector<std::optional<double>>(kGlandClassCount)};
    for (std::size_t i = 0; i < kGlandClassCount; ++i) {
      if (!c[i + 1].empty()) r.values[i] = parse_double(c[i + 1], where);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_mean_std(double mean, double stddev) {
  if (std::isnan(mean)) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << mean << " ± " << stddev;
  return s.str();
}

std::string metrics_table(std::string_view first_heading, std::span<const TableRow> rows) {
  std::ostringstream s;
  s << "| " << first_heading << " |";
  for (std::size_t m = 0; m < 6; ++m) s << " " << kMetricTitles[m] << " |";
  s << "\n|---|";
  for (std::size_t m = 0; m < 6; ++m) s << "---|";
  s << "\n";
  for (const auto& r : rows) {
    s << "| " << r.label << " |";
    for (std::size_t m = 0; m < 6; ++m) s << " " << format_mean_std(r.report->mean[m], r.report->stddev[m]) << " |";
    s << "\n";
  }
  return s.str();
}

std::string run_markdown(std::string_view title, const RunReport& report) {
  std::ostringstream s;
  s << "# " << title << "\n\n";
  s << "Gland-level metrics over " << report.folds.size() << " folds (mean ± std).\n\n";
  const TableRow row{"all", &report};
  s << metrics_table("Samples", std::span<const TableRow>(&row, 1)) << "\n";

  s << "## Variance and one-vs-rest accuracy\n\n| Metric | Mean | Variance | Std |\n|---|---|---|---|\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    s << "| " << kMetricTitles[m] << " | " << format_double(report.mean[m]) << " | "
      << format_double(report.variance[m]) << " | " << format_double(report.stddev[m]) << " |\n";
  }

  s << "\n## Folds\n\n| Fold | Samples |";
  for (std::size_t m = 0; m < kMetricCount; ++m) s << " " << kMetricTitles[m] << " |";
  s << "\n|---|---|";
  for (std::size_t m = 0; m < kMetricCount; ++m) s << "---|";
  s << "\n";
  for (const auto& f : report.folds) {
    s << "| " << f.fold << " | " << f.confusion.total() << " |";
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (std::isnan(f.metrics[m])) {
        s << " n/a |";
      } else {
        s << " " << std::fixed << std::setprecision(4) << f.metrics[m] << " |";
      }
    }
    s << "\n";
  }

  bool any_undefined = false;
  for (const auto& f : report.folds) any_undefined = any_undefined || !f.undefined.empty();
  if (any_undefined) {
    s << "\n## Ratios left out of the averages (zero denominator)\n\n";
    for (const auto& f : report.folds) {
      if (f.undefined.empty()) continue;
      s << "- fold " << f.fold << ":";
      for (const auto& u : f.undefined) s << " " << u;
      s << "\n";
    }
  }
  return s.str();
}

std::string subgroup_markdown(const SubgroupResult& result) {
  std::ostringstream s;
  const bool gender = result.attribute == Attribute::Gender;
  s << "# Subgroup comparison by " << (gender ? "gender" : "age group") << "\n\n";
  std::vector<TableRow> rows;
  std::vector<std::string> labels;
  labels.reserve(result.rows.size());
  for (const auto& r : result.rows) {
    std::string label = r.group;
    if (!label.empty()) label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    labels.push_back(label + " (n=" + std::to_string(r.samples) + ")");
  }
  for (std::size_t i = 0; i < result.rows.size(); ++i) rows.push_back({labels[i], &result.rows[i].report});
  s << metrics_table(gender ? "Gender" : "Age group", rows);
  for (const auto& n : result.notices) s << "\nNote: " << n << "\n";
  return s.str();
}

std::vector<ClassF1Row> subgroup_class_f1_rows(const SubgroupResult& result) {
  std::vector<ClassF1Row> rows;
  for (const auto& r : result.rows) rows.push_back({r.group, r.report.mean_class_f1});
  return rows;
}

}  // namespace dualscope
