#pragma once

// Confusion matrices, one-vs-rest metrics, fold aggregation, stratified
// k-fold splitting, subgroup evaluation, and the CSV / Markdown report
// formats.
//
// Per class c (one-vs-rest):
//   accuracy    (TP+TN) / (TP+TN+FP+FN)
//   ppv         TP / (TP+FP)
//   sensitivity TP / (TP+FN)
//   specificity TN / (TN+FP)
//   npv         TN / (TN+FN)
// Macro metrics average the defined per-class values over the classes that
// occur in the truth or the predictions; a zero denominator makes the value
// undefined for that class, and it is left out rather than counted as 0.
// F1 is 2*P*S/(P+S) on the averaged PPV and sensitivity. The headline
// accuracy is trace/total.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualscope/data.hpp"
#include "dualscope/labels.hpp"

namespace dualscope {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kGlandClassCount);

  static ConfusionMatrix from_pairs(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                    std::size_t classes = kGlandClassCount);

  /// Throws std::out_of_range for a code >= classes().
  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);

  [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
  [[nodiscard]] std::size_t at(std::size_t truth, std::size_t predicted) const;
  [[nodiscard]] std::size_t total() const noexcept;
  [[nodiscard]] std::size_t trace() const noexcept;
  [[nodiscard]] std::size_t row_sum(std::size_t truth) const;
  [[nodiscard]] std::size_t column_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

struct OvrCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  friend bool operator==(const OvrCounts&, const OvrCounts&) = default;
};

OvrCounts one_vs_rest_counts(const ConfusionMatrix& cm, std::size_t c);

enum class Averaging { Macro, Micro };

/// Report order of the metrics. Accuracy is trace/total; OvrAccuracy is
/// the averaged one-vs-rest accuracy.
enum class Metric : std::uint8_t { Accuracy = 0, Ppv, Sensitivity, Specificity, Npv, F1, OvrAccuracy };
inline constexpr std::size_t kMetricCount = 7;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "accuracy", "ppv", "sensitivity", "specificity", "npv", "f1", "ovr_accuracy"};
/// Column headings used in Markdown tables.
inline constexpr std::array<std::string_view, kMetricCount> kMetricTitles = {
    "Accuracy", "Precision (PPV)", "Recall (Sensitivity)", "Specificity", "NPV", "F1", "OvR accuracy"};

/// A NaN entry means the metric is undefined for every class.
using MetricValues = std::array<double, kMetricCount>;

/// Throws std::invalid_argument if cm is empty.
MetricValues fold_metrics(const ConfusionMatrix& cm, Averaging averaging = Averaging::Macro);

/// Per-class F1 = 2TP / (2TP+FP+FN); absent for classes without support.
std::vector<std::optional<double>> per_class_f1(const ConfusionMatrix& cm);

struct FoldReport {
  std::size_t fold = 0;
  ConfusionMatrix confusion;
  MetricValues metrics{};
  std::vector<std::optional<double>> class_f1;
  /// Names of per-class ratios left out of the macro averages.
  std::vector<std::string> undefined;
};

FoldReport make_fold_report(std::size_t fold, const ConfusionMatrix& cm, Averaging averaging = Averaging::Macro);

struct RunReport {
  std::vector<FoldReport> folds;
  MetricValues mean{};
  MetricValues variance{};  // population variance over folds
  MetricValues stddev{};
  /// Mean per-class F1 over the folds where the class had support.
  std::vector<std::optional<double>> mean_class_f1;
};

/// Skips NaN fold values per metric. Throws std::invalid_argument for no folds.
RunReport aggregate(std::vector<FoldReport> folds);

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;  // held-out indices, ascending
  std::vector<std::string> warnings;
};

/// Each class's indices are shuffled with `seed` and dealt round-robin,
/// continuing from the fold where the previous class stopped, so class
/// counts per fold differ by at most one and fold sizes stay balanced.
/// Classes with fewer than k members produce a warning. Throws
/// std::invalid_argument if k < 2 or k exceeds the number of labels.
FoldSplit stratified_kfold(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed);
FoldSplit stratified_kfold(std::span<const GlandClass> labels, std::size_t k, std::uint64_t seed);

/// Complement of fold `i`, ascending.
std::vector<std::size_t> training_indices(const FoldSplit& split, std::size_t i, std::size_t total);

// --- predictions -----------------------------------------------------------

struct PredictionRecord {
  std::size_t index = 0;  // position in the dataset
  std::string patient_id;
  std::size_t fold = 0;
  Gender gender = Gender::Unknown;
  AgeGroup age_group = AgeGroup::Unknown;
  LobeClass left_true = LobeClass::Normal;
  LobeClass right_true = LobeClass::Normal;
  GlandClass gland_true = GlandClass::Normal;
  LobeClass left_pred = LobeClass::Normal;
  LobeClass right_pred = LobeClass::Normal;
  GlandClass gland_pred = GlandClass::Normal;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

inline constexpr std::string_view kPredictionsHeader =
    "index,patient_id,fold,gender,age_group,left_true,right_true,gland_true,left_pred,right_pred,gland_pred";

ConfusionMatrix gland_confusion(std::span<const PredictionRecord> records);

enum class Attribute { Gender, AgeGroup };
/// Throws std::invalid_argument for anything but "gender" / "age_group".
Attribute parse_attribute(std::string_view text);

struct SubgroupRow {
  std::string group;
  std::size_t samples = 0;
  RunReport report;  // per fold, restricted to the group
};

struct SubgroupResult {
  Attribute attribute = Attribute::Gender;
  std::vector<SubgroupRow> rows;
  std::vector<std::string> notices;  // skipped groups
};

/// Splits the records by attribute value and evaluates every fold of each
/// group. The unknown value only gets a row when it occurs; other empty
/// groups are skipped with a notice.
SubgroupResult subgroup_eval(std::span<const PredictionRecord> records, Attribute attribute,
                             Averaging averaging = Averaging::Macro);

// --- files -----------------------------------------------------------------

void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRecord> records);
/// Throws FormatError naming the row; std::runtime_error if unreadable.
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path);

/// One row per fold per metric, then the mean/variance/std rows:
///   fold,metric,value
///   0,accuracy,0.9
///   mean,accuracy,0.9
struct MetricRow {
  std::string fold;
  std::string metric;
  double value = 0.0;
  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};
std::vector<MetricRow> metric_rows(const RunReport& report);
void write_metrics_csv(const std::filesystem::path& path, const RunReport& report);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

/// `row` column plus one column per gland class; empty cells for absent
/// classes.
struct ClassF1Row {
  std::string row;
  std::vector<std::optional<double>> values;
  friend bool operator==(const ClassF1Row&, const ClassF1Row&) = default;
};
void write_class_f1_csv(const std::filesystem::path& path, std::span<const ClassF1Row> rows);
std::vector<ClassF1Row> read_class_f1_csv(const std::filesystem::path& path);
std::vector<ClassF1Row> class_f1_rows(const RunReport& report);

/// "0.909 ± 0.048"; "n/a" when the mean is undefined.
std::string format_mean_std(double mean, double stddev);

struct TableRow {
  std::string label;
  const RunReport* report = nullptr;
};
/// Markdown table: first column `first_heading`, then the six metrics as
/// mean ± std.
std::string metrics_table(std::string_view first_heading, std::span<const TableRow> rows);

/// Full report of one cross-validation run: the metric table, variances,
/// per-fold values and undefined-ratio notes.
std::string run_markdown(std::string_view title, const RunReport& report);

std::string subgroup_markdown(const SubgroupResult& result);
std::vector<ClassF1Row> subgroup_class_f1_rows(const SubgroupResult& result);

}  // namespace dualscope
