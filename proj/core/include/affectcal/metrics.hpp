#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal::metrics {

// 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept;

// Per-class true positive / false positive / false negative counts.
struct ClassCounts {
  std::vector<std::int64_t> tp, fp, fn, support;
  std::int64_t correct = 0;  // exact matches
  std::int64_t frames = 0;

  explicit ClassCounts(std::size_t num_classes = 0)
      : tp(num_classes), fp(num_classes), fn(num_classes), support(num_classes) {}
  void merge(const ClassCounts& other);
};

struct F1Result {
  std::vector<double> per_class;
  double macro = 0.0;
  std::vector<std::int64_t> support;
  std::int64_t frames = 0;
};

F1Result f1_from_counts(const ClassCounts& counts);

// Unannotated frames (mask 0) are skipped; an empty mask means all annotated.
ClassCounts count_single_label(std::span<const int> pred, std::span<const int> truth,
                               std::span<const std::uint8_t> mask, std::size_t num_classes);
ClassCounts count_multilabel(std::span<const std::array<std::uint8_t, kNumAu>> pred,
                             std::span<const std::array<std::uint8_t, kNumAu>> truth,
                             std::span<const std::uint8_t> mask);

// Macro F1 over all C classes; classes absent from both streams count as 0.
// Throws EmptyInputError when no frame is annotated.
F1Result macro_f1(std::span<const int> pred, std::span<const int> truth,
                  std::span<const std::uint8_t> mask, std::size_t num_classes);
F1Result macro_f1(const LabelTrack& pred, const LabelTrack& truth);

// Per-channel binary F1 of the positive class; macro over the 12 channels.
F1Result multilabel_f1(std::span<const std::array<std::uint8_t, kNumAu>> pred,
                       std::span<const std::array<std::uint8_t, kNumAu>> truth,
                       std::span<const std::uint8_t> mask);
F1Result multilabel_f1(const LabelTrack& pred, const LabelTrack& truth);

// Fraction of annotated frames predicted exactly (all 12 bits for AU).
double accuracy(std::span<const int> pred, std::span<const int> truth,
                std::span<const std::uint8_t> mask);
double accuracy(const LabelTrack& pred, const LabelTrack& truth);

// Concordance correlation coefficient with population statistics:
//   2 cov(x, y) / (var x + var y + (mean x - mean y)^2 + 1e-8),
// and 0 when both variances are below 1e-8.
double ccc(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  TaskKind task = TaskKind::Expr;
  std::string name;  // video id, or "pooled" / "mean"
  std::vector<double> per_class_f1;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double ccc_v = 0.0;
  double ccc_a = 0.0;
  double p_va = 0.0;
  std::vector<std::int64_t> support;
  std::int64_t num_frames_evaluated = 0;
};

MetricReport va_report(const LabelTrack& pred, const LabelTrack& truth);
// Dispatches on truth.task.
MetricReport report(const LabelTrack& pred, const LabelTrack& truth);

// Accumulates per-video results. pooled() evaluates all frames of all videos
// together; video_mean() averages the per-video metrics.
class Evaluator {
 public:
  explicit Evaluator(TaskKind task);

  void add(const LabelTrack& pred, const LabelTrack& truth);

  const std::vector<MetricReport>& per_video() const noexcept { return videos_; }
  MetricReport pooled() const;
  MetricReport video_mean() const;

 private:
  TaskKind task_;
  std::vector<MetricReport> videos_;
  ClassCounts counts_;
  std::vector<double> pv_, pa_, tv_, ta_;
};

std::string to_json(const MetricReport& report, int indent = 2);
// Aligned plain-text table, one line per metric.
std::string to_table(const MetricReport& report);
// Header plus one row per report.
std::string to_csv(std::span<const MetricReport> reports);

}  // namespace affectcal::metrics
