#include "affectcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "json.hpp"

namespace affectcal::metrics {

namespace {

constexpr double kCccEps = 1e-8;

bool annotated(std::span<const std::uint8_t> mask, std::size_t i) {
  return mask.empty() || mask[i] != 0;
}

void require_aligned(std::size_t a, std::size_t b, std::span<const std::uint8_t> mask) {
  if (a != b || (!mask.empty() && mask.size() != a)) {
    throw ShapeError("metrics: prediction, truth and mask lengths differ");
  }
}

void require_tracks(const LabelTrack& pred, const LabelTrack& truth) {
  require_same_timeline(pred.frame_ids, truth.frame_ids, "metrics '" + truth.video_id + "'");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double f1_score(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept {
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void ClassCounts::merge(const ClassCounts& other) {
  if (tp.empty()) {
    *this = other;
    return;
  }
  if (other.tp.size() != tp.size()) throw ShapeError("metrics: class count mismatch in merge");
  for (std::size_t c = 0; c < tp.size(); ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
    support[c] += other.support[c];
  }
  correct += other.correct;
  frames += other.frames;
}

F1Result f1_from_counts(const ClassCounts& counts) {
  if (counts.frames == 0) throw EmptyInputError("metrics: no annotated frames");
  F1Result r;
  r.per_class.resize(counts.tp.size());
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    r.per_class[c] = f1_score(counts.tp[c], counts.fp[c], counts.fn[c]);
  }
  r.macro = mean_of(r.per_class);
  r.support = counts.support;
  r.frames = counts.frames;
  return r;
}

ClassCounts count_single_label(std::span<const int> pred, std::span<const int> truth,
                               std::span<const std::uint8_t> mask, std::size_t num_classes) {
  require_aligned(pred.size(), truth.size(), mask);
  ClassCounts counts(num_classes);
  const int c_max = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!annotated(mask, i)) continue;
    const int p = pred[i];
    const int t = truth[i];
    if (p < 0 || p >= c_max || t < 0 || t >= c_max) {
      throw ValueError("metrics: class index out of range");
    }
    ++counts.frames;
    ++counts.support[static_cast<std::size_t>(t)];
    if (p == t) {
      ++counts.tp[static_cast<std::size_t>(t)];
      ++counts.correct;
    } else {
      ++counts.fp[static_cast<std::size_t>(p)];
      ++counts.fn[static_cast<std::size_t>(t)];
    }
  }
  return counts;
}

ClassCounts count_multilabel(std::span<const std::array<std::uint8_t, kNumAu>> pred,
                             std::span<const std::array<std::uint8_t, kNumAu>> truth,
                             std::span<const std::uint8_t> mask) {
  require_aligned(pred.size(), truth.size(), mask);
  ClassCounts counts(kNumAu);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!annotated(mask, i)) continue;
    ++counts.frames;
    bool exact = true;
    for (std::size_t c = 0; c < kNumAu; ++c) {
      const bool p = pred[i][c] != 0;
      const bool t = truth[i][c] != 0;
      if (t) ++counts.support[c];
      if (p && t) ++counts.tp[c];
      if (p && !t) ++counts.fp[c];
      if (!p && t) ++counts.fn[c];
      exact = exact && p == t;
    }
    if (exact) ++counts.correct;
  }
  return counts;
}

F1Result macro_f1(std::span<const int> pred, std::span<const int> truth,
                  std::span<const std::uint8_t> mask, std::size_t num_classes) {
  return f1_from_counts(count_single_label(pred, truth, mask, num_classes));
}

F1Result macro_f1(const LabelTrack& pred, const LabelTrack& truth) {
  require_tracks(pred, truth);
  return macro_f1(pred.classes, truth.classes, truth.mask, num_outputs(truth.task));
}

F1Result multilabel_f1(std::span<const std::array<std::uint8_t, kNumAu>> pred,
                       std::span<const std::array<std::uint8_t, kNumAu>> truth,
                       std::span<const std::uint8_t> mask) {
  return f1_from_counts(count_multilabel(pred, truth, mask));
}

F1Result multilabel_f1(const LabelTrack& pred, const LabelTrack& truth) {
  require_tracks(pred, truth);
  return multilabel_f1(pred.au, truth.au, truth.mask);
}

double accuracy(std::span<const int> pred, std::span<const int> truth,
                std::span<const std::uint8_t> mask) {
  require_aligned(pred.size(), truth.size(), mask);
  std::int64_t correct = 0;
  std::int64_t frames = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!annotated(mask, i)) continue;
    ++frames;
    if (pred[i] == truth[i]) ++correct;
  }
  if (frames == 0) throw EmptyInputError("metrics: no annotated frames");
  return static_cast<double>(correct) / static_cast<double>(frames);
}

double accuracy(const LabelTrack& pred, const LabelTrack& truth) {
  require_tracks(pred, truth);
  if (truth.task == TaskKind::AU) {
    const auto counts = count_multilabel(pred.au, truth.au, truth.mask);
    if (counts.frames == 0) throw EmptyInputError("metrics: no annotated frames");
    return static_cast<double>(counts.correct) / static_cast<double>(counts.frames);
  }
  if (truth.task == TaskKind::VA) throw ConfigError("accuracy is undefined for VA");
  return accuracy(pred.classes, truth.classes, truth.mask);
}

double ccc(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("ccc: series lengths differ");
  if (x.size() < 2) throw ShapeError("ccc: needs at least 2 values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double vx = 0.0;
  double vy = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  vx /= n;
  vy /= n;
  cov /= n;
  if (vx < kCccEps && vy < kCccEps) return 0.0;
  return 2.0 * cov / (vx + vy + (mx - my) * (mx - my) + kCccEps);
}

MetricReport va_report(const LabelTrack& pred, const LabelTrack& truth) {
  require_tracks(pred, truth);
  if (pred.task != TaskKind::VA || truth.task != TaskKind::VA) {
    throw ConfigError("va_report needs VA tracks");
  }
  std::vector<double> pv, pa, tv, ta;
  for (std::size_t i = 0; i < truth.num_frames(); ++i) {
    if (!truth.mask[i]) continue;
    pv.push_back(pred.va[i][0]);
    pa.push_back(pred.va[i][1]);
    tv.push_back(truth.va[i][0]);
    ta.push_back(truth.va[i][1]);
  }
  if (tv.empty()) throw EmptyInputError("metrics: no annotated frames");
  MetricReport r;
  r.task = TaskKind::VA;
  r.name = truth.video_id;
  r.num_frames_evaluated = static_cast<std::int64_t>(tv.size());
  if (tv.size() >= 2) {
    r.ccc_v = ccc(pv, tv);
    r.ccc_a = ccc(pa, ta);
  }
  r.p_va = (r.ccc_v + r.ccc_a) / 2.0;
  return r;
}

namespace {

MetricReport from_counts(TaskKind task, const std::string& name, const ClassCounts& counts) {
  const F1Result f1 = f1_from_counts(counts);
  MetricReport r;
  r.task = task;
  r.name = name;
  r.per_class_f1 = f1.per_class;
  r.macro_f1 = f1.macro;
  r.support = f1.support;
  r.num_frames_evaluated = f1.frames;
  r.accuracy = static_cast<double>(counts.correct) / static_cast<double>(counts.frames);
  return r;
}

ClassCounts counts_for(const LabelTrack& pred, const LabelTrack& truth) {
  require_tracks(pred, truth);
  if (truth.task == TaskKind::AU) return count_multilabel(pred.au, truth.au, truth.mask);
  return count_single_label(pred.classes, truth.classes, truth.mask, num_outputs(truth.task));
}

}  // namespace

MetricReport report(const LabelTrack& pred, const LabelTrack& truth) {
  if (truth.task == TaskKind::VA) return va_report(pred, truth);
  return from_counts(truth.task, truth.video_id, counts_for(pred, truth));
}

Evaluator::Evaluator(TaskKind task) : task_(task), counts_(num_outputs(task)) {}

void Evaluator::add(const LabelTrack& pred, const LabelTrack& truth) {
  if (truth.task != task_ && !(is_single_label(truth.task) && is_single_label(task_))) {
    throw ConfigError("evaluator: label track task does not match");
  }
  if (truth.num_annotated() == 0) return;
  if (task_ == TaskKind::VA) {
    videos_.push_back(va_report(pred, truth));
    for (std::size_t i = 0; i < truth.num_frames(); ++i) {
      if (!truth.mask[i]) continue;
      pv_.push_back(pred.va[i][0]);
      pa_.push_back(pred.va[i][1]);
      tv_.push_back(truth.va[i][0]);
      ta_.push_back(truth.va[i][1]);
    }
    return;
  }
  const ClassCounts c = counts_for(pred, truth);
  videos_.push_back(from_counts(task_, truth.video_id, c));
  counts_.merge(c);
}

MetricReport Evaluator::pooled() const {
  if (task_ == TaskKind::VA) {
    if (tv_.empty()) throw EmptyInputError("metrics: no annotated frames");
    MetricReport r;
    r.task = task_;
    r.name = "pooled";
    r.num_frames_evaluated = static_cast<std::int64_t>(tv_.size());
    if (tv_.size() >= 2) {
      r.ccc_v = ccc(pv_, tv_);
      r.ccc_a = ccc(pa_, ta_);
    }
    r.p_va = (r.ccc_v + r.ccc_a) / 2.0;
    return r;
  }
  return from_counts(task_, "pooled", counts_);
}

MetricReport Evaluator::video_mean() const {
  if (videos_.empty()) throw EmptyInputError("metrics: no annotated frames");
  MetricReport r;
  r.task = task_;
  r.name = "mean";
  const double n = static_cast<double>(videos_.size());
  for (const auto& v : videos_) {
    if (r.per_class_f1.empty()) {
      r.per_class_f1.assign(v.per_class_f1.size(), 0.0);
      r.support.assign(v.support.size(), 0);
    }
    for (std::size_t c = 0; c < v.per_class_f1.size(); ++c) r.per_class_f1[c] += v.per_class_f1[c] / n;
    for (std::size_t c = 0; c < v.support.size(); ++c) r.support[c] += v.support[c];
    r.macro_f1 += v.macro_f1 / n;
    r.accuracy += v.accuracy / n;
    r.ccc_v += v.ccc_v / n;
    r.ccc_a += v.ccc_a / n;
    r.num_frames_evaluated += v.num_frames_evaluated;
  }
  r.p_va = (r.ccc_v + r.ccc_a) / 2.0;
  return r;
}

std::string to_json(const MetricReport& r, int indent) {
  nlohmann::ordered_json j;
  j["task"] = std::string(to_string(r.task));
  j["name"] = r.name;
  j["num_frames_evaluated"] = r.num_frames_evaluated;
  if (r.task == TaskKind::VA) {
    j["ccc_v"] = r.ccc_v;
    j["ccc_a"] = r.ccc_a;
    j["p_va"] = r.p_va;
  } else {
    j["macro_f1"] = r.macro_f1;
    j["accuracy"] = r.accuracy;
    j["per_class_f1"] = r.per_class_f1;
    j["support"] = r.support;
  }
  return j.dump(indent);
}

std::string to_table(const MetricReport& r) {
  std::string out;
  char line[160];
  auto add = [&](const std::string& key, double value) {
    std::snprintf(line, sizeof(line), "%-16s %10.6f\n", key.c_str(), value);
    out += line;
  };
  std::snprintf(line, sizeof(line), "%-16s %10s\n", "task", std::string(to_string(r.task)).c_str());
  out += line;
  std::snprintf(line, sizeof(line), "%-16s %10lld\n", "frames",
                static_cast<long long>(r.num_frames_evaluated));
  out += line;
  if (r.task == TaskKind::VA) {
    add("CCC_V", r.ccc_v);
    add("CCC_A", r.ccc_a);
    add("P_VA", r.p_va);
    return out;
  }
  add("macro_F1", r.macro_f1);
  add("accuracy", r.accuracy);
  const LabelSet labels = label_set(r.task);
  for (std::size_t c = 0; c < r.per_class_f1.size(); ++c) {
    const std::string name = c < labels.size() ? labels.names[c] : std::to_string(c);
    add("F1[" + name + "]", r.per_class_f1[c]);
  }
  return out;
}

std::string to_csv(std::span<const MetricReport> reports) {
  if (reports.empty()) return "";
  const TaskKind task = reports.front().task;
  std::string out = "name,frames";
  if (task == TaskKind::VA) {
    out += ",ccc_v,ccc_a,p_va\n";
  } else {
    out += ",macro_f1,accuracy";
    for (std::size_t c = 0; c < num_outputs(task); ++c) out += ",f1_" + std::to_string(c);
    out += '\n';
  }
  for (const auto& r : reports) {
    out += r.name + ',' + std::to_string(r.num_frames_evaluated);
    if (task == TaskKind::VA) {
      out += ',' + format_double(r.ccc_v) + ',' + format_double(r.ccc_a) + ',' + format_double(r.p_va);
    } else {
      out += ',' + format_double(r.macro_f1) + ',' + format_double(r.accuracy);
      for (std::size_t c = 0; c < num_outputs(task); ++c) {
        out += ',' + format_double(c < r.per_class_f1.size() ? r.per_class_f1[c] : 0.0);
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace affectcal::metrics
