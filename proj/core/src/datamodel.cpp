#include "affectcal/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "affectcal/errors.hpp"

namespace affectcal {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void require_finite(const Matrix& m, std::string_view what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw ValueError(std::string(what) + ": non-finite value at row " + std::to_string(r) +
                         ", column " + std::to_string(c));
      }
    }
  }
}

}  // namespace

std::string_view to_string(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::Expr:
      return "expr";
    case TaskKind::VA:
      return "va";
    case TaskKind::AU:
      return "au";
    case TaskKind::VD:
      return "vd";
    case TaskKind::Audio:
      return "audio";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  const std::string n = lower(name);
  if (n == "expr") return TaskKind::Expr;
  if (n == "va") return TaskKind::VA;
  if (n == "au") return TaskKind::AU;
  if (n == "vd") return TaskKind::VD;
  if (n == "audio") return TaskKind::Audio;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::size_t num_outputs(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::Expr:
    case TaskKind::Audio:
      return kNumExprClasses;
    case TaskKind::VA:
      return kNumVaOutputs;
    case TaskKind::AU:
      return kNumAu;
    case TaskKind::VD:
      return kNumVdClasses;
  }
  return 0;
}

bool is_single_label(TaskKind task) noexcept {
  return task == TaskKind::Expr || task == TaskKind::VD || task == TaskKind::Audio;
}

std::optional<std::size_t> LabelSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

LabelSet label_set(TaskKind task) {
  switch (task) {
    case TaskKind::Expr:
    case TaskKind::Audio:
      return {task,
              {"Neutral", "Anger", "Disgust", "Fear", "Happiness", "Sadness", "Surprise", "Other"}};
    case TaskKind::VA:
      return {task, {"valence", "arousal"}};
    case TaskKind::AU:
      return {task,
              {"AU1", "AU2", "AU4", "AU6", "AU7", "AU10", "AU12", "AU15", "AU23", "AU24", "AU25",
               "AU26"}};
    case TaskKind::VD:
      return {task, {"NonViolent", "Violent"}};
  }
  return {};
}

LabelSet affectnet_labels() {
  return {TaskKind::Expr,
          {"Anger", "Contempt", "Disgust", "Fear", "Happiness", "Neutral", "Sadness", "Surprise"}};
}

void validate_frame_ids(std::span<const std::int64_t> frame_ids) {
  for (std::size_t i = 0; i < frame_ids.size(); ++i) {
    if (frame_ids[i] < 0) {
      throw OrderError("negative frame_id " + std::to_string(frame_ids[i]));
    }
    if (i > 0 && frame_ids[i] <= frame_ids[i - 1]) {
      throw OrderError("frame_ids not strictly increasing at position " + std::to_string(i) +
                       " (" + std::to_string(frame_ids[i - 1]) + " then " +
                       std::to_string(frame_ids[i]) + ")");
    }
  }
}

void require_same_timeline(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                           std::string_view what) {
  if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin())) {
    throw AlignError(std::string(what) + ": frame timelines differ (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + " frames)");
  }
}

void FeatureStream::validate() const {
  validate_frame_ids(frame_ids);
  if (features.rows() != frame_ids.size()) {
    throw ShapeError("feature stream '" + video_id + "': " + std::to_string(features.rows()) +
                     " rows for " + std::to_string(frame_ids.size()) + " frame ids");
  }
  if (features.cols() < 1) throw ShapeError("feature stream '" + video_id + "': dim must be >= 1");
  if (!(frame_rate_hz > 0.0) || !std::isfinite(frame_rate_hz)) {
    throw ValueError("feature stream '" + video_id + "': frame rate must be positive");
  }
  require_finite(features, "feature stream '" + video_id + "'");
}

std::string_view to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::Probability:
      return "probability";
    case ScoreKind::Logit:
      return "logit";
    case ScoreKind::Continuous:
      return "continuous";
  }
  return "unknown";
}

ScoreKind parse_score_kind(std::string_view name) {
  const std::string n = lower(name);
  if (n == "probability") return ScoreKind::Probability;
  if (n == "logit") return ScoreKind::Logit;
  if (n == "continuous") return ScoreKind::Continuous;
  throw FormatError("unknown score kind '" + std::string(name) + "'");
}

void ScoreStream::validate() const {
  validate_frame_ids(frame_ids);
  if (scores.rows() != frame_ids.size()) {
    throw ShapeError("score stream '" + video_id + "': " + std::to_string(scores.rows()) +
                     " rows for " + std::to_string(frame_ids.size()) + " frame ids");
  }
  require_finite(scores, "score stream '" + video_id + "'");
  const auto values = scores.values();
  if (kind == ScoreKind::Probability) {
    if (std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0 || v > 1.0; })) {
      throw ValueError("score stream '" + video_id + "': probability outside [0, 1]");
    }
  } else if (kind == ScoreKind::Continuous) {
    if (std::any_of(values.begin(), values.end(), [](double v) { return v < -1.0 || v > 1.0; })) {
      throw ValueError("score stream '" + video_id + "': continuous value outside [-1, 1]");
    }
  }
}

void ScoreStream::validate_simplex(double tolerance) const {
  validate();
  if (kind != ScoreKind::Probability) {
    throw ValueError("score stream '" + video_id + "': expected probability kind");
  }
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::abs(sum - 1.0) > tolerance) {
      throw ValueError("score stream '" + video_id + "': row " + std::to_string(r) +
                       " sums to " + std::to_string(sum));
    }
  }
}

std::size_t LabelTrack::num_annotated() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void LabelTrack::validate() const {
  validate_frame_ids(frame_ids);
  const std::size_t n = frame_ids.size();
  auto fail = [&](const std::string& msg) { throw ShapeError("label track '" + video_id + "': " + msg); };
  if (mask.size() != n) fail("mask length mismatch");
  for (auto m : mask) {
    if (m > 1) throw ValueError("label track '" + video_id + "': mask must be 0 or 1");
  }
  if (is_single_label(task)) {
    if (classes.size() != n) fail("class column length mismatch");
    const int c = static_cast<int>(num_outputs(task));
    for (std::size_t i = 0; i < n; ++i) {
      if (classes[i] < 0 || classes[i] >= c) {
        throw ValueError("label track '" + video_id + "': class " + std::to_string(classes[i]) +
                         " out of range at row " + std::to_string(i));
      }
    }
  } else if (task == TaskKind::AU) {
    if (au.size() != n) fail("AU column length mismatch");
    for (const auto& bits : au) {
      for (auto b : bits) {
        if (b > 1) throw ValueError("label track '" + video_id + "': AU bits must be 0 or 1");
      }
    }
  } else {
    if (va.size() != n) fail("VA column length mismatch");
    for (const auto& pair : va) {
      for (double v : pair) {
        if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
          throw ValueError("label track '" + video_id + "': valence/arousal outside [-1, 1]");
        }
      }
    }
  }
}

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.video_id).second) {
      throw FormatError("manifest: duplicate video_id '" + e.video_id + "'");
    }
    auto check = [&](const std::string& p) {
      if (!std::filesystem::exists(resolve(p))) {
        throw IoError("manifest: missing file '" + resolve(p).string() + "' for video '" +
                      e.video_id + "'");
      }
    };
    check(e.feature_path);
    if (e.label_path) check(*e.label_path);
    if (e.audio_feature_path) check(*e.audio_feature_path);
    if (e.pretrained_score_path) check(*e.pretrained_score_path);
    if (e.audio_rate_hz && !(*e.audio_rate_hz > 0.0)) {
      throw ValueError("manifest: audio_rate_hz must be positive for '" + e.video_id + "'");
    }
  }
}

std::vector<double> ClassPriorTable::priors() const {
  std::vector<double> out(counts.size(), 0.0);
  if (total <= 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

ClassPriorTable class_priors(std::span<const LabelTrack> tracks, TaskKind task) {
  if (!is_single_label(task)) {
    throw ConfigError("class priors are defined for single-label tasks only");
  }
  if (tracks.empty()) throw EmptyInputError("class priors: no label tracks");
  ClassPriorTable table;
  table.counts.assign(num_outputs(task), 0);
  for (const auto& track : tracks) {
    for (std::size_t i = 0; i < track.num_frames(); ++i) {
      if (!track.mask[i]) continue;
      ++table.counts[static_cast<std::size_t>(track.classes[i])];
      ++table.total;
    }
  }
  if (table.total == 0) throw EmptyInputError("class priors: no annotated frames");
  return table;
}

ChannelPositiveCounts au_positive_counts(std::span<const LabelTrack> tracks) {
  if (tracks.empty()) throw EmptyInputError("AU counts: no label tracks");
  ChannelPositiveCounts out;
  out.positives.assign(kNumAu, 0);
  for (const auto& track : tracks) {
    if (track.task != TaskKind::AU) throw ConfigError("AU counts: non-AU label track");
    for (std::size_t i = 0; i < track.num_frames(); ++i) {
      if (!track.mask[i]) continue;
      for (std::size_t c = 0; c < kNumAu; ++c) out.positives[c] += track.au[i][c];
      ++out.total;
    }
  }
  if (out.total == 0) throw EmptyInputError("AU counts: no annotated frames");
  return out;
}

void CalibrationArtifact::validate() const {
  if (bias && bias->size() != num_outputs(task)) {
    throw ShapeError("calibration: bias has " + std::to_string(bias->size()) +
                     " entries, expected " + std::to_string(num_outputs(task)));
  }
  if (thresholds) {
    if (task == TaskKind::AU && thresholds->size() != kNumAu) {
      throw ShapeError("calibration: AU thresholds must have 12 entries");
    }
    for (double t : *thresholds) {
      const double k = std::round(t * 10.0);
      if (k < 1.0 || k > 9.0 || std::abs(t - k / 10.0) > 1e-9) {
        throw ValueError("calibration: threshold " + std::to_string(t) +
                         " not in {0.1, ..., 0.9}");
      }
    }
  }
}

}  // namespace affectcal
