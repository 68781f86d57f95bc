#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affectcal/matrix.hpp"

namespace affectcal {

// Audio is the 8-class expression task driven by audio features instead of
// face embeddings; it shares the Expr label space.
enum class TaskKind { Expr, VA, AU, VD, Audio };

inline constexpr std::size_t kNumExprClasses = 8;
inline constexpr std::size_t kNumAu = 12;
inline constexpr std::size_t kNumVaOutputs = 2;
inline constexpr std::size_t kNumVdClasses = 2;

std::string_view to_string(TaskKind task) noexcept;
// Accepts "expr", "va", "au", "vd", "audio" (case-insensitive). Throws ConfigError.
TaskKind parse_task(std::string_view name);

// Number of network outputs / label columns for the task.
std::size_t num_outputs(TaskKind task) noexcept;
// True for tasks whose label payload is a single class index.
bool is_single_label(TaskKind task) noexcept;

struct LabelSet {
  TaskKind task = TaskKind::Expr;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
};

LabelSet label_set(TaskKind task);
// Source label order of the AffectNet-trained face model used for gating.
LabelSet affectnet_labels();

struct FeatureStream {
  std::string video_id;
  std::vector<std::int64_t> frame_ids;
  Matrix features;  // num_frames x dim
  std::string source_tag;
  double frame_rate_hz = 30.0;

  std::size_t num_frames() const noexcept { return frame_ids.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  // Throws OrderError / ValueError / ShapeError.
  void validate() const;
};

enum class ScoreKind { Probability, Logit, Continuous };

std::string_view to_string(ScoreKind kind) noexcept;
ScoreKind parse_score_kind(std::string_view name);

struct ScoreStream {
  std::string video_id;
  std::vector<std::int64_t> frame_ids;
  Matrix scores;  // num_frames x C
  ScoreKind kind = ScoreKind::Probability;

  std::size_t num_frames() const noexcept { return frame_ids.size(); }
  std::size_t num_classes() const noexcept { return scores.cols(); }

  // Probability: entries in [0, 1]; continuous: entries in [-1, 1].
  void validate() const;
  // Stronger check for single-label probability streams: rows sum to 1.
  void validate_simplex(double tolerance = 1e-6) const;
};

// Per-frame ground truth or prediction for one task. Only the payload that
// matches `task` is populated.
struct LabelTrack {
  std::string video_id;
  TaskKind task = TaskKind::Expr;
  std::vector<std::int64_t> frame_ids;
  std::vector<std::uint8_t> mask;                   // 1 = annotated
  std::vector<int> classes;                         // Expr, VD, Audio
  std::vector<std::array<std::uint8_t, kNumAu>> au;  // AU
  std::vector<std::array<double, 2>> va;            // VA: valence, arousal

  std::size_t num_frames() const noexcept { return frame_ids.size(); }
  std::size_t num_annotated() const noexcept;

  void validate() const;

  bool operator==(const LabelTrack&) const = default;
};

// Timeline checks shared by loaders and stream operations.
void validate_frame_ids(std::span<const std::int64_t> frame_ids);
// Throws AlignError when the two timelines differ.
void require_same_timeline(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                           std::string_view what);

struct ManifestEntry {
  std::string video_id;
  std::string feature_path;
  std::optional<std::string> label_path;
  std::optional<std::string> audio_feature_path;
  std::optional<double> audio_rate_hz;
  // Score stream of the pre-trained source model (AffectNet label order).
  std::optional<std::string> pretrained_score_path;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  TaskKind task = TaskKind::Expr;
  std::string split;
  std::vector<ManifestEntry> entries;
  // Directory relative paths are resolved against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const;
  void validate() const;

  bool operator==(const DatasetManifest& other) const {
    return task == other.task && split == other.split && entries == other.entries;
  }
};

struct ClassPriorTable {
  std::vector<std::int64_t> counts;  // N_y
  std::int64_t total = 0;            // N

  std::vector<double> priors() const;  // N_y / N
  std::size_t num_classes() const noexcept { return counts.size(); }

  bool operator==(const ClassPriorTable&) const = default;
};

// Per-channel positive counts for multi-label tasks.
struct ChannelPositiveCounts {
  std::vector<std::int64_t> positives;  // N_c
  std::int64_t total = 0;               // annotated frames

  bool operator==(const ChannelPositiveCounts&) const = default;
};

ClassPriorTable class_priors(std::span<const LabelTrack> tracks, TaskKind task);
ChannelPositiveCounts au_positive_counts(std::span<const LabelTrack> tracks);

// Nearest-timestamp resampling of an audio stream onto a video timeline.
FeatureStream align_audio_to_video(const FeatureStream& audio,
                                   std::span<const std::int64_t> video_frame_ids,
                                   double video_rate_hz);

struct SearchLogEntry {
  int pass = 0;
  int cls = 0;
  double best_value = 0.0;
  double f1 = 0.0;

  bool operator==(const SearchLogEntry&) const = default;
};

struct CalibrationArtifact {
  TaskKind task = TaskKind::Expr;
  std::optional<std::vector<double>> bias;
  std::optional<std::vector<double>> thresholds;
  // Channels whose threshold fell back to 0.5 (no positive ground truth).
  std::vector<int> warnings;
  std::vector<SearchLogEntry> search_log;
  std::string source_manifest_hash;

  void validate() const;

  bool operator==(const CalibrationArtifact&) const = default;
};

}  // namespace affectcal
