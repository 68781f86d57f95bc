#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal::synth {

struct SynthConfig {
  TaskKind task = TaskKind::Expr;
  std::string split = "train";  // prefix of video ids
  std::size_t num_videos = 8;
  std::size_t frames_per_video = 600;
  std::size_t feature_dim = 16;
  // Single-label tasks: probability of each class per segment. Empty means
  // uniform. VD derives its weights from positive_fraction.
  std::vector<double> class_weights;
  double segment_mean_length = 50.0;
  double feature_noise_sigma = 1.0;
  // Distance between any two class centroids, in units of the noise sigma
  // when sigma is 1.
  double class_separation = 3.0;
  double label_flip_prob = 0.0;
  // Fraction of audio frames carrying the true class; absent means no audio.
  std::optional<double> audio_agreement;
  double audio_rate_hz = 50.0;
  double frame_rate_hz = 30.0;
  // Expr only: fraction of frames where the pretrained source model is
  // confident (> 0.9 on the true class). Absent means no pretrained stream.
  std::optional<double> pretrained_confident_prob;
  // VD: share of violent frames.
  double positive_fraction = 0.44;
  // AU: per-channel activation rates; empty means the built-in ladder.
  std::vector<double> au_positive_rates;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  // class_weights, or the task default when empty.
  std::vector<double> effective_class_weights() const;
  std::vector<double> effective_au_rates() const;
};

struct SynthVideo {
  FeatureStream features;
  LabelTrack labels;
  std::vector<int> hidden;  // latent class per frame (single-label tasks)
  std::optional<FeatureStream> audio;
  std::optional<ScoreStream> pretrained;
};

// In-memory generation; video v uses the seed derived from (seed, v).
std::vector<SynthVideo> generate_videos(const SynthConfig& cfg);

// Writes features/, labels/, audio/, pretrained/ under out_dir plus
// <split>.json, and returns the manifest.
DatasetManifest write_dataset(const SynthConfig& cfg, const std::vector<SynthVideo>& videos,
                              const std::filesystem::path& out_dir);

DatasetManifest generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);
// generate with task forced to VD.
DatasetManifest generate_vd(SynthConfig cfg, const std::filesystem::path& out_dir);

}  // namespace affectcal::synth
