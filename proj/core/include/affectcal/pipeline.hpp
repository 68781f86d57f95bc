#pragma once

#include <optional>
#include <span>
#include <vector>

#include "affectcal/datamodel.hpp"
#include "affectcal/nn/losses.hpp"
#include "affectcal/nn/train.hpp"
#include "affectcal/temporal.hpp"
#include "affectcal/vd_windows.hpp"

namespace affectcal::pipeline {

// One manifest entry read into memory. Audio is already resampled onto the
// video timeline.
struct LoadedVideo {
  ManifestEntry entry;
  FeatureStream video;
  std::optional<FeatureStream> audio;
  std::optional<LabelTrack> labels;
  std::optional<ScoreStream> pretrained;
};

// Loads every entry in manifest order. Labels are required when
// require_labels is set, and must belong to manifest.task.
std::vector<LoadedVideo> load_videos(const DatasetManifest& manifest, bool require_labels);

// Feature stream a model of the given modality consumes.
const FeatureStream& modality_features(const LoadedVideo& video, const std::string& modality);

// Frame-wise supervision: one sequence per video.
nn::TrainingSet frame_training_set(TaskKind task, std::span<const FeatureStream> features,
                                   std::span<const LabelTrack> labels);
// Non-overlapping training clips; padded clip rows are masked out.
nn::TrainingSet vd_training_set(std::span<const FeatureStream> features,
                                std::span<const LabelTrack> labels, const temporal::VdWindowConfig& cfg);

// Default objective per task with class weights from the training labels:
// Expr weighted softmax, VA mse_ccc, AU weighted binary, VD weighted CE,
// Audio focal.
nn::LossSpec default_loss(TaskKind task);
// Fills spec.weights from the training labels where the loss uses them.
void fill_loss_weights(nn::LossSpec& spec, TaskKind task, std::span<const LabelTrack> labels);

// Frame-level model outputs. Softmax/sigmoid heads give probabilities; linear
// heads give continuous values clamped to [-1, 1].
ScoreStream infer_scores(const nn::ModelFile& model, const FeatureStream& features);

struct StageConfig {
  TaskKind task = TaskKind::Expr;
  temporal::SmoothingConfig smoothing;
  // Gate against the pretrained stream when set (Expr only).
  std::optional<double> gate_p0;
  double fusion_w = 0.5;
  std::optional<std::vector<double>> bias;        // video logit biases
  std::optional<std::vector<double>> audio_bias;  // audio logit biases
  std::optional<std::vector<double>> thresholds;  // AU
};

struct Prediction {
  LabelTrack track;
  ScoreStream scores;              // final stream that was decoded
  std::vector<std::uint8_t> gate;  // empty unless the gate ran
};

// calibrate each modality -> blend (when audio scores are given) -> smooth ->
// gate (Expr, when configured and a pretrained stream is given) -> decode.
Prediction run_frame_pipeline(const ScoreStream& video, const ScoreStream* audio,
                              const ScoreStream* pretrained, const StageConfig& cfg);

// Clip inference with overlap averaging; scores hold [1 - p, p] per frame.
Prediction predict_vd(const nn::ModelFile& model, const FeatureStream& features,
                      const temporal::VdWindowConfig& cfg);

}  // namespace affectcal::pipeline
