#include "affectcal/pipeline.hpp"

#include <algorithm>

#include "affectcal/calibrate.hpp"
#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/parallel.hpp"

namespace affectcal::pipeline {

std::vector<LoadedVideo> load_videos(const DatasetManifest& manifest, bool require_labels) {
  manifest.validate();
  std::vector<LoadedVideo> videos(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    LoadedVideo& v = videos[i];
    v.entry = e;
    v.video = load_feature_stream(manifest.resolve(e.feature_path));
    if (v.video.video_id != e.video_id) {
      throw FormatError("feature file of '" + e.video_id + "' declares video_id '" + v.video.video_id + "'");
    }
    if (e.label_path) {
      v.labels = load_label_track(manifest.resolve(*e.label_path), manifest.task);
      require_same_timeline(v.labels->frame_ids, v.video.frame_ids, "labels of '" + e.video_id + "'");
    } else if (require_labels) {
      throw FormatError("manifest entry '" + e.video_id + "' has no label_path");
    }
    if (e.audio_feature_path) {
      FeatureStream audio = load_feature_stream(manifest.resolve(*e.audio_feature_path));
      if (e.audio_rate_hz) audio.frame_rate_hz = *e.audio_rate_hz;
      v.audio = align_audio_to_video(audio, v.video.frame_ids, v.video.frame_rate_hz);
    }
    if (e.pretrained_score_path) {
      v.pretrained = load_score_stream(manifest.resolve(*e.pretrained_score_path));
      require_same_timeline(v.pretrained->frame_ids, v.video.frame_ids,
                            "pretrained scores of '" + e.video_id + "'");
    }
  });
  return videos;
}

const FeatureStream& modality_features(const LoadedVideo& video, const std::string& modality) {
  if (modality == "video") return video.video;
  if (modality == "audio") {
    if (!video.audio) throw FormatError("video '" + video.entry.video_id + "' has no audio features");
    return *video.audio;
  }
  throw ConfigError("unknown modality '" + modality + "'");
}

namespace {

nn::Targets targets_for(TaskKind task, const LabelTrack& labels, std::span<const std::int64_t> rows) {
  nn::Targets t;
  for (std::int64_t r : rows) {
    const auto i = static_cast<std::size_t>(std::max<std::int64_t>(r, 0));
    switch (task) {
      case TaskKind::Expr:
      case TaskKind::VD:
      case TaskKind::Audio:
        t.classes.push_back(labels.classes[i]);
        break;
      case TaskKind::AU: {
        std::vector<double> row(kNumAu);
        for (std::size_t c = 0; c < kNumAu; ++c) row[c] = labels.au[i][c];
        t.values.append_row(row);
        break;
      }
      case TaskKind::VA:
        t.values.append_row(std::vector<double>{labels.va[i][0], labels.va[i][1]});
        break;
    }
  }
  return t;
}

}  // namespace

nn::TrainingSet frame_training_set(TaskKind task, std::span<const FeatureStream> features,
                                   std::span<const LabelTrack> labels) {
  if (features.size() != labels.size()) throw ShapeError("training set: feature/label count mismatch");
  nn::TrainingSet set;
  for (std::size_t v = 0; v < features.size(); ++v) {
    require_same_timeline(features[v].frame_ids, labels[v].frame_ids,
                          "training video '" + labels[v].video_id + "'");
    std::vector<std::int64_t> rows(features[v].num_frames());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::int64_t>(i);
    set.sequences.push_back({features[v].features, targets_for(task, labels[v], rows), labels[v].mask});
  }
  return set;
}

nn::TrainingSet vd_training_set(std::span<const FeatureStream> features,
                                std::span<const LabelTrack> labels, const temporal::VdWindowConfig& cfg) {
  if (features.size() != labels.size()) throw ShapeError("training set: feature/label count mismatch");
  nn::TrainingSet set;
  for (std::size_t v = 0; v < features.size(); ++v) {
    require_same_timeline(features[v].frame_ids, labels[v].frame_ids,
                          "training video '" + labels[v].video_id + "'");
    const auto clips = temporal::vd_make_clips(features[v], cfg, true);
    for (const auto& clip : clips.clips) {
      std::vector<std::uint8_t> mask(clip.index_map.size());
      for (std::size_t r = 0; r < mask.size(); ++r) {
        const auto f = clip.index_map[r];
        mask[r] = f >= 0 && labels[v].mask[static_cast<std::size_t>(f)] ? 1 : 0;
      }
      set.sequences.push_back({clip.features, targets_for(TaskKind::VD, labels[v], clip.index_map), mask});
    }
  }
  return set;
}

nn::LossSpec default_loss(TaskKind task) {
  nn::LossSpec spec;
  switch (task) {
    case TaskKind::Expr: spec.kind = nn::LossKind::WeightedSoftmax; break;
    case TaskKind::VA: spec.kind = nn::LossKind::MseCcc; break;
    case TaskKind::AU: spec.kind = nn::LossKind::WeightedBinary; break;
    case TaskKind::VD: spec.kind = nn::LossKind::WeightedCe; break;
    case TaskKind::Audio: spec.kind = nn::LossKind::Focal; break;
  }
  return spec;
}

void fill_loss_weights(nn::LossSpec& spec, TaskKind task, std::span<const LabelTrack> labels) {
  if (!spec.weights.empty()) return;
  if (spec.kind == nn::LossKind::WeightedSoftmax) {
    spec.weights = nn::softmax_class_weights(class_priors(labels, task), spec.class_weight_mode);
  } else if (spec.kind == nn::LossKind::WeightedBinary) {
    spec.weights = nn::binary_pos_weights(au_positive_counts(labels), spec.class_weight_mode);
  }
}

ScoreStream infer_scores(const nn::ModelFile& model, const FeatureStream& features) {
  if (features.dim() != model.spec.input_dim) {
    throw ShapeError("model expects " + std::to_string(model.spec.input_dim) + " features, '" +
                     features.video_id + "' has " + std::to_string(features.dim()));
  }
  const nn::ForwardResult fwd = nn::forward(model.state, model.spec, features.features);
  ScoreStream out{features.video_id, features.frame_ids, fwd.outputs, ScoreKind::Probability};
  if (model.spec.head == nn::Head::Linear) {
    out.kind = ScoreKind::Continuous;
    for (double& v : out.scores.values()) v = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

Prediction run_frame_pipeline(const ScoreStream& video, const ScoreStream* audio,
                              const ScoreStream* pretrained, const StageConfig& cfg) {
  const bool single = is_single_label(cfg.task);
  auto calibrated = [&](const ScoreStream& s, const std::optional<std::vector<double>>& bias) {
    if (!bias) return s;
    if (!single) throw ConfigError("logit biases apply to single-label tasks only");
    return calibrate::calibrated_probabilities(s, *bias);
  };
  ScoreStream scores = calibrated(video, cfg.bias);
  if (audio) scores = temporal::blend(scores, calibrated(*audio, cfg.audio_bias), cfg.fusion_w);
  scores = temporal::smooth(scores, cfg.smoothing);

  Prediction out;
  if (cfg.gate_p0 && pretrained) {
    if (cfg.task != TaskKind::Expr) throw ConfigError("the confidence gate applies to the expr task only");
    const ScoreStream pre = temporal::smooth(*pretrained, cfg.smoothing);
    const temporal::GateResult gate = temporal::confidence_gate(pre, scores, temporal::affectnet_gate(*cfg.gate_p0));
    out.track = temporal::decode(scores, cfg.task);
    out.track.classes = gate.classes;
    out.gate = gate.gated;
  } else {
    out.track = temporal::decode(scores, cfg.task, cfg.thresholds);
  }
  out.scores = std::move(scores);
  return out;
}

Prediction predict_vd(const nn::ModelFile& model, const FeatureStream& features,
                      const temporal::VdWindowConfig& cfg) {
  if (features.dim() != model.spec.input_dim) {
    throw ShapeError("model expects " + std::to_string(model.spec.input_dim) + " features, '" +
                     features.video_id + "' has " + std::to_string(features.dim()));
  }
  if (model.spec.output_dim != kNumVdClasses || model.spec.head != nn::Head::Softmax) {
    throw ConfigError("violence detection needs a 2-way softmax model");
  }
  const auto clips = temporal::vd_make_clips(features, cfg, false);
  std::vector<std::vector<double>> probs(clips.clips.size());
  std::vector<std::vector<std::int64_t>> maps(clips.clips.size());
  parallel_for(clips.clips.size(), [&](std::size_t k) {
    const auto fwd = nn::forward(model.state, model.spec, clips.clips[k].features);
    probs[k].resize(fwd.outputs.rows());
    for (std::size_t r = 0; r < fwd.outputs.rows(); ++r) probs[k][r] = fwd.outputs(r, 1);
    maps[k] = clips.clips[k].index_map;
  });
  const auto agg = temporal::vd_aggregate(probs, maps, features.num_frames(), cfg);

  Prediction out;
  out.scores = {features.video_id, features.frame_ids, Matrix(features.num_frames(), kNumVdClasses),
                ScoreKind::Probability};
  out.track.video_id = features.video_id;
  out.track.task = TaskKind::VD;
  out.track.frame_ids = features.frame_ids;
  out.track.mask.assign(features.num_frames(), 1);
  out.track.classes.resize(features.num_frames());
  for (std::size_t t = 0; t < features.num_frames(); ++t) {
    out.scores.scores(t, 0) = 1.0 - agg.probability[t];
    out.scores.scores(t, 1) = agg.probability[t];
    out.track.classes[t] = agg.decision[t];
  }
  return out;
}

}  // namespace affectcal::pipeline
