#include "affectcal/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "affectcal/errors.hpp"

namespace affectcal::temporal {

void SmoothingConfig::validate() const {
  if (window_T < 0 || window_T % 2 != 0) {
    throw ConfigError("smoothing window T must be a non-negative even integer, got " +
                      std::to_string(window_T));
  }
  if (max_gap && *max_gap < 1) throw ConfigError("smoothing max_gap must be >= 1");
}

ScoreStream smooth(const ScoreStream& scores, const SmoothingConfig& cfg) {
  cfg.validate();
  if (scores.scores.rows() != scores.num_frames()) throw ShapeError("score stream rows differ from frame count");
  ScoreStream out = scores;
  if (cfg.window_T == 0) return out;
  const std::size_t n = scores.num_frames();
  const std::size_t cols = scores.num_classes();
  const std::size_t half = static_cast<std::size_t>(cfg.window_T / 2);

  // segment[t] identifies the run of rows t may average over.
  std::vector<std::size_t> seg_lo(n), seg_hi(n);
  std::size_t start = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && cfg.max_gap && scores.frame_ids[t] - scores.frame_ids[t - 1] > *cfg.max_gap) {
      for (std::size_t k = start; k < t; ++k) seg_hi[k] = t - 1;
      start = t;
    }
    seg_lo[t] = start;
  }
  for (std::size_t k = start; k < n; ++k) seg_hi[k] = n - 1;

  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = std::max(seg_lo[t], t >= half ? t - half : 0);
    const std::size_t hi = std::min(seg_hi[t], t + half);
    auto dst = out.scores.row(t);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (std::size_t k = lo; k <= hi; ++k) {
      auto src = scores.scores.row(k);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
    const double count = static_cast<double>(hi - lo + 1);
    for (double& v : dst) v /= count;
  }
  return out;
}

void GateConfig::validate() const {
  if (!(p0 > 0.0 && p0 <= 1.0)) throw ConfigError("gate p0 must lie in (0, 1]");
  if (mapping.size() != source_labels.size()) {
    throw ConfigError("gate mapping needs one entry per source class");
  }
  for (const auto& m : mapping) {
    if (m && (*m < 0 || static_cast<std::size_t>(*m) >= target_labels.size())) {
      throw ConfigError("gate mapping points outside the target label set");
    }
  }
}

GateConfig affectnet_gate(double p0) {
  GateConfig cfg;
  cfg.p0 = p0;
  cfg.source_labels = affectnet_labels();
  cfg.target_labels = label_set(TaskKind::Expr);
  for (const auto& name : cfg.source_labels.names) {
    const auto idx = name == "Other" ? std::nullopt : cfg.target_labels.index_of(name);
    cfg.mapping.push_back(idx ? std::optional<int>(static_cast<int>(*idx)) : std::nullopt);
  }
  cfg.validate();
  return cfg;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t t = 0; t < scores.rows(); ++t) {
    auto row = scores.row(t);
    out[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

GateResult confidence_gate(const ScoreStream& pretrained, const ScoreStream& fallback,
                           const GateConfig& cfg) {
  cfg.validate();
  require_same_timeline(pretrained.frame_ids, fallback.frame_ids,
                        "confidence gate '" + fallback.video_id + "'");
  if (pretrained.num_classes() != cfg.source_labels.size()) {
    throw ShapeError("pretrained stream has " + std::to_string(pretrained.num_classes()) +
                     " classes, gate expects " + std::to_string(cfg.source_labels.size()));
  }
  if (fallback.num_classes() != cfg.target_labels.size()) {
    throw ShapeError("fallback stream has " + std::to_string(fallback.num_classes()) +
                     " classes, gate expects " + std::to_string(cfg.target_labels.size()));
  }
  GateResult result;
  result.classes = argmax_rows(fallback.scores);
  result.gated.assign(fallback.num_frames(), 0);
  for (std::size_t t = 0; t < pretrained.num_frames(); ++t) {
    auto row = pretrained.scores.row(t);
    const auto top = std::max_element(row.begin(), row.end());
    const auto& target = cfg.mapping[static_cast<std::size_t>(top - row.begin())];
    if (*top > cfg.p0 && target) {
      result.classes[t] = *target;
      result.gated[t] = 1;
    }
  }
  return result;
}

ScoreStream blend(const ScoreStream& a, const ScoreStream& b, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("fusion weight must lie in [0, 1]");
  if (a.num_classes() != b.num_classes() || a.num_frames() != b.num_frames()) {
    throw ShapeError("blend: streams differ in shape");
  }
  require_same_timeline(a.frame_ids, b.frame_ids, "blend '" + a.video_id + "'");
  if (a.kind != b.kind) throw ConfigError("blend: streams differ in kind");
  ScoreStream out = a;
  // Exact endpoints: w = 1 gives a and w = 0 gives b bit for bit.
  if (w == 1.0) return out;
  if (w == 0.0) {
    out.scores = b.scores;
    return out;
  }
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    out.scores.values()[i] = w * a.scores.values()[i] + (1.0 - w) * b.scores.values()[i];
  }
  return out;
}

LabelTrack decode(const ScoreStream& scores, TaskKind task,
                  const std::optional<std::vector<double>>& thresholds, bool allow_default) {
  if (scores.num_classes() != num_outputs(task)) {
    throw ShapeError("decode: " + std::to_string(scores.num_classes()) + " score columns for task " +
                     std::string(to_string(task)));
  }
  LabelTrack track;
  track.video_id = scores.video_id;
  track.task = task;
  track.frame_ids = scores.frame_ids;
  track.mask.assign(scores.num_frames(), 1);
  switch (task) {
    case TaskKind::Expr:
    case TaskKind::VD:
    case TaskKind::Audio:
      if (scores.kind == ScoreKind::Continuous) throw ConfigError("decode: class scores expected");
      track.classes = argmax_rows(scores.scores);
      break;
    case TaskKind::AU: {
      if (scores.kind != ScoreKind::Probability) throw ConfigError("decode: AU needs probabilities");
      std::vector<double> tau(kNumAu, 0.5);
      if (thresholds) {
        if (thresholds->size() != kNumAu) throw ShapeError("AU decode needs 12 thresholds");
        tau = *thresholds;
      } else if (!allow_default) {
        throw ConfigError("AU decode needs thresholds");
      }
      track.au.resize(scores.num_frames());
      for (std::size_t t = 0; t < scores.num_frames(); ++t) {
        for (std::size_t c = 0; c < kNumAu; ++c) track.au[t][c] = scores.scores(t, c) >= tau[c] ? 1 : 0;
      }
      break;
    }
    case TaskKind::VA:
      if (scores.kind != ScoreKind::Continuous) throw ConfigError("decode: VA needs continuous scores");
      track.va.resize(scores.num_frames());
      for (std::size_t t = 0; t < scores.num_frames(); ++t) {
        for (std::size_t c = 0; c < kNumVaOutputs; ++c) {
          track.va[t][c] = std::clamp(scores.scores(t, c), -1.0, 1.0);
        }
      }
      break;
  }
  return track;
}

}  // namespace affectcal::temporal
