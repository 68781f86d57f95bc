#include "affectcal/vd_windows.hpp"

#include <algorithm>

#include "affectcal/errors.hpp"

namespace affectcal::temporal {

void VdWindowConfig::validate() const {
  if (clip_len < 1) throw ConfigError("clip length must be >= 1");
  if (frame_step < 1) throw ConfigError("frame step must be >= 1");
  if (infer_stride < 1 || infer_stride > clip_len) {
    throw ConfigError("inference stride must lie in [1, clip length]");
  }
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    throw ConfigError("decision threshold must lie in [0, 1]");
  }
}

std::vector<std::size_t> vd_clip_starts(std::size_t num_frames, const VdWindowConfig& cfg,
                                        bool train_mode) {
  cfg.validate();
  if (num_frames == 0) throw EmptyInputError("violence stream has no frames");
  const std::size_t span = cfg.span();
  if (num_frames <= span) return {0};
  const std::size_t advance = train_mode ? span : cfg.infer_stride;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + span <= num_frames; s += advance) starts.push_back(s);
  if (starts.back() + span < num_frames) starts.push_back(num_frames - span);
  return starts;
}

VdClipSet vd_make_clips(const FeatureStream& stream, const VdWindowConfig& cfg, bool train_mode) {
  const std::size_t n = stream.num_frames();
  VdClipSet set;
  set.padded = n < cfg.span();
  for (std::size_t start : vd_clip_starts(n, cfg, train_mode)) {
    VdClip clip;
    clip.start = start;
    clip.features = Matrix(cfg.clip_len, stream.dim());
    for (std::size_t r = 0; r < cfg.clip_len; ++r) {
      const std::size_t frame = start + r * cfg.frame_step;
      const bool inside = frame < n;
      clip.index_map.push_back(inside ? static_cast<std::int64_t>(frame) : -1);
      auto src = stream.features.row(inside ? frame : n - 1);
      std::copy(src.begin(), src.end(), clip.features.row(r).begin());
    }
    set.clips.push_back(std::move(clip));
  }
  return set;
}

VdAggregate vd_aggregate(std::span<const std::vector<double>> window_probs,
                         std::span<const std::vector<std::int64_t>> index_maps,
                         std::size_t total_frames, const VdWindowConfig& cfg) {
  cfg.validate();
  if (window_probs.size() != index_maps.size()) {
    throw ShapeError("vd_aggregate: probability and index map counts differ");
  }
  std::vector<double> sum(total_frames, 0.0);
  std::vector<std::size_t> hits(total_frames, 0);
  // Clip order, then row order: a fixed summation order per frame.
  for (std::size_t w = 0; w < window_probs.size(); ++w) {
    const auto& probs = window_probs[w];
    const auto& map = index_maps[w];
    if (probs.size() != map.size()) throw ShapeError("vd_aggregate: clip rows differ from index map");
    for (std::size_t r = 0; r < map.size(); ++r) {
      if (map[r] < 0) continue;
      const auto f = static_cast<std::size_t>(map[r]);
      if (f >= total_frames) throw ShapeError("vd_aggregate: index map points past the stream");
      if (!(probs[r] >= 0.0 && probs[r] <= 1.0)) throw ValueError("vd_aggregate: probability outside [0, 1]");
      sum[f] += probs[r];
      ++hits[f];
    }
  }
  VdAggregate out;
  out.probability.assign(total_frames, 0.0);
  for (std::size_t f = 0; f < total_frames; ++f) {
    if (hits[f] > 0) out.probability[f] = sum[f] / static_cast<double>(hits[f]);
  }
  const std::size_t radius = cfg.frame_step - 1;
  for (std::size_t f = 0; f < total_frames; ++f) {
    if (hits[f] > 0) continue;
    bool filled = false;
    for (std::size_t d = 1; d <= radius && !filled; ++d) {
      if (f >= d && hits[f - d] > 0) {
        out.probability[f] = out.probability[f - d];
        filled = true;
      } else if (f + d < total_frames && hits[f + d] > 0) {
        out.probability[f] = out.probability[f + d];
        filled = true;
      }
    }
    if (!filled) throw CoverageError("frame " + std::to_string(f) + " is not covered by any clip");
  }
  out.decision.resize(total_frames);
  for (std::size_t f = 0; f < total_frames; ++f) {
    out.decision[f] = out.probability[f] >= cfg.decision_threshold ? 1 : 0;
  }
  return out;
}

}  // namespace affectcal::temporal
