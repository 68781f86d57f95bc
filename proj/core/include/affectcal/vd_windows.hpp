#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal::temporal {

struct VdWindowConfig {
  std::size_t clip_len = 32;  // L
  std::size_t frame_step = 2;
  std::size_t infer_stride = 16;
  double decision_threshold = 0.5;

  void validate() const;
  // Frames spanned by one clip: L * frame_step.
  std::size_t span() const noexcept { return clip_len * frame_step; }
};

// Clip starts: multiples of infer_stride (inference) or of span() (training)
// while the clip fits, plus one final clip starting at n - span() when the
// last regular clip does not reach the end. Streams shorter than one span get
// the single start 0.
std::vector<std::size_t> vd_clip_starts(std::size_t num_frames, const VdWindowConfig& cfg,
                                        bool train_mode);

struct VdClip {
  std::size_t start = 0;
  // Row r represents frame start + r * frame_step, or -1 for edge padding.
  std::vector<std::int64_t> index_map;
  Matrix features;  // clip_len x dim
};

struct VdClipSet {
  std::vector<VdClip> clips;
  bool padded = false;  // stream shorter than one span; last row repeated
};

VdClipSet vd_make_clips(const FeatureStream& stream, const VdWindowConfig& cfg, bool train_mode);

struct VdAggregate {
  std::vector<double> probability;
  std::vector<std::uint8_t> decision;  // probability >= decision_threshold
};

// Per frame, the mean of every clip-row probability whose index map hits the
// frame. Frames without a hit take the value of the nearest hit frame within
// frame_step - 1 (ties to the earlier one); anything left raises CoverageError.
VdAggregate vd_aggregate(std::span<const std::vector<double>> window_probs,
                         std::span<const std::vector<std::int64_t>> index_maps,
                         std::size_t total_frames, const VdWindowConfig& cfg);

}  // namespace affectcal::temporal
