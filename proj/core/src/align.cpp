#include <algorithm>
#include <cmath>

#include "affectcal/datamodel.hpp"
#include "affectcal/errors.hpp"

namespace affectcal {

FeatureStream align_audio_to_video(const FeatureStream& audio,
                                   std::span<const std::int64_t> video_frame_ids,
                                   double video_rate_hz) {
  if (audio.num_frames() == 0) throw EmptyInputError("audio stream '" + audio.video_id + "' is empty");
  if (!(audio.frame_rate_hz > 0.0)) throw ValueError("audio frame rate must be positive");
  if (!(video_rate_hz > 0.0)) throw ValueError("video frame rate must be positive");
  validate_frame_ids(video_frame_ids);

  FeatureStream out;
  out.video_id = audio.video_id;
  out.source_tag = audio.source_tag;
  out.frame_rate_hz = video_rate_hz;
  out.frame_ids.assign(video_frame_ids.begin(), video_frame_ids.end());
  out.features = Matrix(video_frame_ids.size(), audio.dim());

  auto audio_time = [&](std::size_t i) {
    return static_cast<double>(audio.frame_ids[i]) / audio.frame_rate_hz;
  };
  // Both timelines are increasing, so the nearest audio row only moves forward.
  std::size_t j = 0;
  for (std::size_t t = 0; t < video_frame_ids.size(); ++t) {
    const double ts = static_cast<double>(video_frame_ids[t]) / video_rate_hz;
    while (j + 1 < audio.num_frames() &&
           std::abs(audio_time(j + 1) - ts) < std::abs(audio_time(j) - ts)) {
      ++j;
    }
    auto src = audio.features.row(j);
    std::copy(src.begin(), src.end(), out.features.row(t).begin());
  }
  return out;
}

}  // namespace affectcal
