#include <gtest/gtest.h>

#include "affectcal/errors.hpp"
#include "affectcal/vd_windows.hpp"

using namespace affectcal;
using namespace affectcal::temporal;

namespace {

FeatureStream ramp(std::size_t n) {
  FeatureStream f{"v", {}, Matrix(n, 1), "x", 30.0};
  for (std::size_t t = 0; t < n; ++t) {
    f.frame_ids.push_back(static_cast<std::int64_t>(t));
    f.features(t, 0) = static_cast<double>(t);
  }
  return f;
}

}  // namespace

TEST(ClipStarts, HandEnumerated) {
  const VdWindowConfig cfg;
  EXPECT_EQ(cfg.span(), 64u);
  EXPECT_EQ(vd_clip_starts(64, cfg, false), std::vector<std::size_t>{0});
  EXPECT_EQ(vd_clip_starts(96, cfg, false), (std::vector<std::size_t>{0, 16, 32}));
  EXPECT_EQ(vd_clip_starts(100, cfg, false), (std::vector<std::size_t>{0, 16, 32, 36}));
  EXPECT_EQ(vd_clip_starts(100, cfg, true), (std::vector<std::size_t>{0, 36}));
  EXPECT_EQ(vd_clip_starts(128, cfg, true), (std::vector<std::size_t>{0, 64}));
  EXPECT_EQ(vd_clip_starts(10, cfg, true), std::vector<std::size_t>{0});
  EXPECT_THROW(vd_clip_starts(0, cfg, false), EmptyInputError);
}

TEST(Clips, SixtyFourFramesGiveEvenRows) {
  const auto set = vd_make_clips(ramp(64), VdWindowConfig{}, false);
  ASSERT_EQ(set.clips.size(), 1u);
  EXPECT_FALSE(set.padded);
  for (std::size_t r = 0; r < 32; ++r) {
    EXPECT_EQ(set.clips[0].index_map[r], static_cast<std::int64_t>(2 * r));
    EXPECT_EQ(set.clips[0].features(r, 0), static_cast<double>(2 * r));
  }
}

TEST(Clips, ShortStreamIsEdgePadded) {
  const auto set = vd_make_clips(ramp(21), VdWindowConfig{}, false);
  ASSERT_EQ(set.clips.size(), 1u);
  EXPECT_TRUE(set.padded);
  const auto& c = set.clips[0];
  EXPECT_EQ(c.index_map[10], 20);
  EXPECT_EQ(c.index_map[11], -1);
  EXPECT_EQ(c.features(31, 0), 20.0);
}

TEST(Aggregate, MeanOfHitsAndNearestFill) {
  VdWindowConfig cfg;
  cfg.clip_len = 3;
  cfg.infer_stride = 1;
  // Two clips over 6 frames with frame_step 2.
  const std::vector<std::vector<double>> probs{{0.2, 0.4, 0.6}, {0.8, 1.0, 0.0}};
  const std::vector<std::vector<std::int64_t>> maps{{0, 2, 4}, {1, 3, 5}};
  const auto agg = vd_aggregate(probs, maps, 6, cfg);
  EXPECT_EQ(agg.probability, (std::vector<double>{0.2, 0.8, 0.4, 1.0, 0.6, 0.0}));
  EXPECT_EQ(agg.decision, (std::vector<std::uint8_t>{0, 1, 0, 1, 1, 0}));

  const std::vector<std::vector<double>> one{{0.3, 0.7}};
  const std::vector<std::vector<std::int64_t>> gap{{0, 2}};
  // Frame 1 ties between 0 and 2; the earlier neighbour wins. Frame 3 copies 2.
  const auto filled = vd_aggregate(one, gap, 4, cfg);
  EXPECT_EQ(filled.probability, (std::vector<double>{0.3, 0.3, 0.7, 0.7}));
  EXPECT_THROW(vd_aggregate(one, gap, 5, cfg), CoverageError);
}

TEST(Aggregate, OverlapIsAveraged) {
  VdWindowConfig cfg;
  cfg.clip_len = 2;
  cfg.frame_step = 1;
  cfg.infer_stride = 1;
  const std::vector<std::vector<double>> probs{{0.2, 0.4}, {0.6, 0.9}};
  const std::vector<std::vector<std::int64_t>> maps{{0, 1}, {1, 2}};
  const auto agg = vd_aggregate(probs, maps, 3, cfg);
  EXPECT_DOUBLE_EQ(agg.probability[1], 0.5);
  EXPECT_EQ(agg.decision[1], 1);
}

TEST(Aggregate, Validation) {
  VdWindowConfig cfg;
  const std::vector<std::vector<double>> probs{{1.2}};
  const std::vector<std::vector<std::int64_t>> maps{{0}};
  EXPECT_THROW(vd_aggregate(probs, maps, 1, cfg), ValueError);
  const std::vector<std::vector<std::int64_t>> past{{3}};
  const std::vector<std::vector<double>> ok{{0.5}};
  EXPECT_THROW(vd_aggregate(ok, past, 2, cfg), ShapeError);
  VdWindowConfig bad;
  bad.infer_stride = 33;
  EXPECT_THROW(bad.validate(), ConfigError);
}
