#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "affectcal/datamodel.hpp"
#include "affectcal/errors.hpp"
#include "affectcal/rng.hpp"

using namespace affectcal;

namespace {

LabelTrack expr_track(std::vector<int> classes, std::vector<std::uint8_t> mask = {}) {
  LabelTrack t;
  t.video_id = "v";
  t.task = TaskKind::Expr;
  for (std::size_t i = 0; i < classes.size(); ++i) t.frame_ids.push_back(static_cast<std::int64_t>(i));
  t.mask = mask.empty() ? std::vector<std::uint8_t>(classes.size(), 1) : mask;
  t.classes = std::move(classes);
  return t;
}

}  // namespace

TEST(Task, ParseAndPrintRoundTrip) {
  for (auto task : {TaskKind::Expr, TaskKind::VA, TaskKind::AU, TaskKind::VD, TaskKind::Audio}) {
    EXPECT_EQ(parse_task(to_string(task)), task);
  }
  EXPECT_EQ(parse_task("EXPR"), TaskKind::Expr);
  EXPECT_THROW(parse_task("emotion"), ConfigError);
}

TEST(Task, OutputCounts) {
  EXPECT_EQ(num_outputs(TaskKind::Expr), 8u);
  EXPECT_EQ(num_outputs(TaskKind::VA), 2u);
  EXPECT_EQ(num_outputs(TaskKind::AU), 12u);
  EXPECT_EQ(num_outputs(TaskKind::VD), 2u);
  EXPECT_EQ(num_outputs(TaskKind::Audio), 8u);
  EXPECT_TRUE(is_single_label(TaskKind::Audio));
  EXPECT_FALSE(is_single_label(TaskKind::AU));
}

TEST(LabelSets, ExprAndAffectNetShareSevenNames) {
  const LabelSet expr = label_set(TaskKind::Expr);
  const LabelSet an = affectnet_labels();
  ASSERT_EQ(expr.size(), 8u);
  ASSERT_EQ(an.size(), 8u);
  int shared = 0;
  for (const auto& name : an.names) shared += expr.index_of(name).has_value();
  EXPECT_EQ(shared, 7);
  EXPECT_FALSE(expr.index_of("Contempt").has_value());
  EXPECT_FALSE(an.index_of("Other").has_value());
  EXPECT_EQ(label_set(TaskKind::AU).size(), 12u);
}

TEST(FrameIds, MustStrictlyIncrease) {
  const std::vector<std::int64_t> good{0, 1, 5};
  const std::vector<std::int64_t> dup{0, 1, 1};
  const std::vector<std::int64_t> neg{-1, 0};
  EXPECT_NO_THROW(validate_frame_ids(good));
  EXPECT_THROW(validate_frame_ids(dup), OrderError);
  EXPECT_THROW(validate_frame_ids(neg), OrderError);
}

TEST(Streams, ValidateRejectsNonFiniteAndRange) {
  FeatureStream f{"v", {0, 1}, Matrix(2, 2), "x", 30.0};
  EXPECT_NO_THROW(f.validate());
  f.features(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(f.validate(), ValueError);

  ScoreStream s{"v", {0, 1}, Matrix(2, 2), ScoreKind::Probability};
  s.scores(0, 0) = 1.0;
  s.scores(1, 1) = 1.0;
  EXPECT_NO_THROW(s.validate_simplex());
  s.scores(1, 1) = 1.2;
  EXPECT_THROW(s.validate(), ValueError);
  s.kind = ScoreKind::Logit;
  EXPECT_NO_THROW(s.validate());
  s.kind = ScoreKind::Continuous;
  EXPECT_THROW(s.validate(), ValueError);
}

TEST(LabelTrack, ValidatesClassRange) {
  auto t = expr_track({0, 7, 3});
  EXPECT_NO_THROW(t.validate());
  t.classes[1] = 8;
  EXPECT_THROW(t.validate(), ValueError);
  t.classes[1] = 1;
  t.mask.pop_back();
  EXPECT_THROW(t.validate(), ShapeError);
}

TEST(Priors, CountOnlyAnnotatedFrames) {
  const std::vector<LabelTrack> tracks{expr_track({0, 0, 1, 2}, {1, 1, 1, 0}), expr_track({1, 1})};
  const ClassPriorTable table = class_priors(tracks, TaskKind::Expr);
  EXPECT_EQ(table.total, 5);
  EXPECT_EQ(table.counts[0], 2);
  EXPECT_EQ(table.counts[1], 3);
  EXPECT_EQ(table.counts[2], 0);
  EXPECT_DOUBLE_EQ(table.priors()[1], 0.6);
  EXPECT_THROW(class_priors(tracks, TaskKind::AU), ConfigError);
  EXPECT_THROW(class_priors({}, TaskKind::Expr), EmptyInputError);
}

TEST(Align, NearestTimestampMatchesBruteForce) {
  Rng rng(5);
  FeatureStream audio{"v", {}, Matrix(), "a", 50.0};
  for (int j = 0; j < 170; ++j) {
    audio.frame_ids.push_back(j);
    audio.features.append_row(std::vector<double>{static_cast<double>(j)});
  }
  std::vector<std::int64_t> video_ids;
  for (int t = 0; t < 100; ++t) {
    if (rng.uniform() < 0.8) video_ids.push_back(t);
  }
  const FeatureStream aligned = align_audio_to_video(audio, video_ids, 30.0);
  ASSERT_EQ(aligned.num_frames(), video_ids.size());
  for (std::size_t t = 0; t < video_ids.size(); ++t) {
    const double ts = static_cast<double>(video_ids[t]) / 30.0;
    std::size_t best = 0;
    for (std::size_t j = 1; j < audio.num_frames(); ++j) {
      if (std::abs(static_cast<double>(j) / 50.0 - ts) < std::abs(static_cast<double>(best) / 50.0 - ts)) best = j;
    }
    EXPECT_EQ(aligned.features(t, 0), static_cast<double>(best)) << "video frame " << video_ids[t];
  }
}

TEST(Align, EmptyAudioIsAnError) {
  FeatureStream audio{"v", {}, Matrix(0, 3), "a", 50.0};
  const std::vector<std::int64_t> ids{0, 1};
  EXPECT_THROW(align_audio_to_video(audio, ids, 30.0), EmptyInputError);
}

TEST(Calibration, ThresholdsMustBeOnTheGrid) {
  CalibrationArtifact a;
  a.task = TaskKind::AU;
  a.thresholds = std::vector<double>(12, 0.3);
  EXPECT_NO_THROW(a.validate());
  (*a.thresholds)[4] = 0.35;
  EXPECT_THROW(a.validate(), ValueError);
  (*a.thresholds)[4] = 1.0;
  EXPECT_THROW(a.validate(), ValueError);
  a.thresholds->pop_back();
  EXPECT_THROW(a.validate(), ShapeError);

  CalibrationArtifact b;
  b.task = TaskKind::Expr;
  b.bias = std::vector<double>(7, 0.0);
  EXPECT_THROW(b.validate(), ShapeError);
}

TEST(Errors, CategoriesMapToExitCodes) {
  EXPECT_EQ(exit_code(ConfigError("x").category()), 2);
  EXPECT_EQ(exit_code(FormatError("x").category()), 3);
  EXPECT_EQ(exit_code(AlignError("x").category()), 3);
  EXPECT_EQ(exit_code(DivergenceError("x").category()), 4);
  EXPECT_EQ(exit_code(CoverageError("x").category()), 5);
}
