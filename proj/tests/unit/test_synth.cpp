#include <gtest/gtest.h>

#include <cmath>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/metrics.hpp"
#include "affectcal/nn/train.hpp"
#include "affectcal/synth.hpp"
#include "support.hpp"

using namespace affectcal;
using namespace affectcal::synth;

TEST(Synth, SameSeedSameFiles) {
  affectcal::testing::TempDir a("synth"), b("synth");
  SynthConfig cfg;
  cfg.num_videos = 3;
  cfg.frames_per_video = 120;
  cfg.audio_agreement = 0.5;
  cfg.pretrained_confident_prob = 0.3;
  cfg.seed = 99;
  const auto ma = generate(cfg, a.path());
  generate(cfg, b.path());
  for (const auto& e : ma.entries) {
    for (const auto& rel : {e.feature_path, *e.label_path, *e.audio_feature_path, *e.pretrained_score_path}) {
      EXPECT_EQ(read_text_file(a / rel), read_text_file(b / rel)) << rel;
    }
  }
  EXPECT_EQ(read_text_file(a / "train.json").size(), read_text_file(b / "train.json").size());
  // The files pass the loaders' invariants.
  const auto loaded = load_manifest(a / "train.json");
  EXPECT_EQ(loaded.entries.size(), 3u);
  EXPECT_EQ(loaded.entries[0].video_id, "train_v0000");
  EXPECT_NO_THROW(load_label_track(a / *loaded.entries[0].label_path, TaskKind::Expr).validate());
  EXPECT_NO_THROW(load_score_stream(a / *loaded.entries[1].pretrained_score_path).validate_simplex());
}

TEST(Synth, UniformPriorsWithinTwoPercent) {
  SynthConfig cfg;
  cfg.num_videos = 50;
  cfg.frames_per_video = 2000;
  cfg.segment_mean_length = 5.0;
  cfg.seed = 1;
  std::vector<double> counts(8, 0.0);
  for (const auto& v : generate_videos(cfg)) {
    for (int y : v.labels.classes) counts[static_cast<std::size_t>(y)] += 1.0;
  }
  for (double c : counts) EXPECT_NEAR(c / 1e5, 0.125, 0.02);
}

TEST(Synth, ViolentFractionAndRunLength) {
  SynthConfig cfg;
  cfg.task = TaskKind::VD;
  cfg.num_videos = 50;
  cfg.frames_per_video = 2000;
  cfg.segment_mean_length = 20.0;
  cfg.seed = 2;
  double positives = 0.0;
  double runs = 0.0;
  for (const auto& v : generate_videos(cfg)) {
    const auto& y = v.labels.classes;
    runs += 1.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      positives += y[t];
      if (t > 0 && y[t] != y[t - 1]) runs += 1.0;
    }
  }
  EXPECT_NEAR(positives / 1e5, 0.44, 0.02);
  EXPECT_NEAR(1e5 / runs, 20.0, 2.0);

  cfg.positive_fraction = 0.0;
  cfg.num_videos = 2;
  for (const auto& v : generate_videos(cfg)) {
    for (int y : v.labels.classes) EXPECT_EQ(y, 0);
  }
}

TEST(Synth, PretrainedConfidentImpliesCorrect) {
  SynthConfig cfg;
  cfg.num_videos = 4;
  cfg.frames_per_video = 500;
  cfg.pretrained_confident_prob = 0.5;
  cfg.seed = 3;
  const LabelSet src = affectnet_labels();
  const LabelSet dst = label_set(TaskKind::Expr);
  std::size_t confident = 0;
  for (const auto& v : generate_videos(cfg)) {
    const auto& p = *v.pretrained;
    for (std::size_t t = 0; t < p.num_frames(); ++t) {
      auto row = p.scores.row(t);
      const auto top = std::max_element(row.begin(), row.end());
      if (*top <= 0.9) continue;
      ++confident;
      const auto& name = src.names[static_cast<std::size_t>(top - row.begin())];
      EXPECT_EQ(name, dst.names[static_cast<std::size_t>(v.hidden[t])]);
    }
  }
  EXPECT_GT(confident, 500u);
}

TEST(Synth, AudioAlignsToVideoTimeline) {
  SynthConfig cfg;
  cfg.num_videos = 1;
  cfg.frames_per_video = 300;
  cfg.audio_agreement = 1.0;
  const auto v = generate_videos(cfg).front();
  ASSERT_TRUE(v.audio.has_value());
  EXPECT_EQ(v.audio->num_frames(), 500u);
  EXPECT_EQ(v.audio->frame_rate_hz, 50.0);
}

TEST(Synth, AuRatesFollowLadder) {
  SynthConfig cfg;
  cfg.task = TaskKind::AU;
  cfg.num_videos = 20;
  cfg.frames_per_video = 2000;
  cfg.segment_mean_length = 10.0;
  cfg.seed = 4;
  std::array<double, kNumAu> pos{};
  for (const auto& v : generate_videos(cfg)) {
    for (const auto& bits : v.labels.au) {
      for (std::size_t c = 0; c < kNumAu; ++c) pos[c] += bits[c];
    }
  }
  const auto rates = cfg.effective_au_rates();
  for (std::size_t c = 0; c < kNumAu; ++c) EXPECT_NEAR(pos[c] / 4e4, rates[c], 0.03) << "channel " << c;
}

TEST(Synth, NoiselessDataIsSeparable) {
  SynthConfig cfg;
  cfg.num_videos = 4;
  cfg.frames_per_video = 400;
  cfg.feature_noise_sigma = 0.0;
  cfg.feature_dim = 8;
  cfg.segment_mean_length = 10.0;
  const auto videos = generate_videos(cfg);
  nn::TrainingSet data;
  std::vector<int> truth;
  for (const auto& v : videos) {
    nn::TrainingSequence s{v.features.features, {}, std::vector<std::uint8_t>(400, 1)};
    s.targets.classes = v.labels.classes;
    truth.insert(truth.end(), v.labels.classes.begin(), v.labels.classes.end());
    // Nearest-centroid oracle: the argmax feature is the class.
    for (std::size_t t = 0; t < 400; ++t) {
      auto row = v.features.features.row(t);
      EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), v.labels.classes[t]);
    }
    data.sequences.push_back(std::move(s));
  }
  const auto spec = nn::expr_preset(8, 16);
  const auto trained = nn::train(spec, nn::LossSpec{}, data, nn::TrainHyper{0.05, 64, 30, 1, 0.0});
  std::vector<int> pred;
  for (const auto& s : data.sequences) {
    const auto out = nn::forward(trained.state, spec, s.features).outputs;
    for (std::size_t t = 0; t < out.rows(); ++t) {
      auto row = out.row(t);
      pred.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  std::vector<int> present(8, 0);
  for (int y : truth) present[static_cast<std::size_t>(y)] = 1;
  const auto f1 = metrics::macro_f1(pred, truth, {}, 8);
  for (std::size_t c = 0; c < 8; ++c) {
    if (present[c]) {
      EXPECT_EQ(f1.per_class[c], 1.0) << "class " << c;
    }
  }
}

TEST(Synth, ValidationErrors) {
  SynthConfig cfg;
  cfg.class_weights = {0.5, 0.5, 0, 0, 0, 0, 0.1, -0.1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.class_weights = {1, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_NO_THROW(cfg.validate());
  cfg.feature_dim = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
