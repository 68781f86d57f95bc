#include <gtest/gtest.h>

#include <cmath>

#include "affectcal/calibrate.hpp"
#include "affectcal/errors.hpp"
#include "affectcal/rng.hpp"

using namespace affectcal;
using namespace affectcal::calibrate;

namespace {

ScoreStream random_probs(std::size_t n, std::size_t c, Rng& rng, double sharp = 1.0) {
  ScoreStream s{"v", {}, Matrix(n, c), ScoreKind::Probability};
  for (std::size_t t = 0; t < n; ++t) {
    s.frame_ids.push_back(static_cast<std::int64_t>(t));
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      s.scores(t, k) = std::exp(sharp * rng.normal());
      sum += s.scores(t, k);
    }
    for (std::size_t k = 0; k < c; ++k) s.scores(t, k) /= sum;
  }
  return s;
}

LabelTrack labels_from(const std::vector<int>& classes, TaskKind task = TaskKind::Expr) {
  LabelTrack l;
  l.video_id = "v";
  l.task = task;
  for (std::size_t t = 0; t < classes.size(); ++t) l.frame_ids.push_back(static_cast<std::int64_t>(t));
  l.mask.assign(classes.size(), 1);
  l.classes = classes;
  return l;
}

double naive_macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, std::size_t c) {
  double sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == static_cast<int>(k);
      const bool y = truth[i] == static_cast<int>(k);
      tp += p && y;
      fp += p && !y;
      fn += !p && y;
    }
    sum += tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return sum / static_cast<double>(c);
}

std::vector<int> naive_argmax(const Matrix& p, const std::vector<double>& b) {
  std::vector<int> out;
  for (std::size_t t = 0; t < p.rows(); ++t) {
    int best = 0;
    double bv = std::log(p(t, 0) + 1e-12) + b[0];
    for (std::size_t k = 1; k < p.cols(); ++k) {
      const double v = std::log(p(t, k) + 1e-12) + b[k];
      if (v > bv) {
        bv = v;
        best = static_cast<int>(k);
      }
    }
    out.push_back(best);
  }
  return out;
}

// Direct coordinate search: re-evaluates the full argmax for every candidate.
std::vector<double> naive_gla(const Matrix& p, const std::vector<int>& truth, std::vector<double> b,
                              const std::vector<double>& grid, int passes) {
  const std::size_t c = p.cols();
  double obj = naive_macro_f1(naive_argmax(p, b), truth, c);
  for (int pass = 0; pass < passes; ++pass) {
    bool changed = false;
    for (std::size_t k = 0; k < c; ++k) {
      double best = obj;
      double best_v = b[k];
      for (double g : grid) {
        auto trial = b;
        trial[k] = g;
        const double f = naive_macro_f1(naive_argmax(p, trial), truth, c);
        if (f > best) {
          best = f;
          best_v = g;
        }
      }
      if (best_v != b[k]) {
        b[k] = best_v;
        obj = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return b;
}

}  // namespace

TEST(Grid, DefaultHasFortyOnePoints) {
  const auto g = GlaConfig{}.grid();
  ASSERT_EQ(g.size(), 41u);
  EXPECT_EQ(g.front(), -2.0);
  EXPECT_EQ(g.back(), 2.0);
  EXPECT_EQ(g[20], 0.0);
  EXPECT_EQ(g[21], 0.1);
  GlaConfig one;
  one.grid_lo = one.grid_hi = 0.5;
  EXPECT_EQ(one.grid(), std::vector<double>{0.5});
  GlaConfig bad;
  bad.grid_step = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = GlaConfig{};
  bad.grid_lo = 1.0;
  bad.grid_hi = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Adjust, ScoresAndProbabilities) {
  ScoreStream p{"v", {0}, Matrix(1, 2), ScoreKind::Probability};
  p.scores(0, 0) = 0.25;
  p.scores(0, 1) = 0.75;
  const std::vector<double> b{std::log(3.0), 0.0};
  const auto s = adjusted_scores(p, b);
  EXPECT_EQ(s.kind, ScoreKind::Logit);
  EXPECT_NEAR(s.scores(0, 0), std::log(0.25 + 1e-12) + std::log(3.0), 1e-15);
  const auto q = calibrated_probabilities(p, b);
  EXPECT_NEAR(q.scores(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(q.scores(0, 1), 0.5, 1e-9);
  // Equal adjusted scores resolve to the lower index.
  EXPECT_EQ(adjusted_argmax(p.scores, std::vector<double>{std::log(3.0), 0.0})[0], 0);
  EXPECT_THROW(adjusted_scores(p, std::vector<double>{0.0}), ShapeError);
  p.kind = ScoreKind::Logit;
  EXPECT_THROW(adjusted_scores(p, b), ConfigError);
}

TEST(Gla, MatchesDirectCoordinateSearch) {
  Rng rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t c = 3 + trial % 3;
    auto s = random_probs(150, c, rng, 1.5);
    std::vector<int> truth;
    for (std::size_t t = 0; t < 150; ++t) {
      // Truth correlates with scores but favours class 0.
      truth.push_back(rng.uniform() < 0.4 ? 0 : static_cast<int>(naive_argmax(s.scores, std::vector<double>(c, 0.0))[t]));
    }
    ClassPriorTable priors{std::vector<std::int64_t>(c, 0), 150};
    for (int y : truth) ++priors.counts[static_cast<std::size_t>(y)];
    GlaConfig cfg;
    cfg.grid_lo = -1.0;
    cfg.grid_hi = 1.0;
    cfg.grid_step = 0.25;
    const std::vector<ScoreStream> streams{s};
    const std::vector<LabelTrack> tracks{labels_from(truth)};
    const auto art = fit_logit_biases(streams, tracks, priors, cfg);
    const auto expected = naive_gla(s.scores, truth, priors.priors(), cfg.grid(), cfg.max_passes);
    ASSERT_TRUE(art.bias.has_value());
    EXPECT_EQ(*art.bias, expected) << "trial " << trial;
  }
}

TEST(Gla, SearchLogIsMonotoneAndNeverWorseThanStart) {
  Rng rng(5);
  auto s = random_probs(300, 8, rng);
  std::vector<int> truth(300);
  for (auto& y : truth) y = rng.uniform() < 0.5 ? 0 : static_cast<int>(rng.below(8));
  ClassPriorTable priors{std::vector<std::int64_t>(8, 0), 300};
  for (int y : truth) ++priors.counts[static_cast<std::size_t>(y)];
  const std::vector<ScoreStream> streams{s};
  const std::vector<LabelTrack> tracks{labels_from(truth)};
  const auto art = fit_logit_biases(streams, tracks, priors);
  ASSERT_FALSE(art.search_log.empty());
  EXPECT_EQ(art.search_log.size() % 8, 0u);
  const double start = naive_macro_f1(naive_argmax(s.scores, priors.priors()), truth, 8);
  double prev = start;
  for (const auto& e : art.search_log) {
    EXPECT_GE(e.f1, prev);
    prev = e.f1;
  }
  EXPECT_NEAR(prev, naive_macro_f1(naive_argmax(s.scores, *art.bias), truth, 8), 1e-12);
}

TEST(Gla, MaskedFramesAreIgnored) {
  Rng rng(8);
  auto s = random_probs(50, 3, rng);
  std::vector<int> truth(50);
  for (auto& y : truth) y = static_cast<int>(rng.below(3));
  auto l = labels_from(truth);
  for (std::size_t t = 0; t < 50; t += 2) l.mask[t] = 0;
  const std::vector<ScoreStream> streams{s};
  const std::vector<LabelTrack> tracks{l};
  GlaConfig cfg;
  cfg.init = BiasInit::Zero;
  const auto art = fit_logit_biases(streams, tracks, ClassPriorTable{}, cfg);

  std::vector<std::size_t> kept;
  std::vector<int> kept_truth;
  for (std::size_t t = 1; t < 50; t += 2) {
    kept.push_back(t);
    kept_truth.push_back(truth[t]);
  }
  const Matrix sub = s.scores.gather_rows(kept);
  EXPECT_EQ(*art.bias, naive_gla(sub, kept_truth, std::vector<double>(3, 0.0), cfg.grid(), cfg.max_passes));
}

TEST(Thresholds, BruteForceAndTies) {
  Rng rng(9);
  const std::size_t n = 200;
  ScoreStream s{"v", {}, Matrix(n, 12), ScoreKind::Probability};
  LabelTrack l;
  l.video_id = "v";
  l.task = TaskKind::AU;
  l.au.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    s.frame_ids.push_back(static_cast<std::int64_t>(t));
    l.frame_ids.push_back(static_cast<std::int64_t>(t));
    l.mask.push_back(1);
    for (std::size_t c = 0; c < 12; ++c) {
      const bool y = c != 11 && rng.uniform() < 0.3;
      l.au[t][c] = y;
      s.scores(t, c) = std::clamp(0.35 + (y ? 0.2 : -0.1) + 0.2 * rng.normal(), 0.0, 1.0);
    }
  }
  const std::vector<ScoreStream> streams{s};
  const std::vector<LabelTrack> tracks{l};
  const auto art = tune_thresholds(streams, tracks);
  ASSERT_TRUE(art.thresholds.has_value());
  EXPECT_EQ(art.warnings, std::vector<int>{11});
  EXPECT_EQ((*art.thresholds)[11], 0.5);
  for (std::size_t c = 0; c < 11; ++c) {
    double best = -1.0;
    double best_tau = 0.0;
    for (int k = 1; k <= 9; ++k) {
      const double tau = k / 10.0;
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t t = 0; t < n; ++t) {
        const bool p = s.scores(t, c) >= tau;
        tp += p && l.au[t][c];
        fp += p && !l.au[t][c];
        fn += !p && l.au[t][c];
      }
      const double f = 2 * tp / (2 * tp + fp + fn);
      if (f > best) {
        best = f;
        best_tau = tau;
      }
    }
    EXPECT_EQ((*art.thresholds)[c], best_tau) << "channel " << c;
  }
}

TEST(Thresholds, AllEqualScoresPickLowest) {
  ScoreStream s{"v", {0, 1}, Matrix(2, 12, 0.95), ScoreKind::Probability};
  LabelTrack l;
  l.video_id = "v";
  l.task = TaskKind::AU;
  l.frame_ids = {0, 1};
  l.mask = {1, 1};
  l.au.resize(2);
  l.au[0].fill(1);
  const std::vector<ScoreStream> streams{s};
  const std::vector<LabelTrack> tracks{l};
  const auto art = tune_thresholds(streams, tracks);
  for (double tau : *art.thresholds) EXPECT_EQ(tau, 0.1);
}
