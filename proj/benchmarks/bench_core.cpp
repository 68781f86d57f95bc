#include <benchmark/benchmark.h>

#include "affectcal/calibrate.hpp"
#include "affectcal/metrics.hpp"
#include "affectcal/nn/train.hpp"
#include "affectcal/rng.hpp"
#include "affectcal/temporal.hpp"
#include "affectcal/vd_windows.hpp"

using namespace affectcal;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

ScoreStream random_probs(std::size_t n, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  ScoreStream s{"b", {}, Matrix(n, c), ScoreKind::Probability};
  for (std::size_t t = 0; t < n; ++t) {
    s.frame_ids.push_back(static_cast<std::int64_t>(t));
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += s.scores(t, k) = rng.uniform() + 1e-3;
    for (std::size_t k = 0; k < c; ++k) s.scores(t, k) /= sum;
  }
  return s;
}

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto spec = nn::expr_preset(64, 128);
  const auto params = nn::init_state(spec, 1);
  const Matrix x = random_matrix(256, 64, 2);
  const Matrix grad = random_matrix(256, 8, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::forward(params, spec, x));
    benchmark::DoNotOptimize(nn::backward(params, spec, x, grad));
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_MlpForwardBackward);

void BM_TcnForward(benchmark::State& state) {
  const auto spec = nn::vd_preset(32, static_cast<std::size_t>(state.range(0)));
  const auto params = nn::init_state(spec, 1);
  const Matrix x = random_matrix(32, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(params, spec, x));
}
BENCHMARK(BM_TcnForward)->Arg(64)->Arg(256);

void BM_FitLogitBiases(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::vector<ScoreStream> scores{random_probs(n, 8, 4)};
  LabelTrack labels;
  labels.video_id = "b";
  labels.task = TaskKind::Expr;
  Rng rng(5);
  for (std::size_t t = 0; t < n; ++t) {
    labels.frame_ids.push_back(static_cast<std::int64_t>(t));
    labels.mask.push_back(1);
    labels.classes.push_back(static_cast<int>(rng.below(8)));
  }
  const std::vector<LabelTrack> tracks{labels};
  const ClassPriorTable priors = class_priors(tracks, TaskKind::Expr);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate::fit_logit_biases(scores, tracks, priors));
}
BENCHMARK(BM_FitLogitBiases)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Smooth(benchmark::State& state) {
  const auto s = random_probs(20000, 8, 6);
  const temporal::SmoothingConfig cfg{static_cast<int>(state.range(0)), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(temporal::smooth(s, cfg));
}
BENCHMARK(BM_Smooth)->Arg(8)->Arg(32);

void BM_VdAggregate(benchmark::State& state) {
  const temporal::VdWindowConfig cfg;
  const std::size_t n = 5000;
  const auto starts = temporal::vd_clip_starts(n, cfg, false);
  std::vector<std::vector<double>> probs;
  std::vector<std::vector<std::int64_t>> maps;
  Rng rng(7);
  for (std::size_t s : starts) {
    std::vector<double> p(cfg.clip_len);
    std::vector<std::int64_t> m(cfg.clip_len);
    for (std::size_t r = 0; r < cfg.clip_len; ++r) {
      p[r] = rng.uniform();
      m[r] = static_cast<std::int64_t>(s + r * cfg.frame_step);
    }
    probs.push_back(std::move(p));
    maps.push_back(std::move(m));
  }
  for (auto _ : state) benchmark::DoNotOptimize(temporal::vd_aggregate(probs, maps, n, cfg));
}
BENCHMARK(BM_VdAggregate);

void BM_MacroF1(benchmark::State& state) {
  Rng rng(8);
  std::vector<int> pred(100000), truth(100000);
  for (auto& v : pred) v = static_cast<int>(rng.below(8));
  for (auto& v : truth) v = static_cast<int>(rng.below(8));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::macro_f1(pred, truth, {}, 8));
}
BENCHMARK(BM_MacroF1);

}  // namespace

BENCHMARK_MAIN();
