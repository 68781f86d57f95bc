#include <gtest/gtest.h>

#include <cmath>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/nn/train.hpp"
#include "affectcal/rng.hpp"
#include "support.hpp"

using namespace affectcal;
using namespace affectcal::nn;

namespace {

// Two well separated Gaussian blobs per class in 4 dimensions.
TrainingSet blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSequence seq;
  seq.features = Matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.below(3));
    seq.targets.classes.push_back(y);
    for (std::size_t d = 0; d < 4; ++d) seq.features(i, d) = rng.normal() * 0.3 + (d == static_cast<std::size_t>(y) ? 2.0 : 0.0);
  }
  seq.mask.assign(n, 1);
  return TrainingSet{{seq}};
}

NetworkSpec small_softmax() {
  NetworkSpec s;
  s.input_dim = 4;
  s.hidden_dims = {8};
  s.output_dim = 3;
  return s;
}

}  // namespace

TEST(Adam, FirstStepsMatchHandComputation) {
  NetworkState s;
  s.params = {Tensor{"w", {2}, {1.0, -1.0}}};
  s.moment1 = {{0.0, 0.0}};
  s.moment2 = {{0.0, 0.0}};
  const AdamConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.0};
  adam_step(s, {{0.5, -2.0}}, cfg);
  // Bias-corrected first step moves each coordinate by lr * sign(g).
  EXPECT_NEAR(s.params[0].values[0], 0.9, 1e-7);
  EXPECT_NEAR(s.params[0].values[1], -0.9, 1e-7);
  const double p1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(s.params[0].values[0], p1, 1e-15);

  adam_step(s, {{0.25, 0.0}}, cfg);
  const double m = 0.9 * 0.05 + 0.1 * 0.25;
  const double v = 0.999 * 0.00025 + 0.001 * 0.0625;
  const double mhat = m / (1 - 0.81);
  const double vhat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(s.params[0].values[0], p1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
  EXPECT_EQ(s.step, 2);
}

TEST(Adam, WeightDecayIsDecoupled) {
  NetworkState s;
  s.params = {Tensor{"w", {1}, {2.0}}};
  s.moment1 = {{0.0}};
  s.moment2 = {{0.0}};
  adam_step(s, {{0.0}}, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
  EXPECT_NEAR(s.params[0].values[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-12);
}

TEST(Adam, NonFiniteParameterDiverges) {
  NetworkState s;
  s.params = {Tensor{"w", {1}, {0.0}}};
  s.moment1 = {{0.0}};
  s.moment2 = {{0.0}};
  EXPECT_THROW(adam_step(s, {{std::nan("")}}, AdamConfig{}), DivergenceError);
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  const auto data = blobs(600, 1);
  const TrainHyper hyper{0.01, 64, 15, 42, 0.0};
  const auto a = train(small_softmax(), LossSpec{}, data, hyper);
  const auto b = train(small_softmax(), LossSpec{}, data, hyper);
  EXPECT_EQ(a.state, b.state);
  ASSERT_EQ(a.log.size(), 16u);
  EXPECT_LT(a.log.back().loss, 0.5 * a.log.front().loss);
  EXPECT_LT(dataset_loss(small_softmax(), a.state, LossSpec{}, data), 0.2);
}

TEST(Train, MaskedRowsDoNotContribute) {
  auto data = blobs(200, 2);
  auto noisy = data;
  // Corrupt masked rows; the trained state must be unchanged.
  for (std::size_t i = 0; i < 200; i += 3) {
    noisy.sequences[0].mask[i] = 0;
    data.sequences[0].mask[i] = 0;
    noisy.sequences[0].targets.classes[i] = 2 - noisy.sequences[0].targets.classes[i] % 3;
    for (double& v : noisy.sequences[0].features.row(i)) v = 100.0;
  }
  const TrainHyper hyper{0.01, 32, 3, 5, 0.0};
  EXPECT_EQ(train(small_softmax(), LossSpec{}, data, hyper).state,
            train(small_softmax(), LossSpec{}, noisy, hyper).state);
}

TEST(Train, TemporalHeadLearnsRuns) {
  // Sequence-level task: label equals sign of a slowly varying feature.
  Rng rng(3);
  TrainingSet data;
  for (int s = 0; s < 6; ++s) {
    TrainingSequence seq;
    seq.features = Matrix(32, 2);
    for (std::size_t t = 0; t < 32; ++t) {
      const int y = (t / 8 + s) % 2;
      seq.targets.classes.push_back(y);
      seq.features(t, 0) = (y ? 1.0 : -1.0) + 0.5 * rng.normal();
      seq.features(t, 1) = rng.normal();
    }
    seq.mask.assign(32, 1);
    data.sequences.push_back(seq);
  }
  NetworkSpec spec = vd_preset(2, 4);
  LossSpec loss;
  loss.kind = LossKind::WeightedCe;
  const auto r = train(spec, loss, data, TrainHyper{0.01, 2, 30, 1, 0.0});
  EXPECT_LT(r.log.back().loss, r.log.front().loss);
  EXPECT_EQ(r.log.back().step, 90u);
}

TEST(Train, EmptySetIsAnError) {
  TrainingSet data;
  EXPECT_THROW(train(small_softmax(), LossSpec{}, data, TrainHyper{}), EmptyInputError);
}

TEST(GradCheck, AllLossesOnSmallNetworks) {
  Rng rng(4);
  Matrix x(6, 4);
  for (double& v : x.values()) v = rng.normal();

  Targets single;
  for (int i = 0; i < 6; ++i) single.classes.push_back(static_cast<int>(rng.below(3)));
  EXPECT_LT(grad_check(small_softmax(), init_state(small_softmax(), 1), LossSpec{}, x, single).max_relative_error,
            1e-4);

  LossSpec focal;
  focal.kind = LossKind::Focal;
  EXPECT_LT(grad_check(small_softmax(), init_state(small_softmax(), 2), focal, x, single).max_relative_error, 1e-4);

  NetworkSpec va = va_preset(4);
  Targets vat;
  vat.values = Matrix(6, 2);
  for (double& v : vat.values.values()) v = rng.uniform(-1, 1);
  LossSpec mse;
  mse.kind = LossKind::MseCcc;
  EXPECT_LT(grad_check(va, init_state(va, 3), mse, x, vat).max_relative_error, 1e-4);

  NetworkSpec au = au_preset(4, 5);
  Targets aut;
  aut.values = Matrix(6, 12);
  for (double& v : aut.values.values()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  LossSpec bin;
  bin.kind = LossKind::WeightedBinary;
  EXPECT_LT(grad_check(au, init_state(au, 4), bin, x, aut).max_relative_error, 1e-4);
}

TEST(LossLog, CsvLayout) {
  affectcal::testing::TempDir dir("train");
  save_loss_log({{0, 0, 1.5}, {1, 10, 0.25}}, dir / "log.csv");
  EXPECT_EQ(read_text_file(dir / "log.csv"), "epoch,step,loss\n0,0,1.5\n1,10,0.25\n");
}
