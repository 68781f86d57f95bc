#include <gtest/gtest.h>

#include <cmath>

#include "affectcal/errors.hpp"
#include "affectcal/nn/network.hpp"
#include "affectcal/nn/train.hpp"
#include "affectcal/rng.hpp"
#include "support.hpp"

using namespace affectcal;
using namespace affectcal::nn;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

const Tensor& param(const NetworkState& s, const std::string& name) {
  for (const auto& p : s.params) {
    if (p.name == name) return p;
  }
  throw std::runtime_error("no parameter " + name);
}

// Independent TCN + dense evaluation written from the layer definitions.
Matrix naive_logits(const NetworkSpec& spec, const NetworkState& s, const Matrix& input) {
  std::vector<std::vector<double>> x(input.rows());
  for (std::size_t t = 0; t < input.rows(); ++t) x[t].assign(input.row(t).begin(), input.row(t).end());
  const long T = static_cast<long>(input.rows());
  if (spec.temporal_head) {
    const auto& tcn = *spec.temporal_head;
    const long K = static_cast<long>(tcn.kernel_size);
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < tcn.num_layers(); ++l) {
      const std::size_t out = tcn.channels[l];
      const long d = static_cast<long>(tcn.dilations[l]);
      const auto& w = param(s, "tcn" + std::to_string(l) + ".weight").values;
      const auto& b = param(s, "tcn" + std::to_string(l) + ".bias").values;
      std::vector<std::vector<double>> y(x.size(), std::vector<double>(out));
      for (long t = 0; t < T; ++t) {
        for (std::size_t o = 0; o < out; ++o) {
          double u = b[o];
          for (long k = 0; k < K; ++k) {
            const long src = t + (k - K / 2) * d;
            if (src < 0 || src >= T) continue;
            for (std::size_t c = 0; c < in; ++c) {
              u += w[(static_cast<std::size_t>(k) * out + o) * in + c] * x[static_cast<std::size_t>(src)][c];
            }
          }
          double res = 0.0;
          if (in == out) {
            res = x[static_cast<std::size_t>(t)][o];
          } else {
            const auto& p = param(s, "tcn" + std::to_string(l) + ".residual").values;
            for (std::size_t c = 0; c < in; ++c) res += p[o * in + c] * x[static_cast<std::size_t>(t)][c];
          }
          y[static_cast<std::size_t>(t)][o] = res + std::max(0.0, u);
        }
      }
      x = std::move(y);
      in = out;
    }
  }
  const std::size_t dense = spec.hidden_dims.size() + 1;
  for (std::size_t j = 0; j < dense; ++j) {
    const auto& w = param(s, "dense" + std::to_string(j) + ".weight");
    const auto& b = param(s, "dense" + std::to_string(j) + ".bias").values;
    const std::size_t out = w.shape[0];
    const std::size_t in = w.shape[1];
    for (auto& row : x) {
      std::vector<double> y(out);
      for (std::size_t o = 0; o < out; ++o) {
        double u = b[o];
        for (std::size_t c = 0; c < in; ++c) u += w.values[o * in + c] * row[c];
        y[o] = j + 1 == dense ? u : std::max(0.0, u);
      }
      row = std::move(y);
    }
  }
  Matrix out(x.size(), spec.output_dim);
  for (std::size_t t = 0; t < x.size(); ++t) std::copy(x[t].begin(), x[t].end(), out.row(t).begin());
  return out;
}

}  // namespace

TEST(Presets, ShapesFollowTheTaskDefinitions) {
  const auto expr = expr_preset(10);
  EXPECT_EQ(expr.hidden_dims, std::vector<std::size_t>{128});
  EXPECT_EQ(expr.output_dim, 8u);
  EXPECT_EQ(expr.head, Head::Softmax);
  const auto va = va_preset(10);
  EXPECT_TRUE(va.hidden_dims.empty());
  EXPECT_EQ(va.head, Head::Linear);
  const auto au = au_preset(10);
  EXPECT_EQ(au.output_dim, 12u);
  EXPECT_EQ(au.head, Head::Sigmoid);
  const auto vd = vd_preset(10);
  ASSERT_TRUE(vd.temporal_head.has_value());
  EXPECT_EQ(vd.temporal_head->num_layers(), 5u);
  EXPECT_EQ(vd.temporal_head->dilations, (std::vector<std::size_t>{1, 2, 4, 8, 16}));
  EXPECT_EQ(vd.temporal_head->channels.front(), 256u);
  // 1 + (k - 1) * sum(dilations)
  EXPECT_EQ(vd.temporal_head->receptive_field(), 63u);
}

TEST(Layout, NamesAndShapes) {
  const auto layout = parameter_layout(expr_preset(6, 4));
  ASSERT_EQ(layout.size(), 4u);
  EXPECT_EQ(layout[0].name, "dense0.weight");
  EXPECT_EQ(layout[0].shape, (std::vector<std::size_t>{4, 6}));
  EXPECT_EQ(layout[3].name, "dense1.bias");
  EXPECT_EQ(layout[3].shape, (std::vector<std::size_t>{8}));
  const auto tcn = parameter_layout(vd_preset(3, 5));
  EXPECT_EQ(tcn[0].name, "tcn0.weight");
  EXPECT_EQ(tcn[0].shape, (std::vector<std::size_t>{3, 5, 3}));
  EXPECT_EQ(tcn[2].name, "tcn0.residual");
}

TEST(Init, DeterministicAndWithinFanInBound) {
  const auto spec = expr_preset(9, 16);
  const auto a = init_state(spec, 7);
  const auto b = init_state(spec, 7);
  const auto c = init_state(spec, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.params[0].values, c.params[0].values);
  for (double v : a.params[0].values) EXPECT_LE(std::abs(v), 1.0 / 3.0);
  for (double v : a.params[2].values) EXPECT_LE(std::abs(v), 0.25);
}

TEST(Forward, MatchesNaiveEvaluation) {
  Rng rng(3);
  NetworkSpec mlp = expr_preset(5, 7);
  const auto s1 = init_state(mlp, 1);
  const Matrix x1 = random_matrix(11, 5, rng);
  const auto f1 = forward(s1, mlp, x1);
  const Matrix ref1 = naive_logits(mlp, s1, x1);
  for (std::size_t i = 0; i < ref1.size(); ++i) EXPECT_NEAR(f1.logits.values()[i], ref1.values()[i], 1e-12);

  NetworkSpec tcn = vd_preset(3, 4);
  tcn.temporal_head->channels = {4, 4, 6, 6, 6};
  const auto s2 = init_state(tcn, 2);
  const Matrix x2 = random_matrix(40, 3, rng);
  const auto f2 = forward(s2, tcn, x2);
  const Matrix ref2 = naive_logits(tcn, s2, x2);
  for (std::size_t i = 0; i < ref2.size(); ++i) EXPECT_NEAR(f2.logits.values()[i], ref2.values()[i], 1e-12);
}

TEST(Forward, HeadsProduceValidOutputs) {
  Rng rng(4);
  const Matrix x = random_matrix(6, 4, rng);
  const auto expr = forward(init_state(expr_preset(4, 3), 0), expr_preset(4, 3), x);
  for (std::size_t t = 0; t < 6; ++t) {
    double sum = 0.0;
    for (double v : expr.outputs.row(t)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  const auto au = forward(init_state(au_preset(4, 3), 0), au_preset(4, 3), x);
  for (double v : au.outputs.values()) EXPECT_TRUE(v > 0.0 && v < 1.0);
  const auto va = forward(init_state(va_preset(4), 0), va_preset(4), x);
  EXPECT_EQ(va.outputs, va.logits);
}

TEST(Forward, TcnIsNonCausal) {
  // Centered padding: the output at t depends on frames after t.
  Rng rng(9);
  NetworkSpec tcn = vd_preset(2, 3);
  const auto s = init_state(tcn, 5);
  Matrix x = random_matrix(20, 2, rng);
  const auto base = forward(s, tcn, x).logits;
  x(12, 0) += 1.0;
  const auto moved = forward(s, tcn, x).logits;
  EXPECT_NE(base(10, 0), moved(10, 0));
  EXPECT_NE(base(14, 0), moved(14, 0));
}

TEST(Forward, RejectsWrongWidth) {
  const auto spec = expr_preset(4, 3);
  EXPECT_THROW(forward(init_state(spec, 0), spec, Matrix(2, 5)), ShapeError);
}

TEST(Gelu, GradientCheck) {
  Rng rng(12);
  NetworkSpec spec = expr_preset(4, 5);
  spec.activation = Activation::Gelu;
  const auto state = init_state(spec, 3);
  Targets t;
  for (int i = 0; i < 9; ++i) t.classes.push_back(static_cast<int>(rng.below(8)));
  LossSpec loss;
  const auto r = grad_check(spec, state, loss, random_matrix(9, 4, rng), t);
  EXPECT_EQ(r.skipped_kinks, 0u);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(ModelFile, SaveLoadRoundTrip) {
  affectcal::testing::TempDir dir("nn");
  ModelFile m;
  m.task = TaskKind::VD;
  m.spec = vd_preset(3, 4);
  m.state = init_state(m.spec, 21);
  m.state.moment1[0][0] = 0.5;
  m.state.step = 17;
  m.priors = ClassPriorTable{{3, 5}, 8};
  save_model(m, dir / "m.json");
  EXPECT_EQ(load_model(dir / "m.json"), m);
}
