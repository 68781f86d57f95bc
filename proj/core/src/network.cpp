#include "affectcal/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "affectcal/errors.hpp"
#include "affectcal/rng.hpp"

namespace affectcal::nn {

namespace {

double activate(Activation a, double u) {
  if (a == Activation::Relu) return u > 0.0 ? u : 0.0;
  return 0.5 * u * (1.0 + std::erf(u * std::numbers::sqrt2 / 2.0));
}

double activate_grad(Activation a, double u) {
  if (a == Activation::Relu) return u > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(u * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + u * pdf;
}

// out(n x m) = x(n x k) * w(m x k)^T + b(m)
Matrix affine(const Matrix& x, std::span<const double> w, std::span<const double> b,
              std::size_t out_dim) {
  const std::size_t in = x.cols();
  Matrix out(x.rows(), out_dim);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto xr = x.row(t);
    auto orow = out.row(t);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = w.data() + o * in;
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t c = 0; c < in; ++c) acc += wr[c] * xr[c];
      orow[o] = acc;
    }
  }
  return out;
}

// dW(m x k) += dy^T x ; returns dx = dy * W when wanted.
void affine_backward(const Matrix& x, const Matrix& dy, std::span<const double> w,
                     std::vector<double>& dw, std::vector<double>* db, Matrix* dx) {
  const std::size_t in = x.cols();
  const std::size_t out_dim = dy.cols();
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto xr = x.row(t);
    auto gr = dy.row(t);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      double* dwr = dw.data() + o * in;
      for (std::size_t c = 0; c < in; ++c) dwr[c] += g * xr[c];
      if (db) (*db)[o] += g;
      if (dx) {
        auto dxr = dx->row(t);
        const double* wr = w.data() + o * in;
        for (std::size_t c = 0; c < in; ++c) dxr[c] += g * wr[c];
      }
    }
  }
}

std::ptrdiff_t tap_offset(std::size_t k, std::size_t kernel, std::size_t dilation) {
  return (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(kernel / 2)) *
         static_cast<std::ptrdiff_t>(dilation);
}

// u[t,o] = b[o] + sum_k sum_c W[k,o,c] x[t + off_k, c]
Matrix conv_forward(const Matrix& x, std::span<const double> w, std::span<const double> b,
                    std::size_t kernel, std::size_t dilation, std::size_t out_dim) {
  const std::size_t in = x.cols();
  const auto T = static_cast<std::ptrdiff_t>(x.rows());
  Matrix out(x.rows(), out_dim);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    auto orow = out.row(static_cast<std::size_t>(t));
    std::copy(b.begin(), b.end(), orow.begin());
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = t + tap_offset(k, kernel, dilation);
      if (src < 0 || src >= T) continue;
      auto xr = x.row(static_cast<std::size_t>(src));
      const double* wk = w.data() + k * out_dim * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wr = wk + o * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * xr[c];
        orow[o] += acc;
      }
    }
  }
  return out;
}

void conv_backward(const Matrix& x, const Matrix& du, std::span<const double> w,
                   std::size_t kernel, std::size_t dilation, std::vector<double>& dw,
                   std::vector<double>& db, Matrix& dx) {
  const std::size_t in = x.cols();
  const std::size_t out_dim = du.cols();
  const auto T = static_cast<std::ptrdiff_t>(x.rows());
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    auto gr = du.row(static_cast<std::size_t>(t));
    for (std::size_t o = 0; o < out_dim; ++o) db[o] += gr[o];
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = t + tap_offset(k, kernel, dilation);
      if (src < 0 || src >= T) continue;
      auto xr = x.row(static_cast<std::size_t>(src));
      auto dxr = dx.row(static_cast<std::size_t>(src));
      const double* wk = w.data() + k * out_dim * in;
      double* dwk = dw.data() + k * out_dim * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double g = gr[o];
        if (g == 0.0) continue;
        const double* wr = wk + o * in;
        double* dwr = dwk + o * in;
        for (std::size_t c = 0; c < in; ++c) {
          dwr[c] += g * xr[c];
          dxr[c] += g * wr[c];
        }
      }
    }
  }
}

struct TcnLayerRef {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::optional<std::size_t> residual;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t dilation = 1;
};

struct DenseLayerRef {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

struct Layout {
  std::vector<TcnLayerRef> tcn;
  std::vector<DenseLayerRef> dense;  // last entry is the output layer
  std::vector<Tensor> tensors;
};

Layout build_layout(const NetworkSpec& spec) {
  Layout layout;
  std::size_t width = spec.input_dim;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    layout.tensors.push_back({std::move(name), std::move(shape), {}});
    return layout.tensors.size() - 1;
  };
  if (spec.temporal_head) {
    const auto& tcn = *spec.temporal_head;
    for (std::size_t i = 0; i < tcn.num_layers(); ++i) {
      TcnLayerRef ref;
      ref.in = width;
      ref.out = tcn.channels[i];
      ref.dilation = tcn.dilations[i];
      const std::string p = "tcn" + std::to_string(i);
      ref.weight = add(p + ".weight", {tcn.kernel_size, ref.out, ref.in});
      ref.bias = add(p + ".bias", {ref.out});
      if (ref.in != ref.out) ref.residual = add(p + ".residual", {ref.out, ref.in});
      layout.tcn.push_back(ref);
      width = ref.out;
    }
  }
  std::vector<std::size_t> dims = spec.hidden_dims;
  dims.push_back(spec.output_dim);
  for (std::size_t j = 0; j < dims.size(); ++j) {
    DenseLayerRef ref;
    ref.in = width;
    ref.out = dims[j];
    const std::string p = "dense" + std::to_string(j);
    ref.weight = add(p + ".weight", {ref.out, ref.in});
    ref.bias = add(p + ".bias", {ref.out});
    layout.dense.push_back(ref);
    width = ref.out;
  }
  return layout;
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

struct TcnTrace {
  Matrix input;
  Matrix preact;
};

struct DenseTrace {
  Matrix input;
  Matrix preact;
};

struct Trace {
  std::vector<TcnTrace> tcn;
  std::vector<DenseTrace> dense;
  Matrix logits;
};

void record_pattern(const Matrix& preact, std::vector<std::uint8_t>& pattern) {
  for (double u : preact.values()) pattern.push_back(u > 0.0 ? 1 : 0);
}

Trace run_forward(const NetworkState& state, const NetworkSpec& spec, const Layout& layout,
                  const Matrix& batch, std::vector<std::uint8_t>* pattern) {
  if (batch.cols() != spec.input_dim) {
    throw ShapeError("network input has " + std::to_string(batch.cols()) +
                     " columns, expected " + std::to_string(spec.input_dim));
  }
  Trace trace;
  Matrix x = batch;
  const bool relu = spec.activation == Activation::Relu;
  for (const auto& ref : layout.tcn) {
    Matrix u = conv_forward(x, state.params[ref.weight].values, state.params[ref.bias].values,
                            spec.temporal_head->kernel_size, ref.dilation, ref.out);
    Matrix y = ref.residual ? affine(x, state.params[*ref.residual].values, {}, ref.out) : x;
    auto yv = y.values();
    auto uv = u.values();
    for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += activate(spec.activation, uv[i]);
    if (pattern && relu) record_pattern(u, *pattern);
    trace.tcn.push_back({std::move(x), std::move(u)});
    x = std::move(y);
  }
  for (std::size_t j = 0; j < layout.dense.size(); ++j) {
    const auto& ref = layout.dense[j];
    Matrix u = affine(x, state.params[ref.weight].values, state.params[ref.bias].values, ref.out);
    const bool is_output = j + 1 == layout.dense.size();
    if (is_output) {
      trace.logits = u;
      trace.dense.push_back({std::move(x), std::move(u)});
      break;
    }
    Matrix h(u.rows(), u.cols());
    auto hv = h.values();
    auto uv = u.values();
    for (std::size_t i = 0; i < hv.size(); ++i) hv[i] = activate(spec.activation, uv[i]);
    if (pattern && relu) record_pattern(u, *pattern);
    trace.dense.push_back({std::move(x), std::move(u)});
    x = std::move(h);
  }
  return trace;
}

}  // namespace

std::string_view to_string(Activation a) noexcept { return a == Activation::Relu ? "relu" : "gelu"; }

std::string_view to_string(Head h) noexcept {
  switch (h) {
    case Head::Softmax:
      return "softmax";
    case Head::Sigmoid:
      return "sigmoid";
    case Head::Linear:
      return "linear";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Head parse_head(std::string_view name) {
  if (name == "softmax") return Head::Softmax;
  if (name == "sigmoid") return Head::Sigmoid;
  if (name == "linear") return Head::Linear;
  throw ConfigError("unknown head '" + std::string(name) + "'");
}

std::size_t TcnSpec::receptive_field() const noexcept {
  const std::size_t sum = std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
  return 1 + (kernel_size - 1) * sum;
}

void TcnSpec::validate() const {
  if (dilations.empty()) throw ConfigError("TCN needs at least one layer");
  if (channels.size() != dilations.size()) {
    throw ConfigError("TCN channels and dilations must have the same length");
  }
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ConfigError("TCN kernel size must be odd for centered padding");
  }
  for (auto c : channels) {
    if (c == 0) throw ConfigError("TCN channel count must be positive");
  }
  for (auto d : dilations) {
    if (d == 0) throw ConfigError("TCN dilation must be positive");
  }
}

TcnSpec default_tcn(std::size_t channels) {
  TcnSpec t;
  t.channels.assign(t.dilations.size(), channels);
  return t;
}

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network input_dim must be positive");
  if (output_dim == 0) throw ConfigError("network output_dim must be positive");
  for (auto h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden layer width must be positive");
  }
  if (temporal_head) temporal_head->validate();
}

NetworkSpec expr_preset(std::size_t input_dim, std::size_t hidden) {
  return {input_dim, {hidden}, kNumExprClasses, Activation::Relu, Head::Softmax, std::nullopt};
}

NetworkSpec va_preset(std::size_t input_dim) {
  return {input_dim, {}, kNumVaOutputs, Activation::Relu, Head::Linear, std::nullopt};
}

NetworkSpec au_preset(std::size_t input_dim, std::size_t hidden) {
  return {input_dim, {hidden}, kNumAu, Activation::Relu, Head::Sigmoid, std::nullopt};
}

NetworkSpec vd_preset(std::size_t input_dim, std::size_t channels) {
  return {input_dim, {}, kNumVdClasses, Activation::Relu, Head::Softmax, default_tcn(channels)};
}

NetworkSpec preset_for(TaskKind task, std::size_t input_dim) {
  switch (task) {
    case TaskKind::Expr:
    case TaskKind::Audio:
      return expr_preset(input_dim);
    case TaskKind::VA:
      return va_preset(input_dim);
    case TaskKind::AU:
      return au_preset(input_dim);
    case TaskKind::VD:
      return vd_preset(input_dim);
  }
  throw ConfigError("no preset for task");
}

NetworkSpec preset_by_name(std::string_view name, std::size_t input_dim) {
  return preset_for(parse_task(name), input_dim);
}

std::size_t NetworkState::num_parameters() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params) n += p.values.size();
  return n;
}

std::vector<Tensor> parameter_layout(const NetworkSpec& spec) {
  spec.validate();
  return build_layout(spec).tensors;
}

NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Layout layout = build_layout(spec);
  NetworkState state;
  state.seed = seed;
  Rng rng(seed);
  auto fill = [&](std::size_t index, std::size_t fan_in) {
    Tensor& t = layout.tensors[index];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    t.values.resize(shape_size(t.shape));
    for (double& v : t.values) v = rng.uniform(-bound, bound);
  };
  for (const auto& ref : layout.tcn) {
    const std::size_t fan_in = ref.in * spec.temporal_head->kernel_size;
    fill(ref.weight, fan_in);
    fill(ref.bias, fan_in);
    if (ref.residual) fill(*ref.residual, ref.in);
  }
  for (const auto& ref : layout.dense) {
    fill(ref.weight, ref.in);
    fill(ref.bias, ref.in);
  }
  state.params = std::move(layout.tensors);
  for (const auto& p : state.params) {
    state.moment1.emplace_back(p.values.size(), 0.0);
    state.moment2.emplace_back(p.values.size(), 0.0);
  }
  return state;
}

void validate_state(const NetworkSpec& spec, const NetworkState& state) {
  const auto layout = parameter_layout(spec);
  if (layout.size() != state.params.size()) {
    throw ShapeError("network state has " + std::to_string(state.params.size()) +
                     " tensors, spec needs " + std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& p = state.params[i];
    if (p.name != layout[i].name || p.shape != layout[i].shape ||
        p.values.size() != shape_size(layout[i].shape)) {
      throw ShapeError("parameter '" + p.name + "' does not match spec tensor '" +
                       layout[i].name + "'");
    }
    for (double v : p.values) {
      if (!std::isfinite(v)) throw ValueError("parameter '" + p.name + "' has a non-finite value");
    }
  }
  if (state.moment1.size() != layout.size() || state.moment2.size() != layout.size()) {
    throw ShapeError("optimizer moments do not match parameter count");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (state.moment1[i].size() != state.params[i].values.size() ||
        state.moment2[i].size() != state.params[i].values.size()) {
      throw ShapeError("optimizer moments for '" + state.params[i].name + "' have wrong size");
    }
  }
}

Matrix apply_head(Head head, const Matrix& logits) {
  Matrix out = logits;
  if (head == Head::Linear) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    if (head == Head::Sigmoid) {
      for (double& v : row) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      continue;
    }
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

ForwardResult forward(const NetworkState& state, const NetworkSpec& spec, const Matrix& batch) {
  const Layout layout = build_layout(spec);
  if (state.params.size() != layout.tensors.size()) {
    throw ShapeError("network state does not match spec");
  }
  ForwardResult result;
  Trace trace = run_forward(state, spec, layout, batch, &result.relu_pattern);
  result.outputs = apply_head(spec.head, trace.logits);
  result.logits = std::move(trace.logits);
  return result;
}

Gradients backward(const NetworkState& state, const NetworkSpec& spec, const Matrix& batch,
                   const Matrix& dlogits) {
  const Layout layout = build_layout(spec);
  Trace trace = run_forward(state, spec, layout, batch, nullptr);
  if (dlogits.rows() != trace.logits.rows() || dlogits.cols() != trace.logits.cols()) {
    throw ShapeError("logit gradient shape does not match network output");
  }
  Gradients grads;
  for (const auto& p : state.params) grads.emplace_back(p.values.size(), 0.0);

  Matrix dy = dlogits;
  for (std::size_t jj = layout.dense.size(); jj-- > 0;) {
    const auto& ref = layout.dense[jj];
    const auto& tr = trace.dense[jj];
    Matrix du = dy;
    if (jj + 1 != layout.dense.size()) {
      auto dv = du.values();
      auto uv = tr.preact.values();
      for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= activate_grad(spec.activation, uv[i]);
    }
    Matrix dx(tr.input.rows(), tr.input.cols());
    affine_backward(tr.input, du, state.params[ref.weight].values, grads[ref.weight],
                    &grads[ref.bias], &dx);
    dy = std::move(dx);
  }
  for (std::size_t ii = layout.tcn.size(); ii-- > 0;) {
    const auto& ref = layout.tcn[ii];
    const auto& tr = trace.tcn[ii];
    Matrix dx(tr.input.rows(), tr.input.cols());
    if (ref.residual) {
      affine_backward(tr.input, dy, state.params[*ref.residual].values, grads[*ref.residual],
                      nullptr, &dx);
    } else {
      dx = dy;
    }
    Matrix du = dy;
    auto dv = du.values();
    auto uv = tr.preact.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= activate_grad(spec.activation, uv[i]);
    conv_backward(tr.input, du, state.params[ref.weight].values, spec.temporal_head->kernel_size,
                  ref.dilation, grads[ref.weight], grads[ref.bias], dx);
    dy = std::move(dx);
  }
  return grads;
}

}  // namespace affectcal::nn
