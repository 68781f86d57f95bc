#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affectcal/datamodel.hpp"
#include "affectcal/matrix.hpp"

namespace affectcal::nn {

enum class Activation { Relu, Gelu };
enum class Head { Softmax, Sigmoid, Linear };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Head h) noexcept;
Activation parse_activation(std::string_view name);
Head parse_head(std::string_view name);

// Stack of dilated 1-D convolutions with centered (non-causal) zero padding.
// Each layer is conv -> activation -> residual add; the residual goes through
// a learned 1x1 projection when the channel count changes.
struct TcnSpec {
  std::size_t kernel_size = 3;
  std::vector<std::size_t> channels = {256, 256, 256, 256, 256};
  std::vector<std::size_t> dilations = {1, 2, 4, 8, 16};

  std::size_t num_layers() const noexcept { return dilations.size(); }
  std::size_t receptive_field() const noexcept;
  void validate() const;

  bool operator==(const TcnSpec&) const = default;
};

TcnSpec default_tcn(std::size_t channels = 256);

// Layer order: optional TCN blocks, then hidden dense layers, then the output
// dense layer. Dense layers act on each row independently; the TCN treats the
// rows of its input as one time-ordered sequence.
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 0;
  Activation activation = Activation::Relu;
  Head head = Head::Softmax;
  std::optional<TcnSpec> temporal_head;

  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

inline constexpr std::size_t kDefaultHidden = 128;

// 1 hidden layer, 8 softmax outputs.
NetworkSpec expr_preset(std::size_t input_dim, std::size_t hidden = kDefaultHidden);
// No hidden layer, 2 linear outputs.
NetworkSpec va_preset(std::size_t input_dim);
// 1 hidden layer, 12 sigmoid outputs.
NetworkSpec au_preset(std::size_t input_dim, std::size_t hidden = kDefaultHidden);
// 5-layer dilated TCN followed by a 2-way softmax projection.
NetworkSpec vd_preset(std::size_t input_dim, std::size_t channels = 256);
NetworkSpec preset_for(TaskKind task, std::size_t input_dim);
// Preset by name: "expr", "va", "au", "vd", "audio".
NetworkSpec preset_by_name(std::string_view name, std::size_t input_dim);

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  bool operator==(const Tensor&) const = default;
};

// Learned parameters plus optimizer state. `params` order is fixed by the
// spec (see parameter_layout).
struct NetworkState {
  std::vector<Tensor> params;
  std::vector<std::vector<double>> moment1;
  std::vector<std::vector<double>> moment2;
  std::int64_t step = 0;
  std::uint64_t seed = 0;

  std::size_t num_parameters() const noexcept;

  bool operator==(const NetworkState&) const = default;
};

// Names and shapes of all parameters (values empty).
std::vector<Tensor> parameter_layout(const NetworkSpec& spec);

// Fan-in uniform initialisation: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed);
// Shapes match the spec and every value is finite. Throws ShapeError/ValueError.
void validate_state(const NetworkSpec& spec, const NetworkState& state);

struct ForwardResult {
  Matrix logits;
  Matrix outputs;  // softmax / sigmoid / identity of logits
  // Sign pattern of every ReLU pre-activation, in evaluation order. Used to
  // detect finite-difference probes that straddle a kink.
  std::vector<std::uint8_t> relu_pattern;
};

ForwardResult forward(const NetworkState& state, const NetworkSpec& spec, const Matrix& batch);

// Gradients with the same layout as state.params.
using Gradients = std::vector<std::vector<double>>;

// Parameter gradients of a scalar loss given dL/dlogits.
Gradients backward(const NetworkState& state, const NetworkSpec& spec, const Matrix& batch,
                   const Matrix& dlogits);

Matrix apply_head(Head head, const Matrix& logits);

}  // namespace affectcal::nn
