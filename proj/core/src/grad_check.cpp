#include <algorithm>
#include <cmath>

#include "affectcal/nn/train.hpp"

namespace affectcal::nn {

GradCheckResult grad_check(const NetworkSpec& spec, const NetworkState& state,
                           const LossSpec& loss, const Matrix& inputs, const Targets& targets,
                           double h) {
  const ForwardResult base = forward(state, spec, inputs);
  const LossResult base_loss = evaluate_loss(loss, base.logits, targets);
  const Gradients analytic = backward(state, spec, inputs, base_loss.grad);

  GradCheckResult result;
  NetworkState probe = state;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    auto& values = probe.params[i].values;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double original = values[k];
      values[k] = original + h;
      const ForwardResult plus = forward(probe, spec, inputs);
      const double lp = evaluate_loss(loss, plus.logits, targets).value;
      values[k] = original - h;
      const ForwardResult minus = forward(probe, spec, inputs);
      const double lm = evaluate_loss(loss, minus.logits, targets).value;
      values[k] = original;

      if (plus.relu_pattern != base.relu_pattern || minus.relu_pattern != base.relu_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[i][k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace affectcal::nn
