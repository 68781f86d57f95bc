#include "affectcal/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "affectcal/errors.hpp"

namespace affectcal::nn {

namespace {

// Floor on the CCC denominator; only active for near-degenerate batches.
constexpr double kCccFloor = 1e-8;

void check_labels(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw ShapeError("loss: " + std::to_string(logits.rows()) + " logit rows for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (logits.rows() == 0) throw EmptyInputError("loss: empty batch");
  const int c = static_cast<int>(logits.cols());
  for (int y : labels) {
    if (y < 0 || y >= c) throw ValueError("loss: label " + std::to_string(y) + " out of range");
  }
}

// Row-wise log-softmax.
Matrix log_softmax(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : row) v -= lse;
  }
  return out;
}

// Per-sample weighted cross-entropy shared by weighted softmax and weighted CE.
LossResult weighted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                  std::span<const double> class_weights) {
  const Matrix logp = log_softmax(logits);
  const double n = static_cast<double>(logits.rows());
  LossResult res;
  res.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double w = class_weights.empty() ? 1.0 : class_weights[y];
    res.value += -w * logp(i, y);
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      const double p = std::exp(logp(i, c));
      res.grad(i, c) = w * (p - (c == y ? 1.0 : 0.0)) / n;
    }
  }
  res.value /= n;
  return res;
}

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// CCC of column `col` and its gradient w.r.t. pred(:, col).
double ccc_with_grad(const Matrix& pred, const Matrix& target, std::size_t col,
                     std::vector<double>& grad) {
  const std::size_t n = pred.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += pred(i, col);
    my += target(i, col);
  }
  mx *= inv_n;
  my *= inv_n;
  double vx = 0.0;
  double vy = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pred(i, col) - mx;
    const double dy = target(i, col) - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  vx *= inv_n;
  vy *= inv_n;
  cov *= inv_n;
  const double raw_den = vx + vy + (mx - my) * (mx - my);
  const bool floored = raw_den < kCccFloor;
  const double den = floored ? kCccFloor : raw_den;
  const double ccc = 2.0 * cov / den;
  grad.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double dcov = inv_n * (target(i, col) - my);
    const double dden = floored ? 0.0 : 2.0 * inv_n * (pred(i, col) - mx) + 2.0 * inv_n * (mx - my);
    grad[i] = (2.0 * dcov * den - 2.0 * cov * dden) / (den * den);
  }
  return ccc;
}

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::WeightedSoftmax:
      return "weighted_softmax";
    case LossKind::MseCcc:
      return "mse_ccc";
    case LossKind::WeightedBinary:
      return "weighted_binary";
    case LossKind::WeightedCe:
      return "weighted_ce";
    case LossKind::Focal:
      return "focal";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "weighted_softmax") return LossKind::WeightedSoftmax;
  if (name == "mse_ccc") return LossKind::MseCcc;
  if (name == "weighted_binary") return LossKind::WeightedBinary;
  if (name == "weighted_ce") return LossKind::WeightedCe;
  if (name == "focal") return LossKind::Focal;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(ClassWeightMode mode) noexcept {
  return mode == ClassWeightMode::InverseFrequency ? "inverse_frequency" : "paper_literal";
}

ClassWeightMode parse_class_weight_mode(std::string_view name) {
  if (name == "inverse_frequency") return ClassWeightMode::InverseFrequency;
  if (name == "paper_literal") return ClassWeightMode::PaperLiteral;
  throw ConfigError("unknown class weight mode '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be positive and finite");
  }
  if (!(focal_gamma >= 0.0) || !std::isfinite(focal_gamma)) {
    throw ConfigError("focal gamma must be >= 0");
  }
  if (!(violent_weight > 0.0) || !std::isfinite(violent_weight)) {
    throw ConfigError("violent class weight must be positive");
  }
}

Targets Targets::select(std::span<const std::size_t> rows) const {
  Targets out;
  if (!classes.empty()) {
    out.classes.reserve(rows.size());
    for (auto r : rows) out.classes.push_back(classes[r]);
  }
  if (!values.empty()) out.values = values.gather_rows(rows);
  return out;
}

std::vector<double> softmax_class_weights(const ClassPriorTable& priors, ClassWeightMode mode) {
  if (priors.total <= 0) throw EmptyInputError("class weights: empty prior table");
  std::vector<double> w(priors.counts.size());
  const auto max_count = *std::max_element(priors.counts.begin(), priors.counts.end());
  for (std::size_t c = 0; c < w.size(); ++c) {
    const auto nc = priors.counts[c];
    if (mode == ClassWeightMode::InverseFrequency) {
      if (nc == 0) {
        throw DegenerateClassError("class " + std::to_string(c) +
                                   " has no training examples; inverse-frequency weight undefined");
      }
      w[c] = static_cast<double>(max_count) / static_cast<double>(nc);
    } else {
      w[c] = static_cast<double>(nc) / static_cast<double>(priors.total);
    }
  }
  return w;
}

std::vector<double> binary_pos_weights(const ChannelPositiveCounts& counts, ClassWeightMode mode) {
  if (counts.total <= 0) throw EmptyInputError("positive weights: no annotated frames");
  std::vector<double> w(counts.positives.size());
  const double n = static_cast<double>(counts.total);
  for (std::size_t c = 0; c < w.size(); ++c) {
    const double nc = static_cast<double>(counts.positives[c]);
    if (mode == ClassWeightMode::InverseFrequency) {
      if (counts.positives[c] == 0) {
        throw DegenerateClassError("channel " + std::to_string(c) +
                                   " has no positive examples; inverse-frequency weight undefined");
      }
      w[c] = (n - nc) / nc;
    } else {
      w[c] = nc / n;
    }
  }
  return w;
}

LossResult loss_weighted_softmax(const Matrix& logits, std::span<const int> labels,
                                 std::span<const double> class_weights) {
  check_labels(logits, labels);
  if (!class_weights.empty() && class_weights.size() != logits.cols()) {
    throw ShapeError("weighted softmax: weight count does not match class count");
  }
  return weighted_cross_entropy(logits, labels, class_weights);
}

LossResult loss_weighted_softmax(const Matrix& logits, std::span<const int> labels,
                                 const ClassPriorTable& priors, ClassWeightMode mode) {
  const auto w = softmax_class_weights(priors, mode);
  return loss_weighted_softmax(logits, labels, w);
}

LossResult loss_mse_ccc(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mse_ccc: prediction and target shapes differ");
  }
  if (pred.cols() != kNumVaOutputs) throw ShapeError("mse_ccc: expected 2 columns (V, A)");
  if (pred.rows() < 2) {
    throw BatchTooSmallError("mse_ccc: batch of " + std::to_string(pred.rows()) +
                             " rows; CCC needs at least 2");
  }
  const std::size_t n = pred.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult res;
  res.grad = Matrix(n, 2);
  std::vector<double> gccc;
  for (std::size_t col = 0; col < 2; ++col) {
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pred(i, col) - target(i, col);
      mse += d * d;
      res.grad(i, col) = 2.0 * d * inv_n;
    }
    mse *= inv_n;
    const double ccc = ccc_with_grad(pred, target, col, gccc);
    for (std::size_t i = 0; i < n; ++i) res.grad(i, col) -= gccc[i];
    res.value += mse - ccc;
  }
  return res;
}

LossResult loss_weighted_binary(const Matrix& logits, const Matrix& targets,
                                std::span<const double> pos_weights) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("weighted binary: logits and targets shapes differ");
  }
  if (logits.rows() == 0) throw EmptyInputError("weighted binary: empty batch");
  if (!pos_weights.empty() && pos_weights.size() != logits.cols()) {
    throw ShapeError("weighted binary: positive weight count does not match channels");
  }
  const double denom = static_cast<double>(logits.rows() * logits.cols());
  LossResult res;
  res.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      const double y = targets(i, c);
      if (y != 0.0 && y != 1.0) throw ValueError("weighted binary: targets must be 0 or 1");
      const double w = pos_weights.empty() ? 1.0 : pos_weights[c];
      const double z = logits(i, c);
      res.value += -(w * y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z));
      const double s = sigmoid(z);
      res.grad(i, c) = (-w * y * (1.0 - s) + (1.0 - y) * s) / denom;
    }
  }
  res.value /= denom;
  return res;
}

LossResult loss_weighted_ce(const Matrix& logits, std::span<const int> labels,
                            double violent_weight) {
  if (logits.cols() != kNumVdClasses) throw ShapeError("weighted CE: expected 2 logit columns");
  check_labels(logits, labels);
  const double w[2] = {1.0, violent_weight};
  return weighted_cross_entropy(logits, labels, w);
}

LossResult loss_focal(const Matrix& logits, std::span<const int> labels, double gamma) {
  check_labels(logits, labels);
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  const Matrix logp = log_softmax(logits);
  const double n = static_cast<double>(logits.rows());
  LossResult res;
  res.grad = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double lp = logp(i, y);
    const double p = std::exp(lp);
    const double q = -std::expm1(lp);  // 1 - p without cancellation
    const double mod = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    res.value += -mod * lp;
    // dL/dz_j = g * (p_j - [j == y]) with g = (1-p)^gamma - gamma (1-p)^(gamma-1) p log p
    double g = mod;
    if (gamma != 0.0 && q > 0.0) g -= gamma * std::pow(q, gamma - 1.0) * p * lp;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      const double pc = std::exp(logp(i, c));
      res.grad(i, c) = g * (pc - (c == y ? 1.0 : 0.0)) / n;
    }
  }
  res.value /= n;
  return res;
}

LossResult evaluate_loss(const LossSpec& spec, const Matrix& logits, const Targets& targets) {
  switch (spec.kind) {
    case LossKind::WeightedSoftmax:
      return loss_weighted_softmax(logits, targets.classes, spec.weights);
    case LossKind::MseCcc:
      return loss_mse_ccc(logits, targets.values);
    case LossKind::WeightedBinary:
      return loss_weighted_binary(logits, targets.values, spec.weights);
    case LossKind::WeightedCe:
      return loss_weighted_ce(logits, targets.classes, spec.violent_weight);
    case LossKind::Focal:
      return loss_focal(logits, targets.classes, spec.focal_gamma);
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace affectcal::nn
