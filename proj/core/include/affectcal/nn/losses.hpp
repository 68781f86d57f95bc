#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "affectcal/datamodel.hpp"
#include "affectcal/matrix.hpp"

namespace affectcal::nn {

enum class LossKind { WeightedSoftmax, MseCcc, WeightedBinary, WeightedCe, Focal };

// How per-class weights are derived from training counts.
//   InverseFrequency: softmax w_y = max_c N_c / N_y, binary w_c = (N - N_c) / N_c
//   PaperLiteral:     softmax w_y = N_y / N,         binary w_c = N_c / N
enum class ClassWeightMode { InverseFrequency, PaperLiteral };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(ClassWeightMode mode) noexcept;
ClassWeightMode parse_class_weight_mode(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::WeightedSoftmax;
  // Per-class weights (weighted softmax) or positive weights (weighted binary).
  // Empty means all ones.
  std::vector<double> weights;
  double focal_gamma = 2.0;
  ClassWeightMode class_weight_mode = ClassWeightMode::InverseFrequency;
  double violent_weight = 1.15;

  void validate() const;
};

// Supervision for one batch; which member is used depends on the loss.
struct Targets {
  std::vector<int> classes;  // single-label losses
  Matrix values;             // mse_ccc: n x 2 (V, A); weighted_binary: n x 12 of 0/1

  std::size_t size() const noexcept { return classes.empty() ? values.rows() : classes.size(); }
  Targets select(std::span<const std::size_t> rows) const;
};

struct LossResult {
  double value = 0.0;
  Matrix grad;  // dL/dlogits
};

std::vector<double> softmax_class_weights(const ClassPriorTable& priors, ClassWeightMode mode);
std::vector<double> binary_pos_weights(const ChannelPositiveCounts& counts, ClassWeightMode mode);

// Mean over the batch of w_y * (-log softmax(z)_y).
LossResult loss_weighted_softmax(const Matrix& logits, std::span<const int> labels,
                                 std::span<const double> class_weights);
LossResult loss_weighted_softmax(const Matrix& logits, std::span<const int> labels,
                                 const ClassPriorTable& priors, ClassWeightMode mode);

// MSE_V + MSE_A - CCC_V - CCC_A with population statistics over the batch.
LossResult loss_mse_ccc(const Matrix& pred, const Matrix& target);

// Mean over batch and channels of -[w_c y log s(z) + (1 - y) log(1 - s(z))].
LossResult loss_weighted_binary(const Matrix& logits, const Matrix& targets,
                                std::span<const double> pos_weights);

// Two-class cross-entropy with class-1 (violent) samples scaled by
// violent_weight; mean over the batch.
LossResult loss_weighted_ce(const Matrix& logits, std::span<const int> labels,
                            double violent_weight = 1.15);

// Mean over the batch of -(1 - p_y)^gamma log p_y.
LossResult loss_focal(const Matrix& logits, std::span<const int> labels, double gamma = 2.0);

LossResult evaluate_loss(const LossSpec& spec, const Matrix& logits, const Targets& targets);

}  // namespace affectcal::nn
