#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "affectcal/nn/losses.hpp"
#include "affectcal/nn/network.hpp"

namespace affectcal::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

// One AdamW update; increments state.step. Throws DivergenceError when a
// parameter becomes non-finite.
void adam_step(NetworkState& state, const Gradients& grads, const AdamConfig& cfg);

struct TrainHyper {
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;
};

// One video (or clip). Rows with mask 0 never contribute to the loss.
struct TrainingSequence {
  Matrix features;
  Targets targets;
  std::vector<std::uint8_t> mask;
};

struct TrainingSet {
  std::vector<TrainingSequence> sequences;
};

struct LossLogEntry {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  NetworkState state;
  // Epoch 0 is the full-set loss at initialisation; epoch e >= 1 is the mean
  // mini-batch loss during that epoch.
  std::vector<LossLogEntry> log;
};

// Frame-wise networks pool the annotated rows of all sequences and shuffle
// them each epoch (mse_ccc batches stay within one video). Networks with a
// temporal head treat each sequence as one sample and batch_size counts
// sequences. Deterministic given hyper.seed.
TrainResult train(const NetworkSpec& spec, const LossSpec& loss, const TrainingSet& data,
                  const TrainHyper& hyper);

// Same as train() but continues from an existing state.
TrainResult train_from(const NetworkSpec& spec, NetworkState initial, const LossSpec& loss,
                       const TrainingSet& data, const TrainHyper& hyper);

// Mean loss over the whole set (frame-wise: pooled; temporal: mean per sequence).
double dataset_loss(const NetworkSpec& spec, const NetworkState& state, const LossSpec& loss,
                    const TrainingSet& data);

void save_loss_log(const std::vector<LossLogEntry>& log, const std::filesystem::path& path);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Probes whose +h/-h evaluations changed the ReLU sign pattern; the
  // central difference is not a derivative there, so they are excluded.
  std::size_t skipped_kinks = 0;
};

// Compares the analytic gradient of every parameter with central finite
// differences. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const NetworkSpec& spec, const NetworkState& state,
                           const LossSpec& loss, const Matrix& inputs, const Targets& targets,
                           double h = 1e-5);

// Persisted model: spec, parameters and the training statistics later
// stages need (priors for logit adjustment).
struct ModelFile {
  TaskKind task = TaskKind::Expr;
  // "video" or "audio": which manifest feature column the model consumes.
  std::string modality = "video";
  NetworkSpec spec;
  NetworkState state;
  std::optional<ClassPriorTable> priors;

  bool operator==(const ModelFile&) const = default;
};

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace affectcal::nn
