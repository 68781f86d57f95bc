#include "affectcal/nn/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/rng.hpp"

namespace affectcal::nn {

namespace {

// Annotated rows of all sequences stacked into one matrix.
struct PooledRows {
  Matrix features;
  Targets targets;
  std::vector<std::size_t> video;  // source sequence of each row
};

PooledRows pool_annotated(const TrainingSet& data) {
  PooledRows pooled;
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    const auto& seq = data.sequences[s];
    rows.clear();
    for (std::size_t r = 0; r < seq.features.rows(); ++r) {
      if (seq.mask.empty() || seq.mask[r]) rows.push_back(r);
    }
    if (rows.empty()) continue;
    const Targets t = seq.targets.select(rows);
    for (auto r : rows) {
      pooled.features.append_row(seq.features.row(r));
      pooled.video.push_back(s);
    }
    pooled.targets.classes.insert(pooled.targets.classes.end(), t.classes.begin(), t.classes.end());
    for (std::size_t i = 0; i < t.values.rows(); ++i) pooled.targets.values.append_row(t.values.row(i));
  }
  return pooled;
}

void check_finite_loss(double value, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(value)) {
    throw DivergenceError("training diverged: loss is " + std::to_string(value) + " at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

// Frame-wise mini-batches as row index lists into the pooled matrix.
std::vector<std::vector<std::size_t>> make_batches(const PooledRows& pooled, const LossSpec& loss,
                                                   std::size_t batch_size, Rng& rng) {
  std::vector<std::vector<std::size_t>> batches;
  const std::size_t n = pooled.features.rows();
  if (loss.kind != LossKind::MseCcc) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(n, start + batch_size);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
  }
  // CCC needs >= 2 rows and is most meaningful within one video.
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    while (end < n && pooled.video[end] == pooled.video[start]) ++end;
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    rng.shuffle(std::span(rows));
    const std::size_t first_batch = batches.size();
    for (std::size_t b = 0; b < rows.size(); b += batch_size) {
      const std::size_t e = std::min(rows.size(), b + batch_size);
      std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(b),
                                     rows.begin() + static_cast<std::ptrdiff_t>(e));
      if (chunk.size() < 2 && batches.size() > first_batch) {
        batches.back().insert(batches.back().end(), chunk.begin(), chunk.end());
      } else if (chunk.size() >= 2) {
        batches.push_back(std::move(chunk));
      }
    }
    start = end;
  }
  rng.shuffle(std::span(batches));
  return batches;
}

struct SequenceGrad {
  double loss = 0.0;
  Gradients grads;
  bool used = false;
};

SequenceGrad sequence_gradient(const NetworkSpec& spec, const NetworkState& state,
                               const LossSpec& loss, const TrainingSequence& seq) {
  SequenceGrad out;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < seq.features.rows(); ++r) {
    if (seq.mask.empty() || seq.mask[r]) rows.push_back(r);
  }
  if (rows.empty() || (loss.kind == LossKind::MseCcc && rows.size() < 2)) return out;
  const ForwardResult fwd = forward(state, spec, seq.features);
  const Matrix logits = fwd.logits.gather_rows(rows);
  const LossResult lr = evaluate_loss(loss, logits, seq.targets.select(rows));
  Matrix dlogits(fwd.logits.rows(), fwd.logits.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = lr.grad.row(i);
    std::copy(src.begin(), src.end(), dlogits.row(rows[i]).begin());
  }
  out.loss = lr.value;
  out.grads = backward(state, spec, seq.features, dlogits);
  out.used = true;
  return out;
}

}  // namespace

void adam_step(NetworkState& state, const Gradients& grads, const AdamConfig& cfg) {
  if (grads.size() != state.params.size()) throw ShapeError("adam: gradient layout mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    auto& p = state.params[i].values;
    auto& m = state.moment1[i];
    auto& v = state.moment2[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p[k]);
      if (!std::isfinite(p[k])) {
        throw DivergenceError("parameter '" + state.params[i].name +
                              "' became non-finite at step " + std::to_string(state.step));
      }
    }
  }
}

double dataset_loss(const NetworkSpec& spec, const NetworkState& state, const LossSpec& loss,
                    const TrainingSet& data) {
  if (spec.temporal_head) {
    double total = 0.0;
    std::size_t used = 0;
    for (const auto& seq : data.sequences) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < seq.features.rows(); ++r) {
        if (seq.mask.empty() || seq.mask[r]) rows.push_back(r);
      }
      if (rows.empty()) continue;
      const auto fwd = forward(state, spec, seq.features);
      total += evaluate_loss(loss, fwd.logits.gather_rows(rows), seq.targets.select(rows)).value;
      ++used;
    }
    if (used == 0) throw EmptyInputError("no annotated frames in training set");
    return total / static_cast<double>(used);
  }
  const PooledRows pooled = pool_annotated(data);
  if (pooled.features.rows() == 0) throw EmptyInputError("no annotated frames in training set");
  const auto fwd = forward(state, spec, pooled.features);
  return evaluate_loss(loss, fwd.logits, pooled.targets).value;
}

TrainResult train(const NetworkSpec& spec, const LossSpec& loss, const TrainingSet& data,
                  const TrainHyper& hyper) {
  return train_from(spec, init_state(spec, hyper.seed), loss, data, hyper);
}

TrainResult train_from(const NetworkSpec& spec, NetworkState initial, const LossSpec& loss,
                       const TrainingSet& data, const TrainHyper& hyper) {
  spec.validate();
  loss.validate();
  validate_state(spec, initial);
  if (hyper.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(hyper.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");

  TrainResult result;
  result.state = std::move(initial);
  NetworkState& state = result.state;
  const AdamConfig adam{hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay};
  Rng rng(derive_seed(hyper.seed, 1));

  const double initial_loss = dataset_loss(spec, state, loss, data);
  check_finite_loss(initial_loss, 0, 0);
  result.log.push_back({0, 0, initial_loss});

  if (spec.temporal_head) {
    std::vector<std::size_t> order(data.sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
      rng.shuffle(std::span(order));
      double sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
        const std::size_t end = std::min(order.size(), start + hyper.batch_size);
        Gradients acc;
        double batch_loss = 0.0;
        std::size_t used = 0;
        for (std::size_t k = start; k < end; ++k) {
          SequenceGrad sg = sequence_gradient(spec, state, loss, data.sequences[order[k]]);
          if (!sg.used) continue;
          if (acc.empty()) {
            acc = std::move(sg.grads);
          } else {
            for (std::size_t i = 0; i < acc.size(); ++i) {
              for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += sg.grads[i][j];
            }
          }
          batch_loss += sg.loss;
          ++used;
        }
        if (used == 0) continue;
        const double scale = 1.0 / static_cast<double>(used);
        for (auto& g : acc) {
          for (double& v : g) v *= scale;
        }
        batch_loss *= scale;
        check_finite_loss(batch_loss, epoch, static_cast<std::size_t>(state.step) + 1);
        adam_step(state, acc, adam);
        sum += batch_loss;
        ++batches;
      }
      if (batches == 0) throw EmptyInputError("no annotated frames in training set");
      result.log.push_back({epoch, static_cast<std::size_t>(state.step), sum / static_cast<double>(batches)});
    }
    return result;
  }

  const PooledRows pooled = pool_annotated(data);
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto batches = make_batches(pooled, loss, hyper.batch_size, rng);
    if (batches.empty()) throw BatchTooSmallError("no usable mini-batches in training set");
    double sum = 0.0;
    for (const auto& rows : batches) {
      const Matrix x = pooled.features.gather_rows(rows);
      const ForwardResult fwd = forward(state, spec, x);
      const LossResult lr = evaluate_loss(loss, fwd.logits, pooled.targets.select(rows));
      check_finite_loss(lr.value, epoch, static_cast<std::size_t>(state.step) + 1);
      adam_step(state, backward(state, spec, x, lr.grad), adam);
      sum += lr.value;
    }
    result.log.push_back({epoch, static_cast<std::size_t>(state.step), sum / static_cast<double>(batches.size())});
  }
  return result;
}

void save_loss_log(const std::vector<LossLogEntry>& log, const std::filesystem::path& path) {
  std::string out = "epoch,step,loss\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + ',' + std::to_string(e.step) + ',' + format_double(e.loss) + '\n';
  }
  write_text_file(path, out);
}

}  // namespace affectcal::nn
