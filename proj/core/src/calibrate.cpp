#include "affectcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "affectcal/errors.hpp"
#include "affectcal/metrics.hpp"

namespace affectcal::calibrate {

namespace {

// Annotated frames of all videos: log-probabilities and truth.
struct Pooled {
  Matrix logp;
  std::vector<int> truth;
};

Pooled pool_single_label(std::span<const ScoreStream> scores, std::span<const LabelTrack> labels,
                         std::size_t num_classes) {
  if (scores.size() != labels.size()) {
    throw ShapeError("calibration: " + std::to_string(scores.size()) + " score streams for " +
                     std::to_string(labels.size()) + " label tracks");
  }
  Pooled pooled;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    const auto& s = scores[v];
    const auto& l = labels[v];
    if (s.kind != ScoreKind::Probability) throw ConfigError("calibration needs probability scores");
    if (s.num_classes() != num_classes) throw ShapeError("calibration: class count differs across videos");
    require_same_timeline(s.frame_ids, l.frame_ids, "calibration '" + l.video_id + "'");
    if (!is_single_label(l.task)) throw ConfigError("logit bias fitting needs single-label tracks");
    for (std::size_t t = 0; t < l.num_frames(); ++t) {
      if (!l.mask[t]) continue;
      std::vector<double> row(num_classes);
      for (std::size_t c = 0; c < num_classes; ++c) row[c] = std::log(s.scores(t, c) + kLogFloor);
      pooled.logp.append_row(row);
      pooled.truth.push_back(l.classes[t]);
    }
  }
  if (pooled.truth.empty()) throw EmptyInputError("calibration set has no annotated frames");
  return pooled;
}

double macro_f1_of(std::span<const int> pred, std::span<const int> truth, std::size_t num_classes) {
  return metrics::macro_f1(pred, truth, {}, num_classes).macro;
}

std::vector<int> argmax_rows(const Matrix& logp, std::span<const double> bias) {
  std::vector<int> pred(logp.rows());
  for (std::size_t t = 0; t < logp.rows(); ++t) {
    auto row = logp.row(t);
    std::size_t best = 0;
    double best_v = row[0] + bias[0];
    for (std::size_t c = 1; c < row.size(); ++c) {
      const double v = row[c] + bias[c];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    pred[t] = static_cast<int>(best);
  }
  return pred;
}

}  // namespace

std::string_view to_string(BiasInit init) noexcept {
  return init == BiasInit::Prior ? "prior" : "zero";
}

BiasInit parse_bias_init(std::string_view name) {
  if (name == "prior") return BiasInit::Prior;
  if (name == "zero") return BiasInit::Zero;
  throw ConfigError("unknown bias init '" + std::string(name) + "' (expected prior or zero)");
}

void GlaConfig::validate() const {
  if (!std::isfinite(grid_lo) || !std::isfinite(grid_hi) || grid_lo > grid_hi) {
    throw ConfigError("GLA grid must satisfy grid_lo <= grid_hi");
  }
  if (!(grid_step > 0.0)) throw ConfigError("GLA grid step must be positive");
  if (max_passes < 1) throw ConfigError("GLA needs at least one pass");
}

std::vector<double> GlaConfig::grid() const {
  validate();
  std::vector<double> values;
  for (std::size_t k = 0;; ++k) {
    const double raw = grid_lo + static_cast<double>(k) * grid_step;
    if (raw > grid_hi + 1e-9) break;
    // Snap accumulated error so that e.g. 0.3 and 0 are the decimal doubles.
    const double v = std::round(raw * 1e12) / 1e12;
    values.push_back(v == 0.0 ? 0.0 : v);
  }
  return values;
}

ScoreStream adjusted_scores(const ScoreStream& probabilities, std::span<const double> bias) {
  if (probabilities.kind != ScoreKind::Probability) {
    throw ConfigError("adjusted_scores needs a probability stream");
  }
  if (bias.size() != probabilities.num_classes()) {
    throw ShapeError("bias has " + std::to_string(bias.size()) + " entries for " +
                     std::to_string(probabilities.num_classes()) + " classes");
  }
  ScoreStream out{probabilities.video_id, probabilities.frame_ids,
                  Matrix(probabilities.num_frames(), probabilities.num_classes()), ScoreKind::Logit};
  for (std::size_t t = 0; t < out.num_frames(); ++t) {
    for (std::size_t c = 0; c < bias.size(); ++c) {
      out.scores(t, c) = std::log(probabilities.scores(t, c) + kLogFloor) + bias[c];
    }
  }
  return out;
}

ScoreStream calibrated_probabilities(const ScoreStream& probabilities, std::span<const double> bias) {
  ScoreStream out = adjusted_scores(probabilities, bias);
  for (std::size_t t = 0; t < out.num_frames(); ++t) {
    auto row = out.scores.row(t);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  out.kind = ScoreKind::Probability;
  return out;
}

std::vector<int> adjusted_argmax(const Matrix& probabilities, std::span<const double> bias) {
  if (bias.size() != probabilities.cols()) throw ShapeError("bias length does not match class count");
  Matrix logp(probabilities.rows(), probabilities.cols());
  for (std::size_t i = 0; i < logp.size(); ++i) {
    logp.values()[i] = std::log(probabilities.values()[i] + kLogFloor);
  }
  return argmax_rows(logp, bias);
}

CalibrationArtifact fit_logit_biases(std::span<const ScoreStream> scores,
                                     std::span<const LabelTrack> labels,
                                     const ClassPriorTable& priors, const GlaConfig& config) {
  config.validate();
  if (scores.empty()) throw EmptyInputError("calibration set is empty");
  const std::size_t num_classes = scores.front().num_classes();
  if (num_classes < 2) throw ShapeError("logit bias fitting needs at least 2 classes");
  const Pooled pooled = pool_single_label(scores, labels, num_classes);
  const std::size_t n = pooled.truth.size();

  std::vector<double> bias(num_classes, 0.0);
  if (config.init == BiasInit::Prior) {
    if (priors.num_classes() != num_classes) {
      throw ShapeError("prior table has " + std::to_string(priors.num_classes()) + " classes, scores have " +
                       std::to_string(num_classes));
    }
    bias = priors.priors();
  }
  const std::vector<double> grid = config.grid();

  std::vector<int> pred = argmax_rows(pooled.logp, bias);
  double objective = macro_f1_of(pred, pooled.truth, num_classes);

  CalibrationArtifact artifact;
  artifact.task = labels.front().task;

  // Best competitor of class c per frame under the current bias.
  std::vector<double> other_v(n);
  std::vector<int> other_i(n);
  std::vector<int> trial(n);
  for (int pass = 1; pass <= config.max_passes; ++pass) {
    bool changed = false;
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t t = 0; t < n; ++t) {
        auto row = pooled.logp.row(t);
        double best_v = -std::numeric_limits<double>::infinity();
        int best_i = -1;
        for (std::size_t k = 0; k < num_classes; ++k) {
          if (k == c) continue;
          const double v = row[k] + bias[k];
          if (v > best_v) {
            best_v = v;
            best_i = static_cast<int>(k);
          }
        }
        other_v[t] = best_v;
        other_i[t] = best_i;
      }
      double best_obj = objective;
      double best_value = bias[c];
      const int ci = static_cast<int>(c);
      for (double g : grid) {
        for (std::size_t t = 0; t < n; ++t) {
          const double v = pooled.logp(t, c) + g;
          // First maximal index wins, as in argmax_rows.
          const bool wins = v > other_v[t] || (v == other_v[t] && ci < other_i[t]);
          trial[t] = wins ? ci : other_i[t];
        }
        const double obj = macro_f1_of(trial, pooled.truth, num_classes);
        if (obj > best_obj) {
          best_obj = obj;
          best_value = g;
        }
      }
      if (best_value != bias[c]) {
        bias[c] = best_value;
        objective = best_obj;
        changed = true;
      }
      artifact.search_log.push_back({pass, ci, bias[c], objective});
    }
    if (!changed) break;
  }
  artifact.bias = bias;
  return artifact;
}

std::vector<double> threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 9; ++k) grid.push_back(static_cast<double>(k) / 10.0);
  return grid;
}

CalibrationArtifact tune_thresholds(std::span<const ScoreStream> scores,
                                    std::span<const LabelTrack> labels) {
  if (scores.size() != labels.size()) throw ShapeError("threshold tuning: stream count mismatch");
  if (scores.empty()) throw EmptyInputError("threshold tuning set is empty");
  const std::vector<double> grid = threshold_grid();
  const std::size_t num_t = grid.size();

  // counts[c][k] for threshold k: tp, fp, fn.
  std::vector<std::vector<std::int64_t>> tp(kNumAu, std::vector<std::int64_t>(num_t)),
      fp(kNumAu, std::vector<std::int64_t>(num_t)), fn(kNumAu, std::vector<std::int64_t>(num_t));
  std::vector<std::int64_t> positives(kNumAu);
  std::int64_t frames = 0;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    const auto& s = scores[v];
    const auto& l = labels[v];
    if (l.task != TaskKind::AU) throw ConfigError("threshold tuning needs AU label tracks");
    if (s.num_classes() != kNumAu) {
      throw ShapeError("threshold tuning needs 12 channels, got " + std::to_string(s.num_classes()));
    }
    require_same_timeline(s.frame_ids, l.frame_ids, "threshold tuning '" + l.video_id + "'");
    for (std::size_t t = 0; t < l.num_frames(); ++t) {
      if (!l.mask[t]) continue;
      ++frames;
      for (std::size_t c = 0; c < kNumAu; ++c) {
        const bool truth = l.au[t][c] != 0;
        if (truth) ++positives[c];
        const double score = s.scores(t, c);
        for (std::size_t k = 0; k < num_t; ++k) {
          const bool pred = score >= grid[k];
          if (pred && truth) ++tp[c][k];
          if (pred && !truth) ++fp[c][k];
          if (!pred && truth) ++fn[c][k];
        }
      }
    }
  }
  if (frames == 0) throw EmptyInputError("threshold tuning set has no annotated frames");

  CalibrationArtifact artifact;
  artifact.task = TaskKind::AU;
  std::vector<double> thresholds(kNumAu, 0.5);
  for (std::size_t c = 0; c < kNumAu; ++c) {
    const int ci = static_cast<int>(c);
    if (positives[c] == 0) {
      artifact.warnings.push_back(ci);
      artifact.search_log.push_back({1, ci, 0.5, metrics::f1_score(tp[c][4], fp[c][4], fn[c][4])});
      continue;
    }
    std::size_t best = 0;
    double best_f1 = -1.0;
    for (std::size_t k = 0; k < num_t; ++k) {
      const double f1 = metrics::f1_score(tp[c][k], fp[c][k], fn[c][k]);
      if (f1 > best_f1) {
        best_f1 = f1;
        best = k;
      }
    }
    thresholds[c] = grid[best];
    artifact.search_log.push_back({1, ci, grid[best], best_f1});
  }
  artifact.thresholds = thresholds;
  return artifact;
}

}  // namespace affectcal::calibrate
