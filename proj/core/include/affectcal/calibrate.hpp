#pragma once

#include <span>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal::calibrate {

inline constexpr double kLogFloor = 1e-12;

enum class BiasInit { Prior, Zero };

std::string_view to_string(BiasInit init) noexcept;
BiasInit parse_bias_init(std::string_view name);

struct GlaConfig {
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  double grid_step = 0.1;
  int max_passes = 5;
  BiasInit init = BiasInit::Prior;

  // grid_lo == grid_hi is accepted and yields the one-point grid.
  void validate() const;
  // grid_lo + k * step for k = 0.. while <= grid_hi (with 1e-9 slack).
  std::vector<double> grid() const;
};

// s_y(t) = log(p_y(t) + 1e-12) + b_y. Output kind is Logit.
ScoreStream adjusted_scores(const ScoreStream& probabilities, std::span<const double> bias);

// Row-wise softmax of the adjusted scores: the calibrated probability stream.
ScoreStream calibrated_probabilities(const ScoreStream& probabilities, std::span<const double> bias);

// Argmax of log(p + 1e-12) + b per frame, ties to the lowest index.
std::vector<int> adjusted_argmax(const Matrix& probabilities, std::span<const double> bias);

// Coordinate search for additive log-space biases maximizing macro-F1 of the
// adjusted argmax over all annotated frames. A candidate replaces the current
// value only when it strictly improves the objective; among improving values
// the smallest wins. search_log holds one entry per (pass, class) visit with
// the objective after that visit, so it is non-decreasing.
CalibrationArtifact fit_logit_biases(std::span<const ScoreStream> scores,
                                     std::span<const LabelTrack> labels,
                                     const ClassPriorTable& priors, const GlaConfig& config = {});

// Candidate thresholds 0.1, 0.2, ..., 0.9.
std::vector<double> threshold_grid();

// Per channel, the threshold in {0.1..0.9} maximizing binary F1 of
// (score >= tau); ties go to the lowest threshold. Channels without positive
// ground truth get 0.5 and a warning entry.
CalibrationArtifact tune_thresholds(std::span<const ScoreStream> scores,
                                    std::span<const LabelTrack> labels);

}  // namespace affectcal::calibrate
