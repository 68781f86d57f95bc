#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal::temporal {

struct SmoothingConfig {
  int window_T = 0;  // window of T + 1 rows centered on t; even
  // Windows never extend across a frame_id jump larger than this.
  std::optional<std::int64_t> max_gap;

  void validate() const;
};

// Row t becomes the mean of rows t - T/2 .. t + T/2, truncated at the stream
// ends (and at gaps beyond max_gap). Kind is preserved.
ScoreStream smooth(const ScoreStream& scores, const SmoothingConfig& cfg);

struct GateConfig {
  double p0 = 0.9;
  LabelSet source_labels;
  LabelSet target_labels;
  // mapping[s] is the target class of source class s, if any.
  std::vector<std::optional<int>> mapping;

  void validate() const;
};

// AffectNet -> Expr by name; Contempt has no counterpart and nothing maps to
// Other.
GateConfig affectnet_gate(double p0);

struct GateResult {
  std::vector<int> classes;
  std::vector<std::uint8_t> gated;  // 1 where the pretrained stream decided
};

// Per frame: when the top pretrained probability is strictly above p0 and its
// class maps to a target class, that class is predicted; otherwise the
// fallback argmax (ties to the lowest index).
GateResult confidence_gate(const ScoreStream& pretrained, const ScoreStream& fallback,
                           const GateConfig& cfg);

// w * a + (1 - w) * b.
ScoreStream blend(const ScoreStream& a, const ScoreStream& b, double w);

// Argmax with ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& scores);

// Expr/VD/Audio: argmax. AU: score >= tau_c, where missing thresholds fall back
// to 0.5 only when allow_default is set. VA: values clamped to [-1, 1].
// The returned track is fully annotated.
LabelTrack decode(const ScoreStream& scores, TaskKind task,
                  const std::optional<std::vector<double>>& thresholds = std::nullopt,
                  bool allow_default = true);

}  // namespace affectcal::temporal
