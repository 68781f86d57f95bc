#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affectcal/datamodel.hpp"

namespace affectcal {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
// Strict parse of a decimal cell; throws FormatError on junk. NaN/inf parse
// successfully so callers can report them as ValueError.
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

// CSV with a `# video_id=<s> rate_hz=<r> source=<s>` line followed by
// `frame_id,f0,...,f{D-1}`.
FeatureStream load_feature_stream(const std::filesystem::path& path);
void save_feature_stream(const FeatureStream& stream, const std::filesystem::path& path);

// `# video_id=<s> kind=<kind>` then `frame_id,s0,...,s{C-1}`.
ScoreStream load_score_stream(const std::filesystem::path& path);
void save_score_stream(const ScoreStream& stream, const std::filesystem::path& path);

// `# video_id=<s> task=<task>` then `frame_id,mask,<payload>` where the payload
// is `y`, `au0..au11`, or `valence,arousal`. Prediction files may carry a
// trailing `gate` column, which the loader skips.
LabelTrack load_label_track(const std::filesystem::path& path,
                            std::optional<TaskKind> expected = std::nullopt);
void save_label_track(const LabelTrack& track, const std::filesystem::path& path,
                      std::span<const std::uint8_t> gate_mask = {});

// Reads the trailing `gate` column of a prediction file (empty when absent).
std::vector<std::uint8_t> load_gate_mask(const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

CalibrationArtifact load_calibration(const std::filesystem::path& path);
void save_calibration(const CalibrationArtifact& artifact, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Writes via a buffer; throws IoError when the path is not writable.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// 64-bit FNV-1a of the file contents, hex encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace affectcal
