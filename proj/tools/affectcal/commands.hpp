#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "affectcal/vd_windows.hpp"

namespace affectcal::cli {

// Every option of every subcommand; each subcommand reads the subset it needs.
struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string log_level = "warn";  // error, warn, info
  std::uint64_t seed = 0;
  std::string out;

  // Data and models.
  std::string manifest;
  std::string pred_dir;
  std::string task;
  std::string model;
  std::string audio_model;
  std::string bias;        // calibration artifact for the video model
  std::string audio_bias;  // calibration artifact for the audio model
  std::string thresholds;  // calibration artifact or 12 comma-separated values

  // Training.
  std::string preset;
  std::string loss;
  std::string class_weight_mode = "inverse_frequency";
  std::string modality = "video";
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t hidden = 128;
  std::size_t tcn_channels = 256;

  // Calibration.
  std::string bias_init = "prior";
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  double grid_step = 0.1;
  int max_passes = 5;

  // Inference stages.
  int smooth_T = 0;
  std::optional<std::int64_t> max_gap;
  std::optional<double> gate_p0;
  double fusion_w = 0.5;
  bool sweep = false;
  temporal::VdWindowConfig vd;

  // Evaluation.
  bool csv = false;
  std::string format = "json";  // json or table
  std::string pooling = "pooled";  // pooled or video_mean

  // Ablation.
  std::string variants = "none,gla,filtering,smoothing,fusion";

  // Synthesis.
  std::string splits = "train,val,test";
  std::size_t num_videos = 8;
  std::size_t frames = 600;
  std::size_t feature_dim = 16;
  std::string class_weights;
  double segment_length = 50.0;
  double noise_sigma = 1.0;
  double separation = 3.0;
  double flip_prob = 0.0;
  std::optional<double> audio_agreement;
  std::optional<double> pretrained_confident;
  double positive_fraction = 0.44;
  std::string au_rates;
};

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_calibrate(const RunConfig& cfg, std::ostream& out);
int cmd_predict(const RunConfig& cfg, std::ostream& out);
int cmd_fuse(const RunConfig& cfg, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);

// Merges `--config file.json` keys into args: a key `smooth_T` becomes
// `--smooth-T <value>` unless that flag is already present (flags win).
std::vector<std::string> apply_config_file(const std::vector<std::string>& args);

// Full command line (without argv[0]). Errors are reported as one line on
// `err`: `error: <category>: <message>`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affectcal::cli
