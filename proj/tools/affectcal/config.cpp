#include <algorithm>
#include <ostream>

#include "CLI11.hpp"
#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "commands.hpp"
#include "json.hpp"

namespace affectcal::cli {

namespace {

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar_text(const nlohmann::json& value, const std::string& key) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  if (value.is_number_unsigned()) return std::to_string(value.get<std::uint64_t>());
  if (value.is_number_float()) return format_double(value.get<double>());
  throw ConfigError("config key '" + key + "' must be a string, number, boolean or list");
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "Seed for every random draw");
  sub->add_option("--out", cfg.out, "Output file or directory");
  sub->add_option("--log-level", cfg.log_level, "error, warn or info")
      ->check(CLI::IsMember({"error", "warn", "info"}));
}

void add_task(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--task", cfg.task, "expr, va, au, vd or audio");
}

void add_manifest(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)")->required();
}

void add_stages(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--model", cfg.model, "Trained model file")->required();
  sub->add_option("--audio-model", cfg.audio_model, "Audio model for late fusion");
  sub->add_option("--bias", cfg.bias, "Calibration artifact with logit biases");
  sub->add_option("--audio-bias", cfg.audio_bias, "Calibration artifact for the audio model");
  sub->add_option("--thresholds", cfg.thresholds, "AU thresholds: artifact path or 12 values");
  sub->add_option("--smooth-T", cfg.smooth_T, "Smoothing window T (even; window T+1)");
  sub->add_option("--max-gap", cfg.max_gap, "Break smoothing windows at frame gaps above this");
  sub->add_option("--gate-p0", cfg.gate_p0, "Confidence gate threshold p0 in (0, 1]");
  sub->add_option("--fusion-w", cfg.fusion_w, "Fusion weight of the video stream");
  sub->add_option("--clip-len", cfg.vd.clip_len, "Violence clip length L");
  sub->add_option("--frame-step", cfg.vd.frame_step, "Violence clip frame step");
  sub->add_option("--infer-stride", cfg.vd.infer_stride, "Violence inference stride");
  sub->add_option("--decision-threshold", cfg.vd.decision_threshold, "Violence decision threshold");
}

}  // namespace

std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file argument");
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || has_flag(args, flag)) continue;
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_array()) {
      for (const auto& item : value) text += (text.empty() ? "" : ",") + scalar_text(item, key);
    } else {
      text = scalar_text(value, key);
    }
    merged.push_back(flag);
    merged.push_back(text);
  }
  return merged;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"affectcal: frame-level affect pipelines with post-hoc calibration", "affectcal"};
  app.require_subcommand(1, 1);
  app.add_option("--config", cfg.config_path, "JSON file of option values; flags win");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, cfg);
  add_task(synth, cfg);
  synth->add_option("--splits", cfg.splits, "Comma-separated split names");
  synth->add_option("--videos", cfg.num_videos, "Videos per split");
  synth->add_option("--frames", cfg.frames, "Frames per video");
  synth->add_option("--dim", cfg.feature_dim, "Feature dimension");
  synth->add_option("--class-weights", cfg.class_weights, "Comma-separated class weights");
  synth->add_option("--segment-length", cfg.segment_length, "Mean segment length in frames");
  synth->add_option("--noise-sigma", cfg.noise_sigma, "Feature noise sigma");
  synth->add_option("--separation", cfg.separation, "Distance between class centroids");
  synth->add_option("--flip-prob", cfg.flip_prob, "Label flip probability");
  synth->add_option("--audio-agreement", cfg.audio_agreement, "Share of informative audio frames");
  synth->add_option("--pretrained-confident", cfg.pretrained_confident,
                    "Share of frames where the pretrained stream is confident");
  synth->add_option("--positive-fraction", cfg.positive_fraction, "Violent share (vd)");
  synth->add_option("--au-rates", cfg.au_rates, "12 comma-separated AU activation rates");

  auto* train = app.add_subcommand("train", "Train a network on a manifest");
  add_common(train, cfg);
  add_task(train, cfg);
  add_manifest(train, cfg);
  train->add_option("--preset", cfg.preset, "Network preset: expr, va, au, vd, audio");
  train->add_option("--loss", cfg.loss, "weighted_softmax, mse_ccc, weighted_binary, weighted_ce, focal");
  train->add_option("--class-weight-mode", cfg.class_weight_mode, "inverse_frequency or paper_literal");
  train->add_option("--modality", cfg.modality, "video or audio")->check(CLI::IsMember({"video", "audio"}));
  train->add_option("--epochs", cfg.epochs, "Training epochs");
  train->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
  train->add_option("--lr", cfg.lr, "Learning rate");
  train->add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay");
  train->add_option("--hidden", cfg.hidden, "Hidden layer width");
  train->add_option("--tcn-channels", cfg.tcn_channels, "TCN channels (vd)");
  train->add_option("--clip-len", cfg.vd.clip_len, "Violence clip length L");
  train->add_option("--frame-step", cfg.vd.frame_step, "Violence clip frame step");

  auto* calibrate = app.add_subcommand("calibrate", "Fit logit biases or AU thresholds");
  add_common(calibrate, cfg);
  add_task(calibrate, cfg);
  add_manifest(calibrate, cfg);
  calibrate->add_option("--model", cfg.model, "Trained model file")->required();
  calibrate->add_option("--init", cfg.bias_init, "Bias initialisation: prior or zero");
  calibrate->add_option("--grid-lo", cfg.grid_lo, "Lowest bias value");
  calibrate->add_option("--grid-hi", cfg.grid_hi, "Highest bias value");
  calibrate->add_option("--grid-step", cfg.grid_step, "Bias grid step");
  calibrate->add_option("--max-passes", cfg.max_passes, "Coordinate search passes");

  auto* predict = app.add_subcommand("predict", "Decode per-frame predictions");
  add_common(predict, cfg);
  add_task(predict, cfg);
  add_manifest(predict, cfg);
  add_stages(predict, cfg);

  auto* fuse = app.add_subcommand("fuse", "Blend video and audio score streams");
  add_common(fuse, cfg);
  add_task(fuse, cfg);
  add_manifest(fuse, cfg);
  add_stages(fuse, cfg);
  fuse->add_flag("--sweep", cfg.sweep, "Sweep w over 0..1 in steps of 0.05 against the labels");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a manifest");
  add_common(evaluate, cfg);
  add_task(evaluate, cfg);
  add_manifest(evaluate, cfg);
  evaluate->add_option("--pred", cfg.pred_dir, "Directory of prediction files")->required();
  evaluate->add_flag("--csv", cfg.csv, "One CSV row per video plus a pooled row");
  evaluate->add_option("--format", cfg.format, "json or table")->check(CLI::IsMember({"json", "table"}));
  evaluate->add_option("--pooling", cfg.pooling, "pooled or video_mean")
      ->check(CLI::IsMember({"pooled", "video_mean"}));

  auto* ablate = app.add_subcommand("ablate", "Metric table across cumulative pipeline variants");
  add_common(ablate, cfg);
  add_task(ablate, cfg);
  add_manifest(ablate, cfg);
  add_stages(ablate, cfg);
  ablate->add_option("--variants", cfg.variants, "Comma-separated: none, gla, thresholds, filtering, smoothing, fusion");
  ablate->add_flag("--csv", cfg.csv, "Emit CSV instead of an aligned table");

  try {
    std::vector<std::string> args = apply_config_file(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: config: " << e.what() << '\n';
    return exit_code(ErrorCategory::Config);
  } catch (const Error& e) {
    err << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  }

  const std::vector<std::pair<CLI::App*, int (*)(const RunConfig&, std::ostream&)>> table = {
      {synth, cmd_synth},       {train, cmd_train},       {calibrate, cmd_calibrate},
      {predict, cmd_predict},   {fuse, cmd_fuse},         {evaluate, cmd_evaluate},
      {ablate, cmd_ablate}};
  try {
    for (const auto& [sub, fn] : table) {
      if (sub->parsed()) {
        cfg.subcommand = sub->get_name();
        return fn(cfg, out);
      }
    }
  } catch (const Error& e) {
    err << "error: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const nlohmann::json::exception& e) {
    err << "error: data: " << e.what() << '\n';
    return exit_code(ErrorCategory::Data);
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return exit_code(ErrorCategory::Config);
}

}  // namespace affectcal::cli
