#include "commands.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "affectcal/calibrate.hpp"
#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/metrics.hpp"
#include "affectcal/nn/network.hpp"
#include "affectcal/parallel.hpp"
#include "affectcal/pipeline.hpp"
#include "affectcal/rng.hpp"
#include "affectcal/synth.hpp"
#include "json.hpp"

namespace affectcal::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void log_info(const RunConfig& cfg, const std::string& message) {
  if (cfg.log_level == "info") std::clog << "affectcal " << cfg.subcommand << ": " << message << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
  }
  return items;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  for (const auto& item : split_list(text)) {
    try {
      values.push_back(parse_double(item));
    } catch (const Error&) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
  }
  return values;
}

std::string require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError(cfg.subcommand + " needs --out");
  return cfg.out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Task of the run: the manifest's, which --task (when given) must match.
TaskKind resolve_task(const RunConfig& cfg, TaskKind manifest_task) {
  if (!cfg.task.empty()) {
    const TaskKind flag = parse_task(cfg.task);
    if (flag != manifest_task) {
      throw ConfigError("--task " + std::string(to_string(flag)) + " does not match manifest task " +
                        std::string(to_string(manifest_task)));
    }
  }
  return manifest_task;
}

DatasetManifest load_run_manifest(const RunConfig& cfg, TaskKind& task) {
  DatasetManifest manifest = load_manifest(cfg.manifest);
  task = resolve_task(cfg, manifest.task);
  return manifest;
}

nn::ModelFile load_task_model(const std::string& path, TaskKind task) {
  nn::ModelFile model = nn::load_model(path);
  if (model.spec.output_dim != num_outputs(task)) {
    throw ConfigError(path + ": model has " + std::to_string(model.spec.output_dim) + " outputs, task " +
                      std::string(to_string(task)) + " needs " + std::to_string(num_outputs(task)));
  }
  if (model.task != task && !(is_single_label(model.task) && is_single_label(task))) {
    throw ConfigError(path + ": model was trained for task " + std::string(to_string(model.task)));
  }
  return model;
}

nn::NetworkSpec make_spec(const std::string& preset, std::size_t input_dim, const RunConfig& cfg) {
  switch (parse_task(preset)) {
    case TaskKind::Expr:
    case TaskKind::Audio:
      return nn::expr_preset(input_dim, cfg.hidden);
    case TaskKind::VA:
      return nn::va_preset(input_dim);
    case TaskKind::AU:
      return nn::au_preset(input_dim, cfg.hidden);
    case TaskKind::VD:
      return nn::vd_preset(input_dim, cfg.tcn_channels);
  }
  throw ConfigError("unknown preset '" + preset + "'");
}

std::optional<std::vector<double>> load_bias(const std::string& path, TaskKind task) {
  if (path.empty()) return std::nullopt;
  const CalibrationArtifact artifact = load_calibration(path);
  if (!artifact.bias) throw ConfigError(path + ": calibration artifact has no bias");
  if (artifact.bias->size() != num_outputs(task)) {
    throw ConfigError(path + ": bias length does not match task " + std::string(to_string(task)));
  }
  return artifact.bias;
}

std::optional<std::vector<double>> load_thresholds(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  std::vector<double> values;
  if (fs::exists(spec)) {
    const CalibrationArtifact artifact = load_calibration(spec);
    if (!artifact.thresholds) throw ConfigError(spec + ": calibration artifact has no thresholds");
    values = *artifact.thresholds;
  } else {
    values = parse_number_list(spec, "--thresholds");
  }
  if (values.size() != kNumAu) throw ConfigError("--thresholds needs 12 values");
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("--thresholds values must lie in [0, 1]");
  }
  return values;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text, bool to_file) {
  if (to_file && !cfg.out.empty()) {
    write_text_file(cfg.out, text);
  } else {
    out << text;
  }
}

// Model outputs for every video, computed once and shared by later stages.
struct ScoredVideo {
  const pipeline::LoadedVideo* video = nullptr;
  ScoreStream scores;
  std::optional<ScoreStream> audio;
};

std::vector<ScoredVideo> score_videos(const std::vector<pipeline::LoadedVideo>& videos,
                                      const nn::ModelFile& model, const nn::ModelFile* audio_model) {
  std::vector<ScoredVideo> scored(videos.size());
  parallel_for(videos.size(), [&](std::size_t i) {
    scored[i].video = &videos[i];
    scored[i].scores = pipeline::infer_scores(model, pipeline::modality_features(videos[i], model.modality));
    if (audio_model) {
      scored[i].audio =
          pipeline::infer_scores(*audio_model, pipeline::modality_features(videos[i], audio_model->modality));
    }
  });
  return scored;
}

pipeline::StageConfig stage_config(const RunConfig& cfg, TaskKind task) {
  pipeline::StageConfig sc;
  sc.task = task;
  sc.smoothing.window_T = cfg.smooth_T;
  sc.smoothing.max_gap = cfg.max_gap;
  sc.smoothing.validate();
  sc.gate_p0 = cfg.gate_p0;
  sc.fusion_w = cfg.fusion_w;
  if (!(sc.fusion_w >= 0.0 && sc.fusion_w <= 1.0)) throw ConfigError("--fusion-w must lie in [0, 1]");
  if (sc.gate_p0 && !(*sc.gate_p0 > 0.0 && *sc.gate_p0 <= 1.0)) throw ConfigError("--gate-p0 must lie in (0, 1]");
  sc.bias = load_bias(cfg.bias, task);
  sc.audio_bias = load_bias(cfg.audio_bias, task);
  sc.thresholds = load_thresholds(cfg.thresholds);
  return sc;
}

const ScoreStream* pretrained_for(const ScoredVideo& v, const pipeline::StageConfig& sc) {
  if (!sc.gate_p0) return nullptr;
  if (!v.video->pretrained) {
    throw FormatError("gate requested but '" + v.video->entry.video_id + "' has no pretrained_score_path");
  }
  return &*v.video->pretrained;
}

std::vector<pipeline::Prediction> run_all(const std::vector<ScoredVideo>& scored,
                                          const pipeline::StageConfig& sc) {
  std::vector<pipeline::Prediction> preds(scored.size());
  parallel_for(scored.size(), [&](std::size_t i) {
    const auto& v = scored[i];
    preds[i] = pipeline::run_frame_pipeline(v.scores, v.audio ? &*v.audio : nullptr, pretrained_for(v, sc), sc);
  });
  return preds;
}

metrics::MetricReport pooled_report(TaskKind task, const std::vector<ScoredVideo>& scored,
                                    const std::vector<pipeline::Prediction>& preds) {
  metrics::Evaluator ev(task);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (!scored[i].video->labels) {
      throw FormatError("manifest entry '" + scored[i].video->entry.video_id + "' has no label_path");
    }
    ev.add(preds[i].track, *scored[i].video->labels);
  }
  return ev.pooled();
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  synth::SynthConfig sc;
  sc.task = cfg.task.empty() ? TaskKind::Expr : parse_task(cfg.task);
  sc.num_videos = cfg.num_videos;
  sc.frames_per_video = cfg.frames;
  sc.feature_dim = cfg.feature_dim;
  if (!cfg.class_weights.empty()) sc.class_weights = parse_number_list(cfg.class_weights, "--class-weights");
  sc.segment_mean_length = cfg.segment_length;
  sc.feature_noise_sigma = cfg.noise_sigma;
  sc.class_separation = cfg.separation;
  sc.label_flip_prob = cfg.flip_prob;
  sc.audio_agreement = cfg.audio_agreement;
  sc.pretrained_confident_prob = cfg.pretrained_confident;
  sc.positive_fraction = cfg.positive_fraction;
  if (!cfg.au_rates.empty()) sc.au_positive_rates = parse_number_list(cfg.au_rates, "--au-rates");
  const auto splits = split_list(cfg.splits);
  if (splits.empty()) throw ConfigError("--splits is empty");

  ordered_json summary = {{"task", std::string(to_string(sc.task))}, {"manifests", ordered_json::array()}};
  for (std::size_t i = 0; i < splits.size(); ++i) {
    sc.split = splits[i];
    sc.seed = derive_seed(cfg.seed, i);
    synth::generate(sc, dir);
    summary["manifests"].push_back((dir / (splits[i] + ".json")).string());
    log_info(cfg, "wrote split " + splits[i]);
  }
  out << dump(summary);
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const fs::path model_path = require_out(cfg);
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  const auto videos = pipeline::load_videos(manifest, true);
  if (videos.empty()) throw EmptyInputError("training manifest has no entries");

  std::vector<FeatureStream> features;
  std::vector<LabelTrack> labels;
  for (const auto& v : videos) {
    features.push_back(pipeline::modality_features(v, cfg.modality));
    labels.push_back(*v.labels);
  }
  const nn::NetworkSpec spec =
      make_spec(cfg.preset.empty() ? std::string(to_string(task)) : cfg.preset, features.front().dim(), cfg);
  if (spec.output_dim != num_outputs(task)) {
    throw ConfigError("preset '" + cfg.preset + "' does not fit task " + std::string(to_string(task)));
  }
  nn::LossSpec loss = cfg.loss.empty() ? pipeline::default_loss(task) : nn::LossSpec{};
  if (!cfg.loss.empty()) loss.kind = nn::parse_loss_kind(cfg.loss);
  loss.class_weight_mode = nn::parse_class_weight_mode(cfg.class_weight_mode);
  pipeline::fill_loss_weights(loss, task, labels);

  const nn::TrainingSet data = task == TaskKind::VD ? pipeline::vd_training_set(features, labels, cfg.vd)
                                                    : pipeline::frame_training_set(task, features, labels);
  nn::TrainHyper hyper;
  hyper.lr = cfg.lr;
  hyper.batch_size = cfg.batch_size;
  hyper.epochs = cfg.epochs;
  hyper.seed = cfg.seed;
  hyper.weight_decay = cfg.weight_decay;
  log_info(cfg, "training " + std::to_string(spec.input_dim) + "-dim " + std::string(to_string(task)) + " model");
  const nn::TrainResult result = nn::train(spec, loss, data, hyper);

  nn::ModelFile model;
  model.task = task;
  model.modality = cfg.modality;
  model.spec = spec;
  model.state = result.state;
  if (is_single_label(task)) model.priors = class_priors(labels, task);
  nn::save_model(model, model_path);
  nn::save_loss_log(result.log, model_path.string() + ".loss.csv");

  out << dump({{"model", model_path.string()},
               {"loss", std::string(nn::to_string(loss.kind))},
               {"epochs", cfg.epochs},
               {"initial_loss", result.log.front().loss},
               {"final_loss", result.log.back().loss}});
  return 0;
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
  const fs::path artifact_path = require_out(cfg);
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  const nn::ModelFile model = load_task_model(cfg.model, task);
  if (!is_single_label(task) && task != TaskKind::AU) {
    throw ConfigError("calibration applies to expr, audio and au");
  }
  if (task == TaskKind::VD) throw ConfigError("calibration applies to expr, audio and au");
  const auto videos = pipeline::load_videos(manifest, true);
  const auto scored = score_videos(videos, model, nullptr);
  std::vector<ScoreStream> scores;
  std::vector<LabelTrack> labels;
  for (const auto& s : scored) {
    scores.push_back(s.scores);
    labels.push_back(*s.video->labels);
  }

  CalibrationArtifact artifact;
  if (task == TaskKind::AU) {
    artifact = calibrate::tune_thresholds(scores, labels);
  } else {
    calibrate::GlaConfig gla;
    gla.grid_lo = cfg.grid_lo;
    gla.grid_hi = cfg.grid_hi;
    gla.grid_step = cfg.grid_step;
    gla.max_passes = cfg.max_passes;
    gla.init = calibrate::parse_bias_init(cfg.bias_init);
    if (gla.init == calibrate::BiasInit::Prior && !model.priors) {
      throw ConfigError(cfg.model + ": model carries no class priors; use --init zero");
    }
    artifact = calibrate::fit_logit_biases(scores, labels, model.priors.value_or(ClassPriorTable{}), gla);
  }
  artifact.task = task;
  artifact.source_manifest_hash = file_hash(cfg.manifest);
  save_calibration(artifact, artifact_path);

  ordered_json summary = {{"artifact", artifact_path.string()}, {"task", std::string(to_string(task))}};
  if (!artifact.search_log.empty()) summary["objective"] = artifact.search_log.back().f1;
  if (artifact.bias) summary["bias"] = *artifact.bias;
  if (artifact.thresholds) summary["thresholds"] = *artifact.thresholds;
  out << dump(summary);
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  const nn::ModelFile model = load_task_model(cfg.model, task);
  const auto videos = pipeline::load_videos(manifest, false);
  ensure_dir(dir / "scores");

  std::vector<pipeline::Prediction> preds;
  if (task == TaskKind::VD) {
    cfg.vd.validate();
    preds.resize(videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) {
      preds[i] = pipeline::predict_vd(model, pipeline::modality_features(videos[i], model.modality), cfg.vd);
    }
  } else {
    const pipeline::StageConfig sc = stage_config(cfg, task);
    std::optional<nn::ModelFile> audio_model;
    if (!cfg.audio_model.empty()) audio_model = load_task_model(cfg.audio_model, task);
    const auto scored = score_videos(videos, model, audio_model ? &*audio_model : nullptr);
    preds = run_all(scored, sc);
  }

  std::size_t gated = 0;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const std::string& id = videos[i].entry.video_id;
    save_label_track(preds[i].track, dir / (id + ".csv"), preds[i].gate);
    save_score_stream(preds[i].scores, dir / "scores" / (id + ".csv"));
    for (auto g : preds[i].gate) gated += g;
    frames += preds[i].track.num_frames();
  }
  out << dump({{"predictions", dir.string()}, {"videos", videos.size()}, {"frames", frames}, {"gated_frames", gated}});
  return 0;
}

int cmd_fuse(const RunConfig& cfg, std::ostream& out) {
  if (cfg.audio_model.empty()) throw ConfigError("fuse needs --audio-model");
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  if (task == TaskKind::VA || task == TaskKind::VD) throw ConfigError("fuse applies to expr, audio and au");
  const nn::ModelFile model = load_task_model(cfg.model, task);
  const nn::ModelFile audio_model = load_task_model(cfg.audio_model, task);
  const auto videos = pipeline::load_videos(manifest, cfg.sweep);
  const auto scored = score_videos(videos, model, &audio_model);
  pipeline::StageConfig sc = stage_config(cfg, task);
  sc.gate_p0.reset();

  if (cfg.sweep) {
    std::string csv = "w,macro_f1,accuracy\n";
    double best_w = 0.0;
    double best_f1 = -1.0;
    for (int k = 0; k <= 20; ++k) {
      sc.fusion_w = static_cast<double>(k) / 20.0;
      const auto report = pooled_report(task, scored, run_all(scored, sc));
      csv += format_double(sc.fusion_w) + ',' + format_double(report.macro_f1) + ',' +
             format_double(report.accuracy) + '\n';
      if (report.macro_f1 > best_f1) {
        best_f1 = report.macro_f1;
        best_w = sc.fusion_w;
      }
    }
    if (!cfg.out.empty()) write_text_file(cfg.out, csv);
    out << dump({{"best_w", best_w}, {"macro_f1", best_f1}, {"sweep", cfg.out.empty() ? csv : cfg.out}});
    return 0;
  }

  const fs::path dir = require_out(cfg);
  ensure_dir(dir);
  for (const auto& s : scored) {
    ScoreStream a = sc.bias ? calibrate::calibrated_probabilities(s.scores, *sc.bias) : s.scores;
    ScoreStream b = sc.audio_bias ? calibrate::calibrated_probabilities(*s.audio, *sc.audio_bias) : *s.audio;
    save_score_stream(temporal::blend(a, b, sc.fusion_w), dir / (s.video->entry.video_id + ".csv"));
  }
  out << dump({{"blended", dir.string()}, {"videos", scored.size()}, {"w", sc.fusion_w}});
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  metrics::Evaluator ev(task);
  for (const auto& e : manifest.entries) {
    if (!e.label_path) throw FormatError("manifest entry '" + e.video_id + "' has no label_path");
    const LabelTrack truth = load_label_track(manifest.resolve(*e.label_path), task);
    const LabelTrack pred = load_label_track(fs::path(cfg.pred_dir) / (e.video_id + ".csv"), task);
    ev.add(pred, truth);
  }
  const metrics::MetricReport summary = cfg.pooling == "pooled" ? ev.pooled() : ev.video_mean();
  std::string text;
  if (cfg.csv) {
    std::vector<metrics::MetricReport> rows = ev.per_video();
    rows.push_back(summary);
    text = metrics::to_csv(rows);
  } else if (cfg.format == "table") {
    text = metrics::to_table(summary);
  } else {
    text = metrics::to_json(summary) + "\n";
  }
  emit(cfg, out, text, true);
  return 0;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  TaskKind task;
  const DatasetManifest manifest = load_run_manifest(cfg, task);
  if (task == TaskKind::VD) throw ConfigError("ablate applies to frame-level tasks");
  const auto variants = split_list(cfg.variants);
  if (variants.empty()) throw ConfigError("--variants is empty");
  const nn::ModelFile model = load_task_model(cfg.model, task);
  std::optional<nn::ModelFile> audio_model;
  if (!cfg.audio_model.empty()) audio_model = load_task_model(cfg.audio_model, task);
  const auto videos = pipeline::load_videos(manifest, true);
  const auto scored = score_videos(videos, model, audio_model ? &*audio_model : nullptr);

  const pipeline::StageConfig full = stage_config(cfg, task);
  pipeline::StageConfig sc;
  sc.task = task;
  sc.smoothing.max_gap = full.smoothing.max_gap;
  std::vector<ScoredVideo> active = scored;
  for (auto& v : active) v.audio.reset();

  std::vector<std::pair<std::string, metrics::MetricReport>> rows;
  for (const auto& name : variants) {
    if (name == "none") {
      // Raw decoding: nothing enabled.
    } else if (name == "gla") {
      if (!full.bias) throw ConfigError("variant gla needs --bias");
      sc.bias = full.bias;
      sc.audio_bias = full.audio_bias;
    } else if (name == "thresholds") {
      if (!full.thresholds) throw ConfigError("variant thresholds needs --thresholds");
      sc.thresholds = full.thresholds;
    } else if (name == "filtering") {
      if (!full.gate_p0) throw ConfigError("variant filtering needs --gate-p0");
      sc.gate_p0 = full.gate_p0;
    } else if (name == "smoothing") {
      if (full.smoothing.window_T == 0) throw ConfigError("variant smoothing needs --smooth-T > 0");
      sc.smoothing.window_T = full.smoothing.window_T;
    } else if (name == "fusion") {
      if (!audio_model) throw ConfigError("variant fusion needs --audio-model");
      active = scored;
      sc.fusion_w = full.fusion_w;
    } else {
      throw ConfigError("unknown ablation variant '" + name + "'");
    }
    rows.emplace_back(name, pooled_report(task, active, run_all(active, sc)));
  }

  std::string text;
  const bool va = task == TaskKind::VA;
  if (cfg.csv) {
    text = va ? "variant,ccc_v,ccc_a,p_va\n" : "variant,macro_f1,accuracy\n";
    for (const auto& [name, r] : rows) {
      text += name + ',' +
              (va ? format_double(r.ccc_v) + ',' + format_double(r.ccc_a) + ',' + format_double(r.p_va)
                  : format_double(r.macro_f1) + ',' + format_double(r.accuracy)) +
              '\n';
    }
  } else {
    char line[128];
    std::snprintf(line, sizeof(line), "%-12s %10s %10s%s\n", "variant", va ? "CCC_V" : "macro_F1",
                  va ? "CCC_A" : "accuracy", va ? "       P_VA" : "");
    text = line;
    for (const auto& [name, r] : rows) {
      if (va) {
        std::snprintf(line, sizeof(line), "%-12s %10.4f %10.4f %10.4f\n", name.c_str(), r.ccc_v, r.ccc_a, r.p_va);
      } else {
        std::snprintf(line, sizeof(line), "%-12s %10.4f %10.4f\n", name.c_str(), r.macro_f1, r.accuracy);
      }
      text += line;
    }
  }
  emit(cfg, out, text, true);
  return 0;
}

}  // namespace affectcal::cli
