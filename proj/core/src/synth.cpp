#include "affectcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/parallel.hpp"
#include "affectcal/rng.hpp"

namespace affectcal::synth {

namespace {

enum Stream : std::uint64_t { kMain = 1, kAudio = 2, kPretrained = 3 };

std::size_t num_classes_of(TaskKind task) {
  return task == TaskKind::VA ? kNumVaOutputs : num_outputs(task);
}

// Alternating on/off runs with geometric lengths; the on-share is `rate` and
// the mean run length is `mean_run`.
std::vector<std::uint8_t> alternating_runs(std::size_t n, double rate, double mean_run, Rng& rng) {
  std::vector<std::uint8_t> out(n, 0);
  if (rate <= 0.0) return out;
  if (rate >= 1.0) {
    std::fill(out.begin(), out.end(), 1);
    return out;
  }
  const double on_mean = std::max(1.0, 2.0 * mean_run * rate);
  const double off_mean = std::max(1.0, 2.0 * mean_run * (1.0 - rate));
  bool on = rng.uniform() < rate;
  std::size_t t = 0;
  while (t < n) {
    const std::size_t len = rng.geometric(on ? on_mean : off_mean);
    const std::size_t end = std::min(n, t + len);
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(t), out.begin() + static_cast<std::ptrdiff_t>(end),
              on ? 1 : 0);
    t = end;
    on = !on;
  }
  return out;
}

std::string video_name(const SynthConfig& cfg, std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_v%04zu", v);
  return cfg.split + buf;
}

SynthVideo make_video(const SynthConfig& cfg, std::size_t v) {
  const std::uint64_t vseed = derive_seed(cfg.seed, v);
  Rng rng(derive_seed(vseed, kMain));
  const std::size_t n = cfg.frames_per_video;
  const std::size_t dim = cfg.feature_dim;
  const double scale = cfg.class_separation / std::sqrt(2.0);
  const double sigma = cfg.feature_noise_sigma;

  SynthVideo out;
  out.features.video_id = video_name(cfg, v);
  out.features.source_tag = "synth";
  out.features.frame_rate_hz = cfg.frame_rate_hz;
  out.features.frame_ids.resize(n);
  std::iota(out.features.frame_ids.begin(), out.features.frame_ids.end(), std::int64_t{0});
  out.features.features = Matrix(n, dim);

  LabelTrack& labels = out.labels;
  labels.video_id = out.features.video_id;
  labels.task = cfg.task;
  labels.frame_ids = out.features.frame_ids;
  labels.mask.assign(n, 1);

  Matrix& x = out.features.features;
  const std::size_t num_classes = num_classes_of(cfg.task);

  if (cfg.task == TaskKind::AU) {
    const auto rates = cfg.effective_au_rates();
    std::vector<std::vector<std::uint8_t>> channels;
    for (std::size_t c = 0; c < kNumAu; ++c) {
      channels.push_back(alternating_runs(n, rates[c], cfg.segment_mean_length, rng));
    }
    labels.au.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double centre = d < kNumAu && channels[d][t] ? scale : 0.0;
        x(t, d) = centre + sigma * rng.normal();
      }
      for (std::size_t c = 0; c < kNumAu; ++c) {
        bool bit = channels[c][t] != 0;
        if (rng.uniform() < cfg.label_flip_prob) bit = !bit;
        labels.au[t][c] = bit ? 1 : 0;
      }
    }
    return out;
  }

  if (cfg.task == TaskKind::VA) {
    const double rho = 1.0 - 1.0 / std::max(1.0, cfg.segment_mean_length);
    const double innovation = 0.5 * std::sqrt(1.0 - rho * rho);
    std::array<double, 2> state{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    labels.va.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (auto& s : state) s = std::clamp(rho * s + innovation * rng.normal(), -1.0, 1.0);
      labels.va[t] = state;
      for (std::size_t d = 0; d < dim; ++d) {
        const double centre = d < 2 ? state[d] * cfg.class_separation : 0.0;
        x(t, d) = centre + sigma * rng.normal();
      }
    }
    return out;
  }

  // Single-label tasks: latent class sequence.
  out.hidden.resize(n);
  if (cfg.task == TaskKind::VD) {
    const auto runs = alternating_runs(n, cfg.positive_fraction, cfg.segment_mean_length, rng);
    for (std::size_t t = 0; t < n; ++t) out.hidden[t] = runs[t];
  } else {
    const auto weights = cfg.effective_class_weights();
    std::size_t t = 0;
    while (t < n) {
      const std::size_t len = rng.geometric(cfg.segment_mean_length);
      const int cls = static_cast<int>(rng.categorical(weights));
      const std::size_t end = std::min(n, t + len);
      std::fill(out.hidden.begin() + static_cast<std::ptrdiff_t>(t),
                out.hidden.begin() + static_cast<std::ptrdiff_t>(end), cls);
      t = end;
    }
  }
  labels.classes.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const int h = out.hidden[t];
    for (std::size_t d = 0; d < dim; ++d) {
      const double centre = static_cast<int>(d) == h ? scale : 0.0;
      x(t, d) = centre + sigma * rng.normal();
    }
    int y = h;
    if (num_classes > 1 && rng.uniform() < cfg.label_flip_prob) {
      y = static_cast<int>((static_cast<std::size_t>(h) + 1 + rng.below(num_classes - 1)) % num_classes);
    }
    labels.classes[t] = y;
  }

  if (cfg.audio_agreement) {
    Rng arng(derive_seed(vseed, kAudio));
    const double duration = static_cast<double>(n) / cfg.frame_rate_hz;
    const auto m = static_cast<std::size_t>(std::ceil(duration * cfg.audio_rate_hz));
    FeatureStream audio;
    audio.video_id = labels.video_id;
    audio.source_tag = "synth-audio";
    audio.frame_rate_hz = cfg.audio_rate_hz;
    audio.frame_ids.resize(m);
    std::iota(audio.frame_ids.begin(), audio.frame_ids.end(), std::int64_t{0});
    audio.features = Matrix(m, dim);
    for (std::size_t j = 0; j < m; ++j) {
      const double vt = static_cast<double>(j) / cfg.audio_rate_hz * cfg.frame_rate_hz;
      const auto t = std::min(n - 1, static_cast<std::size_t>(std::llround(vt)));
      const int h = arng.uniform() < *cfg.audio_agreement ? out.hidden[t] : -1;
      for (std::size_t d = 0; d < dim; ++d) {
        const double centre = static_cast<int>(d) == h ? scale : 0.0;
        audio.features(j, d) = centre + sigma * arng.normal();
      }
    }
    out.audio = std::move(audio);
  }

  if (cfg.pretrained_confident_prob && cfg.task == TaskKind::Expr) {
    Rng prng(derive_seed(vseed, kPretrained));
    const LabelSet source = affectnet_labels();
    const LabelSet target = label_set(TaskKind::Expr);
    std::vector<int> to_source(target.size(), -1);
    for (std::size_t c = 0; c < target.size(); ++c) {
      if (const auto s = source.index_of(target.names[c])) to_source[c] = static_cast<int>(*s);
    }
    const std::size_t cs = source.size();
    ScoreStream pre{labels.video_id, labels.frame_ids, Matrix(n, cs), ScoreKind::Probability};
    std::vector<double> rest(cs);
    for (std::size_t t = 0; t < n; ++t) {
      const int mapped = to_source[static_cast<std::size_t>(out.hidden[t])];
      std::size_t top_cls;
      double top;
      if (mapped >= 0 && prng.uniform() < *cfg.pretrained_confident_prob) {
        top_cls = static_cast<std::size_t>(mapped);
        top = prng.uniform(0.91, 0.99);
      } else {
        top_cls = mapped >= 0 && prng.uniform() < 0.5 ? static_cast<std::size_t>(mapped) : prng.below(cs);
        top = prng.uniform(0.3, 0.85);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < cs; ++k) {
        rest[k] = k == top_cls ? 0.0 : prng.uniform(0.05, 1.0);
        sum += rest[k];
      }
      for (std::size_t k = 0; k < cs; ++k) {
        pre.scores(t, k) = k == top_cls ? top : (1.0 - top) * rest[k] / sum;
      }
    }
    out.pretrained = std::move(pre);
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_videos == 0) throw ConfigError("synth: num_videos must be positive");
  if (frames_per_video == 0) throw ConfigError("synth: frames_per_video must be positive");
  const std::size_t needed = task == TaskKind::AU ? kNumAu : num_classes_of(task);
  if (feature_dim < needed) {
    throw ConfigError("synth: feature_dim must be at least " + std::to_string(needed) + " for task " +
                      std::string(to_string(task)));
  }
  if (!class_weights.empty()) {
    if (!is_single_label(task)) throw ConfigError("synth: class_weights apply to single-label tasks");
    if (class_weights.size() != num_outputs(task)) {
      throw ConfigError("synth: class_weights needs " + std::to_string(num_outputs(task)) + " entries");
    }
    double sum = 0.0;
    for (double w : class_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("synth: class weights must be non-negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("synth: class_weights must sum to 1");
  }
  for (double r : au_positive_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synth: AU rates must lie in [0, 1]");
  }
  if (!au_positive_rates.empty() && au_positive_rates.size() != kNumAu) {
    throw ConfigError("synth: au_positive_rates needs 12 entries");
  }
  if (!(segment_mean_length >= 1.0)) throw ConfigError("synth: segment_mean_length must be >= 1");
  if (!(feature_noise_sigma >= 0.0)) throw ConfigError("synth: noise sigma must be >= 0");
  if (!std::isfinite(class_separation)) throw ConfigError("synth: class_separation must be finite");
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("synth: ") + name + " must lie in [0, 1]");
  };
  check_prob(label_flip_prob, "label_flip_prob");
  check_prob(positive_fraction, "positive_fraction");
  if (audio_agreement) check_prob(*audio_agreement, "audio_agreement");
  if (pretrained_confident_prob) check_prob(*pretrained_confident_prob, "pretrained_confident_prob");
  if (!(audio_rate_hz > 0.0) || !(frame_rate_hz > 0.0)) throw ConfigError("synth: rates must be positive");
}

std::vector<double> SynthConfig::effective_class_weights() const {
  if (task == TaskKind::VD) return {1.0 - positive_fraction, positive_fraction};
  if (!class_weights.empty()) return class_weights;
  const std::size_t c = num_outputs(task);
  return std::vector<double>(c, 1.0 / static_cast<double>(c));
}

std::vector<double> SynthConfig::effective_au_rates() const {
  if (!au_positive_rates.empty()) return au_positive_rates;
  std::vector<double> rates(kNumAu);
  for (std::size_t c = 0; c < kNumAu; ++c) rates[c] = 0.05 + 0.04 * static_cast<double>(c);
  return rates;
}

std::vector<SynthVideo> generate_videos(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthVideo> videos(cfg.num_videos);
  parallel_for(cfg.num_videos, [&](std::size_t v) { videos[v] = make_video(cfg, v); });
  return videos;
}

DatasetManifest write_dataset(const SynthConfig& cfg, const std::vector<SynthVideo>& videos,
                              const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"features", "labels", "audio", "pretrained"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  DatasetManifest manifest;
  manifest.task = cfg.task;
  manifest.split = cfg.split;
  manifest.base_dir = out_dir;
  manifest.entries.resize(videos.size());
  parallel_for(videos.size(), [&](std::size_t v) {
    const auto& video = videos[v];
    const std::string& id = video.features.video_id;
    ManifestEntry entry;
    entry.video_id = id;
    entry.feature_path = "features/" + id + ".csv";
    entry.label_path = "labels/" + id + ".csv";
    save_feature_stream(video.features, out_dir / entry.feature_path);
    save_label_track(video.labels, out_dir / *entry.label_path);
    if (video.audio) {
      entry.audio_feature_path = "audio/" + id + ".csv";
      entry.audio_rate_hz = video.audio->frame_rate_hz;
      save_feature_stream(*video.audio, out_dir / *entry.audio_feature_path);
    }
    if (video.pretrained) {
      entry.pretrained_score_path = "pretrained/" + id + ".csv";
      save_score_stream(*video.pretrained, out_dir / *entry.pretrained_score_path);
    }
    manifest.entries[v] = std::move(entry);
  });
  save_manifest(manifest, out_dir / (cfg.split + ".json"));
  return manifest;
}

DatasetManifest generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  return write_dataset(cfg, generate_videos(cfg), out_dir);
}

DatasetManifest generate_vd(SynthConfig cfg, const std::filesystem::path& out_dir) {
  cfg.task = TaskKind::VD;
  return generate(cfg, out_dir);
}

}  // namespace affectcal::synth
