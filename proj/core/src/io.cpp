#include "affectcal/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "affectcal/errors.hpp"
#include "json.hpp"

namespace affectcal {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

// Line-oriented view over a CSV file with one optional `#` metadata line.
struct CsvFile {
  std::map<std::string, std::string, std::less<>> meta;
  std::vector<std::string_view> header;
  std::vector<std::vector<std::string_view>> rows;
  std::string text;  // owns the views
};

CsvFile read_csv(const std::filesystem::path& path) {
  CsvFile csv;
  csv.text = read_text_file(path);
  std::string_view rest = csv.text;
  bool have_header = false;
  std::size_t line_no = 0;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_header) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": metadata line after header");
      }
      std::istringstream tokens{std::string(line.substr(1))};
      std::string token;
      while (tokens >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
          throw FormatError(path.string() + ": malformed metadata token '" + token + "'");
        }
        csv.meta[token.substr(0, eq)] = token.substr(eq + 1);
      }
      continue;
    }
    auto cells = split(line, ',');
    if (!have_header) {
      csv.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != csv.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(csv.header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    }
    csv.rows.push_back(std::move(cells));
  }
  if (!have_header) throw FormatError(path.string() + ": missing header line");
  if (csv.header.empty() || csv.header.front() != "frame_id") {
    throw FormatError(path.string() + ": header must start with 'frame_id'");
  }
  return csv;
}

std::string meta_or(const CsvFile& csv, std::string_view key, std::string fallback) {
  auto it = csv.meta.find(key);
  return it == csv.meta.end() ? fallback : it->second;
}

void require_token(std::string_view value, std::string_view what) {
  if (value.empty()) throw ValueError(std::string(what) + " must not be empty");
  for (char c : value) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == '=') {
      throw ValueError(std::string(what) + " '" + std::string(value) +
                       "' contains whitespace, ',' or '='");
    }
  }
}

// Expects header cells prefix0..prefix{n-1} starting at `offset`.
std::size_t count_indexed_columns(const CsvFile& csv, std::size_t offset, std::string_view prefix,
                                  const std::filesystem::path& path) {
  std::size_t n = 0;
  for (std::size_t i = offset; i < csv.header.size(); ++i, ++n) {
    if (csv.header[i] != std::string(prefix) + std::to_string(n)) {
      throw FormatError(path.string() + ": unexpected header cell '" + std::string(csv.header[i]) +
                        "', expected '" + std::string(prefix) + std::to_string(n) + "'");
    }
  }
  return n;
}

double parse_cell(std::string_view cell, const std::filesystem::path& path) {
  try {
    return parse_double(cell);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::int64_t> parse_frame_ids(const CsvFile& csv, const std::filesystem::path& path) {
  std::vector<std::int64_t> ids;
  ids.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    try {
      ids.push_back(parse_int(row[0]));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return ids;
}

json search_log_to_json(const std::vector<SearchLogEntry>& log) {
  json arr = json::array();
  for (const auto& e : log) {
    arr.push_back({{"pass", e.pass}, {"class", e.cls}, {"best_value", e.best_value}, {"f1", e.f1}});
  }
  return arr;
}

json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw ValueError("cannot format value");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec == std::errc::result_out_of_range) return text.front() == '-' ? -HUGE_VAL : HUGE_VAL;
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view text) {
  text = trim(text);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string file_hash(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + 16, h, 16);
  std::string hex(buf, ptr);
  return std::string(16 - hex.size(), '0') + hex;
}

FeatureStream load_feature_stream(const std::filesystem::path& path) {
  const CsvFile csv = read_csv(path);
  FeatureStream s;
  if (!csv.meta.count("video_id") || !csv.meta.count("rate_hz")) {
    throw FormatError(path.string() + ": metadata line must carry video_id and rate_hz");
  }
  s.video_id = meta_or(csv, "video_id", "");
  s.source_tag = meta_or(csv, "source", "");
  s.frame_rate_hz = parse_cell(meta_or(csv, "rate_hz", ""), path);
  const std::size_t dim = count_indexed_columns(csv, 1, "f", path);
  if (dim == 0) throw FormatError(path.string() + ": no feature columns");
  s.frame_ids = parse_frame_ids(csv, path);
  s.features = Matrix(csv.rows.size(), dim);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) s.features(r, c) = parse_cell(csv.rows[r][c + 1], path);
  }
  try {
    s.validate();
  } catch (const Error& e) {
    if (e.kind() == "OrderError") throw OrderError(path.string() + ": " + e.what());
    if (e.kind() == "ValueError") throw ValueError(path.string() + ": " + e.what());
    throw;
  }
  return s;
}

void save_feature_stream(const FeatureStream& stream, const std::filesystem::path& path) {
  stream.validate();
  require_token(stream.video_id, "video_id");
  if (!stream.source_tag.empty()) require_token(stream.source_tag, "source_tag");
  std::string out = "# video_id=" + stream.video_id + " rate_hz=" +
                    format_double(stream.frame_rate_hz) + " source=" + stream.source_tag + "\n";
  out += "frame_id";
  for (std::size_t c = 0; c < stream.dim(); ++c) out += ",f" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < stream.num_frames(); ++r) {
    out += std::to_string(stream.frame_ids[r]);
    for (double v : stream.features.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

ScoreStream load_score_stream(const std::filesystem::path& path) {
  const CsvFile csv = read_csv(path);
  ScoreStream s;
  s.video_id = meta_or(csv, "video_id", path.stem().string());
  s.kind = parse_score_kind(meta_or(csv, "kind", "probability"));
  const std::size_t c = count_indexed_columns(csv, 1, "s", path);
  if (c == 0) throw FormatError(path.string() + ": no score columns");
  s.frame_ids = parse_frame_ids(csv, path);
  s.scores = Matrix(csv.rows.size(), c);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t k = 0; k < c; ++k) s.scores(r, k) = parse_cell(csv.rows[r][k + 1], path);
  }
  s.validate();
  return s;
}

void save_score_stream(const ScoreStream& stream, const std::filesystem::path& path) {
  stream.validate();
  require_token(stream.video_id, "video_id");
  std::string out = "# video_id=" + stream.video_id + " kind=" + std::string(to_string(stream.kind)) + "\n";
  out += "frame_id";
  for (std::size_t c = 0; c < stream.num_classes(); ++c) out += ",s" + std::to_string(c);
  out += '\n';
  for (std::size_t r = 0; r < stream.num_frames(); ++r) {
    out += std::to_string(stream.frame_ids[r]);
    for (double v : stream.scores.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

LabelTrack load_label_track(const std::filesystem::path& path, std::optional<TaskKind> expected) {
  const CsvFile csv = read_csv(path);
  if (csv.header.size() < 3 || csv.header[1] != "mask") {
    throw FormatError(path.string() + ": label header must be 'frame_id,mask,<payload>'");
  }
  std::size_t payload_end = csv.header.size();
  if (csv.header.back() == "gate") --payload_end;
  const std::size_t payload = payload_end - 2;

  LabelTrack t;
  t.video_id = meta_or(csv, "video_id", path.stem().string());
  if (payload == 1 && csv.header[2] == "y") {
    t.task = TaskKind::Expr;
  } else if (payload == 2 && csv.header[2] == "valence" && csv.header[3] == "arousal") {
    t.task = TaskKind::VA;
  } else if (payload == kNumAu && csv.header[2] == "au0") {
    for (std::size_t c = 0; c < kNumAu; ++c) {
      if (csv.header[2 + c] != "au" + std::to_string(c)) {
        throw FormatError(path.string() + ": bad AU header cell '" + std::string(csv.header[2 + c]) + "'");
      }
    }
    t.task = TaskKind::AU;
  } else {
    throw FormatError(path.string() + ": unrecognised label payload columns");
  }
  if (auto it = csv.meta.find("task"); it != csv.meta.end()) {
    const TaskKind declared = parse_task(it->second);
    const bool compatible = declared == t.task ||
                            (is_single_label(declared) && is_single_label(t.task));
    if (!compatible) throw FormatError(path.string() + ": task metadata disagrees with columns");
    t.task = declared;
  }
  if (expected) {
    const bool compatible = *expected == t.task ||
                            (is_single_label(*expected) && is_single_label(t.task) &&
                             num_outputs(*expected) == num_outputs(t.task));
    if (!compatible) {
      throw FormatError(path.string() + ": label track is for task '" +
                        std::string(to_string(t.task)) + "', expected '" +
                        std::string(to_string(*expected)) + "'");
    }
    t.task = *expected;
  }

  t.frame_ids = parse_frame_ids(csv, path);
  const std::size_t n = csv.rows.size();
  t.mask.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto m = parse_int(csv.rows[r][1]);
    if (m != 0 && m != 1) throw ValueError(path.string() + ": mask must be 0 or 1");
    t.mask[r] = static_cast<std::uint8_t>(m);
  }
  if (is_single_label(t.task)) {
    t.classes.resize(n);
    for (std::size_t r = 0; r < n; ++r) t.classes[r] = static_cast<int>(parse_int(csv.rows[r][2]));
  } else if (t.task == TaskKind::AU) {
    t.au.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < kNumAu; ++c) {
        const auto b = parse_int(csv.rows[r][2 + c]);
        if (b != 0 && b != 1) throw ValueError(path.string() + ": AU bits must be 0 or 1");
        t.au[r][c] = static_cast<std::uint8_t>(b);
      }
    }
  } else {
    t.va.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      t.va[r] = {parse_cell(csv.rows[r][2], path), parse_cell(csv.rows[r][3], path)};
    }
  }
  t.validate();
  return t;
}

void save_label_track(const LabelTrack& track, const std::filesystem::path& path,
                      std::span<const std::uint8_t> gate_mask) {
  track.validate();
  require_token(track.video_id, "video_id");
  if (!gate_mask.empty() && gate_mask.size() != track.num_frames()) {
    throw ShapeError("gate mask length does not match label track");
  }
  std::string out = "# video_id=" + track.video_id + " task=" + std::string(to_string(track.task)) + "\n";
  out += "frame_id,mask";
  if (is_single_label(track.task)) {
    out += ",y";
  } else if (track.task == TaskKind::AU) {
    for (std::size_t c = 0; c < kNumAu; ++c) out += ",au" + std::to_string(c);
  } else {
    out += ",valence,arousal";
  }
  if (!gate_mask.empty()) out += ",gate";
  out += '\n';
  for (std::size_t r = 0; r < track.num_frames(); ++r) {
    out += std::to_string(track.frame_ids[r]);
    out += track.mask[r] ? ",1" : ",0";
    if (is_single_label(track.task)) {
      out += ',' + std::to_string(track.classes[r]);
    } else if (track.task == TaskKind::AU) {
      for (auto b : track.au[r]) out += b ? ",1" : ",0";
    } else {
      out += ',' + format_double(track.va[r][0]) + ',' + format_double(track.va[r][1]);
    }
    if (!gate_mask.empty()) out += gate_mask[r] ? ",1" : ",0";
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<std::uint8_t> load_gate_mask(const std::filesystem::path& path) {
  const CsvFile csv = read_csv(path);
  std::vector<std::uint8_t> gate;
  if (csv.header.back() != "gate") return gate;
  gate.reserve(csv.rows.size());
  for (const auto& row : csv.rows) gate.push_back(row.back() == "1" ? 1 : 0);
  return gate;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  const json j = parse_json_file(path);
  DatasetManifest m;
  try {
    m.task = parse_task(j.at("task").get<std::string>());
    m.split = j.value("split", "");
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.video_id = e.at("video_id").get<std::string>();
      entry.feature_path = e.at("feature_path").get<std::string>();
      if (e.contains("label_path")) entry.label_path = e["label_path"].get<std::string>();
      if (e.contains("audio_feature_path")) {
        entry.audio_feature_path = e["audio_feature_path"].get<std::string>();
      }
      if (e.contains("audio_rate_hz")) entry.audio_rate_hz = e["audio_rate_hz"].get<double>();
      if (e.contains("pretrained_score_path")) {
        entry.pretrained_score_path = e["pretrained_score_path"].get<std::string>();
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }
  m.base_dir = path.parent_path();
  if (check_files) {
    m.validate();
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json je = {{"video_id", e.video_id}, {"feature_path", e.feature_path}};
    if (e.label_path) je["label_path"] = *e.label_path;
    if (e.audio_feature_path) je["audio_feature_path"] = *e.audio_feature_path;
    if (e.audio_rate_hz) je["audio_rate_hz"] = *e.audio_rate_hz;
    if (e.pretrained_score_path) je["pretrained_score_path"] = *e.pretrained_score_path;
    entries.push_back(std::move(je));
  }
  json j = {{"task", std::string(to_string(manifest.task))},
            {"split", manifest.split},
            {"entries", std::move(entries)}};
  write_text_file(path, j.dump(2) + "\n");
}

CalibrationArtifact load_calibration(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  CalibrationArtifact a;
  try {
    a.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("bias") && !j["bias"].is_null()) a.bias = j["bias"].get<std::vector<double>>();
    if (j.contains("thresholds") && !j["thresholds"].is_null()) {
      a.thresholds = j["thresholds"].get<std::vector<double>>();
    }
    if (j.contains("warnings")) a.warnings = j["warnings"].get<std::vector<int>>();
    if (j.contains("search_log")) {
      for (const auto& e : j["search_log"]) {
        a.search_log.push_back({e.at("pass").get<int>(), e.at("class").get<int>(),
                                e.at("best_value").get<double>(), e.at("f1").get<double>()});
      }
    }
    a.source_manifest_hash = j.value("source_manifest_hash", "");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed calibration artifact: " + e.what());
  }
  a.validate();
  return a;
}

void save_calibration(const CalibrationArtifact& artifact, const std::filesystem::path& path) {
  artifact.validate();
  json j = {{"task", std::string(to_string(artifact.task))}};
  j["bias"] = artifact.bias ? json(*artifact.bias) : json(nullptr);
  j["thresholds"] = artifact.thresholds ? json(*artifact.thresholds) : json(nullptr);
  j["warnings"] = artifact.warnings;
  j["search_log"] = search_log_to_json(artifact.search_log);
  j["source_manifest_hash"] = artifact.source_manifest_hash;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace affectcal
