#include <numeric>

#include "affectcal/errors.hpp"
#include "affectcal/io.hpp"
#include "affectcal/nn/train.hpp"
#include "json.hpp"

namespace affectcal::nn {

namespace {

using json = nlohmann::json;

json spec_to_json(const NetworkSpec& spec) {
  json j = {{"input_dim", spec.input_dim},
            {"hidden_dims", spec.hidden_dims},
            {"output_dim", spec.output_dim},
            {"activation", std::string(to_string(spec.activation))},
            {"head", std::string(to_string(spec.head))}};
  if (spec.temporal_head) {
    const auto& t = *spec.temporal_head;
    j["temporal_head"] = {{"num_layers", t.num_layers()},
                          {"kernel_size", t.kernel_size},
                          {"channels", t.channels},
                          {"dilations", t.dilations},
                          {"padding", "centered"}};
  } else {
    j["temporal_head"] = nullptr;
  }
  return j;
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  spec.output_dim = j.at("output_dim").get<std::size_t>();
  spec.activation = parse_activation(j.at("activation").get<std::string>());
  spec.head = parse_head(j.at("head").get<std::string>());
  if (j.contains("temporal_head") && !j["temporal_head"].is_null()) {
    const auto& t = j["temporal_head"];
    TcnSpec tcn;
    tcn.kernel_size = t.at("kernel_size").get<std::size_t>();
    tcn.channels = t.at("channels").get<std::vector<std::size_t>>();
    tcn.dilations = t.at("dilations").get<std::vector<std::size_t>>();
    if (t.value("padding", "centered") != "centered") {
      throw FormatError("only centered TCN padding is supported");
    }
    if (t.contains("num_layers") && t["num_layers"].get<std::size_t>() != tcn.dilations.size()) {
      throw FormatError("temporal_head.num_layers disagrees with dilations");
    }
    spec.temporal_head = tcn;
  }
  spec.validate();
  return spec;
}

}  // namespace

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  validate_state(model.spec, model.state);
  json params = json::array();
  for (std::size_t i = 0; i < model.state.params.size(); ++i) {
    const auto& p = model.state.params[i];
    params.push_back({{"name", p.name},
                      {"shape", p.shape},
                      {"values", p.values},
                      {"moment1", model.state.moment1[i]},
                      {"moment2", model.state.moment2[i]}});
  }
  json j = {{"task", std::string(to_string(model.task))},
            {"modality", model.modality},
            {"spec", spec_to_json(model.spec)},
            {"params", std::move(params)},
            {"step", model.state.step},
            {"seed", model.state.seed}};
  if (model.priors) {
    j["class_priors"] = {{"counts", model.priors->counts}, {"total", model.priors->total}};
  }
  write_text_file(path, j.dump() + "\n");
}

ModelFile load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  ModelFile model;
  try {
    model.task = parse_task(j.at("task").get<std::string>());
    model.modality = j.value("modality", "video");
    model.spec = spec_from_json(j.at("spec"));
    for (const auto& p : j.at("params")) {
      Tensor t{p.at("name").get<std::string>(), p.at("shape").get<std::vector<std::size_t>>(),
               p.at("values").get<std::vector<double>>()};
      const std::size_t expected = std::accumulate(t.shape.begin(), t.shape.end(), std::size_t{1},
                                                   std::multiplies<>());
      if (t.values.size() != expected) {
        throw FormatError(path.string() + ": tensor '" + t.name + "' has " +
                          std::to_string(t.values.size()) + " values for its shape");
      }
      model.state.moment1.push_back(p.contains("moment1") ? p["moment1"].get<std::vector<double>>()
                                                          : std::vector<double>(t.values.size()));
      model.state.moment2.push_back(p.contains("moment2") ? p["moment2"].get<std::vector<double>>()
                                                          : std::vector<double>(t.values.size()));
      model.state.params.push_back(std::move(t));
    }
    model.state.step = j.value("step", std::int64_t{0});
    model.state.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("class_priors")) {
      ClassPriorTable priors;
      priors.counts = j["class_priors"].at("counts").get<std::vector<std::int64_t>>();
      priors.total = j["class_priors"].at("total").get<std::int64_t>();
      model.priors = priors;
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed model file: " + e.what());
  }
  validate_state(model.spec, model.state);
  return model;
}

}  // namespace affectcal::nn
