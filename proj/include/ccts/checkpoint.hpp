#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "ccts/errors.hpp"
#include "ccts/model.hpp"

namespace ccts {

// Versioned checkpoint: model config, index map and the flat parameter
// vector. Doubles survive the JSON round trip exactly.

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{{"input_dim", cfg.input_dim},
                        {"hidden", cfg.hidden},
                        {"mlp_hidden", cfg.mlp_hidden},
                        {"class_count", cfg.class_count},
                        {"combine", cfg.combine == CombineMode::Add ? "add" : "subtract"}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.input_dim = j.at("input_dim").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
  cfg.class_count = j.at("class_count").get<int>();
  std::string combine = j.at("combine").get<std::string>();
  if (combine == "add")
    cfg.combine = CombineMode::Add;
  else if (combine == "subtract")
    cfg.combine = CombineMode::Subtract;
  else
    throw ValidationError("checkpoint: unknown combine mode '" + combine + "'");
  return cfg;
}

inline nlohmann::json checkpoint_to_json(const Model& model) {
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& s : model.index_map().slices)
    slices.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  ParamVector flat = model.pack();
  std::vector<double> values(flat.data(), flat.data() + flat.size());
  return nlohmann::json{{"schema_version", 1},
                        {"kind", "ccts-checkpoint"},
                        {"config", model_config_to_json(model.config())},
                        {"slices", slices},
                        {"values", values}};
}

inline Model checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "ccts-checkpoint")
    throw ValidationError("checkpoint: wrong kind field");
  if (j.at("schema_version").get<int>() != 1)
    throw ValidationError("checkpoint: unsupported schema version");
  Model model(model_config_from_json(j.at("config")));
  auto values = j.at("values").get<std::vector<double>>();
  if (static_cast<long>(values.size()) != model.param_count())
    throw ValidationError("checkpoint: value count does not match model config");
  ParamVector flat = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                       static_cast<Eigen::Index>(values.size()));
  model.unpack(flat);
  return model;
}

inline void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << checkpoint_to_json(model).dump() << '\n';
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace ccts
