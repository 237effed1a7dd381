#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccts/csv.hpp"
#include "ccts/errors.hpp"
#include "ccts/model.hpp"
#include "ccts/synthetic.hpp"
#include "ccts/tasks.hpp"
#include "ccts/trainer.hpp"

namespace ccts {

// Minimal sectioned key-value file: [section] headers, key = value lines,
// comments with '#' or ';'. Raw text is kept for the run-directory echo.
class IniFile {
 public:
  static IniFile parse_text(const std::string& text, const std::string& origin = "<string>") {
    IniFile ini;
    ini.raw_ = text;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(line_no), "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no), "expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no), "empty key");
      ini.values_[section][key] = value;
    }
    return ini;
  }

  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  const std::string& raw() const { return raw_; }

  bool has(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  std::string require(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError(section + "." + key, "missing required key");
    return get(section, key, "");
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
      std::size_t used = 0;
      double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(section + "." + key, "not a number: '" + v + "'");
    }
  }

  long get_int(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
      std::size_t used = 0;
      long out = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError(section + "." + key, "not an integer: '" + v + "'");
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key, "");
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw ConfigError(section + "." + key, "not a boolean: '" + v + "'");
  }

  std::vector<double> get_list(const std::string& section, const std::string& key,
                               std::vector<double> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_list(get(section, key, ""))) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError(section + "." + key, "not a number: '" + tok + "'");
      }
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                std::vector<int> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_list(get(section, key, ""))) {
      try {
        out.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError(section + "." + key, "not an integer: '" + tok + "'");
      }
    }
    return out;
  }

  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }

  std::string raw_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

enum class DataSource { Synthetic, Csv };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::string csv_path;
  int stage_count = 3;
  TaskOrder order = TaskOrder::Time;
  StageStat stage_stat = StageStat::Increment;
  Imputation imputation = Imputation::Interpolate;
  bool normalize = true;
};

// Everything one experiment needs; parsed from the sectioned config and
// overridable by CLI flags for seed/threads.
struct ExperimentConfig {
  DataConfig data;
  DriftSpec synthetic;
  ModelConfig model;  // input_dim resolved from the dataset at run time
  StrategyChoice strategy;
  TrainOptions train;
  std::vector<std::uint64_t> seeds;  // >= 1 entries; train.seed holds the active one
  int interpret_max_stages = 4;
};

namespace detail {

inline DriftSpec parse_drift_spec(const IniFile& ini) {
  DriftSpec spec;
  spec.class_count = static_cast<int>(ini.get_int("synthetic", "class_count", 2));
  spec.series_count = static_cast<int>(ini.get_int("synthetic", "series_count", 240));
  spec.series_length = static_cast<int>(ini.get_int("synthetic", "series_length", 30));
  spec.feature_count = static_cast<int>(ini.get_int("synthetic", "feature_count", 2));
  DriftSpec defaults = default_benchmark_spec();
  spec.stage_ends = ini.get_int_list("synthetic", "stage_ends", defaults.stage_ends);
  spec.gap_min = ini.get_double("synthetic", "gap_min", defaults.gap_min);
  spec.gap_max = ini.get_double("synthetic", "gap_max", defaults.gap_max);
  const auto n_stages = spec.stage_ends.size();
  std::vector<double> ar = ini.get_list("synthetic", "ar_coeff", std::vector<double>(n_stages, 0.3));
  std::vector<double> noise = ini.get_list("synthetic", "noise", std::vector<double>(n_stages, 0.5));
  if (ar.size() != n_stages) throw ConfigError("synthetic.ar_coeff", "needs one value per stage");
  if (noise.size() != n_stages) throw ConfigError("synthetic.noise", "needs one value per stage");
  spec.params.clear();
  for (int c = 0; c < spec.class_count; ++c) {
    std::string key = "class" + std::to_string(c) + "_means";
    std::vector<double> fallback;
    if (static_cast<std::size_t>(c) < defaults.params.size() &&
        defaults.params[static_cast<std::size_t>(c)].size() == n_stages)
      for (const auto& p : defaults.params[static_cast<std::size_t>(c)]) fallback.push_back(p.mean);
    std::vector<double> means = ini.get_list("synthetic", key, fallback);
    if (means.size() != n_stages)
      throw ConfigError("synthetic." + key, "needs one mean per stage");
    std::vector<DriftStageParams> row;
    for (std::size_t s = 0; s < n_stages; ++s) row.push_back({means[s], ar[s], noise[s]});
    spec.params.push_back(std::move(row));
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const IniFile& ini) {
  ExperimentConfig cfg;

  std::string source = ini.get("data", "source", "synthetic");
  if (source == "synthetic") {
    cfg.data.source = DataSource::Synthetic;
  } else if (source == "csv") {
    cfg.data.source = DataSource::Csv;
    cfg.data.csv_path = ini.require("data", "csv_path");
  } else {
    throw ConfigError("data.source", "must be 'synthetic' or 'csv'");
  }
  cfg.data.stage_count = static_cast<int>(ini.get_int("data", "stage_count", 3));
  if (cfg.data.stage_count < 2) throw ConfigError("data.stage_count", "must be >= 2");
  std::string order = ini.get("data", "order", "time");
  if (order == "time")
    cfg.data.order = TaskOrder::Time;
  else if (order == "similarity")
    cfg.data.order = TaskOrder::Similarity;
  else
    throw ConfigError("data.order", "must be 'time' or 'similarity'");
  std::string stat = ini.get("data", "stage_stat", "increment");
  if (stat == "increment")
    cfg.data.stage_stat = StageStat::Increment;
  else if (stat == "prefix")
    cfg.data.stage_stat = StageStat::Prefix;
  else
    throw ConfigError("data.stage_stat", "must be 'increment' or 'prefix'");
  std::string imp = ini.get("data", "imputation", "interpolate");
  if (imp == "interpolate")
    cfg.data.imputation = Imputation::Interpolate;
  else if (imp == "reject")
    cfg.data.imputation = Imputation::Reject;
  else
    throw ConfigError("data.imputation", "must be 'interpolate' or 'reject'");
  cfg.data.normalize = ini.get_bool("data", "normalize", true);

  if (cfg.data.source == DataSource::Synthetic) {
    cfg.synthetic = detail::parse_drift_spec(ini);
    try {
      cfg.synthetic.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError("synthetic", e.what());
    }
  }

  cfg.model.hidden = static_cast<int>(ini.get_int("model", "hidden", 8));
  if (cfg.model.hidden < 1) throw ConfigError("model.hidden", "must be >= 1");
  cfg.model.mlp_hidden.clear();
  for (int w : ini.get_int_list("model", "mlp_hidden", {16})) {
    if (w < 1) throw ConfigError("model.mlp_hidden", "widths must be >= 1");
    cfg.model.mlp_hidden.push_back(w);
  }
  std::string combine = ini.get("model", "combine", "add");
  if (combine == "add")
    cfg.model.combine = CombineMode::Add;
  else if (combine == "subtract")
    cfg.model.combine = CombineMode::Subtract;
  else
    throw ConfigError("model.combine", "must be 'add' or 'subtract'");

  std::string kind = ini.get("strategy", "kind", "ru");
  if (kind == "ru")
    cfg.strategy.kind = Strategy::Ru;
  else if (kind == "lm_only")
    cfg.strategy.kind = Strategy::LmOnly;
  else if (kind == "pm_only")
    cfg.strategy.kind = Strategy::PmOnly;
  else if (kind == "plain")
    cfg.strategy.kind = Strategy::Plain;
  else
    throw ConfigError("strategy.kind", "must be one of ru, lm_only, pm_only, plain");
  cfg.strategy.ru.lambda = ini.get_double("strategy", "lambda", 0.1);
  cfg.strategy.ru.schedule_exponent = ini.get_double("strategy", "schedule_a", 1.0);
  cfg.strategy.ru.radius = ini.get_double("strategy", "radius", 0.0);
  cfg.strategy.ru.gem_memory = static_cast<int>(ini.get_int("strategy", "gem_memory", 8));
  cfg.strategy.ru.gem_snapshot = static_cast<int>(ini.get_int("strategy", "gem_snapshot", 64));
  cfg.strategy.ru.gem_on = ini.get_bool("strategy", "gem", true);
  cfg.strategy.ru.reset_state_per_task =
      ini.get_bool("strategy", "reset_state_per_task", false);
  std::string project = ini.get("strategy", "project", "estimator");
  if (project == "estimator")
    cfg.strategy.ru.project = ProjectTarget::Estimator;
  else if (project == "direction")
    cfg.strategy.ru.project = ProjectTarget::Direction;
  else
    throw ConfigError("strategy.project", "must be 'estimator' or 'direction'");
  try {
    cfg.strategy.ru.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("strategy", e.what());
  }

  cfg.train.epochs = static_cast<int>(ini.get_int("train", "epochs", 5));
  cfg.train.batch_size = static_cast<int>(ini.get_int("train", "batch", 32));
  cfg.train.fisher_samples = static_cast<int>(ini.get_int("train", "fisher_samples", 256));
  cfg.train.dry_run = ini.get_bool("train", "dry_run", false);
  cfg.train.threads = static_cast<int>(ini.get_int("train", "threads", 1));
  try {
    cfg.train.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("train", e.what());
  }

  cfg.seeds.clear();
  if (ini.has("train", "seeds")) {
    for (double s : ini.get_list("train", "seeds", {}))
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    cfg.seeds.push_back(static_cast<std::uint64_t>(ini.get_int("train", "seed", 1)));
  }
  if (cfg.seeds.empty()) throw ConfigError("train.seeds", "at least one seed is required");
  cfg.train.seed = cfg.seeds.front();

  cfg.interpret_max_stages = static_cast<int>(ini.get_int("interpret", "max_stages", 4));
  if (cfg.interpret_max_stages < 1) throw ConfigError("interpret.max_stages", "must be >= 1");
  return cfg;
}

}  // namespace ccts
