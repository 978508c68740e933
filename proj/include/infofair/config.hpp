#pragma once

// Run configuration: where the data comes from, which sensitive attributes to
// debias, the split, and the training hyperparameters. Stored as JSON.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "infofair/data.hpp"
#include "infofair/objective.hpp"
#include "infofair/synthetic.hpp"

namespace infofair {

inline constexpr const char* kVersion = "infofair 0.3.0";

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Either a CSV file with its schema, or the built-in synthetic generator.
struct DataSource {
  std::string data_path;
  std::string schema_path;
  std::optional<SyntheticOptions> synthetic;
};

struct RunConfig {
  DataSource source;
  std::vector<std::string> sensitive;  // empty: every schema sensitive column
  bool include_sensitive_in_features = true;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  TrainConfig train;
  std::string out_dir = "run";

  SplitSpec split_spec(std::uint64_t seed) const {
    return {train_fraction, validation_fraction, test_fraction, seed};
  }
};

inline nlohmann::json to_json(const SyntheticOptions& o) {
  return {{"n", o.n}, {"seed", o.seed}, {"group_bias", o.group_bias}, {"signal", o.signal}};
}

inline SyntheticOptions synthetic_from_json(const nlohmann::json& j) {
  SyntheticOptions o;
  o.n = j.value("n", o.n);
  o.seed = j.value("seed", o.seed);
  o.group_bias = j.value("group_bias", o.group_bias);
  o.signal = j.value("signal", o.signal);
  return o;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"variant", to_string(c.variant)},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"tau0", c.tau0},
          {"anneal_period", c.anneal_period},
          {"anneal_factor", c.anneal_factor},
          {"seeds", c.seeds},
          {"hidden", c.hidden},
          {"embed_dim", c.embed_dim}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.alpha = j.value("alpha", c.alpha);
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.tau0 = j.value("tau0", c.tau0);
  c.anneal_period = j.value("anneal_period", c.anneal_period);
  c.anneal_factor = j.value("anneal_factor", c.anneal_factor);
  c.seeds = j.value("seeds", c.seeds);
  c.hidden = j.value("hidden", c.hidden);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  return c;
}

inline nlohmann::json to_json(const DataSource& s) {
  nlohmann::json j = nlohmann::json::object();
  if (s.synthetic) {
    j["synthetic"] = to_json(*s.synthetic);
  } else {
    j["data"] = s.data_path;
    j["schema"] = s.schema_path;
  }
  return j;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = to_json(c.source);
  j["sensitive"] = c.sensitive;
  j["include_sensitive_in_features"] = c.include_sensitive_in_features;
  j["split"] = {c.train_fraction, c.validation_fraction, c.test_fraction};
  j["train"] = to_json(c.train);
  j["out"] = c.out_dir;
  return j;
}

/// Relative data and schema paths are resolved against `base_dir`.
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  try {
    RunConfig c;
    auto resolve = [&](const std::string& p) {
      if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
      return base_dir + "/" + p;
    };
    if (j.contains("synthetic")) {
      c.source.synthetic = synthetic_from_json(j.at("synthetic"));
    } else {
      c.source.data_path = resolve(j.at("data").get<std::string>());
      c.source.schema_path = resolve(j.at("schema").get<std::string>());
    }
    c.sensitive = j.value("sensitive", c.sensitive);
    c.include_sensitive_in_features = j.value("include_sensitive_in_features", true);
    if (j.contains("split")) {
      const auto f = j.at("split").get<std::vector<double>>();
      if (f.size() != 3) throw ConfigError("split must list three fractions");
      c.train_fraction = f[0];
      c.validation_fraction = f[1];
      c.test_fraction = f[2];
    }
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    c.out_dir = j.value("out", c.out_dir);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  const auto slash = path.find_last_of('/');
  return run_config_from_json(j, slash == std::string::npos ? "" : path.substr(0, slash));
}

struct LoadedData {
  DatasetSchema schema;
  EncodedDataset dataset;
};

/// Loads and encodes the configured data with the requested active attributes.
inline LoadedData load_data(const DataSource& source, const std::vector<std::string>& sensitive,
                            bool include_sensitive) {
  LoadedData out;
  RawTable table;
  if (source.synthetic) {
    out.schema = synthetic_schema();
    table = synthetic_table(*source.synthetic);
  } else {
    if (source.data_path.empty() || source.schema_path.empty()) {
      throw ConfigError("config needs both a data path and a schema path");
    }
    out.schema = DatasetSchema::load(source.schema_path);
    table = load_csv(source.data_path, out.schema);
  }
  EncodeOptions opt;
  opt.include_sensitive_in_features = include_sensitive;
  opt.sensitive = sensitive;
  out.dataset = encode(table, out.schema, opt);
  return out;
}

/// Checks everything that can be checked before any data is touched.
inline void validate(const RunConfig& c) {
  if (!c.source.synthetic && (c.source.data_path.empty() || c.source.schema_path.empty())) {
    throw ConfigError("config needs both a data path and a schema path");
  }
  if (c.source.synthetic && c.source.synthetic->n < 10) {
    throw ConfigError("synthetic dataset needs at least 10 rows");
  }
  // the binary-label requirement of EO is rechecked once the data is loaded
  try {
    c.train.validate(2);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.out_dir.empty()) throw ConfigError("output directory must be set");
}

}  // namespace infofair
