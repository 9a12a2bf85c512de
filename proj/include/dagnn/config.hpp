#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagnn/gp_head.hpp"
#include "dagnn/mpnn.hpp"
#include "dagnn/params.hpp"

namespace dagnn::harness {

enum class ModelVariant { kGnnBaseline, kGnnGp, kGnnSngp };

inline std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kGnnBaseline: return "gnn_baseline";
    case ModelVariant::kGnnGp: return "gnn_gp";
    default: return "gnn_sngp";
  }
}

inline ModelVariant variant_from_string(const std::string& s) {
  if (s == "gnn_baseline") return ModelVariant::kGnnBaseline;
  if (s == "gnn_gp") return ModelVariant::kGnnGp;
  if (s == "gnn_sngp") return ModelVariant::kGnnSngp;
  throw std::invalid_argument("unknown model variant: " + s);
}

inline mpnn::Variant extractor_of(ModelVariant v) {
  return v == ModelVariant::kGnnSngp ? mpnn::Variant::kResidualSn
                                     : mpnn::Variant::kBaseline;
}

inline bool has_gp_head(ModelVariant v) { return v != ModelVariant::kGnnBaseline; }

struct SplitSettings {
  double threshold = 0.7;
  int k_neighbors = 8;
  int fp_radius = 2;
  int fp_width = 2048;
};

struct TrainSettings {
  num::AdamConfig adam;
  int epochs = 100;
  int batch_size = 32;
};

struct SnSettings {
  int iters_train = 1;
  int iters_eval = 50;
};

// Versioned experiment configuration; unknown keys are rejected.
struct ExperimentConfig {
  ModelVariant model = ModelVariant::kGnnBaseline;
  std::string precision = "f64";
  std::string train_path;
  std::map<std::string, std::string> test_paths;  // name -> path
  mpnn::MpnnConfig mpnn;
  gp::GpConfig gp;
  SnSettings sn;
  TrainSettings train;
  SplitSettings split;
  std::vector<std::uint64_t> seeds = {1};

  void validate() const {
    mpnn.validate();
    num::require(!seeds.empty(), "ExperimentConfig: at least one seed required");
    num::require(train.epochs >= 1 && train.batch_size >= 1,
                 "ExperimentConfig: epochs and batch_size must be >= 1");
    num::require(precision == "f64" || precision == "f32",
                 "ExperimentConfig: precision must be f64 or f32");
    num::require(!train_path.empty(), "ExperimentConfig: data.train is required");
  }
};

namespace config_detail {

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= (key == a);
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
inline void maybe(const nlohmann::json& obj, const char* key, T& field) {
  if (obj.contains(key)) field = obj.at(key).get<T>();
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using config_detail::check_keys;
  using config_detail::maybe;
  check_keys(j, "root",
             {"version", "model", "precision", "data", "mpnn", "gp", "sn", "train",
              "split", "seeds"});
  num::require(j.contains("version") && j["version"].is_number_integer() &&
                   j["version"].get<int>() == 1,
               "config: 'version' must be the integer 1");
  num::require(j.contains("model"), "config: 'model' is required");

  ExperimentConfig cfg;
  cfg.model = variant_from_string(j["model"].get<std::string>());
  maybe(j, "precision", cfg.precision);
  maybe(j, "seeds", cfg.seeds);

  num::require(j.contains("data") && j["data"].is_object(), "config: 'data' is required");
  const auto& data = j["data"];
  check_keys(data, "data", {"train", "tests"});
  num::require(data.contains("train"), "config: data.train is required");
  cfg.train_path = data["train"].get<std::string>();
  if (data.contains("tests")) {
    for (const auto& [name, path] : data["tests"].items())
      cfg.test_paths[name] = path.get<std::string>();
  }

  if (j.contains("mpnn")) {
    const auto& m = j["mpnn"];
    check_keys(m, "mpnn", {"hidden_dim", "n_steps", "readout_dim", "sn_bound"});
    maybe(m, "hidden_dim", cfg.mpnn.hidden_dim);
    maybe(m, "n_steps", cfg.mpnn.n_steps);
    maybe(m, "readout_dim", cfg.mpnn.readout_dim);
    maybe(m, "sn_bound", cfg.mpnn.sn_bound);
  }
  cfg.mpnn.variant = extractor_of(cfg.model);

  if (j.contains("gp")) {
    const auto& g = j["gp"];
    check_keys(g, "gp", {"rff_dim", "lengthscale", "ridge"});
    maybe(g, "rff_dim", cfg.gp.rff_dim);
    maybe(g, "lengthscale", cfg.gp.lengthscale);
    maybe(g, "ridge", cfg.gp.ridge);
  }

  if (j.contains("sn")) {
    const auto& s = j["sn"];
    check_keys(s, "sn", {"iters_train", "iters_eval"});
    maybe(s, "iters_train", cfg.sn.iters_train);
    maybe(s, "iters_eval", cfg.sn.iters_eval);
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train", {"lr", "beta1", "beta2", "eps", "epochs", "batch_size"});
    maybe(t, "lr", cfg.train.adam.lr);
    maybe(t, "beta1", cfg.train.adam.beta1);
    maybe(t, "beta2", cfg.train.adam.beta2);
    maybe(t, "eps", cfg.train.adam.eps);
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "batch_size", cfg.train.batch_size);
  }

  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, "split", {"threshold", "k_neighbors", "fp_radius", "fp_width"});
    maybe(s, "threshold", cfg.split.threshold);
    maybe(s, "k_neighbors", cfg.split.k_neighbors);
    maybe(s, "fp_radius", cfg.split.fp_radius);
    maybe(s, "fp_width", cfg.split.fp_width);
  }

  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  num::require(in.good(), "load_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("load_config: malformed JSON in " + path + ": " + e.what());
  }
  return parse_config(j);
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["version"] = 1;
  j["model"] = to_string(cfg.model);
  j["precision"] = cfg.precision;
  j["seeds"] = cfg.seeds;
  j["data"]["train"] = cfg.train_path;
  nlohmann::json tests;
  for (const auto& [name, path] : cfg.test_paths) tests[name] = path;
  j["data"]["tests"] = std::move(tests);
  j["mpnn"] = {{"hidden_dim", cfg.mpnn.hidden_dim},
               {"n_steps", cfg.mpnn.n_steps},
               {"readout_dim", cfg.mpnn.readout_dim},
               {"sn_bound", cfg.mpnn.sn_bound}};
  j["gp"] = {{"rff_dim", cfg.gp.rff_dim},
             {"lengthscale", cfg.gp.lengthscale},
             {"ridge", cfg.gp.ridge}};
  j["sn"] = {{"iters_train", cfg.sn.iters_train}, {"iters_eval", cfg.sn.iters_eval}};
  j["train"] = {{"lr", cfg.train.adam.lr},       {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2}, {"eps", cfg.train.adam.eps},
                {"epochs", cfg.train.epochs},    {"batch_size", cfg.train.batch_size}};
  j["split"] = {{"threshold", cfg.split.threshold},
                {"k_neighbors", cfg.split.k_neighbors},
                {"fp_radius", cfg.split.fp_radius},
                {"fp_width", cfg.split.fp_width}};
  return j;
}

}  // namespace dagnn::harness
