#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dagnn/fingerprint.hpp"
#include "dagnn/metrics.hpp"
#include "dagnn/model.hpp"
#include "dagnn/synth.hpp"

namespace dagnn::harness {

struct TrainLog {
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;
  std::vector<std::size_t> final_epoch_order;  // logged for replay

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"epoch_loss", epoch_loss},
            {"final_epoch_order", final_epoch_order}};
  }
};

// Minibatch Adam on softmax cross-entropy over logit means. Deterministic
// per (config, seed): parameter init, shuffles and the SN/laplace passes all
// draw from pinned streams.
template <typename T>
TrainLog train_one_seed(Model<T>& model, const data::Dataset& train,
                        std::uint64_t seed) {
  const auto& cfg = model.config();
  num::Rng shuffle_rng(seed, num::stream::kShuffle);
  TrainLog log;
  log.seed = seed;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    // Fisher-Yates from the run's shuffle stream
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    const std::size_t n = order.size();
    const auto batch = static_cast<std::size_t>(cfg.train.batch_size);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const T inv = T(1) / static_cast<T>(stop - start);
      model.refresh_sn(/*eval_mode=*/false);
      model.store.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        num::Tape<T> tape(&model.store);
        const int loss = model.loss_node(tape, train.graphs[order[b]]);
        const double value = static_cast<double>(tape.val(loss)(0, 0));
        if (!std::isfinite(value))
          throw std::runtime_error("train: NaN loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / batch) +
                                   ", graph " + train.graphs[order[b]].id);
        epoch_loss += value;
        tape.backward(loss, inv);
      }
      // the ridge is a unit-scale Gaussian prior on beta; train its MAP
      if (model.gp_head()) {
        model.store.grad("gp.beta") +=
            (static_cast<T>(cfg.gp.ridge) / static_cast<T>(n)) *
            model.store.value("gp.beta");
      }
      model.store.adam_step(cfg.train.adam);
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
    if (epoch == cfg.train.epochs - 1)
      log.final_epoch_order = order;
  }

  model.refresh_sn(/*eval_mode=*/true);
  model.laplace_finalize(train);
  return log;
}

// --- run directory bookkeeping (append-only, reruns never overwrite) ---

inline std::string checkpoint_name(std::uint64_t seed) {
  return "checkpoint_seed" + std::to_string(seed) + ".bin";
}

inline void require_fresh(const std::filesystem::path& p) {
  num::require(!std::filesystem::exists(p),
               "refusing to overwrite existing artifact: " + p.string());
}

inline void append_manifest(const std::filesystem::path& run_dir,
                            const std::string& kind, const std::string& file) {
  std::ofstream out(run_dir / "manifest.jsonl", std::ios::app);
  out << nlohmann::json{{"kind", kind}, {"file", file}}.dump() << '\n';
}

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::trunc);
  num::require(out.good(), "cannot open " + p.string());
  out << content;
  num::require(out.good(), "write failed for " + p.string());
}

// Trains every seed in the config and persists checkpoints, training logs and
// the resolved config into run_dir.
template <typename T>
void train_run(const ExperimentConfig& cfg, const std::string& run_dir_s) {
  cfg.validate();
  const std::filesystem::path run_dir(run_dir_s);
  std::filesystem::create_directories(run_dir);

  const data::Dataset train = data::load_dataset(cfg.train_path, data::SplitTag::kTrain);

  const std::string cfg_text = config_to_json(cfg).dump(2) + "\n";
  const auto cfg_path = run_dir / "config.json";
  if (std::filesystem::exists(cfg_path)) {
    std::ifstream in(cfg_path);
    std::string existing((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    num::require(existing == cfg_text,
                 "run directory already holds a different config: " + cfg_path.string());
  } else {
    write_text(cfg_path, cfg_text);
    append_manifest(run_dir, "config", "config.json");
  }

  for (std::uint64_t seed : cfg.seeds) {
    const auto ckpt = run_dir / checkpoint_name(seed);
    const auto logf = run_dir / ("trainlog_seed" + std::to_string(seed) + ".json");
    require_fresh(ckpt);
    require_fresh(logf);
    Model<T> model(cfg, train.d_node, train.d_edge, seed);
    const TrainLog log = train_one_seed(model, train, seed);
    model.save(ckpt.string());
    write_text(logf, log.to_json().dump(2) + "\n");
    append_manifest(run_dir, "checkpoint", checkpoint_name(seed));
    append_manifest(run_dir, "trainlog", logf.filename().string());
  }
}

// --- evaluation ---

template <typename T>
metrics::PredictionSet predict_set(const Model<T>& model, const data::Dataset& test,
                                   const fp::DistanceSplit* split) {
  metrics::PredictionSet preds;
  preds.reserve(test.size());
  for (const auto& g : test.graphs) {
    const auto out = model.predict(g);
    metrics::Prediction p;
    p.id = g.id;
    p.probs = out.probs;
    p.y_true = g.label;
    if (split != nullptr) {
      auto it = split->distances.find(g.id);
      num::require(it != split->distances.end(),
                   "evaluate: id missing from distance split: " + g.id);
      p.distance_to_train = it->second;
      p.far = split->far_ids.contains(g.id);
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

// Every metric for one (model, test set) pair across the config's seeds.
template <typename T>
metrics::EvalReport evaluate_run(const ExperimentConfig& cfg, const std::string& run_dir,
                                 const std::string& test_name,
                                 const data::Dataset& test,
                                 const fp::DistanceSplit* split,
                                 std::vector<metrics::PredictionSet>* out_preds = nullptr) {
  metrics::EvalReport report;
  report.model = to_string(cfg.model);
  report.testset = test_name;
  report.seeds = cfg.seeds;

  std::map<std::string, std::vector<double>> per_metric;
  for (std::uint64_t seed : cfg.seeds) {
    const auto ckpt = std::filesystem::path(run_dir) / checkpoint_name(seed);
    Model<T> model = Model<T>::load(cfg, ckpt.string());
    const auto preds = predict_set(model, test, split);
    const auto scalars = metrics::scalar_metrics(preds, &report.flags);
    for (const auto& [name, value] : scalars) per_metric[name].push_back(value);
    if (split != nullptr) report.ofn_cdfs.push_back(metrics::ofn_distance_cdf(preds));
    if (out_preds != nullptr) out_preds->push_back(preds);
  }
  for (const auto& [name, values] : per_metric)
    report.metrics[name] = metrics::aggregate(values);
  std::sort(report.flags.begin(), report.flags.end());
  report.flags.erase(std::unique(report.flags.begin(), report.flags.end()),
                     report.flags.end());
  return report;
}

// Probability-space deep-ensemble averaging over members of one variant.
inline metrics::PredictionSet ensemble_predictions(
    const std::vector<std::string>& member_tags,
    const std::vector<metrics::PredictionSet>& members) {
  num::require(members.size() >= 2, "ensemble: need k >= 2 members");
  num::require(member_tags.size() == members.size(), "ensemble: tag count mismatch");
  for (const auto& tag : member_tags)
    num::require(tag == member_tags.front(), "ensemble: mixed variants rejected");
  const std::size_t n = members.front().size();
  for (const auto& m : members)
    num::require(m.size() == n, "ensemble: member size mismatch");

  metrics::PredictionSet out = members.front();
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::RowVector2d acc = Eigen::RowVector2d::Zero();
    for (const auto& m : members) {
      num::require(m[i].id == out[i].id, "ensemble: member id order mismatch");
      acc += m[i].probs;
    }
    acc /= static_cast<double>(members.size());
    const double total = acc.sum();  // 1 within fp error; renormalize as a guard
    out[i].probs = acc / total;
  }
  return out;
}

// --- embedding export (Appendix-style ablation inputs) ---

struct EmbeddingMatrix {
  std::string model;
  std::string checkpoint_hash;
  std::string dataset;
  std::vector<std::string> ids;
  Eigen::MatrixXd vectors;  // one row per graph

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["checkpoint_hash"] = checkpoint_hash;
    j["dataset"] = dataset;
    j["dim"] = vectors.cols();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      nlohmann::json vec = nlohmann::json::array();
      for (Eigen::Index c = 0; c < vectors.cols(); ++c)
        vec.push_back(vectors(static_cast<Eigen::Index>(i), c));
      rows.push_back({{"id", ids[i]}, {"r", std::move(vec)}});
    }
    j["rows"] = std::move(rows);
    return j;
  }

  static EmbeddingMatrix from_json(const nlohmann::json& j) {
    EmbeddingMatrix m;
    m.model = j.at("model").get<std::string>();
    m.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    m.dataset = j.at("dataset").get<std::string>();
    const auto& rows = j.at("rows");
    const auto dim = j.at("dim").get<Eigen::Index>();
    m.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim);
    Eigen::Index r = 0;
    for (const auto& row : rows) {
      m.ids.push_back(row.at("id").get<std::string>());
      const auto& vec = row.at("r");
      num::require(static_cast<Eigen::Index>(vec.size()) == dim,
                   "EmbeddingMatrix: row width mismatch");
      for (Eigen::Index c = 0; c < dim; ++c) m.vectors(r, c) = vec[c].get<double>();
      ++r;
    }
    return m;
  }
};

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  num::require(in.good(), "file_hash_hex: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (in.eof()) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// Frozen forward pass emitting the readout vector per graph.
template <typename T>
EmbeddingMatrix export_embeddings(const Model<T>& model, const std::string& checkpoint_path,
                                  const data::Dataset& ds, const std::string& dataset_name) {
  EmbeddingMatrix m;
  m.model = to_string(model.config().model);
  m.checkpoint_hash = file_hash_hex(checkpoint_path);
  m.dataset = dataset_name;
  m.vectors.resize(static_cast<Eigen::Index>(ds.size()), model.config().mpnn.readout_dim);
  Eigen::Index r = 0;
  for (const auto& g : ds.graphs) {
    m.ids.push_back(g.id);
    m.vectors.row(r++) = model.embed(g).readout;
  }
  return m;
}

}  // namespace dagnn::harness
