// Command-line driver: synthetic benchmark generation, distance splits,
// training, evaluation, ensembles, embedding export and the ablation grid.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dagnn/dagnn.hpp"

namespace fs = std::filesystem;
using namespace dagnn;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j, bool allow_overwrite = false) {
  if (!allow_overwrite)
    num::require(!fs::exists(path), "refusing to overwrite " + path.string());
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  num::require(out.good(), "cannot open " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  num::require(in.good(), "cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return j;
}

std::pair<std::string, std::string> parse_named(const std::string& arg, const char* flag) {
  const auto eq = arg.find('=');
  num::require(eq != std::string::npos,
               std::string(flag) + " expects name=path, got: " + arg);
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

fp::DistanceSplit compute_or_load_split(const std::string& split_path,
                                        const data::Dataset& test,
                                        const data::Dataset& train,
                                        const harness::SplitSettings& s) {
  if (!split_path.empty()) return fp::split_from_json(read_json(split_path));
  return fp::split_by_distance(test, train, s.threshold, s.k_neighbors, s.fp_radius,
                               s.fp_width);
}

nlohmann::json predictions_json(const std::string& model, const std::string& testset,
                                std::uint64_t seed, const metrics::PredictionSet& preds) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : preds) {
    nlohmann::json row = {{"id", p.id},
                          {"p", {p.probs(0), p.probs(1)}},
                          {"y", p.y_true},
                          {"uncertainty", p.uncertainty()}};
    if (p.distance_to_train) row["distance"] = *p.distance_to_train;
    rows.push_back(std::move(row));
  }
  return {{"model", model}, {"testset", testset}, {"seed", seed}, {"rows", rows}};
}

template <typename T>
int run_evaluate(const harness::ExperimentConfig& cfg, const std::string& run_dir,
                 const std::string& test_path, std::string test_name,
                 const std::string& split_path, std::string out_path) {
  if (test_name.empty()) test_name = fs::path(test_path).stem().string();
  const auto test = data::load_dataset(test_path);
  const auto train = data::load_dataset(cfg.train_path, data::SplitTag::kTrain);
  const auto split = compute_or_load_split(split_path, test, train, cfg.split);

  std::vector<metrics::PredictionSet> per_seed;
  const auto report =
      harness::evaluate_run<T>(cfg, run_dir, test_name, test, &split, &per_seed);
  if (out_path.empty())
    out_path = (fs::path(run_dir) / ("report_" + test_name + ".json")).string();
  write_json(out_path, report.to_json());
  harness::append_manifest(run_dir, "report", fs::path(out_path).filename().string());
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    const auto pred_path =
        fs::path(run_dir) / ("predictions_" + test_name + "_seed" +
                             std::to_string(cfg.seeds[i]) + ".json");
    write_json(pred_path,
               predictions_json(report.model, test_name, cfg.seeds[i], per_seed[i]));
    harness::append_manifest(run_dir, "predictions", pred_path.filename().string());
  }
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

template <typename T>
int run_ensemble(const harness::ExperimentConfig& cfg, const std::string& run_dir,
                 int k, const std::string& test_path, std::string test_name,
                 const std::string& split_path, std::string out_path) {
  num::require(k >= 2, "ensemble: k must be >= 2");
  num::require(static_cast<std::size_t>(k) <= cfg.seeds.size(),
               "ensemble: k exceeds the number of trained seeds");
  if (test_name.empty()) test_name = fs::path(test_path).stem().string();
  const auto test = data::load_dataset(test_path);
  const auto train = data::load_dataset(cfg.train_path, data::SplitTag::kTrain);
  const auto split = compute_or_load_split(split_path, test, train, cfg.split);

  std::vector<std::string> tags;
  std::vector<metrics::PredictionSet> members;
  for (int m = 0; m < k; ++m) {
    const auto ckpt =
        fs::path(run_dir) / harness::checkpoint_name(cfg.seeds[static_cast<std::size_t>(m)]);
    const auto model = harness::Model<T>::load(cfg, ckpt.string());
    members.push_back(harness::predict_set(model, test, &split));
    tags.push_back(harness::to_string(cfg.model));
  }
  const auto averaged = harness::ensemble_predictions(tags, members);

  metrics::EvalReport report;
  report.model = harness::to_string(cfg.model) + "_ensemble" + std::to_string(k);
  report.testset = test_name;
  report.seeds.assign(cfg.seeds.begin(), cfg.seeds.begin() + k);
  const auto scalars = metrics::scalar_metrics(averaged, &report.flags);
  for (const auto& [name, value] : scalars)
    report.metrics[name] = metrics::aggregate({value});
  report.ofn_cdfs.push_back(metrics::ofn_distance_cdf(averaged));
  if (out_path.empty())
    out_path =
        (fs::path(run_dir) / ("report_ensemble" + std::to_string(k) + "_" + test_name +
                              ".json"))
            .string();
  write_json(out_path, report.to_json());
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

template <typename T>
int run_export(const harness::ExperimentConfig& cfg, const std::string& run_dir,
               std::uint64_t seed, const std::string& data_path,
               std::string dataset_name, const std::string& out_path) {
  if (dataset_name.empty()) dataset_name = fs::path(data_path).stem().string();
  const auto ds = data::load_dataset(data_path);
  const auto ckpt = fs::path(run_dir) / harness::checkpoint_name(seed);
  const auto model = harness::Model<T>::load(cfg, ckpt.string());
  const auto matrix = harness::export_embeddings(model, ckpt.string(), ds, dataset_name);
  write_json(out_path, matrix.to_json());
  return 0;
}

int run_ablate(const std::vector<std::string>& embedding_paths,
               const std::string& heads_csv, const std::string& fp_train_path,
               const std::vector<std::string>& test_args,
               const std::vector<std::string>& split_args,
               const std::vector<std::uint64_t>& seeds, int fp_radius, int fp_width,
               int gpc_cap, const std::string& out_path) {
  harness::AblateSettings settings;
  settings.heads.clear();
  std::stringstream ss(heads_csv);
  std::string head;
  while (std::getline(ss, head, ',')) {
    num::require(head == "dense" || head == "gp" || head == "gpc",
                 "ablate: unknown head '" + head + "'");
    settings.heads.push_back(head);
  }
  if (!seeds.empty()) settings.seeds = seeds;
  settings.gpc_train_cap = gpc_cap;

  const auto train_ds = data::load_dataset(fp_train_path, data::SplitTag::kTrain);

  std::map<std::string, data::Dataset> tests;
  for (const auto& arg : test_args) {
    auto [name, path] = parse_named(arg, "--test");
    tests[name] = data::load_dataset(path);
  }
  num::require(!tests.empty(), "ablate: at least one --test name=path is required");

  std::map<std::string, fp::DistanceSplit> splits;
  for (const auto& arg : split_args) {
    auto [name, path] = parse_named(arg, "--split");
    splits[name] = fp::split_from_json(read_json(path));
  }

  const auto labels_for = [&](const data::Dataset& ds,
                              const std::vector<std::string>& ids) {
    Eigen::VectorXi y(static_cast<Eigen::Index>(ids.size()));
    std::map<std::string, int> by_id;
    for (const auto& g : ds.graphs) by_id[g.id] = g.label;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = by_id.find(ids[i]);
      num::require(it != by_id.end(), "ablate: id not found in dataset: " + ids[i]);
      y(static_cast<Eigen::Index>(i)) = it->second;
    }
    return y;
  };

  std::map<std::string, harness::AblateSource> sources;

  // embedding feature sources, grouped by the model tag recorded in the file
  for (const auto& path : embedding_paths) {
    const auto matrix = harness::EmbeddingMatrix::from_json(read_json(path));
    auto& src = sources[matrix.model];
    if (matrix.dataset == "train") {
      src.train_X = matrix.vectors;
      src.train_ids = matrix.ids;
      src.train_y = labels_for(train_ds, matrix.ids);
    } else {
      num::require(tests.contains(matrix.dataset),
                   "ablate: embedding file references unknown test set '" +
                       matrix.dataset + "' (" + path + ")");
      src.test_X[matrix.dataset] = matrix.vectors;
      src.test_ids[matrix.dataset] = matrix.ids;
      src.test_y[matrix.dataset] = labels_for(tests.at(matrix.dataset), matrix.ids);
    }
  }
  for (const auto& [tag, src] : sources) {
    num::require(src.train_X.rows() > 0, "ablate: no train embeddings for " + tag);
    num::require(src.test_X.size() == tests.size(),
                 "ablate: missing test embeddings for " + tag);
  }

  // fingerprint bit-vector source
  {
    harness::AblateSource src;
    src.train_X = harness::fingerprint_features(train_ds, fp_radius, fp_width);
    src.train_y.resize(static_cast<Eigen::Index>(train_ds.size()));
    for (std::size_t i = 0; i < train_ds.size(); ++i) {
      src.train_ids.push_back(train_ds.graphs[i].id);
      src.train_y(static_cast<Eigen::Index>(i)) = train_ds.graphs[i].label;
    }
    for (const auto& [name, ds] : tests) {
      src.test_X[name] = harness::fingerprint_features(ds, fp_radius, fp_width);
      auto& ids = src.test_ids[name];
      auto& y = src.test_y[name];
      y.resize(static_cast<Eigen::Index>(ds.size()));
      for (std::size_t i = 0; i < ds.size(); ++i) {
        ids.push_back(ds.graphs[i].id);
        y(static_cast<Eigen::Index>(i)) = ds.graphs[i].label;
      }
    }
    sources["fp"] = std::move(src);
  }

  const auto report = harness::ablate(sources, splits, settings);
  write_json(out_path, report.to_json());
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distance-aware GNN toolkit"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic benchmark split");
  int synth_n = 1;
  std::string synth_shift = "iid", synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--n", synth_n, "number of graphs")->required();
  synth->add_option("--shift", synth_shift, "iid or ood")
      ->check(CLI::IsMember({"iid", "ood"}));
  synth->add_option("--seed", synth_seed, "generator seed")->required();
  synth->add_option("--out", synth_out, "output JSONL path")->required();

  auto* splitc = app.add_subcommand("split-distance", "close/far split of a test set");
  std::string sd_test, sd_train, sd_out;
  double sd_threshold = 0.7;
  int sd_k = 8, sd_radius = 2, sd_width = 2048;
  splitc->add_option("--test", sd_test)->required();
  splitc->add_option("--train", sd_train)->required();
  splitc->add_option("--threshold", sd_threshold);
  splitc->add_option("--k", sd_k);
  splitc->add_option("--radius", sd_radius);
  splitc->add_option("--width", sd_width);
  splitc->add_option("--out", sd_out)->required();

  auto* train = app.add_subcommand("train", "train every seed in a config");
  std::string tr_config, tr_out;
  train->add_option("--config", tr_config)->required();
  train->add_option("--out", tr_out, "run directory")->required();

  auto* eval = app.add_subcommand("evaluate", "evaluate a run on one test set");
  std::string ev_run, ev_test, ev_name, ev_split, ev_out;
  eval->add_option("--run", ev_run)->required();
  eval->add_option("--test", ev_test)->required();
  eval->add_option("--name", ev_name, "test set tag (default: file stem)");
  eval->add_option("--split", ev_split, "distance split JSON (default: computed)");
  eval->add_option("--out", ev_out, "report path (default: inside the run dir)");

  auto* ens = app.add_subcommand("ensemble", "deep-ensemble evaluation of one run");
  std::string en_run, en_test, en_name, en_split, en_out;
  int en_k = 5;
  ens->add_option("--run", en_run)->required();
  ens->add_option("--k", en_k)->required();
  ens->add_option("--test", en_test)->required();
  ens->add_option("--name", en_name);
  ens->add_option("--split", en_split);
  ens->add_option("--out", en_out);

  auto* exp = app.add_subcommand("export-embeddings", "frozen readout vectors per graph");
  std::string ex_run, ex_data, ex_name, ex_out;
  std::uint64_t ex_seed = 1;
  exp->add_option("--run", ex_run)->required();
  exp->add_option("--seed", ex_seed)->required();
  exp->add_option("--data", ex_data)->required();
  exp->add_option("--name", ex_name, "dataset tag recorded in the file");
  exp->add_option("--out", ex_out)->required();

  auto* abl = app.add_subcommand("ablate", "feature-source x head ablation grid");
  std::vector<std::string> ab_embeddings, ab_tests, ab_splits;
  std::vector<std::uint64_t> ab_seeds;
  std::string ab_heads = "dense,gp,gpc", ab_fp, ab_out;
  int ab_fp_radius = 2, ab_fp_width = 2048, ab_gpc_cap = 1000;
  abl->add_option("--embeddings", ab_embeddings, "embedding matrix files")->required();
  abl->add_option("--heads", ab_heads, "comma list of dense,gp,gpc");
  abl->add_option("--fp", ab_fp, "train dataset (also the fingerprint feature source)")
      ->required();
  abl->add_option("--test", ab_tests, "name=path test datasets")->required();
  abl->add_option("--split", ab_splits, "name=path distance splits");
  abl->add_option("--seeds", ab_seeds, "seeds for the gp head rows");
  abl->add_option("--fp-radius", ab_fp_radius);
  abl->add_option("--fp-width", ab_fp_width);
  abl->add_option("--gpc-cap", ab_gpc_cap, "train subsample cap for the exact GPC");
  abl->add_option("--out", ab_out)->required();

  auto* uirc = app.add_subcommand("uir", "per-sample uncertainty increase ratios");
  std::string ui_model, ui_baseline, ui_out;
  uirc->add_option("--model", ui_model, "predictions JSON of the candidate")->required();
  uirc->add_option("--baseline", ui_baseline, "predictions JSON of the baseline")
      ->required();
  uirc->add_option("--out", ui_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      data::SynthConfig cfg;
      cfg.n_graphs = synth_n;
      cfg.shift = synth_shift == "ood" ? data::SynthConfig::Shift::kOod
                                       : data::SynthConfig::Shift::kIid;
      cfg.seed = synth_seed;
      data::save_dataset(data::synth_generate(cfg), synth_out);
      return 0;
    }
    if (*splitc) {
      const auto test = data::load_dataset(sd_test);
      const auto train_ds = data::load_dataset(sd_train, data::SplitTag::kTrain);
      const auto split =
          fp::split_by_distance(test, train_ds, sd_threshold, sd_k, sd_radius, sd_width);
      write_json(sd_out, fp::split_to_json(split));
      return 0;
    }
    if (*train) {
      const auto cfg = harness::load_config(tr_config);
      if (cfg.precision == "f32")
        harness::train_run<float>(cfg, tr_out);
      else
        harness::train_run<double>(cfg, tr_out);
      return 0;
    }
    if (*eval) {
      const auto cfg = harness::load_config((fs::path(ev_run) / "config.json").string());
      if (cfg.precision == "f32")
        return run_evaluate<float>(cfg, ev_run, ev_test, ev_name, ev_split, ev_out);
      return run_evaluate<double>(cfg, ev_run, ev_test, ev_name, ev_split, ev_out);
    }
    if (*ens) {
      const auto cfg = harness::load_config((fs::path(en_run) / "config.json").string());
      if (cfg.precision == "f32")
        return run_ensemble<float>(cfg, en_run, en_k, en_test, en_name, en_split, en_out);
      return run_ensemble<double>(cfg, en_run, en_k, en_test, en_name, en_split, en_out);
    }
    if (*exp) {
      const auto cfg = harness::load_config((fs::path(ex_run) / "config.json").string());
      if (cfg.precision == "f32")
        return run_export<float>(cfg, ex_run, ex_seed, ex_data, ex_name, ex_out);
      return run_export<double>(cfg, ex_run, ex_seed, ex_data, ex_name, ex_out);
    }
    if (*abl) {
      return run_ablate(ab_embeddings, ab_heads, ab_fp, ab_tests, ab_splits, ab_seeds,
                        ab_fp_radius, ab_fp_width, ab_gpc_cap, ab_out);
    }
    if (*uirc) {
      const auto load_uncertainty = [](const std::string& path) {
        std::map<std::string, double> u;
        for (const auto& row : read_json(path).at("rows"))
          u[row.at("id").get<std::string>()] = row.at("uncertainty").get<double>();
        return u;
      };
      const auto result =
          metrics::uir(load_uncertainty(ui_model), load_uncertainty(ui_baseline));
      nlohmann::json j = {{"ratios", result.ratios},
                          {"excluded_ids", result.excluded_ids},
                          {"fraction_above_one", result.fraction_above_one}};
      write_json(ui_out, j);
      std::cout << "UIR > 1 fraction: " << result.fraction_above_one << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
