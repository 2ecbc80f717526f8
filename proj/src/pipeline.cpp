#include "termnorm/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"
#include "termnorm/random.hpp"

namespace termnorm {

namespace {

constexpr std::uint64_t kTrainStream = 7;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TrainConfig strategy_config(const KeyValueConfig& cfg, Strategy strategy, const std::string& prefix) {
  KeyValueConfig view;
  for (const auto& [k, v] : cfg.values()) {
    if (k.find('.') == std::string::npos) view.set(k, v);
  }
  view.set("strategy", to_string(strategy));
  // The master seed is consumed here through derive_seed, not as a training seed.
  view.set("seed", std::to_string(derive_seed(cfg.get_u64("seed", 0), kTrainStream)));
  for (const char* key : {"op_epochs", "ft_epochs"}) {
    const std::string full = prefix + "." + key;
    if (cfg.contains(full)) view.set(key, cfg.get_string(full, ""));
  }
  return train_config_from(view);
}

}  // namespace

const std::vector<std::string>& pipeline_config_keys() {
  static const std::vector<std::string> keys = {
      "batch_size", "children_max",    "children_min",    "embed_dim",    "epoch_scale", "feature_dim",
      "ft.ft_epochs", "index_llts",    "learning_rate",   "model",        "n_hlt",       "n_pt",
      "n_samples",  "negatives",       "ngram_hi",        "ngram_lo",     "noise_styles", "op_ft.ft_epochs",
      "op_ft.op_epochs", "pair_source", "seed",           "temperature",  "train_ratio", "zipf_exponent"};
  return keys;
}

PipelineConfig pipeline_config_from(const KeyValueConfig& cfg) {
  const auto& keys = pipeline_config_keys();
  for (const auto& [k, v] : cfg.values()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw InvalidArgument("unknown config key '" + k + "'");
  }
  PipelineConfig pc;
  pc.seed = cfg.get_u64("seed", 0);
  pc.synth = synth_config_from(cfg);
  pc.synth.seed = pc.seed;
  pc.ft = strategy_config(cfg, Strategy::FT, "ft");
  pc.op_ft = strategy_config(cfg, Strategy::OP_FT, "op_ft");
  pc.ft.validate();
  pc.op_ft.validate();
  pc.train_ratio = cfg.get_double("train_ratio", kDefaultTrainRatio);
  const auto llts = cfg.get_string("index_llts", "false");
  if (llts != "true" && llts != "false") throw InvalidArgument("index_llts must be true or false");
  pc.index_llts = llts == "true";
  pc.effective = cfg;
  pc.effective.set("seed", std::to_string(pc.seed));
  return pc;
}

double cross_dataset_drop(const CrossMatrix& m) {
  const std::size_t n = m.names.size();
  if (n < 2) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (r == c) continue;
      const auto diag = m.cells[c][c].at("accuracy_overall").mean;
      const auto off = m.cells[r][c].at("accuracy_overall").mean;
      if (!diag || !off) continue;
      total += *diag - *off;
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

PipelineResult run_pipeline(const PipelineConfig& config, unsigned jobs) {
  PipelineResult res;
  res.bench = gen_synthetic(config.synth);
  const Ontology& onto = res.bench.ontology;
  const auto seeds = split_seeds(config.seed);
  for (const auto& ds : res.bench.datasets) res.splits[ds.name] = make_splits(ds, seeds, config.train_ratio);

  auto train_set = [&](const std::string& name, std::size_t k) -> Dataset {
    for (const auto& ds : res.bench.datasets) {
      if (ds.name == name) return subset(ds, res.splits.at(name)[k].train);
    }
    throw UnknownIdError("no dataset " + name);
  };

  PredictOptions popts;
  popts.jobs = jobs;
  popts.index_llts = config.index_llts;

  ModelSource ft_models = [&](const std::string& name, std::size_t k) {
    return run_strategy(config.ft, onto, train_set(name, k));
  };
  res.ft = cross_matrix(ft_models, res.bench.datasets, res.splits, onto, popts);

  // The OP phase does not depend on the dataset, so it runs once; continuing
  // from it is identical to running OP_FT from scratch.
  TrainConfig op_only = config.op_ft;
  op_only.strategy = Strategy::OP;
  const AnyModel op_model = run_strategy(op_only, onto, Dataset{});
  ModelSource op_ft_models = [&](const std::string& name, std::size_t k) {
    AnyModel m = op_model;
    finetune(m, config.op_ft, onto, train_set(name, k));
    return m;
  };
  res.op_ft = cross_matrix(op_ft_models, res.bench.datasets, res.splits, onto, popts);

  // Report
  json provenance = {{"config_hash", hex64(config.effective.hash())},
                     {"config", config.effective.values()},
                     {"ontology_version", onto.version_tag()},
                     {"seed", config.seed},
                     {"split_seeds", seeds},
                     {"train_seed", config.ft.seed}};
  json datasets = json::array();
  for (const auto& ds : res.bench.datasets) {
    std::set<std::string> pts;
    for (const auto& s : ds.samples) pts.insert(s.label);
    json splits = json::array();
    for (const auto& sp : res.splits.at(ds.name)) {
      splits.push_back({{"seed", sp.seed},
                        {"train", sp.train.size()},
                        {"test", sp.test.size()},
                        {"out_fraction", out_fraction(sp)}});
    }
    datasets.push_back({{"name", ds.name}, {"samples", ds.size()}, {"pts", pts.size()}, {"splits", splits}});
  }
  auto strategy_block = [&](const CrossMatrix& m, const TrainConfig& tc) {
    json in_dataset = json::object();
    for (const auto& name : m.names) in_dataset[name] = to_json(m.cell(name, name));
    return json{{"train_config",
                 {{"model", to_string(tc.model_kind)},
                  {"op_epochs", tc.op_epochs},
                  {"ft_epochs", tc.ft_epochs},
                  {"learning_rate", tc.learning_rate},
                  {"batch_size", tc.batch_size}}},
                {"in_dataset", in_dataset},
                {"cross_matrix", to_json(m)},
                {"cross_dataset_drop", cross_dataset_drop(m)}};
  };
  res.report = {{"report_format", 1},
                {"f1_averaging", "macro over the gold PT classes present in each evaluated subset"},
                {"provenance", provenance},
                {"datasets", datasets},
                {"overlap", overlap_to_json(dataset_stats(res.bench.datasets))},
                {"strategies", {{"FT", strategy_block(res.ft, config.ft)},
                                {"OP_FT", strategy_block(res.op_ft, config.op_ft)}}}};
  return res;
}

}  // namespace termnorm
