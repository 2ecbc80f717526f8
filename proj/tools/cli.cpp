#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "termnorm/contrastive.hpp"
#include "termnorm/dataset.hpp"
#include "termnorm/error.hpp"
#include "termnorm/evaluation.hpp"
#include "termnorm/io.hpp"
#include "termnorm/models.hpp"
#include "termnorm/ontology.hpp"
#include "termnorm/pipeline.hpp"
#include "termnorm/synth.hpp"
#include "termnorm/trainer.hpp"

namespace termnorm::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigEnv = "TERMNORM_CONFIG";

const std::vector<std::string> kSynthKeys = {"n_pt",     "children_min",  "children_max", "n_hlt",
                                             "n_samples", "zipf_exponent", "noise_styles"};
const std::vector<std::string> kTrainKeys = {"strategy",    "model",        "epoch_scale", "op_epochs",
                                             "ft_epochs",   "learning_rate", "batch_size", "feature_dim",
                                             "ngram_lo",    "ngram_hi",     "embed_dim",   "temperature",
                                             "negatives",   "pair_source"};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --config plus one `--<key>` flag per config key. Resolution order: the
/// config file (flag, else $TERMNORM_CONFIG), then key flags, then --seed.
struct ConfigFlags {
  struct KeyOption {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::string path;
  std::deque<KeyOption> keys;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd, const std::vector<std::string>& names) {
    cmd->add_option("--config", path, "key = value config file (default: $TERMNORM_CONFIG)");
    for (const auto& name : names) {
      auto& k = keys.emplace_back();
      k.key = name;
      std::string flag = "--" + name;
      std::string dashed = name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != name) flag += ",--" + dashed;
      k.opt = cmd->add_option(flag, k.value, "override config key '" + name + "'")->group("Config keys");
    }
  }

  KeyValueConfig resolve() const {
    std::string file = path;
    if (file.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env != nullptr) file = env;
    }
    KeyValueConfig kv;
    if (!file.empty()) kv = KeyValueConfig::load(file);
    std::vector<std::string> known = pipeline_config_keys();
    known.insert(known.end(), {"strategy", "op_epochs", "ft_epochs"});
    for (const auto& [k, v] : kv.values()) {
      if (std::find(known.begin(), known.end(), k) == known.end()) {
        throw InvalidArgument(file + ": unknown config key '" + k + "'");
      }
    }
    for (const auto& k : keys) {
      if (k.opt->count() > 0) kv.set(k.key, k.value);
    }
    if (seed_opt != nullptr && seed_opt->count() > 0) kv.set("seed", std::to_string(seed));
    return kv;
  }
};

void add_seed(CLI::App* cmd, ConfigFlags& flags, const std::string& what) {
  flags.seed_opt = cmd->add_option("--seed", flags.seed, what);
}

struct Io {
  std::ostream& out;
  std::ostream& err;

  /// Writes to `path` atomically, or to stdout when the path is empty.
  void emit(const std::string& path, const std::string& content) const {
    if (path.empty()) {
      out << content;
      return;
    }
    atomic_write(path, content);
    err << "wrote " << path << '\n';
  }
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string split_path(const fs::path& dir, const std::string& name, std::size_t k) {
  return (dir / (name + ".split" + std::to_string(k + 1) + ".json")).string();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

PromptStyle parse_style(const std::string& s) {
  if (s == "gpt2") return PromptStyle::Gpt2;
  if (s == "sci5") return PromptStyle::Sci5;
  throw UsageError("--style must be gpt2 or sci5");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Medical term normalization toolkit: synthetic benchmarks, ontology pretraining, evaluation",
               "termnorm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");
  Io io{out, err};

  std::function<void()> action;
  CLI::App* selected = nullptr;
  auto command = [&](const std::string& name, const std::string& desc, std::function<void()> fn) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    cmd->callback([&, cmd, fn = std::move(fn)] {
      selected = cmd;
      action = fn;
    });
    return cmd;
  };

  // Shared option storage; each subcommand binds only what it uses.
  std::string ontology_path, dataset_path, split_path_arg, out_path, out_dir, checkpoint_path;
  std::string predictions_path, triples_path, method = "sapbert", style = "gpt2", split_dir, checkpoint_dir, csv_dir,
                                log_path;
  std::vector<std::string> dataset_paths;
  double ratio = kDefaultTrainRatio;
  unsigned jobs = 1;
  bool all = false;
  bool index_llts = false;
  std::size_t max_negatives = 0;
  CLI::Option* max_negatives_opt = nullptr;
  ConfigFlags synth_flags, train_flags, split_flags, pairs_flags, pipeline_flags;

  // synth
  {
    CLI::App* cmd = command("synth", "generate a synthetic ontology and one dataset per noise style", [&] {
      SynthConfig sc = synth_config_from(synth_flags.resolve());
      sc.validate();
      const SynthBenchmark bench = gen_synthetic(sc);
      ensure_dir(out_dir);
      save_ontology(fs::path(out_dir) / "ontology.tsv", bench.ontology);
      err << "wrote " << (fs::path(out_dir) / "ontology.tsv").string() << '\n';
      for (const auto& ds : bench.datasets) {
        const auto p = fs::path(out_dir) / (ds.name + ".jsonl");
        save_dataset(p, ds);
        err << "wrote " << p.string() << '\n';
      }
    });
    cmd->add_option("--out-dir", out_dir, "output directory")->required();
    synth_flags.attach(cmd, kSynthKeys);
    add_seed(cmd, synth_flags, "generator seed");
  }

  // ingest
  {
    CLI::App* cmd = command("ingest", "validate a dataset (relabeling LLT labels) or resolve external predictions", [&] {
      const Ontology onto = load_ontology(ontology_path);
      if (!dataset_path.empty() == !predictions_path.empty()) {
        throw UsageError("give exactly one of --dataset or --predictions");
      }
      if (!dataset_path.empty()) {
        const Dataset ds = load_dataset(dataset_path, onto);
        std::ostringstream os;
        write_dataset(os, ds);
        io.emit(out_path, os.str());
        err << ds.size() << " samples\n";
        return;
      }
      if (split_path_arg.empty()) throw UsageError("--predictions needs --split");
      const PredictionSet preds = ingest_predictions(predictions_path, onto, load_split(split_path_arg));
      std::ostringstream os;
      write_predictions(os, preds);
      io.emit(out_path, os.str());
      err << preds.predicted.size() << " predictions, " << preds.unresolved() << " unresolved\n";
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL to validate");
    cmd->add_option("--predictions", predictions_path, "external predictions JSONL {id, predicted}");
    cmd->add_option("--split", split_path_arg, "split JSON the predictions refer to");
    cmd->add_option("--out", out_path, "output file (default: stdout)");
  }

  // op-corpus
  {
    CLI::App* cmd = command("op-corpus", "write the ontology pretraining corpus (LLT text -> parent PT)", [&] {
      const Ontology onto = load_ontology(ontology_path);
      std::ostringstream os;
      write_dataset(os, build_op_corpus(onto));
      io.emit(out_path, os.str());
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--out", out_path, "output JSONL (default: stdout)");
  }

  // pairs
  {
    CLI::App* cmd = command("pairs", "generate contrastive pairs (coder, sapbert, sapbert-op)", [&] {
      const Ontology onto = load_ontology(ontology_path);
      std::vector<PairSample> pairs;
      if (method == "sapbert-op") {
        pairs = sapbert_op_pairs(onto);
      } else {
        if (dataset_path.empty()) throw UsageError("--method " + method + " needs --dataset");
        const Dataset full = load_dataset(dataset_path, onto);
        if (split_path_arg.empty() && !all) {
          throw UsageError("give --split to use its train part, or --all for the whole dataset");
        }
        const Dataset ds = all ? full : subset(full, load_split(split_path_arg).train);
        if (method == "sapbert") {
          pairs = sapbert_dataset_pairs(ds, onto);
        } else if (method == "coder") {
          CoderOptions opts;
          opts.seed = pairs_flags.seed;
          if (max_negatives_opt->count() > 0) opts.max_negatives_per_positive = max_negatives;
          CoderSamples cs = coder_samples(ds, onto, opts);
          pairs = std::move(cs.pairs);
          if (cs.skipped_triple_candidates > 0) {
            err << "warning: " << cs.skipped_triple_candidates << " label pairs skipped for RO triples; PTs without HLT:";
            for (const auto& pt : cs.pts_missing_hlt) err << ' ' << pt;
            err << '\n';
          }
          if (!triples_path.empty()) {
            std::ostringstream os;
            write_triples(os, cs.triples);
            io.emit(triples_path, os.str());
          }
        } else {
          throw UsageError("--method must be coder, sapbert or sapbert-op");
        }
      }
      std::ostringstream os;
      write_pairs(os, pairs);
      io.emit(out_path, os.str());
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL");
    cmd->add_option("--split", split_path_arg, "split JSON; only its train samples are used");
    cmd->add_flag("--all", all, "use every sample of the dataset instead of a train split");
    cmd->add_option("--method", method, "coder | sapbert | sapbert-op")->capture_default_str();
    cmd->add_option("--out", out_path, "pairs JSONL (default: stdout)");
    cmd->add_option("--triples-out", triples_path, "RO triples JSONL (coder only)");
    max_negatives_opt = cmd->add_option("--max-negatives", max_negatives, "coder: keep at most this many negatives per positive");
    add_seed(cmd, pairs_flags, "seed for negative subsampling");
  }

  // split
  {
    CLI::App* cmd = command("split", "make the three seeded train/test splits with IN/OUT tags", [&] {
      const Ontology onto = load_ontology(ontology_path);
      const Dataset ds = load_dataset(dataset_path, onto);
      const auto splits = make_splits(ds, split_seeds(split_flags.seed), ratio);
      ensure_dir(out_dir);
      for (std::size_t k = 0; k < splits.size(); ++k) {
        const auto p = split_path(out_dir, ds.name, k);
        save_split(p, splits[k]);
        err << "wrote " << p << " (train " << splits[k].train.size() << ", test " << splits[k].test.size()
            << ", OUT " << out_fraction(splits[k]) << ")\n";
      }
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL")->required();
    cmd->add_option("--out-dir", out_dir, "writes <name>.split1.json .. split3.json")->required();
    cmd->add_option("--ratio", ratio, "train fraction")->capture_default_str();
    add_seed(cmd, split_flags, "master seed for the three split seeds");
  }

  // train
  {
    CLI::App* cmd = command("train", "train a model with the FT, OP or OP_FT strategy", [&] {
      const Ontology onto = load_ontology(ontology_path);
      const TrainConfig tc = train_config_from(train_flags.resolve());
      tc.validate();
      Dataset train;
      if (tc.strategy != Strategy::OP) {
        if (dataset_path.empty()) throw UsageError(std::string("strategy ") + to_string(tc.strategy) + " needs --dataset");
        const Dataset full = load_dataset(dataset_path, onto);
        train = split_path_arg.empty() ? full : subset(full, load_split(split_path_arg).train);
      }
      StrategyLog log;
      const AnyModel model = run_strategy(tc, onto, train, &log);
      save_checkpoint(out_path, model, onto);
      err << "wrote " << out_path << '\n';
      if (!log_path.empty()) {
        io.emit(log_path, dump({{"strategy", to_string(tc.strategy)},
                                {"model", to_string(tc.model_kind)},
                                {"seed", tc.seed},
                                {"op_epoch_loss", log.op.epoch_loss},
                                {"ft_epoch_loss", log.ft.epoch_loss}}));
      }
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL (not needed for OP)");
    cmd->add_option("--split", split_path_arg, "split JSON; trains on its train samples");
    cmd->add_option("--out", out_path, "checkpoint path")->required();
    cmd->add_option("--log", log_path, "per-epoch loss log (JSON)");
    train_flags.attach(cmd, kTrainKeys);
    add_seed(cmd, train_flags, "initialization and shuffling seed");
  }

  // predict
  {
    CLI::App* cmd = command("predict", "predict PTs with a checkpoint", [&] {
      const Ontology onto = load_ontology(ontology_path);
      const AnyModel model = load_checkpoint(checkpoint_path, onto);
      const Dataset ds = load_dataset(dataset_path, onto);
      std::vector<std::string> ids;
      if (split_path_arg.empty()) {
        for (const auto& s : ds.samples) ids.push_back(s.id);
      } else {
        ids = load_split(split_path_arg).test;
      }
      PredictOptions opts;
      opts.jobs = jobs;
      opts.index_llts = index_llts;
      std::ostringstream os;
      write_predictions(os, predict(model, onto, ds, ids, opts));
      io.emit(out_path, os.str());
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL")->required();
    cmd->add_option("--split", split_path_arg, "split JSON; predicts its test samples (default: all)");
    cmd->add_option("--out", out_path, "predictions JSONL (default: stdout)");
    cmd->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    cmd->add_flag("--index-llts", index_llts, "dual encoder: also index LLT texts");
  }

  // prompts
  {
    CLI::App* cmd = command("prompts", "render prompts for external generative models", [&] {
      const Ontology onto = load_ontology(ontology_path);
      const PromptStyle ps = parse_style(style);
      Dataset ds = load_dataset(dataset_path, onto);
      if (!split_path_arg.empty()) ds = subset(ds, load_split(split_path_arg).test);
      io.emit(out_path, render_prompts(ds, ps));
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "dataset JSONL")->required();
    cmd->add_option("--split", split_path_arg, "split JSON; renders its test samples (default: all)");
    cmd->add_option("--style", style, "gpt2 | sci5")->capture_default_str();
    cmd->add_option("--out", out_path, "prompts JSONL (default: stdout)");
  }

  // evaluate
  {
    CLI::App* cmd = command("evaluate", "score predictions on a split's test samples", [&] {
      const Ontology onto = load_ontology(ontology_path);
      const Dataset ds = load_dataset(dataset_path, onto);
      const Split split = load_split(split_path_arg);
      const PredictionSet preds = ingest_predictions(predictions_path, onto, split);
      io.emit(out_path, dump(to_json(evaluate(preds, split, ds))));
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_path, "gold dataset JSONL")->required();
    cmd->add_option("--split", split_path_arg, "split JSON")->required();
    cmd->add_option("--predictions", predictions_path, "predictions JSONL {id, predicted}")->required();
    cmd->add_option("--out", out_path, "metrics JSON (default: stdout)");
  }

  // cross-eval
  {
    CLI::App* cmd = command("cross-eval", "in-dataset and cross-dataset evaluation matrix over three splits", [&] {
      const Ontology onto = load_ontology(ontology_path);
      std::vector<Dataset> datasets;
      std::map<std::string, std::array<Split, 3>> splits;
      for (const auto& p : dataset_paths) {
        datasets.push_back(load_dataset(p, onto));
        const auto& name = datasets.back().name;
        auto& arr = splits[name];
        for (std::size_t k = 0; k < 3; ++k) arr[k] = load_split(split_path(split_dir, name, k));
      }
      ModelSource source = [&](const std::string& name, std::size_t k) {
        const fs::path per_split = fs::path(checkpoint_dir) / (name + ".split" + std::to_string(k + 1) + ".ckpt");
        const fs::path shared = fs::path(checkpoint_dir) / (name + ".ckpt");
        return load_checkpoint(fs::exists(per_split) ? per_split : shared, onto);
      };
      PredictOptions opts;
      opts.jobs = jobs;
      opts.index_llts = index_llts;
      const CrossMatrix m = cross_matrix(source, datasets, splits, onto, opts);
      io.emit(out_path, dump({{"cross_matrix", to_json(m)}, {"cross_dataset_drop", cross_dataset_drop(m)}}));
      if (!csv_dir.empty()) {
        ensure_dir(csv_dir);
        for (const char* field : {"accuracy_overall", "accuracy_in", "accuracy_out", "f1_overall", "f1_in", "f1_out"}) {
          io.emit((fs::path(csv_dir) / (std::string("cross_") + field + ".csv")).string(), cross_matrix_csv(m, field));
        }
      }
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_paths, "dataset JSONL (repeat for each dataset)")->required();
    cmd->add_option("--split-dir", split_dir, "directory of <name>.split{1,2,3}.json")->required();
    cmd->add_option("--checkpoint-dir", checkpoint_dir,
                    "directory of <name>.split{1,2,3}.ckpt, or <name>.ckpt used for all splits")
        ->required();
    cmd->add_option("--out", out_path, "report JSON (default: stdout)");
    cmd->add_option("--csv-dir", csv_dir, "also write one CSV per metric");
    cmd->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    cmd->add_flag("--index-llts", index_llts, "dual encoder: also index LLT texts");
  }

  // stats
  {
    CLI::App* cmd = command("stats", "PT overlap and frequency statistics across datasets", [&] {
      const Ontology onto = load_ontology(ontology_path);
      std::vector<Dataset> datasets;
      for (const auto& p : dataset_paths) datasets.push_back(load_dataset(p, onto));
      io.emit(out_path, dump(overlap_to_json(dataset_stats(datasets))));
    });
    cmd->add_option("--ontology", ontology_path, "ontology TSV")->required();
    cmd->add_option("--dataset", dataset_paths, "dataset JSONL (repeat for each dataset)")->required();
    cmd->add_option("--out", out_path, "stats JSON (default: stdout)");
  }

  // pipeline
  {
    CLI::App* cmd = command("pipeline", "synth -> split -> train FT and OP_FT -> evaluate -> report", [&] {
      const PipelineConfig pc = pipeline_config_from(pipeline_flags.resolve());
      const PipelineResult res = run_pipeline(pc, jobs);
      io.emit(out_path, dump(res.report));
      if (!csv_dir.empty()) {
        ensure_dir(csv_dir);
        std::string in_rows = aggregate_csv_header();
        for (const auto& [label, m] : {std::pair{"FT", &res.ft}, std::pair{"OP_FT", &res.op_ft}}) {
          for (const auto& name : m->names) in_rows += aggregate_csv_rows(std::string(label) + ":" + name, m->cell(name, name));
          io.emit((fs::path(csv_dir) / (std::string("cross_") + label + ".csv")).string(),
                  cross_matrix_csv(*m, "accuracy_overall"));
        }
        io.emit((fs::path(csv_dir) / "in_dataset.csv").string(), in_rows);
      }
    });
    cmd->add_option("--out", out_path, "report JSON (default: stdout)");
    cmd->add_option("--csv-dir", csv_dir, "also write summary CSVs");
    cmd->add_option("--jobs", jobs, "worker threads for cells and prediction")->capture_default_str();
    std::vector<std::string> keys;
    for (const auto& k : pipeline_config_keys()) {
      if (k != "seed") keys.push_back(k);
    }
    pipeline_flags.attach(cmd, keys);
    add_seed(cmd, pipeline_flags, "master seed (data, splits, training)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  if (jobs == 0) {
    err << "error: --jobs must be at least 1\n";
    return kUsage;
  }

  try {
    action();
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << selected->help();
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace termnorm::cli
