#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "termnorm/config.hpp"
#include "termnorm/dataset.hpp"
#include "termnorm/evaluation.hpp"
#include "termnorm/synth.hpp"
#include "termnorm/trainer.hpp"

namespace termnorm {

/// End-to-end benchmark run: synthetic data, three splits per dataset, FT and
/// OP_FT models per (dataset, split), in-dataset and cross-dataset evaluation.
struct PipelineConfig {
  SynthConfig synth;
  TrainConfig ft;
  TrainConfig op_ft;
  double train_ratio = kDefaultTrainRatio;
  std::uint64_t seed = 0;
  bool index_llts = false;
  KeyValueConfig effective;  // the resolved key-value view, hashed into the report
};

/// Every randomness source derives from `seed`: the synthetic data uses it
/// directly, split seeds come from split_seeds(seed), and training uses
/// derive_seed(seed, 7).
///
/// Keys: the synth keys, `model`, `epoch_scale`, `learning_rate`, `batch_size`,
/// `feature_dim`, `ngram_lo`, `ngram_hi`, `embed_dim`, `temperature`,
/// `negatives`, `pair_source`, `train_ratio`, `index_llts`, and the epoch
/// overrides `ft.ft_epochs`, `op_ft.op_epochs`, `op_ft.ft_epochs`.
/// Unknown keys raise InvalidArgument.
PipelineConfig pipeline_config_from(const KeyValueConfig& cfg);

/// Keys accepted by pipeline_config_from, in sorted order.
const std::vector<std::string>& pipeline_config_keys();

struct PipelineResult {
  SynthBenchmark bench;
  std::map<std::string, std::array<Split, 3>> splits;
  CrossMatrix ft;
  CrossMatrix op_ft;
  nlohmann::json report;
};

PipelineResult run_pipeline(const PipelineConfig& config, unsigned jobs = 1);

/// Mean over ordered dataset pairs (d1 != d2) of
/// accuracy_overall(d2 -> d2) - accuracy_overall(d1 -> d2), from aggregate means.
/// Zero for a single dataset.
double cross_dataset_drop(const CrossMatrix& m);

}  // namespace termnorm
