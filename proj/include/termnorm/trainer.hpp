#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "termnorm/config.hpp"
#include "termnorm/contrastive.hpp"
#include "termnorm/models.hpp"

namespace termnorm {

enum class Strategy { FT, OP, OP_FT };
enum class ModelKind { Classifier, DualEncoder };
/// Which generator feeds the dual encoder its positive pairs.
enum class PairSource { Sapbert, Coder };

const char* to_string(Strategy s);
const char* to_string(ModelKind k);
const char* to_string(PairSource p);
Strategy parse_strategy(const std::string& s);
ModelKind parse_model_kind(const std::string& s);
PairSource parse_pair_source(const std::string& s);

struct TrainConfig {
  Strategy strategy = Strategy::OP_FT;
  ModelKind model_kind = ModelKind::Classifier;
  int op_epochs = 30;
  int ft_epochs = 5;
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  FeaturizerConfig featurizer;
  // dual encoder only
  std::size_t embed_dim = 128;
  double temperature = 0.07;
  std::size_t negatives = 16;
  PairSource pair_source = PairSource::Sapbert;

  /// Throws InvalidArgument on negative epochs, FT with op_epochs > 0, OP_FT
  /// without both phases, or a nonpositive rate / batch size.
  void validate() const;
};

/// Epoch schedule by model and strategy, each nonzero count scaled by
/// `epoch_scale` and rounded (minimum 1):
///   classifier    FT 10, OP 30, OP+FT 30+5
///   dual encoder  FT 15, OP 30, OP+FT 30+10
TrainConfig default_train_config(ModelKind kind, Strategy strategy, double epoch_scale = 1.0);

/// Reads the training keys of a key-value config on top of the defaults for
/// its model / strategy / epoch_scale keys.
TrainConfig train_config_from(const KeyValueConfig& cfg);

struct PhaseOptions {
  int epochs = 0;
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t negatives = 16;  // dual encoder only
};

struct PhaseStats {
  std::vector<double> epoch_loss;  // mean per-sample loss seen during each epoch
};

/// Labeled samples train a classifier; term pairs train a dual encoder.
using TrainingCorpus = std::variant<Dataset, std::vector<PairSample>>;

/// Seeded-shuffle mini-batch SGD.
///
/// Each epoch resets the visiting order to the corpus order and shuffles it
/// with one Rng(seed) stream shared by all epochs of the phase. A batch's
/// gradients are all taken at the pre-batch parameters and applied as their
/// mean, in batch order, so the result is bit-reproducible.
///
/// Throws InvalidArgument on a corpus/model mismatch or an empty corpus with
/// epochs > 0, and DivergenceError on a non-finite loss.
PhaseStats train_phase(AnyModel& model, const TrainingCorpus& corpus, const PhaseOptions& options);
PhaseStats train_classifier(ClassifierModel& model, const Dataset& corpus, const PhaseOptions& options);
/// Uses positive pairs only; negatives for each pair are drawn from corpus
/// texts of other concepts.
PhaseStats train_dual_encoder(DualEncoder& encoder, const std::vector<PairSample>& pairs,
                              const PhaseOptions& options);

AnyModel init_model(const TrainConfig& config, const Ontology& ontology);
TrainingCorpus op_training_corpus(const TrainConfig& config, const Ontology& ontology);
TrainingCorpus ft_training_corpus(const TrainConfig& config, const Ontology& ontology, const Dataset& train);
PhaseOptions phase_options(const TrainConfig& config, int epochs);

struct StrategyLog {
  PhaseStats op;
  PhaseStats ft;
};

/// FT: fine-tune on `train` only. OP: pretrain on the ontology only. OP_FT: OP
/// then FT on the same model. Both phases shuffle with config.seed.
AnyModel run_strategy(const TrainConfig& config, const Ontology& ontology, const Dataset& train,
                      StrategyLog* log = nullptr);

/// Continues from an existing model: runs only the FT phase of `config`.
void finetune(AnyModel& model, const TrainConfig& config, const Ontology& ontology, const Dataset& train,
              StrategyLog* log = nullptr);

}  // namespace termnorm
