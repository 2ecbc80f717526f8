#include "termnorm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "termnorm/error.hpp"
#include "termnorm/random.hpp"

namespace termnorm {

namespace {

constexpr std::uint64_t kInitStream = 0x1d1;

int scaled(int epochs, double scale) {
  if (epochs == 0) return 0;
  return std::max(1, static_cast<int>(std::lround(epochs * scale)));
}

void check_finite(double loss, int epoch, std::size_t batch, double lr) {
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << "training diverged: non-finite loss at epoch " << epoch + 1 << ", batch " << batch + 1
     << " (learning_rate=" << lr << ")";
  throw DivergenceError(os.str());
}

void check_phase(const PhaseOptions& o, std::size_t corpus_size) {
  if (o.epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (o.epochs > 0 && corpus_size == 0) throw InvalidArgument("empty training corpus");
  if (o.batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!(o.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::FT: return "FT";
    case Strategy::OP: return "OP";
    case Strategy::OP_FT: return "OP_FT";
  }
  return "?";
}

const char* to_string(ModelKind k) { return k == ModelKind::Classifier ? "classifier" : "dual_encoder"; }
const char* to_string(PairSource p) { return p == PairSource::Sapbert ? "sapbert" : "coder"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "FT" || s == "ft") return Strategy::FT;
  if (s == "OP" || s == "op") return Strategy::OP;
  if (s == "OP_FT" || s == "op_ft" || s == "OP+FT" || s == "op+ft") return Strategy::OP_FT;
  throw InvalidArgument("unknown strategy '" + s + "' (expected FT, OP or OP_FT)");
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "classifier") return ModelKind::Classifier;
  if (s == "dual_encoder" || s == "dual-encoder") return ModelKind::DualEncoder;
  throw InvalidArgument("unknown model kind '" + s + "' (expected classifier or dual_encoder)");
}

PairSource parse_pair_source(const std::string& s) {
  if (s == "sapbert") return PairSource::Sapbert;
  if (s == "coder") return PairSource::Coder;
  throw InvalidArgument("unknown pair source '" + s + "' (expected sapbert or coder)");
}

void TrainConfig::validate() const {
  if (op_epochs < 0 || ft_epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (strategy == Strategy::OP_FT && (op_epochs == 0 || ft_epochs == 0)) {
    throw InvalidArgument("OP_FT needs op_epochs > 0 and ft_epochs > 0");
  }
  if (strategy == Strategy::FT && op_epochs != 0) throw InvalidArgument("FT requires op_epochs = 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (model_kind == ModelKind::DualEncoder) {
    if (embed_dim == 0) throw InvalidArgument("embed_dim must be positive");
    if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
    if (negatives == 0) throw InvalidArgument("negatives must be positive");
  }
  termnorm::validate(featurizer);
}

TrainConfig default_train_config(ModelKind kind, Strategy strategy, double epoch_scale) {
  if (!(epoch_scale > 0.0)) throw InvalidArgument("epoch scale must be positive");
  TrainConfig c;
  c.model_kind = kind;
  c.strategy = strategy;
  const bool clf = kind == ModelKind::Classifier;
  switch (strategy) {
    case Strategy::FT:
      c.op_epochs = 0;
      c.ft_epochs = clf ? 10 : 15;
      break;
    case Strategy::OP:
      c.op_epochs = 30;
      c.ft_epochs = 0;
      break;
    case Strategy::OP_FT:
      c.op_epochs = 30;
      c.ft_epochs = clf ? 5 : 10;
      break;
  }
  c.op_epochs = scaled(c.op_epochs, epoch_scale);
  c.ft_epochs = scaled(c.ft_epochs, epoch_scale);
  if (clf) {
    c.learning_rate = 0.5;
    c.batch_size = 8;
  } else {
    c.learning_rate = 0.02;
    c.batch_size = 16;
  }
  return c;
}

TrainConfig train_config_from(const KeyValueConfig& cfg) {
  const auto kind = parse_model_kind(cfg.get_string("model", "classifier"));
  const auto strategy = parse_strategy(cfg.get_string("strategy", "OP_FT"));
  TrainConfig c = default_train_config(kind, strategy, cfg.get_double("epoch_scale", 1.0));
  c.op_epochs = static_cast<int>(cfg.get_int("op_epochs", c.op_epochs));
  c.ft_epochs = static_cast<int>(cfg.get_int("ft_epochs", c.ft_epochs));
  c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
  c.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", static_cast<std::int64_t>(c.batch_size)));
  c.seed = cfg.get_u64("seed", c.seed);
  c.featurizer.dim = static_cast<std::uint32_t>(cfg.get_int("feature_dim", c.featurizer.dim));
  c.featurizer.ngrams.lo = static_cast<int>(cfg.get_int("ngram_lo", c.featurizer.ngrams.lo));
  c.featurizer.ngrams.hi = static_cast<int>(cfg.get_int("ngram_hi", c.featurizer.ngrams.hi));
  c.embed_dim = static_cast<std::size_t>(cfg.get_int("embed_dim", static_cast<std::int64_t>(c.embed_dim)));
  c.temperature = cfg.get_double("temperature", c.temperature);
  c.negatives = static_cast<std::size_t>(cfg.get_int("negatives", static_cast<std::int64_t>(c.negatives)));
  c.pair_source = parse_pair_source(cfg.get_string("pair_source", to_string(c.pair_source)));
  return c;
}

PhaseStats train_classifier(ClassifierModel& model, const Dataset& corpus, const PhaseOptions& options) {
  check_phase(options, corpus.size());
  PhaseStats stats;
  if (options.epochs == 0) return stats;

  std::unordered_map<std::string, std::size_t> class_of;
  for (std::size_t c = 0; c < model.pt_order.size(); ++c) class_of.emplace(model.pt_order[c], c);
  std::vector<FeatureVector> inputs;
  std::vector<std::size_t> labels;
  inputs.reserve(corpus.size());
  for (const auto& s : corpus.samples) {
    auto it = class_of.find(s.label);
    if (it == class_of.end()) throw UnknownIdError("label " + s.label + " is not a class of the model");
    inputs.push_back(classifier_input(model, s.text));
    labels.push_back(it->second);
  }

  const std::size_t classes = model.num_classes();
  Rng rng(options.seed);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto order = iota(inputs.size());
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double step = options.learning_rate / static_cast<double>(end - start);
      std::vector<ClassifierGradient> grads;
      grads.reserve(end - start);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        auto [loss, grad] = classifier_loss_grad(model, inputs[order[b]], labels[order[b]]);
        batch_loss += loss;
        grads.push_back(std::move(grad));
      }
      check_finite(batch_loss, epoch, batch_no, options.learning_rate);
      epoch_loss += batch_loss;
      for (const auto& g : grads) {
        for (const auto& [f, row] : g.rows) {
          double* w = model.weights.data() + static_cast<std::size_t>(f) * classes;
          for (std::size_t c = 0; c < classes; ++c) w[c] -= step * row[c];
        }
        for (std::size_t c = 0; c < classes; ++c) model.bias[c] -= step * g.bias[c];
      }
    }
    stats.epoch_loss.push_back(epoch_loss / static_cast<double>(inputs.size()));
  }
  return stats;
}

PhaseStats train_dual_encoder(DualEncoder& encoder, const std::vector<PairSample>& pairs,
                              const PhaseOptions& options) {
  std::vector<const PairSample*> positives;
  for (const auto& p : pairs) {
    if (p.polarity == Polarity::Positive) positives.push_back(&p);
  }
  check_phase(options, positives.size());
  if (options.negatives == 0) throw InvalidArgument("dual-encoder training needs negatives > 0");
  PhaseStats stats;
  if (options.epochs == 0) return stats;

  // Negative pool: distinct (text, concept) entries from both sides of every positive pair.
  struct PoolEntry {
    std::string text;
    std::string concept_id;
  };
  std::vector<PoolEntry> pool;
  std::unordered_map<std::string, std::size_t> feature_slot;
  std::vector<FeatureVector> features;
  auto slot_of = [&](const std::string& text) {
    auto [it, inserted] = feature_slot.emplace(text, features.size());
    if (inserted) features.push_back(featurize(text, encoder.featurizer).normalized());
    return it->second;
  };
  std::vector<std::string> concept_ids(positives.size());
  {
    std::unordered_map<std::string, bool> seen;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      const PairSample& p = *positives[i];
      concept_ids[i] = p.concept_id.empty() ? "#pair" + std::to_string(i) : p.concept_id;
      for (const std::string* t : {&p.left, &p.right}) {
        slot_of(*t);
        if (seen.emplace(*t + '\x1f' + concept_ids[i], true).second) pool.push_back({*t, concept_ids[i]});
      }
    }
  }

  Rng rng(options.seed);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto order = iota(positives.size());
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t trained = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      // Negative features are kept alive until the batch update, which reads them through the terms.
      std::vector<std::vector<FeatureVector>> batch_negs;
      batch_negs.reserve(end - start);
      std::vector<EncoderGradientTerms> grads;
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const PairSample& p = *positives[order[b]];
        const std::string& cid = concept_ids[order[b]];
        std::vector<FeatureVector> negs;
        const std::size_t max_tries = 50 * options.negatives;
        for (std::size_t tries = 0; negs.size() < options.negatives && tries < max_tries; ++tries) {
          const PoolEntry& cand = pool[rng.uniform_index(pool.size())];
          if (cand.concept_id == cid || cand.text == p.left || cand.text == p.right) continue;
          negs.push_back(features[feature_slot.at(cand.text)]);
        }
        if (negs.empty()) continue;
        batch_negs.push_back(std::move(negs));
        auto [loss, grad] = contrastive_loss_terms(encoder, features[feature_slot.at(p.left)],
                                                   features[feature_slot.at(p.right)], batch_negs.back(),
                                                   encoder.temperature);
        batch_loss += loss;
        grads.push_back(std::move(grad));
      }
      if (grads.empty()) continue;
      check_finite(batch_loss, epoch, batch_no, options.learning_rate);
      epoch_loss += batch_loss;
      trained += grads.size();
      const std::size_t d = encoder.embed_dim;
      const double step = options.learning_rate / static_cast<double>(grads.size());
      for (const auto& g : grads) {
        for (const auto& [x, gu] : g.terms) {
          for (const auto& [f, v] : x->entries()) {
            double* w = encoder.projection.data() + static_cast<std::size_t>(f) * d;
            const double scale = step * v;
            for (std::size_t j = 0; j < d; ++j) w[j] -= scale * gu[j];
          }
        }
      }
    }
    if (trained == 0) throw InvalidArgument("no positive pair has a negative from another concept");
    stats.epoch_loss.push_back(epoch_loss / static_cast<double>(trained));
  }
  encoder.touch();
  return stats;
}

PhaseStats train_phase(AnyModel& model, const TrainingCorpus& corpus, const PhaseOptions& options) {
  if (auto* clf = std::get_if<ClassifierModel>(&model)) {
    const auto* ds = std::get_if<Dataset>(&corpus);
    if (ds == nullptr) throw InvalidArgument("a classifier trains on labeled samples, not term pairs");
    return train_classifier(*clf, *ds, options);
  }
  const auto* pairs = std::get_if<std::vector<PairSample>>(&corpus);
  if (pairs == nullptr) throw InvalidArgument("a dual encoder trains on term pairs, not labeled samples");
  return train_dual_encoder(std::get<DualEncoder>(model), *pairs, options);
}

AnyModel init_model(const TrainConfig& config, const Ontology& ontology) {
  const std::uint64_t seed = derive_seed(config.seed, kInitStream);
  if (config.model_kind == ModelKind::Classifier) return ClassifierModel::init(ontology, config.featurizer, seed);
  return DualEncoder::init(config.featurizer, config.embed_dim, config.temperature, seed);
}

namespace {

std::vector<PairSample> positive_coder_pairs(const Dataset& ds, const Ontology& ontology) {
  // Negatives are resampled during training, so only positives are kept here.
  CoderOptions opts;
  opts.max_negatives_per_positive = 0;
  auto pairs = coder_samples(ds, ontology, opts).pairs;
  std::erase_if(pairs, [](const PairSample& p) { return p.polarity != Polarity::Positive; });
  return pairs;
}

}  // namespace

TrainingCorpus op_training_corpus(const TrainConfig& config, const Ontology& ontology) {
  if (config.model_kind == ModelKind::Classifier) return build_op_corpus(ontology);
  if (config.pair_source == PairSource::Sapbert) return sapbert_op_pairs(ontology);
  return positive_coder_pairs(build_op_corpus(ontology), ontology);
}

TrainingCorpus ft_training_corpus(const TrainConfig& config, const Ontology& ontology, const Dataset& train) {
  if (config.model_kind == ModelKind::Classifier) return train;
  if (config.pair_source == PairSource::Sapbert) return sapbert_dataset_pairs(train, ontology);
  return positive_coder_pairs(train, ontology);
}

PhaseOptions phase_options(const TrainConfig& config, int epochs) {
  PhaseOptions o;
  o.epochs = epochs;
  o.learning_rate = config.learning_rate;
  o.batch_size = config.batch_size;
  o.seed = config.seed;
  o.negatives = config.negatives;
  return o;
}

void finetune(AnyModel& model, const TrainConfig& config, const Ontology& ontology, const Dataset& train,
              StrategyLog* log) {
  auto stats = train_phase(model, ft_training_corpus(config, ontology, train), phase_options(config, config.ft_epochs));
  if (log != nullptr) log->ft = std::move(stats);
}

AnyModel run_strategy(const TrainConfig& config, const Ontology& ontology, const Dataset& train,
                      StrategyLog* log) {
  config.validate();
  AnyModel model = init_model(config, ontology);
  if (config.strategy != Strategy::FT) {
    auto stats = train_phase(model, op_training_corpus(config, ontology), phase_options(config, config.op_epochs));
    if (log != nullptr) log->op = std::move(stats);
  }
  if (config.strategy != Strategy::OP) finetune(model, config, ontology, train, log);
  return model;
}

}  // namespace termnorm
