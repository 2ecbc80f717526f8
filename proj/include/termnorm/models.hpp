#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "termnorm/dataset.hpp"
#include "termnorm/ontology.hpp"
#include "termnorm/text_encoder.hpp"

namespace termnorm {

// ---------------------------------------------------------------------------
// Full-inventory softmax classifier
// ---------------------------------------------------------------------------

/// Linear softmax classifier over every PT of the ontology, whether or not the
/// PT occurs in any training data. Weights are stored feature-major:
/// weights[f * num_classes() + c].
struct ClassifierModel {
  FeaturizerConfig featurizer;
  std::vector<std::string> pt_order;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t num_classes() const { return pt_order.size(); }
  std::uint32_t dim() const { return featurizer.dim; }

  /// Parameters drawn from seeded uniform(-0.01, 0.01); classes in ontology pt order.
  static ClassifierModel init(const Ontology& ontology, const FeaturizerConfig& featurizer, std::uint64_t seed);

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

/// Sparse gradient of a classifier. Only feature rows active in the input are
/// nonzero; `rows` lists them as (feature index, gradient over classes).
struct ClassifierGradient {
  std::vector<std::pair<std::uint32_t, std::vector<double>>> rows;
  std::vector<double> bias;

  double weight(std::uint32_t feature, std::size_t cls) const;
};

/// The model input for a text: featurized and L2-normalized.
FeatureVector classifier_input(const ClassifierModel& model, std::string_view text);

/// logits = W^T x + b. Throws InvalidArgument on a dimension mismatch.
std::vector<double> classifier_forward(const ClassifierModel& model, const FeatureVector& x);

/// Softmax cross-entropy -log softmax(logits)[label] and its exact gradient.
std::pair<double, ClassifierGradient> classifier_loss_grad(const ClassifierModel& model, const FeatureVector& x,
                                                           std::size_t label_index);

/// Index of the largest logit; ties go to the lowest index (smallest pt_id).
std::size_t argmax_class(std::span<const double> logits);

std::string classifier_predict(const ClassifierModel& model, std::string_view text);

// ---------------------------------------------------------------------------
// Dual encoder
// ---------------------------------------------------------------------------

/// embed(t) = normalize(P^T x(t)) with x(t) the L2-normalized hashed n-gram
/// vector of t and P a dim x embed_dim matrix stored feature-major.
struct DualEncoder {
  FeaturizerConfig featurizer;
  std::size_t embed_dim = 128;
  double temperature = 0.07;
  std::vector<double> projection;
  /// Fresh value on every parameter change; a PtIndex records the revision it was built from.
  std::uint64_t revision = 0;

  std::uint32_t dim() const { return featurizer.dim; }

  /// Seeded uniform(-0.01, 0.01) projection.
  static DualEncoder init(const FeaturizerConfig& featurizer, std::size_t embed_dim, double temperature,
                          std::uint64_t seed);
  /// embed_dim == dim, P = I. Meant for small dims.
  static DualEncoder identity(const FeaturizerConfig& featurizer, double temperature = 0.07);

  void touch();

  friend bool operator==(const DualEncoder& a, const DualEncoder& b) {
    return a.featurizer == b.featurizer && a.embed_dim == b.embed_dim && a.temperature == b.temperature &&
           a.projection == b.projection;
  }
};

/// Unit-norm embedding. A text whose projection is zero (e.g. empty text) maps to the first basis vector.
std::vector<double> embed(const DualEncoder& encoder, std::string_view text);
std::vector<double> embed_features(const DualEncoder& encoder, const FeatureVector& x);

double dot(std::span<const double> a, std::span<const double> b);

/// Sparse gradient w.r.t. the projection: (feature index, gradient over embed_dim).
struct EncoderGradient {
  std::vector<std::pair<std::uint32_t, std::vector<double>>> rows;

  double at(std::uint32_t feature, std::size_t j) const;
};

/// The same gradient as a sum of outer products x_t (g_t)^T, one per input
/// text with a nonzero projection. The feature pointers refer to the caller's inputs.
struct EncoderGradientTerms {
  std::vector<std::pair<const FeatureVector*, std::vector<double>>> terms;
};

/// InfoNCE over cosine similarities:
///   loss = -log( exp(cos(a,p)/t) / (exp(cos(a,p)/t) + sum_i exp(cos(a,n_i)/t)) )
/// with the exact gradient through the normalization. Throws InvalidArgument without negatives.
std::pair<double, EncoderGradient> contrastive_loss_grad(const DualEncoder& encoder, std::string_view anchor,
                                                         std::string_view positive,
                                                         std::span<const std::string> negatives,
                                                         double temperature);

/// Same loss on precomputed (L2-normalized) input features.
std::pair<double, EncoderGradient> contrastive_loss_grad(const DualEncoder& encoder, const FeatureVector& anchor,
                                                         const FeatureVector& positive,
                                                         std::span<const FeatureVector> negatives,
                                                         double temperature);

std::pair<double, EncoderGradientTerms> contrastive_loss_terms(const DualEncoder& encoder,
                                                               const FeatureVector& anchor,
                                                               const FeatureVector& positive,
                                                               std::span<const FeatureVector> negatives,
                                                               double temperature);

/// Embeddings of the indexed texts, one unit row each. By default one row per
/// PT (its canonical text); with LLT indexing, every LLT text is added as a
/// row owned by its parent PT.
struct PtIndex {
  std::vector<std::string> pt_order;  // owner PT of each row
  std::vector<double> rows;           // row-major, embed_dim per row
  std::size_t embed_dim = 0;
  std::uint64_t encoder_revision = 0;

  std::size_t size() const { return pt_order.size(); }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * embed_dim, embed_dim}; }

  static PtIndex build(const DualEncoder& encoder, const Ontology& ontology, bool index_llts = false);
};

/// PT maximizing cosine similarity with the query; ties go to the smallest pt_id.
/// Throws InvalidArgument on an empty index or one built from another encoder revision.
std::string retrieve(const PtIndex& index, const DualEncoder& encoder, std::string_view ae_text);

// ---------------------------------------------------------------------------
// Predictions, prompts, checkpoints
// ---------------------------------------------------------------------------

using AnyModel = std::variant<ClassifierModel, DualEncoder>;

const char* model_kind_name(const AnyModel& model);

/// sample id -> predicted pt_id; std::nullopt marks an unresolved prediction.
struct PredictionSet {
  std::map<std::string, std::optional<std::string>> predicted;

  std::size_t unresolved() const;
  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

struct PredictOptions {
  bool index_llts = false;
  unsigned jobs = 1;
};

/// Predicts a PT for every sample of `dataset` whose id is in `ids`.
PredictionSet predict(const AnyModel& model, const Ontology& ontology, const Dataset& dataset,
                      std::span<const std::string> ids, const PredictOptions& options = {});

void write_predictions(std::ostream& out, const PredictionSet& predictions);

/// Reads externally produced predictions (JSON lines {id, predicted}). A value
/// equal to a pt_id is taken as that PT; otherwise normalize_text(value) is
/// matched exactly against normalized pt_text (smallest pt_id on duplicates).
/// Anything else, or null, is unresolved. Ids outside split.test and repeated
/// ids are errors.
PredictionSet parse_predictions(std::istream& in, const Ontology& ontology, const Split& split,
                                const std::string& source = "<predictions>");
PredictionSet ingest_predictions(const std::filesystem::path& path, const Ontology& ontology, const Split& split);

enum class PromptStyle { Gpt2, Sci5 };

/// `INPUT: {text}\nMEANING:` for gpt2, `normalize: {text}` for sci5.
std::string prompt_for(std::string_view text, PromptStyle style);
/// One JSON line {id, prompt} per sample, in dataset order.
std::string render_prompts(const Dataset& dataset, PromptStyle style);

/// Binary checkpoint: 8-byte magic "TNCKPT01", little-endian u64 header
/// length, a JSON header {format_version, kind, featurizer, pt_order, ...},
/// then the parameter arrays as little-endian IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const AnyModel& model, const Ontology& ontology);
/// Throws ValidationError when the stored pt_order differs from the ontology's.
AnyModel load_checkpoint(const std::filesystem::path& path, const Ontology& ontology);

}  // namespace termnorm
