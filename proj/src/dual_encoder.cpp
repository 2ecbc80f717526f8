#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>

#include "termnorm/error.hpp"
#include "termnorm/models.hpp"
#include "termnorm/random.hpp"
#include "softmax.hpp"

namespace termnorm {

namespace {

std::atomic<std::uint64_t> g_revision{1};

struct Encoded {
  std::vector<double> unit;
  double norm = 0.0;  // norm of the raw projection; 0 when the fallback basis vector is used
};

Encoded encode(const DualEncoder& enc, const FeatureVector& x) {
  const std::size_t d = enc.embed_dim;
  Encoded out;
  out.unit.assign(d, 0.0);
  for (const auto& [f, v] : x.entries()) {
    const double* row = enc.projection.data() + static_cast<std::size_t>(f) * d;
    for (std::size_t j = 0; j < d; ++j) out.unit[j] += v * row[j];
  }
  double sq = 0.0;
  for (double u : out.unit) sq += u * u;
  out.norm = std::sqrt(sq);
  if (out.norm == 0.0) {
    out.unit[0] = 1.0;
    return out;
  }
  for (double& u : out.unit) u /= out.norm;
  return out;
}

}  // namespace

DualEncoder DualEncoder::init(const FeaturizerConfig& featurizer, std::size_t embed_dim, double temperature,
                              std::uint64_t seed) {
  validate(featurizer);
  if (embed_dim == 0) throw InvalidArgument("embedding size must be positive");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  DualEncoder e;
  e.featurizer = featurizer;
  e.embed_dim = embed_dim;
  e.temperature = temperature;
  e.projection.resize(static_cast<std::size_t>(featurizer.dim) * embed_dim);
  Rng rng(seed);
  for (double& p : e.projection) p = rng.uniform(-0.01, 0.01);
  e.touch();
  return e;
}

DualEncoder DualEncoder::identity(const FeaturizerConfig& featurizer, double temperature) {
  validate(featurizer);
  DualEncoder e;
  e.featurizer = featurizer;
  e.embed_dim = featurizer.dim;
  e.temperature = temperature;
  e.projection.assign(static_cast<std::size_t>(featurizer.dim) * featurizer.dim, 0.0);
  for (std::size_t i = 0; i < featurizer.dim; ++i) e.projection[i * featurizer.dim + i] = 1.0;
  e.touch();
  return e;
}

void DualEncoder::touch() { revision = g_revision.fetch_add(1); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> embed_features(const DualEncoder& encoder, const FeatureVector& x) {
  if (x.dim() != encoder.dim()) throw InvalidArgument("feature dim does not match encoder dim");
  return encode(encoder, x).unit;
}

std::vector<double> embed(const DualEncoder& encoder, std::string_view text) {
  return embed_features(encoder, featurize(text, encoder.featurizer).normalized());
}

double EncoderGradient::at(std::uint32_t feature, std::size_t j) const {
  for (const auto& [f, row] : rows) {
    if (f == feature) return row[j];
  }
  return 0.0;
}

std::pair<double, EncoderGradientTerms> contrastive_loss_terms(const DualEncoder& encoder,
                                                               const FeatureVector& anchor,
                                                               const FeatureVector& positive,
                                                               std::span<const FeatureVector> negatives,
                                                               double temperature) {
  if (negatives.empty()) throw InvalidArgument("contrastive loss needs at least one negative");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  const std::size_t d = encoder.embed_dim;

  // inputs[0] = anchor, inputs[1] = positive, inputs[2..] = negatives
  std::vector<const FeatureVector*> inputs{&anchor, &positive};
  for (const auto& n : negatives) inputs.push_back(&n);
  for (const auto* x : inputs) {
    if (x->dim() != encoder.dim()) throw InvalidArgument("feature dim does not match encoder dim");
  }
  std::vector<Encoded> enc;
  enc.reserve(inputs.size());
  for (const auto* x : inputs) enc.push_back(encode(encoder, *x));

  const std::size_t k = inputs.size() - 1;  // similarity terms: positive + negatives
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i) s[i] = dot(enc[0].unit, enc[i + 1].unit) / temperature;
  // dL/ds_i, then dL/de for every embedding
  auto [loss, w] = detail::softmax_cross_entropy(s, 0);
  std::vector<std::vector<double>> ge(inputs.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& ei = enc[i + 1].unit;
    for (std::size_t j = 0; j < d; ++j) {
      ge[0][j] += w[i] * ei[j] / temperature;
      ge[i + 1][j] += w[i] * enc[0].unit[j] / temperature;
    }
  }

  // Back through e = u / |u| and u = P^T x: dL/dP = x (dL/du)^T.
  EncoderGradientTerms terms;
  terms.terms.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (enc[t].norm == 0.0) continue;  // fallback embedding is constant
    const auto& e = enc[t].unit;
    const double proj = dot(e, ge[t]);
    std::vector<double> gu(d);
    for (std::size_t j = 0; j < d; ++j) gu[j] = (ge[t][j] - e[j] * proj) / enc[t].norm;
    terms.terms.emplace_back(inputs[t], std::move(gu));
  }
  return {loss, std::move(terms)};
}

std::pair<double, EncoderGradient> contrastive_loss_grad(const DualEncoder& encoder, const FeatureVector& anchor,
                                                         const FeatureVector& positive,
                                                         std::span<const FeatureVector> negatives,
                                                         double temperature) {
  auto [loss, terms] = contrastive_loss_terms(encoder, anchor, positive, negatives, temperature);
  const std::size_t d = encoder.embed_dim;
  std::map<std::uint32_t, std::vector<double>> rows;
  for (const auto& [x, gu] : terms.terms) {
    for (const auto& [f, v] : x->entries()) {
      auto& row = rows[f];
      if (row.empty()) row.assign(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) row[j] += v * gu[j];
    }
  }
  EncoderGradient g;
  g.rows.reserve(rows.size());
  for (auto& [f, row] : rows) g.rows.emplace_back(f, std::move(row));
  return {loss, std::move(g)};
}

std::pair<double, EncoderGradient> contrastive_loss_grad(const DualEncoder& encoder, std::string_view anchor,
                                                         std::string_view positive,
                                                         std::span<const std::string> negatives,
                                                         double temperature) {
  std::vector<FeatureVector> neg;
  neg.reserve(negatives.size());
  for (const auto& n : negatives) neg.push_back(featurize(n, encoder.featurizer).normalized());
  return contrastive_loss_grad(encoder, featurize(anchor, encoder.featurizer).normalized(),
                               featurize(positive, encoder.featurizer).normalized(), neg, temperature);
}

PtIndex PtIndex::build(const DualEncoder& encoder, const Ontology& ontology, bool index_llts) {
  PtIndex idx;
  idx.embed_dim = encoder.embed_dim;
  idx.encoder_revision = encoder.revision;
  auto add = [&](const std::string& pt, std::string_view text) {
    const auto e = embed(encoder, text);
    idx.pt_order.push_back(pt);
    idx.rows.insert(idx.rows.end(), e.begin(), e.end());
  };
  for (const auto& c : ontology.concepts()) {
    add(c.pt_id, c.pt_text);
    if (!index_llts) continue;
    for (const std::size_t li : ontology.children(c.pt_id)) add(c.pt_id, ontology.llts()[li].llt_text);
  }
  return idx;
}

std::string retrieve(const PtIndex& index, const DualEncoder& encoder, std::string_view ae_text) {
  if (index.size() == 0) throw InvalidArgument("retrieval over an empty index");
  if (index.encoder_revision != encoder.revision || index.embed_dim != encoder.embed_dim) {
    throw InvalidArgument("index was built from a different encoder state");
  }
  const auto q = embed(encoder, ae_text);
  // Rows are grouped by ascending pt_id, so keeping the first strict maximum
  // resolves ties to the smallest pt_id.
  std::size_t best = 0;
  double best_score = dot(q, index.row(0));
  for (std::size_t i = 1; i < index.size(); ++i) {
    const double score = dot(q, index.row(i));
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return index.pt_order[best];
}

}  // namespace termnorm
