#include <algorithm>
#include <cmath>

#include "termnorm/error.hpp"
#include "termnorm/models.hpp"
#include "termnorm/random.hpp"
#include "softmax.hpp"

namespace termnorm {

ClassifierModel ClassifierModel::init(const Ontology& ontology, const FeaturizerConfig& featurizer,
                                      std::uint64_t seed) {
  validate(featurizer);
  ClassifierModel m;
  m.featurizer = featurizer;
  m.pt_order.reserve(ontology.pt_count());
  for (const auto& c : ontology.concepts()) m.pt_order.push_back(c.pt_id);
  const std::size_t classes = m.pt_order.size();
  m.weights.resize(static_cast<std::size_t>(featurizer.dim) * classes);
  m.bias.resize(classes);
  Rng rng(seed);
  for (double& w : m.weights) w = rng.uniform(-0.01, 0.01);
  for (double& b : m.bias) b = rng.uniform(-0.01, 0.01);
  return m;
}

double ClassifierGradient::weight(std::uint32_t feature, std::size_t cls) const {
  for (const auto& [f, row] : rows) {
    if (f == feature) return row[cls];
  }
  return 0.0;
}

FeatureVector classifier_input(const ClassifierModel& model, std::string_view text) {
  return featurize(text, model.featurizer).normalized();
}

std::vector<double> classifier_forward(const ClassifierModel& model, const FeatureVector& x) {
  if (x.dim() != model.dim()) throw InvalidArgument("feature dim does not match classifier dim");
  const std::size_t classes = model.num_classes();
  std::vector<double> logits = model.bias;
  for (const auto& [f, v] : x.entries()) {
    const double* row = model.weights.data() + static_cast<std::size_t>(f) * classes;
    for (std::size_t c = 0; c < classes; ++c) logits[c] += v * row[c];
  }
  return logits;
}

std::pair<double, ClassifierGradient> classifier_loss_grad(const ClassifierModel& model, const FeatureVector& x,
                                                           std::size_t label_index) {
  const std::size_t classes = model.num_classes();
  if (label_index >= classes) throw InvalidArgument("label index out of range");
  const auto logits = classifier_forward(model, x);

  auto ce = detail::softmax_cross_entropy(logits, label_index);
  const double loss = ce.loss;

  ClassifierGradient g;
  g.bias = std::move(ce.grad);
  g.rows.reserve(x.entries().size());
  for (const auto& [f, v] : x.entries()) {
    std::vector<double> row(classes);
    for (std::size_t c = 0; c < classes; ++c) row[c] = v * g.bias[c];
    g.rows.emplace_back(f, std::move(row));
  }
  return {loss, std::move(g)};
}

std::size_t argmax_class(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("argmax over no classes");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

std::string classifier_predict(const ClassifierModel& model, std::string_view text) {
  const auto logits = classifier_forward(model, classifier_input(model, text));
  return model.pt_order[argmax_class(logits)];
}

}  // namespace termnorm
