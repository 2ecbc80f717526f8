#include "termnorm/contrastive.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"
#include "termnorm/random.hpp"

namespace termnorm {

namespace {

std::vector<const Sample*> sorted_by_id(const Dataset& dataset) {
  std::vector<const Sample*> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples) out.push_back(&s);
  std::sort(out.begin(), out.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
  return out;
}

// Floyd's algorithm: `k` distinct values from [0, n), returned sorted.
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k, Rng& rng) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.uniform_index(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

CoderSamples coder_samples(const Dataset& dataset, const Ontology& ontology, const CoderOptions& options) {
  const auto samples = sorted_by_id(dataset);
  const std::size_t n = samples.size();
  std::vector<const Concept*> concepts(n);
  std::unordered_map<std::string, std::uint64_t> label_counts;
  for (std::size_t i = 0; i < n; ++i) {
    concepts[i] = &ontology.concept_of(samples[i]->label);
    ++label_counts[samples[i]->label];
  }

  std::uint64_t n_pos = 0;
  for (const auto& [label, k] : label_counts) n_pos += k * (k - 1) / 2;
  const std::uint64_t n_neg = static_cast<std::uint64_t>(n) * (n - (n > 0 ? 1 : 0)) / 2 - n_pos;

  // Negatives to keep, as ordinal positions among all negatives; empty optional keeps all.
  std::optional<std::vector<std::uint64_t>> keep;
  if (options.max_negatives_per_positive) {
    const std::uint64_t allowed = *options.max_negatives_per_positive * n_pos;
    if (allowed < n_neg) {
      Rng rng(options.seed);
      keep = sample_indices(n_neg, allowed, rng);
    }
  }

  CoderSamples out;
  std::set<std::string> missing;
  std::uint64_t neg_ordinal = 0;
  std::size_t keep_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Sample& a = *samples[i];
      const Sample& b = *samples[j];
      if (a.label == b.label) {
        out.pairs.push_back({a.text, b.text, Polarity::Positive, a.id, b.id, a.label});
        continue;
      }
      const std::uint64_t ord = neg_ordinal++;
      bool emit = true;
      if (keep) {
        emit = keep_pos < keep->size() && (*keep)[keep_pos] == ord;
        if (emit) ++keep_pos;
      }
      if (emit) out.pairs.push_back({a.text, b.text, Polarity::Negative, a.id, b.id, {}});

      const Concept& ca = *concepts[i];
      const Concept& cb = *concepts[j];
      if (!ca.hlt_id || !cb.hlt_id) {
        ++out.skipped_triple_candidates;
        if (!ca.hlt_id) missing.insert(ca.pt_id);
        if (!cb.hlt_id) missing.insert(cb.pt_id);
        continue;
      }
      if (*ca.hlt_id == *cb.hlt_id) out.triples.push_back({a.text, kRelatedOther, b.text, a.id, b.id});
    }
  }
  out.pts_missing_hlt.assign(missing.begin(), missing.end());
  return out;
}

std::vector<PairSample> sapbert_dataset_pairs(const Dataset& dataset, const Ontology& ontology) {
  std::vector<PairSample> out;
  for (const Sample* s : sorted_by_id(dataset)) {
    for (const std::size_t li : ontology.children(s->label)) {
      const LltEntry& l = ontology.llts()[li];
      out.push_back({l.llt_text, s->text, Polarity::Positive, l.llt_id, s->id, s->label});
    }
  }
  return out;
}

std::vector<PairSample> sapbert_op_pairs(const Ontology& ontology) {
  std::vector<PairSample> out;
  for (const auto& c : ontology.concepts()) {
    const auto kids = ontology.children(c.pt_id);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        const LltEntry& a = ontology.llts()[kids[i]];
        const LltEntry& b = ontology.llts()[kids[j]];
        out.push_back({a.llt_text, b.llt_text, Polarity::Positive, a.llt_id, b.llt_id, c.pt_id});
      }
    }
  }
  return out;
}

nlohmann::json to_json(const PairSample& p) {
  return {{"left", p.left},
          {"right", p.right},
          {"polarity", p.polarity == Polarity::Positive ? "positive" : "negative"}};
}

nlohmann::json to_json(const TripleSample& t) {
  return {{"left", t.left}, {"relation", t.relation}, {"right", t.right}};
}

void write_pairs(std::ostream& out, const std::vector<PairSample>& pairs) {
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

void write_triples(std::ostream& out, const std::vector<TripleSample>& triples) {
  for (const auto& t : triples) out << to_json(t).dump() << '\n';
}

}  // namespace termnorm
