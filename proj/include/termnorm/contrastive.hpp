#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "termnorm/ontology.hpp"
#include "termnorm/sample.hpp"

namespace termnorm {

enum class Polarity { Positive, Negative };

/// Term-term training pair. Ids identify the source sample or LLT of each side;
/// `concept_id` is the shared PT for positive pairs and empty for negatives.
struct PairSample {
  std::string left;
  std::string right;
  Polarity polarity = Polarity::Positive;
  std::string left_id;
  std::string right_id;
  std::string concept_id;

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

inline constexpr const char* kRelatedOther = "RO";

/// Term-relation-term triple linking samples whose PTs share an HLT.
struct TripleSample {
  std::string left;
  std::string relation = kRelatedOther;
  std::string right;
  std::string left_id;
  std::string right_id;

  friend bool operator==(const TripleSample&, const TripleSample&) = default;
};

struct CoderOptions {
  /// When set, negatives are subsampled (seeded, order preserving) down to
  /// this many per positive pair. Unset means every negative pair is kept.
  std::optional<std::size_t> max_negatives_per_positive;
  std::uint64_t seed = 0;
};

struct CoderSamples {
  std::vector<PairSample> pairs;
  std::vector<TripleSample> triples;
  /// Different-label pairs not considered for a triple because a PT has no HLT.
  std::size_t skipped_triple_candidates = 0;
  /// PTs lacking an HLT that caused a skip, sorted.
  std::vector<std::string> pts_missing_hlt;
};

/// CODER-style samples over all unordered sample pairs (i < j after sorting by id):
/// equal labels give a positive pair, different labels a negative pair, and
/// different labels with a common HLT additionally give an (x, RO, y) triple.
CoderSamples coder_samples(const Dataset& dataset, const Ontology& ontology,
                           const CoderOptions& options = {});

/// SapBERT-style (llt_text, sample_text) positives for every LLT whose parent is the sample's label.
/// Ordered by sample id, then llt id.
std::vector<PairSample> sapbert_dataset_pairs(const Dataset& dataset, const Ontology& ontology);

/// SapBERT-style (llt, llt') positives for every unordered pair of LLTs with a common parent.
/// Ordered by pt id, then by llt id pair.
std::vector<PairSample> sapbert_op_pairs(const Ontology& ontology);

nlohmann::json to_json(const PairSample& p);
nlohmann::json to_json(const TripleSample& t);
void write_pairs(std::ostream& out, const std::vector<PairSample>& pairs);
void write_triples(std::ostream& out, const std::vector<TripleSample>& triples);

}  // namespace termnorm
