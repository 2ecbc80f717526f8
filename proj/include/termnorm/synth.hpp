#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "termnorm/config.hpp"
#include "termnorm/ontology.hpp"
#include "termnorm/random.hpp"
#include "termnorm/sample.hpp"

namespace termnorm {

/// Surface noise applied when rendering an LLT into an adverse-event text.
struct NoiseStyle {
  double typo_rate = 0.0;        // per word of >= 4 characters
  double paraphrase_rate = 0.0;  // per text
};

struct SynthConfig {
  std::size_t n_pt = 200;
  std::size_t children_min = 2;
  std::size_t children_max = 6;
  std::size_t n_hlt = 20;
  std::size_t n_samples = 2000;  // per dataset
  double zipf_exponent = 1.1;
  std::vector<NoiseStyle> noise_styles = {{0.10, 0.60}, {0.02, 0.10}};
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless n_pt >= 2, 1 <= children_min <= children_max,
  /// n_hlt >= 1, zipf_exponent > 0, rates in [0, 1] and at least one style.
  void validate() const;
};

/// Keys: n_pt, children_min, children_max, n_hlt, n_samples, zipf_exponent,
/// noise_styles ("typo:paraphrase,typo:paraphrase,..."), seed.
SynthConfig synth_config_from(const KeyValueConfig& cfg);

struct SynthBenchmark {
  Ontology ontology;
  std::vector<Dataset> datasets;  // one per noise style, named style_a, style_b, ...
};

/// Deterministic synthetic terminology plus one long-tailed dataset per noise style.
///
/// Every PT name is a distinct "<root> <noun>" or "<modifier> <root> <noun>"
/// built from a pseudo-word root. Its first LLT repeats the PT name; the others
/// apply one or two of: synonym substitution, "<noun> of <root>" reordering,
/// affixes, and adjectival root forms. Each dataset ranks the PTs by its own
/// seeded permutation, draws labels from Zipf(zipf_exponent) over the ranks and
/// renders each sample from a uniformly chosen LLT of the label, recording that
/// LLT in Sample::source_llt.
SynthBenchmark gen_synthetic(const SynthConfig& config);

/// Applies a style's noise to a text (exposed for tests).
std::string apply_noise(const std::string& text, const NoiseStyle& style, Rng& rng);

}  // namespace termnorm
