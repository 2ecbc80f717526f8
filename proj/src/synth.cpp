#include "termnorm/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "termnorm/error.hpp"

namespace termnorm {

namespace {

constexpr std::array kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s",
                                "t", "v", "z", "br", "dr", "gl", "kr", "pl", "st", "th", "tr"};
constexpr std::array kVowels = {"a", "e", "i", "o", "u", "ae", "io", "ou"};
constexpr std::array kCodas = {"", "", "n", "r", "s", "l", "m", "x"};

struct WordEntry {
  const char* word;
  std::vector<const char*> synonyms;
};

const std::vector<WordEntry>& nouns() {
  static const std::vector<WordEntry> table = {
      {"pain", {"ache", "soreness", "hurting"}},   {"swelling", {"puffiness", "bloating"}},
      {"inflammation", {"irritation", "redness"}}, {"weakness", {"tiredness", "fatigue"}},
      {"disorder", {"problem", "trouble"}},        {"rash", {"spots", "hives"}},
      {"bleeding", {"blood loss", "haemorrhage"}}, {"spasm", {"cramp", "twitching"}},
      {"infection", {"bug", "infestation"}},       {"numbness", {"tingling", "no feeling"}},
      {"discharge", {"leakage", "oozing"}},        {"stiffness", {"tightness", "rigidity"}},
  };
  return table;
}

const std::vector<WordEntry>& modifiers() {
  static const std::vector<WordEntry> table = {
      {"acute", {"sudden", "sharp"}},          {"chronic", {"long-term", "constant"}},
      {"recurrent", {"repeated", "returning"}}, {"transient", {"temporary", "brief"}},
      {"localised", {"local", "spot"}},         {"generalised", {"widespread", "all over"}},
  };
  return table;
}

constexpr std::array kPrefixes = {"feeling of ", "episodes of ", "signs of ", "mild "};
constexpr std::array kSuffixes = {" nos", " symptoms", " aggravated"};
constexpr std::array kAdjSuffixes = {"al", "ic", "ous"};
constexpr std::array kFillers = {"really", "so", "very", "kinda", "bit of"};
constexpr std::array kCarriers = {"i have ", "got some ", "having ", "my ", "bad "};

template <typename Arr>
const char* pick(const Arr& arr, Rng& rng) {
  return arr[rng.uniform_index(arr.size())];
}

const char* pick(const std::vector<const char*>& v, Rng& rng) { return v[rng.uniform_index(v.size())]; }

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) {
    w += pick(kOnsets, rng);
    w += pick(kVowels, rng);
    if (i + 1 == syllables || rng.bernoulli(0.3)) w += pick(kCodas, rng);
  }
  return w;
}

std::vector<std::string> words_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct PtParts {
  std::string modifier;  // may be empty
  std::string root;
  std::size_t noun = 0;
  std::size_t mod = 0;

  std::string name() const {
    return (modifier.empty() ? "" : modifier + " ") + root + " " + nouns()[noun].word;
  }
};

// One LLT variant of a PT: one or two transforms applied to its parts.
std::string make_variant(const PtParts& pt, Rng& rng) {
  std::string modifier = pt.modifier;
  std::string root = pt.root;
  std::string noun = nouns()[pt.noun].word;
  bool reorder = false;
  std::string prefix, suffix;

  const std::size_t n_ops = 1 + rng.uniform_index(2);
  for (std::size_t k = 0; k < n_ops; ++k) {
    switch (rng.uniform_index(4)) {
      case 0:  // synonym substitution
        if (!modifier.empty() && rng.bernoulli(0.4)) {
          modifier = pick(modifiers()[pt.mod].synonyms, rng);
        } else {
          noun = pick(nouns()[pt.noun].synonyms, rng);
        }
        break;
      case 1:
        reorder = true;
        break;
      case 2:
        if (rng.bernoulli(0.5)) prefix = pick(kPrefixes, rng);
        else suffix = pick(kSuffixes, rng);
        break;
      default:
        root += pick(kAdjSuffixes, rng);
        break;
    }
  }
  std::string body;
  if (reorder) {
    body = (modifier.empty() ? "" : modifier + " ") + noun + " of " + root;
  } else {
    body = (modifier.empty() ? "" : modifier + " ") + root + " " + noun;
  }
  return prefix + body + suffix;
}

std::string synonym_swap(const std::string& text, Rng& rng) {
  auto words = words_of(text);
  std::vector<std::pair<std::size_t, const WordEntry*>> candidates;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (const auto* table : {&nouns(), &modifiers()}) {
      for (const auto& e : *table) {
        if (words[i] == e.word) candidates.emplace_back(i, &e);
      }
    }
  }
  if (candidates.empty()) return text;
  const auto& [pos, entry] = candidates[rng.uniform_index(candidates.size())];
  words[pos] = pick(entry->synonyms, rng);
  return join(words);
}

std::string typo(const std::string& word, Rng& rng) {
  std::string w = word;
  const std::size_t i = rng.uniform_index(w.size() - 1);
  if (rng.bernoulli(0.5)) std::swap(w[i], w[i + 1]);
  else w.erase(i, 1);
  return w;
}

std::vector<double> zipf_cdf(std::size_t n, double s) {
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -s);
    cdf[r] = acc;
  }
  for (double& c : cdf) c /= acc;
  return cdf;
}

std::string dataset_name(std::size_t i) {
  std::string suffix;
  do {
    suffix.insert(suffix.begin(), static_cast<char>('a' + i % 26));
    i = i / 26;
  } while (i-- > 0);
  return "style_" + suffix;
}

std::string padded_id(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_pt < 2) throw InvalidArgument("n_pt must be >= 2");
  if (children_min < 1 || children_max < children_min) {
    throw InvalidArgument("children range must satisfy 1 <= min <= max");
  }
  if (n_hlt < 1) throw InvalidArgument("n_hlt must be >= 1");
  if (!(zipf_exponent > 0.0)) throw InvalidArgument("zipf_exponent must be > 0");
  if (noise_styles.empty()) throw InvalidArgument("at least one noise style is required");
  for (const auto& s : noise_styles) {
    if (s.typo_rate < 0 || s.typo_rate > 1 || s.paraphrase_rate < 0 || s.paraphrase_rate > 1) {
      throw InvalidArgument("noise rates must lie in [0, 1]");
    }
  }
}

SynthConfig synth_config_from(const KeyValueConfig& cfg) {
  SynthConfig c;
  auto size = [&](const char* key, std::size_t fallback) {
    const auto v = cfg.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw InvalidArgument(std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.n_pt = size("n_pt", c.n_pt);
  c.children_min = size("children_min", c.children_min);
  c.children_max = size("children_max", c.children_max);
  c.n_hlt = size("n_hlt", c.n_hlt);
  c.n_samples = size("n_samples", c.n_samples);
  c.zipf_exponent = cfg.get_double("zipf_exponent", c.zipf_exponent);
  c.seed = cfg.get_u64("seed", c.seed);
  if (cfg.contains("noise_styles")) {
    c.noise_styles.clear();
    KeyValueConfig scratch;
    std::istringstream list(cfg.get_string("noise_styles", ""));
    for (std::string item; std::getline(list, item, ',');) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw InvalidArgument("noise style must be 'typo:paraphrase', got '" + item + "'");
      scratch.set("typo", item.substr(0, colon));
      scratch.set("paraphrase", item.substr(colon + 1));
      c.noise_styles.push_back({scratch.get_double("typo", 0), scratch.get_double("paraphrase", 0)});
    }
  }
  return c;
}

std::string apply_noise(const std::string& text, const NoiseStyle& style, Rng& rng) {
  std::string out = text;
  if (rng.bernoulli(style.paraphrase_rate)) {
    switch (rng.uniform_index(3)) {
      case 0: {
        auto words = words_of(out);
        const std::size_t at = rng.uniform_index(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), pick(kFillers, rng));
        out = join(words);
        break;
      }
      case 1:
        out = synonym_swap(out, rng);
        break;
      default:
        out = pick(kCarriers, rng) + out;
        break;
    }
  }
  auto words = words_of(out);
  for (auto& w : words) {
    if (w.size() >= 4 && rng.bernoulli(style.typo_rate)) w = typo(w, rng);
  }
  return join(words);
}

SynthBenchmark gen_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 1));

  // HLT groups.
  std::set<std::string> used_roots;
  auto fresh_root = [&](std::size_t syllables) {
    for (;;) {
      auto w = pseudo_word(rng, syllables);
      if (used_roots.insert(w).second) return w;
    }
  };
  std::vector<std::pair<std::string, std::string>> hlts;
  for (std::size_t h = 0; h < config.n_hlt; ++h) {
    hlts.emplace_back(padded_id("H", h + 1, 3), fresh_root(2) + " conditions");
  }

  std::vector<Concept> concepts;
  std::vector<LltEntry> llts;
  std::set<std::string> pt_names;
  std::size_t llt_counter = 0;
  for (std::size_t p = 0; p < config.n_pt; ++p) {
    PtParts parts;
    do {
      parts.root = fresh_root(2 + rng.uniform_index(2));
      parts.noun = rng.uniform_index(nouns().size());
      parts.modifier.clear();
      if (rng.bernoulli(0.5)) {
        parts.mod = rng.uniform_index(modifiers().size());
        parts.modifier = modifiers()[parts.mod].word;
      }
    } while (!pt_names.insert(parts.name()).second);

    const auto& hlt = hlts[rng.uniform_index(hlts.size())];
    const std::string pt_id = padded_id("P", p + 1, 5);
    concepts.push_back({pt_id, parts.name(), hlt.first, hlt.second});

    const std::size_t k =
        config.children_min + rng.uniform_index(config.children_max - config.children_min + 1);
    std::set<std::string> variants{parts.name()};
    std::vector<std::string> ordered{parts.name()};
    for (int attempts = 0; ordered.size() < k && attempts < 50; ++attempts) {
      auto v = make_variant(parts, rng);
      if (variants.insert(v).second) ordered.push_back(std::move(v));
    }
    for (const auto& text : ordered) llts.push_back({padded_id("L", ++llt_counter, 6), text, pt_id});
  }

  SynthBenchmark out;
  out.ontology = Ontology(std::move(concepts), std::move(llts), "synthetic-" + std::to_string(config.seed));
  const Ontology& onto = out.ontology;

  const auto cdf = zipf_cdf(config.n_pt, config.zipf_exponent);
  for (std::size_t d = 0; d < config.noise_styles.size(); ++d) {
    Rng drng(derive_seed(config.seed, 100 + d));
    std::vector<std::size_t> rank_to_pt(config.n_pt);
    for (std::size_t i = 0; i < rank_to_pt.size(); ++i) rank_to_pt[i] = i;
    drng.shuffle(rank_to_pt);

    Dataset ds;
    ds.name = dataset_name(d);
    ds.samples.reserve(config.n_samples);
    for (std::size_t i = 0; i < config.n_samples; ++i) {
      const double u = drng.uniform01();
      const auto rank = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const Concept& c = onto.concepts()[rank_to_pt[std::min(rank, cdf.size() - 1)]];
      const auto kids = onto.children(c.pt_id);
      const LltEntry& l = onto.llts()[kids[drng.uniform_index(kids.size())]];
      Sample s;
      s.id = ds.name + "-" + padded_id("", i + 1, 5);
      s.text = apply_noise(l.llt_text, config.noise_styles[d], drng);
      s.label = c.pt_id;
      s.source_llt = l.llt_id;
      ds.samples.push_back(std::move(s));
    }
    out.datasets.push_back(std::move(ds));
  }
  return out;
}

}  // namespace termnorm
