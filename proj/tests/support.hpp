// Fixtures and random instance generators shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "termnorm/ontology.hpp"
#include "termnorm/random.hpp"
#include "termnorm/sample.hpp"

namespace testing {

using namespace termnorm;

// Two PTs under one HLT, three LLTs.
inline const char* kToyOntologyTsv =
    "llt_id\tllt_text\tpt_id\tpt_text\thlt_id\thlt_text\n"
    "weakness\tweakness\tasthenia\tasthenia\tasthenic\tAsthenic conditions\n"
    "loss of energy\tloss of energy\tasthenia\tasthenia\tasthenic\tAsthenic conditions\n"
    "feeling unwell\tfeeling unwell\tmalaise\tmalaise\tasthenic\tAsthenic conditions\n";

inline Ontology toy_ontology() {
  std::istringstream in(kToyOntologyTsv);
  return parse_ontology(in, "toy");
}

// The three adverse events of the worked contrastive example, ids ordered as listed there.
inline Dataset appendix_b_dataset() {
  Dataset ds;
  ds.name = "appendix_b";
  ds.samples = {{"s1", "weak knees", "asthenia", {}, {}},
                {"s2", "zap me of all energy", "asthenia", {}, {}},
                {"s3", "feel like crap", "malaise", {}, {}}};
  return ds;
}

struct RandomOntologySpec {
  std::size_t max_pt = 4;
  std::size_t max_hlt = 2;
  std::size_t max_children = 3;
  std::size_t min_children = 0;
  double missing_hlt = 0.2;  // probability that a PT has no HLT
};

inline std::string pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

inline std::string random_word(Rng& rng, std::size_t min_len = 1, std::size_t max_len = 6,
                               const std::string& alphabet = "abcdefgh") {
  const std::size_t len = min_len + rng.uniform_index(max_len - min_len + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.uniform_index(alphabet.size())];
  return w;
}

inline Ontology random_ontology(Rng& rng, const RandomOntologySpec& spec = {}) {
  const std::size_t n_pt = 1 + rng.uniform_index(spec.max_pt);
  const std::size_t n_hlt = 1 + rng.uniform_index(spec.max_hlt);
  std::vector<Concept> concepts;
  std::vector<LltEntry> llts;
  std::size_t next_llt = 0;
  for (std::size_t p = 0; p < n_pt; ++p) {
    Concept c;
    c.pt_id = "P" + pad(p, 3);
    c.pt_text = "pt " + random_word(rng);
    if (!rng.bernoulli(spec.missing_hlt)) {
      const std::size_t h = rng.uniform_index(n_hlt);
      c.hlt_id = "H" + pad(h, 2);
      c.hlt_text = "group " + std::to_string(h);
    }
    const std::size_t k = spec.min_children + rng.uniform_index(spec.max_children - spec.min_children + 1);
    for (std::size_t i = 0; i < k; ++i) {
      llts.push_back({"L" + pad(next_llt++, 4), random_word(rng, 2, 8), c.pt_id});
    }
    concepts.push_back(std::move(c));
  }
  // Shuffle the input order; the ontology must not depend on it.
  rng.shuffle(concepts);
  rng.shuffle(llts);
  return Ontology(std::move(concepts), std::move(llts), "random");
}

/// Samples labeled uniformly over the ontology's PTs; ids are shuffled
/// relative to the sample order.
inline Dataset random_dataset(Rng& rng, const Ontology& onto, std::size_t n, double group_prob = 0.0,
                              std::size_t n_groups = 3) {
  Dataset ds;
  ds.name = "random";
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  rng.shuffle(ids);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + pad(ids[i], 4);
    s.text = random_word(rng, 1, 10) + " " + random_word(rng);
    s.label = onto.concepts()[rng.uniform_index(onto.pt_count())].pt_id;
    if (group_prob > 0.0 && rng.bernoulli(group_prob)) s.group = "g" + std::to_string(rng.uniform_index(n_groups));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("termnorm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace testing
