#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "termnorm/sample.hpp"

namespace termnorm {

/// A preferred term, optionally with its parent group (HLT).
struct Concept {
  std::string pt_id;
  std::string pt_text;
  std::optional<std::string> hlt_id;
  std::optional<std::string> hlt_text;

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// A lowest-level term. Every LLT has exactly one parent PT.
struct LltEntry {
  std::string llt_id;
  std::string llt_text;
  std::string parent_pt_id;

  friend bool operator==(const LltEntry&, const LltEntry&) = default;
};

/// Immutable two-level (plus optional HLT) terminology.
///
/// Concepts are kept sorted by pt_id and LLTs by llt_id, so every iteration
/// order exposed here is deterministic.
class Ontology {
 public:
  Ontology() = default;
  /// Validates all invariants; throws ValidationError on duplicates, dangling
  /// parents, empty texts or half-specified HLT fields.
  Ontology(std::vector<Concept> concepts, std::vector<LltEntry> llts, std::string version_tag = {});

  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<LltEntry>& llts() const { return llts_; }
  const std::string& version_tag() const { return version_tag_; }

  std::size_t pt_count() const { return concepts_.size(); }
  std::size_t llt_count() const { return llts_.size(); }

  const Concept* find_concept(std::string_view pt_id) const;
  const LltEntry* find_llt(std::string_view llt_id) const;
  /// Throws UnknownIdError.
  const Concept& concept_of(std::string_view pt_id) const;
  /// Position of pt_id in concepts(); throws UnknownIdError.
  std::size_t pt_index(std::string_view pt_id) const;
  /// Indices into llts() of the children of pt_id, ascending by llt_id.
  std::span<const std::size_t> children(std::string_view pt_id) const;

  friend bool operator==(const Ontology& a, const Ontology& b) {
    return a.version_tag_ == b.version_tag_ && a.concepts_ == b.concepts_ && a.llts_ == b.llts_;
  }

 private:
  std::vector<Concept> concepts_;
  std::vector<LltEntry> llts_;
  std::string version_tag_;
  std::unordered_map<std::string, std::size_t> pt_pos_;
  std::unordered_map<std::string, std::size_t> llt_pos_;
  std::vector<std::vector<std::size_t>> children_;
};

/// Parent PT id of an LLT. Throws UnknownIdError.
const std::string& parent_of(const Ontology& ontology, std::string_view llt_id);

/// Reads the tab-separated ontology format. `source` names the input in diagnostics.
Ontology parse_ontology(std::istream& in, const std::string& source = "<ontology>");
Ontology load_ontology(const std::filesystem::path& path);
void write_ontology(std::ostream& out, const Ontology& ontology);
void save_ontology(const std::filesystem::path& path, const Ontology& ontology);

/// Ontology-pretraining corpus: one (llt_text -> parent PT) sample per LLT, ordered by llt_id.
Dataset build_op_corpus(const Ontology& ontology);

}  // namespace termnorm
