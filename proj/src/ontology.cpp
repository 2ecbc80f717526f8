#include "termnorm/ontology.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"

namespace termnorm {

namespace {

constexpr std::string_view kHeader = "llt_id\tllt_text\tpt_id\tpt_text\thlt_id\thlt_text";
constexpr std::string_view kVersionPrefix = "#version\t";

std::optional<std::string> optional_field(std::string_view v) {
  if (v.empty()) return std::nullopt;
  return std::string(v);
}

void check_writable(const std::string& field) {
  if (field.find_first_of("\t\n\r") != std::string::npos) {
    throw ValidationError("ontology field contains a tab or newline: '" + field + "'");
  }
}

}  // namespace

Ontology::Ontology(std::vector<Concept> concepts, std::vector<LltEntry> llts, std::string version_tag)
    : concepts_(std::move(concepts)), llts_(std::move(llts)), version_tag_(std::move(version_tag)) {
  std::sort(concepts_.begin(), concepts_.end(),
            [](const Concept& a, const Concept& b) { return a.pt_id < b.pt_id; });
  std::sort(llts_.begin(), llts_.end(),
            [](const LltEntry& a, const LltEntry& b) { return a.llt_id < b.llt_id; });

  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    const Concept& c = concepts_[i];
    if (c.pt_id.empty()) throw ValidationError("concept with empty pt_id");
    if (c.pt_text.empty()) throw ValidationError("concept " + c.pt_id + " has empty pt_text");
    if (c.hlt_id.has_value() != c.hlt_text.has_value()) {
      throw ValidationError("concept " + c.pt_id + ": hlt_id and hlt_text must be both present or both absent");
    }
    if (!pt_pos_.emplace(c.pt_id, i).second) throw ValidationError("duplicate pt_id " + c.pt_id);
  }
  children_.resize(concepts_.size());
  for (std::size_t i = 0; i < llts_.size(); ++i) {
    const LltEntry& l = llts_[i];
    if (l.llt_id.empty()) throw ValidationError("LLT with empty llt_id");
    if (l.llt_text.empty()) throw ValidationError("LLT " + l.llt_id + " has empty llt_text");
    if (!llt_pos_.emplace(l.llt_id, i).second) throw ValidationError("duplicate llt_id " + l.llt_id);
    auto parent = pt_pos_.find(l.parent_pt_id);
    if (parent == pt_pos_.end()) {
      throw ValidationError("LLT " + l.llt_id + " has dangling parent " + l.parent_pt_id);
    }
    children_[parent->second].push_back(i);
  }
}

const Concept* Ontology::find_concept(std::string_view pt_id) const {
  auto it = pt_pos_.find(std::string(pt_id));
  return it == pt_pos_.end() ? nullptr : &concepts_[it->second];
}

const LltEntry* Ontology::find_llt(std::string_view llt_id) const {
  auto it = llt_pos_.find(std::string(llt_id));
  return it == llt_pos_.end() ? nullptr : &llts_[it->second];
}

const Concept& Ontology::concept_of(std::string_view pt_id) const {
  const Concept* c = find_concept(pt_id);
  if (c == nullptr) throw UnknownIdError("unknown pt_id " + std::string(pt_id));
  return *c;
}

std::size_t Ontology::pt_index(std::string_view pt_id) const {
  auto it = pt_pos_.find(std::string(pt_id));
  if (it == pt_pos_.end()) throw UnknownIdError("unknown pt_id " + std::string(pt_id));
  return it->second;
}

std::span<const std::size_t> Ontology::children(std::string_view pt_id) const {
  return children_[pt_index(pt_id)];
}

const std::string& parent_of(const Ontology& ontology, std::string_view llt_id) {
  const LltEntry* l = ontology.find_llt(llt_id);
  if (l == nullptr) throw UnknownIdError("unknown llt_id " + std::string(llt_id));
  return l->parent_pt_id;
}

// Row kinds:
//   full LLT row       llt_id, llt_text, pt_id, pt_text[, hlt_id, hlt_text]
//   LLT reference row  llt_id, llt_text, pt_id, <empty>  (PT defined on another row)
//   PT-only row        <empty>, <empty>, pt_id, pt_text[, hlt...]  (PT without LLTs)
Ontology parse_ontology(std::istream& in, const std::string& source) {
  struct PtDef {
    Concept pt;
    std::size_t line;
  };
  std::map<std::string, PtDef> pts;
  std::map<std::string, std::size_t> pt_refs;  // pt_id -> first referencing line
  std::vector<LltEntry> llts;
  std::map<std::string, std::size_t> llt_lines;
  std::string version;

  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line.empty()) continue;
      if (line.rfind(kVersionPrefix, 0) == 0) {
        version = line.substr(kVersionPrefix.size());
        continue;
      }
      if (line != kHeader) throw ParseError(source, lineno, "expected header row");
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 6 && cols.size() != 4) {
      throw ParseError(source, lineno, "expected 6 tab-separated columns, got " + std::to_string(cols.size()));
    }
    const std::string pt_id(cols[2]);
    if (pt_id.empty()) throw ParseError(source, lineno, "empty pt_id");
    const std::string_view hlt_id = cols.size() == 6 ? cols[4] : std::string_view{};
    const std::string_view hlt_text = cols.size() == 6 ? cols[5] : std::string_view{};

    if (cols[0].empty()) {
      if (!cols[1].empty()) throw ParseError(source, lineno, "llt_text given without llt_id");
      if (cols[3].empty()) throw ParseError(source, lineno, "PT-only row needs pt_text");
    } else {
      if (cols[1].empty()) throw ValidationError(source, lineno, "empty llt_text");
      const std::string llt_id(cols[0]);
      if (!llt_lines.emplace(llt_id, lineno).second) {
        throw ValidationError(source, lineno, "duplicate llt_id " + llt_id +
                                                  " (first on line " + std::to_string(llt_lines[llt_id]) + ")");
      }
      llts.push_back({llt_id, std::string(cols[1]), pt_id});
      pt_refs.emplace(pt_id, lineno);
    }

    if (cols[3].empty()) {
      if (!hlt_id.empty() || !hlt_text.empty()) {
        throw ParseError(source, lineno, "HLT fields given on a row without pt_text");
      }
      continue;
    }
    if (hlt_id.empty() != hlt_text.empty()) {
      throw ValidationError(source, lineno, "hlt_id and hlt_text must be both present or both empty");
    }
    Concept c{pt_id, std::string(cols[3]), optional_field(hlt_id), optional_field(hlt_text)};
    auto [it, inserted] = pts.emplace(pt_id, PtDef{c, lineno});
    if (!inserted && !(it->second.pt == c)) {
      throw ValidationError(source, lineno, "inconsistent data for pt_id " + pt_id +
                                                " (first defined on line " + std::to_string(it->second.line) + ")");
    }
  }

  for (const auto& [pt_id, ref_line] : pt_refs) {
    if (!pts.contains(pt_id)) {
      throw ValidationError(source, ref_line, "dangling parent_pt_id " + pt_id);
    }
  }

  std::vector<Concept> concepts;
  concepts.reserve(pts.size());
  for (auto& [id, def] : pts) concepts.push_back(std::move(def.pt));
  try {
    return Ontology(std::move(concepts), std::move(llts), std::move(version));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

Ontology load_ontology(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_ontology(in, path.string());
}

void write_ontology(std::ostream& out, const Ontology& ontology) {
  if (!ontology.version_tag().empty()) {
    check_writable(ontology.version_tag());
    out << kVersionPrefix << ontology.version_tag() << '\n';
  }
  out << kHeader << '\n';
  auto write_pt = [&](const Concept& c) {
    check_writable(c.pt_id);
    check_writable(c.pt_text);
    out << c.pt_id << '\t' << c.pt_text << '\t' << c.hlt_id.value_or("") << '\t' << c.hlt_text.value_or("");
  };
  for (const auto& l : ontology.llts()) {
    check_writable(l.llt_id);
    check_writable(l.llt_text);
    out << l.llt_id << '\t' << l.llt_text << '\t';
    write_pt(ontology.concept_of(l.parent_pt_id));
    out << '\n';
  }
  for (const auto& c : ontology.concepts()) {
    if (!ontology.children(c.pt_id).empty()) continue;
    out << "\t\t";
    write_pt(c);
    out << '\n';
  }
}

void save_ontology(const std::filesystem::path& path, const Ontology& ontology) {
  std::ostringstream os;
  write_ontology(os, ontology);
  atomic_write(path, os.str());
}

Dataset build_op_corpus(const Ontology& ontology) {
  Dataset out;
  out.name = "ontology";
  out.samples.reserve(ontology.llt_count());
  for (const auto& l : ontology.llts()) {
    out.samples.push_back(Sample{l.llt_id, l.llt_text, l.parent_pt_id, std::nullopt, l.llt_id});
  }
  return out;
}

}  // namespace termnorm
