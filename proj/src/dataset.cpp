#include "termnorm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"
#include "termnorm/random.hpp"

namespace termnorm {

const Sample* Dataset::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const char* to_string(Category c) { return c == Category::In ? "IN" : "OUT"; }

Dataset parse_dataset(std::istream& in, const Ontology& ontology, std::string name,
                      const std::string& source) {
  Dataset ds;
  ds.name = std::move(name);
  std::unordered_map<std::string, std::size_t> seen;
  for_each_jsonl(in, source, [&](const json& row, std::size_t line) {
    Sample s;
    s.id = require_string(row, "id", source, line);
    s.text = require_string(row, "text", source, line);
    if (s.text.empty()) throw ValidationError(source, line, "empty text for sample " + s.id);
    if (!seen.emplace(s.id, line).second) {
      throw ValidationError(source, line, "duplicate sample id " + s.id + " (first on line " +
                                              std::to_string(seen[s.id]) + ")");
    }
    const bool has_pt = row.contains("pt_id");
    const bool has_llt = row.contains("llt_id");
    if (has_pt == has_llt) {
      throw ParseError(source, line, "exactly one of 'pt_id' or 'llt_id' is required");
    }
    if (has_pt) {
      s.label = require_string(row, "pt_id", source, line);
      if (ontology.find_concept(s.label) == nullptr) {
        throw UnknownIdError(source + ":" + std::to_string(line) + ": unknown pt_id " + s.label);
      }
    } else {
      const std::string llt = require_string(row, "llt_id", source, line);
      const LltEntry* entry = ontology.find_llt(llt);
      if (entry == nullptr) {
        throw UnknownIdError(source + ":" + std::to_string(line) + ": unknown llt_id " + llt);
      }
      s.label = entry->parent_pt_id;
      s.source_llt = llt;
    }
    if (row.contains("group")) s.group = require_string(row, "group", source, line);
    if (row.contains("source_llt")) s.source_llt = require_string(row, "source_llt", source, line);
    ds.samples.push_back(std::move(s));
  });
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const Ontology& ontology) {
  auto in = open_input(path);
  return parse_dataset(in, ontology, path.stem().string(), path.string());
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& s : dataset.samples) {
    json row = {{"id", s.id}, {"text", s.text}, {"pt_id", s.label}};
    if (s.group) row["group"] = *s.group;
    if (s.source_llt) row["source_llt"] = *s.source_llt;
    out << row.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream os;
  write_dataset(os, dataset);
  atomic_write(path, os.str());
}

Dataset subset(const Dataset& dataset, std::span<const std::string> ids) {
  std::unordered_set<std::string> keep(ids.begin(), ids.end());
  Dataset out;
  out.name = dataset.name;
  for (const auto& s : dataset.samples) {
    if (keep.contains(s.id)) out.samples.push_back(s);
  }
  return out;
}

Split make_split(const Dataset& dataset, std::uint64_t seed, double train_ratio) {
  const std::size_t n = dataset.size();
  if (n < 2) throw InvalidArgument("a split needs at least 2 samples");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InvalidArgument("train ratio must lie in (0, 1)");

  std::vector<const Sample*> sorted;
  sorted.reserve(n);
  for (const auto& s : dataset.samples) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < n; ++i) {
    if (sorted[i]->id == sorted[i - 1]->id) throw ValidationError("duplicate sample id " + sorted[i]->id);
  }

  // Units in order of first (smallest) member id.
  std::vector<std::vector<const Sample*>> units;
  std::unordered_map<std::string, std::size_t> unit_of_group;
  for (const Sample* s : sorted) {
    if (!s->group) {
      units.push_back({s});
      continue;
    }
    auto [it, inserted] = unit_of_group.emplace(*s->group, units.size());
    if (inserted) units.emplace_back();
    units[it->second].push_back(s);
  }

  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto target = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n) + 0.5));
  Split split;
  split.seed = seed;
  std::size_t k = 0;
  for (; k < order.size() && split.train.size() < target; ++k) {
    for (const Sample* s : units[order[k]]) split.train.push_back(s->id);
  }
  std::unordered_set<std::string> train_labels;
  for (std::size_t u = 0; u < k; ++u) {
    for (const Sample* s : units[order[u]]) train_labels.insert(s->label);
  }
  for (; k < order.size(); ++k) {
    for (const Sample* s : units[order[k]]) {
      split.test.push_back(s->id);
      split.category[s->id] = train_labels.contains(s->label) ? Category::In : Category::Out;
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::array<Split, 3> make_splits(const Dataset& dataset, const std::array<std::uint64_t, 3>& seeds,
                                 double train_ratio) {
  if (seeds[0] == seeds[1] || seeds[0] == seeds[2] || seeds[1] == seeds[2]) {
    throw InvalidArgument("split seeds must be distinct");
  }
  return {make_split(dataset, seeds[0], train_ratio), make_split(dataset, seeds[1], train_ratio),
          make_split(dataset, seeds[2], train_ratio)};
}

std::array<std::uint64_t, 3> split_seeds(std::uint64_t master_seed) {
  return {derive_seed(master_seed, 101), derive_seed(master_seed, 102), derive_seed(master_seed, 103)};
}

double out_fraction(const Split& split) {
  if (split.test.empty()) throw InvalidArgument("out_fraction of an empty test set");
  std::size_t out = 0;
  for (const auto& id : split.test) {
    auto it = split.category.find(id);
    if (it == split.category.end()) throw ValidationError("no category for test id " + id);
    if (it->second == Category::Out) ++out;
  }
  return static_cast<double>(out) / static_cast<double>(split.test.size());
}

json split_to_json(const Split& split) {
  json cat = json::object();
  for (const auto& [id, c] : split.category) cat[id] = to_string(c);
  return {{"seed", split.seed}, {"train", split.train}, {"test", split.test}, {"category", cat}};
}

Split split_from_json(const json& j, const std::string& source) {
  try {
    Split s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    for (const auto& [id, v] : j.at("category").items()) {
      const auto tag = v.get<std::string>();
      if (tag != "IN" && tag != "OUT") throw ParseError(source + ": bad category '" + tag + "'");
      s.category[id] = tag == "IN" ? Category::In : Category::Out;
    }
    for (const auto& id : s.test) {
      if (!s.category.contains(id)) throw ValidationError(source + ": no category for test id " + id);
    }
    if (s.category.size() != s.test.size()) {
      throw ValidationError(source + ": category keys must be exactly the test ids");
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
  } catch (const json::exception& e) {
    throw ParseError(source + ": malformed split: " + e.what());
  }
}

Split load_split(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return split_from_json(j, path.string());
}

void save_split(const std::filesystem::path& path, const Split& split) {
  atomic_write(path, split_to_json(split).dump(2) + "\n");
}

OverlapReport dataset_stats(std::span<const Dataset> datasets) {
  if (datasets.empty()) throw InvalidArgument("dataset_stats needs at least one dataset");
  OverlapReport r;
  std::map<std::string, std::set<std::string>> holders;  // pt -> dataset names
  for (const auto& ds : datasets) {
    if (r.pt_frequency.contains(ds.name)) throw InvalidArgument("repeated dataset name " + ds.name);
    r.dataset_names.push_back(ds.name);
    auto& freq = r.pt_frequency[ds.name];
    for (const auto& s : ds.samples) {
      ++freq[s.label];
      holders[s.label].insert(ds.name);
    }
    r.per_dataset_unique[ds.name] = 0;
  }
  r.union_size = holders.size();
  for (const auto& [pt, names] : holders) {
    if (names.size() == 1) ++r.per_dataset_unique[*names.begin()];
    else ++r.shared_two_or_more;
    if (names.size() == datasets.size()) ++r.shared_all;
  }
  return r;
}

json overlap_to_json(const OverlapReport& r) {
  json freq = json::object();
  for (const auto& [name, hist] : r.pt_frequency) {
    // Long-tail view: PTs by descending count, ties by id.
    std::vector<std::pair<std::string, std::size_t>> rows(hist.begin(), hist.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    json arr = json::array();
    for (const auto& [pt, count] : rows) arr.push_back({{"pt_id", pt}, {"count", count}});
    freq[name] = arr;
  }
  return {{"datasets", r.dataset_names},
          {"unique", r.per_dataset_unique},
          {"shared_two_or_more", r.shared_two_or_more},
          {"shared_all", r.shared_all},
          {"union", r.union_size},
          {"pt_frequency", freq}};
}

}  // namespace termnorm
