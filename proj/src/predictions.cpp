#include <algorithm>
#include <istream>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"
#include "termnorm/models.hpp"

namespace termnorm {

const char* model_kind_name(const AnyModel& model) {
  return std::holds_alternative<ClassifierModel>(model) ? "classifier" : "dual_encoder";
}

std::size_t PredictionSet::unresolved() const {
  return static_cast<std::size_t>(
      std::count_if(predicted.begin(), predicted.end(), [](const auto& kv) { return !kv.second.has_value(); }));
}

PredictionSet predict(const AnyModel& model, const Ontology& ontology, const Dataset& dataset,
                      std::span<const std::string> ids, const PredictOptions& options) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : dataset.samples) by_id.emplace(s.id, &s);
  std::vector<const Sample*> queries;
  queries.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw UnknownIdError("sample " + id + " not in dataset " + dataset.name);
    queries.push_back(it->second);
  }

  std::optional<PtIndex> index;
  if (const auto* enc = std::get_if<DualEncoder>(&model)) index = PtIndex::build(*enc, ontology, options.index_llts);
  auto predict_one = [&](const Sample& s) -> std::string {
    if (const auto* clf = std::get_if<ClassifierModel>(&model)) return classifier_predict(*clf, s.text);
    return retrieve(*index, std::get<DualEncoder>(model), s.text);
  };

  std::vector<std::string> out(queries.size());
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(queries.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = predict_one(*queries[i]);
  } else {
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < queries.size(); i += jobs) out[i] = predict_one(*queries[i]);
      });
    }
    for (auto& t : workers) t.join();
  }

  PredictionSet ps;
  for (std::size_t i = 0; i < queries.size(); ++i) ps.predicted[queries[i]->id] = std::move(out[i]);
  return ps;
}

void write_predictions(std::ostream& out, const PredictionSet& predictions) {
  for (const auto& [id, pt] : predictions.predicted) {
    json row = {{"id", id}, {"predicted", nullptr}};
    if (pt) row["predicted"] = *pt;
    out << row.dump() << '\n';
  }
}

PredictionSet parse_predictions(std::istream& in, const Ontology& ontology, const Split& split,
                                const std::string& source) {
  // Concepts are sorted by pt_id, so emplace keeps the smallest id for a duplicated text.
  std::unordered_map<std::string, std::string> by_text;
  for (const auto& c : ontology.concepts()) by_text.emplace(normalize_text(c.pt_text), c.pt_id);
  const std::unordered_map<std::string, Category> test(split.category.begin(), split.category.end());

  PredictionSet ps;
  for_each_jsonl(in, source, [&](const json& row, std::size_t line) {
    const std::string id = require_string(row, "id", source, line);
    if (!test.contains(id)) throw UnknownIdError(source + ":" + std::to_string(line) + ": id " + id + " not in the test split");
    auto it = row.find("predicted");
    if (it == row.end()) throw ParseError(source, line, "missing field 'predicted'");
    std::optional<std::string> resolved;
    if (it->is_string()) {
      const auto value = it->get<std::string>();
      if (ontology.find_concept(value) != nullptr) {
        resolved = value;
      } else if (auto hit = by_text.find(normalize_text(value)); hit != by_text.end()) {
        resolved = hit->second;
      }
    } else if (!it->is_null()) {
      throw ParseError(source, line, "'predicted' must be a string or null");
    }
    if (!ps.predicted.emplace(id, resolved).second) {
      throw ValidationError(source, line, "repeated prediction for id " + id);
    }
  });
  return ps;
}

PredictionSet ingest_predictions(const std::filesystem::path& path, const Ontology& ontology, const Split& split) {
  auto in = open_input(path);
  return parse_predictions(in, ontology, split, path.string());
}

std::string prompt_for(std::string_view text, PromptStyle style) {
  std::string out;
  if (style == PromptStyle::Gpt2) {
    out = "INPUT: ";
    out += text;
    out += "\nMEANING:";
  } else {
    out = "normalize: ";
    out += text;
  }
  return out;
}

std::string render_prompts(const Dataset& dataset, PromptStyle style) {
  std::string out;
  for (const auto& s : dataset.samples) {
    out += json{{"id", s.id}, {"prompt", prompt_for(s.text, style)}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace termnorm
