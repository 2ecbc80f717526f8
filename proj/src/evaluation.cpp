#include "termnorm/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "termnorm/error.hpp"

namespace termnorm {

namespace {

const std::vector<std::string>& metric_fields() {
  static const std::vector<std::string> fields = {
      "accuracy_in", "accuracy_out", "accuracy_overall", "f1_in", "f1_out", "f1_overall",
      "support_in",  "support_out",  "unresolved"};
  return fields;
}

std::optional<double> field_value(const Metrics& m, const std::string& field) {
  if (field == "accuracy_in") return m.accuracy_in;
  if (field == "accuracy_out") return m.accuracy_out;
  if (field == "accuracy_overall") return m.accuracy_overall;
  if (field == "f1_in") return m.f1_in;
  if (field == "f1_out") return m.f1_out;
  if (field == "f1_overall") return m.f1_overall;
  if (field == "support_in") return static_cast<double>(m.support_in);
  if (field == "support_out") return static_cast<double>(m.support_out);
  if (field == "unresolved") return static_cast<double>(m.unresolved);
  throw InvalidArgument("unknown metric field " + field);
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

}  // namespace

SubsetScore score_subset(std::span<const std::string> gold, std::span<const std::optional<std::string>> predicted) {
  if (gold.empty()) throw InvalidArgument("scoring an empty subset");
  if (gold.size() != predicted.size()) throw InvalidArgument("gold and prediction sizes differ");
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> per_class;
  for (const auto& g : gold) per_class.emplace(g, Counts{});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool hit = predicted[i] && *predicted[i] == gold[i];
    if (hit) {
      ++correct;
      ++per_class[gold[i]].tp;
      continue;
    }
    ++per_class[gold[i]].fn;
    if (predicted[i]) {
      auto it = per_class.find(*predicted[i]);
      if (it != per_class.end()) ++it->second.fp;
    }
  }
  double f1_sum = 0.0;
  for (const auto& [cls, c] : per_class) {
    // 2PR/(P+R) == 2tp/(2tp+fp+fn); zero when tp == 0
    if (c.tp > 0) f1_sum += 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  }
  return {static_cast<double>(correct) / static_cast<double>(gold.size()),
          f1_sum / static_cast<double>(per_class.size())};
}

Metrics evaluate(const PredictionSet& predictions, const Split& split, const Dataset& gold) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : gold.samples) by_id.emplace(s.id, &s);
  for (const auto& [id, p] : predictions.predicted) {
    if (!split.category.contains(id)) throw UnknownIdError("prediction for id " + id + " outside the test split");
  }

  std::vector<std::string> gold_in, gold_out, gold_all;
  std::vector<std::optional<std::string>> pred_in, pred_out, pred_all;
  Metrics m;
  for (const auto& id : split.test) {
    auto s = by_id.find(id);
    if (s == by_id.end()) throw UnknownIdError("test id " + id + " not in dataset " + gold.name);
    auto p = predictions.predicted.find(id);
    if (p == predictions.predicted.end()) throw ValidationError("missing prediction for test id " + id);
    auto cat = split.category.find(id);
    if (cat == split.category.end()) throw ValidationError("no category for test id " + id);
    if (!p->second) ++m.unresolved;
    gold_all.push_back(s->second->label);
    pred_all.push_back(p->second);
    if (cat->second == Category::In) {
      gold_in.push_back(s->second->label);
      pred_in.push_back(p->second);
    } else {
      gold_out.push_back(s->second->label);
      pred_out.push_back(p->second);
    }
  }
  m.support_in = gold_in.size();
  m.support_out = gold_out.size();
  if (!gold_in.empty()) {
    const auto sc = score_subset(gold_in, pred_in);
    m.accuracy_in = sc.accuracy;
    m.f1_in = sc.macro_f1;
  }
  if (!gold_out.empty()) {
    const auto sc = score_subset(gold_out, pred_out);
    m.accuracy_out = sc.accuracy;
    m.f1_out = sc.macro_f1;
  }
  if (!gold_all.empty()) {
    const auto sc = score_subset(gold_all, pred_all);
    m.f1_overall = sc.macro_f1;
    m.accuracy_overall = sc.accuracy;
    if (m.accuracy_in && m.accuracy_out) {
      // Same expression as the weighted-mean identity, so it holds bit for bit.
      const auto n_in = static_cast<double>(m.support_in);
      const auto n_out = static_cast<double>(m.support_out);
      m.accuracy_overall = (n_in * *m.accuracy_in + n_out * *m.accuracy_out) / (n_in + n_out);
    }
  }
  return m;
}

AggregateReport aggregate(std::span<const Metrics> metrics) {
  if (metrics.size() != 3) throw InvalidArgument("aggregate needs exactly three split results");
  AggregateReport r;
  std::copy(metrics.begin(), metrics.end(), r.splits.begin());
  for (const auto& field : metric_fields()) {
    std::vector<double> values;
    for (const auto& m : metrics) {
      if (auto v = field_value(m, field)) values.push_back(*v);
    }
    AggregateStat st;
    st.n_defined = values.size();
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / static_cast<double>(values.size());
      st.mean = mean;
      if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        st.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
    }
    r.stats[field] = st;
  }
  return r;
}

const AggregateReport& CrossMatrix::cell(const std::string& train, const std::string& test) const {
  std::size_t r = names.size(), c = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == train) r = i;
    if (names[i] == test) c = i;
  }
  if (r == names.size() || c == names.size()) throw UnknownIdError("no cross-matrix cell " + train + "/" + test);
  return cells[r][c];
}

CrossMatrix cross_matrix(const ModelSource& models, std::span<const Dataset> datasets,
                         const std::map<std::string, std::array<Split, 3>>& splits, const Ontology& ontology,
                         const PredictOptions& options) {
  const std::size_t n = datasets.size();
  for (const auto& ds : datasets) {
    if (!splits.contains(ds.name)) throw ValidationError("no splits for dataset " + ds.name);
  }
  // results[train][test][split]
  std::vector<std::vector<std::array<Metrics, 3>>> results(n, std::vector<std::array<Metrics, 3>>(n));

  auto run_task = [&](std::size_t task) {
    const std::size_t row = task / 3;
    const std::size_t k = task % 3;
    const AnyModel model = models(datasets[row].name, k);
    PredictOptions inner = options;
    inner.jobs = 1;
    for (std::size_t col = 0; col < n; ++col) {
      const Split& split = splits.at(datasets[col].name)[k];
      const auto preds = predict(model, ontology, datasets[col], split.test, inner);
      results[row][col][k] = evaluate(preds, split, datasets[col]);
    }
  };

  const std::size_t tasks = 3 * n;
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks)));
  if (jobs == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) {
          try {
            run_task(t);
          } catch (...) {
            std::lock_guard lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);
  }

  CrossMatrix m;
  for (const auto& ds : datasets) m.names.push_back(ds.name);
  m.cells.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) m.cells[r].push_back(aggregate(results[r][c]));
  }
  return m;
}

CrossMatrix cross_matrix(const std::map<std::string, std::vector<AnyModel>>& checkpoints,
                         std::span<const Dataset> datasets,
                         const std::map<std::string, std::array<Split, 3>>& splits, const Ontology& ontology,
                         const PredictOptions& options) {
  for (const auto& ds : datasets) {
    auto it = checkpoints.find(ds.name);
    if (it == checkpoints.end()) throw ValidationError("no checkpoint for dataset " + ds.name);
    if (it->second.size() != 1 && it->second.size() != 3) {
      throw InvalidArgument("dataset " + ds.name + " needs one or three checkpoints");
    }
  }
  ModelSource source = [&](const std::string& name, std::size_t k) {
    const auto& list = checkpoints.at(name);
    return list.size() == 1 ? list[0] : list[k];
  };
  return cross_matrix(source, datasets, splits, ontology, options);
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", {{"in", opt_json(m.accuracy_in)}, {"out", opt_json(m.accuracy_out)},
                        {"overall", opt_json(m.accuracy_overall)}}},
          {"f1_macro", {{"in", opt_json(m.f1_in)}, {"out", opt_json(m.f1_out)}, {"overall", opt_json(m.f1_overall)}}},
          {"support", {{"in", m.support_in}, {"out", m.support_out}}},
          {"unresolved", m.unresolved}};
}

nlohmann::json to_json(const AggregateReport& r) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& m : r.splits) splits.push_back(to_json(m));
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [field, st] : r.stats) {
    agg[field] = {{"mean", opt_json(st.mean)}, {"std", opt_json(st.std)}, {"n_defined", st.n_defined}};
  }
  return {{"splits", splits}, {"aggregate", agg}};
}

nlohmann::json to_json(const CrossMatrix& m) {
  nlohmann::json cells = nlohmann::json::object();
  for (std::size_t r = 0; r < m.names.size(); ++r) {
    for (std::size_t c = 0; c < m.names.size(); ++c) cells[m.names[r]][m.names[c]] = to_json(m.cells[r][c]);
  }
  return {{"train_datasets", m.names}, {"test_datasets", m.names}, {"cells", cells}};
}

std::string aggregate_csv_header() { return "label,subset,accuracy_mean,accuracy_std,f1_mean,f1_std\n"; }

std::string aggregate_csv_rows(const std::string& label, const AggregateReport& r) {
  std::string out;
  for (const char* subset : {"in", "out", "overall"}) {
    const auto& acc = r.at(std::string("accuracy_") + subset);
    const auto& f1 = r.at(std::string("f1_") + subset);
    out += label + "," + subset + "," + fmt(acc.mean) + "," + fmt(acc.std) + "," + fmt(f1.mean) + "," +
           fmt(f1.std) + "\n";
  }
  return out;
}

std::string cross_matrix_csv(const CrossMatrix& m, const std::string& field) {
  std::string out = "train\\test";
  for (const auto& n : m.names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < m.names.size(); ++r) {
    out += m.names[r];
    for (std::size_t c = 0; c < m.names.size(); ++c) out += "," + fmt(m.cells[r][c].at(field).mean);
    out += "\n";
  }
  return out;
}

}  // namespace termnorm
