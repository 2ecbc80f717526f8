// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "termnorm/contrastive.hpp"
#include "termnorm/evaluation.hpp"
#include "termnorm/pipeline.hpp"

using namespace termnorm;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome contrastive_oracle() {
  Outcome o;
  Rng rng(101);
  for (int t = 0; t < 200 && o.ok; ++t) {
    const Ontology onto = testing::random_ontology(rng, {4, 2, 3, 0, 0.2});
    const Dataset ds = testing::random_dataset(rng, onto, rng.uniform_index(13));
    const CoderSamples got = coder_samples(ds, onto);
    const auto want = oracle::coder(ds, onto);
    o.require(got.pairs == want.pairs && got.triples == want.triples, "coder_samples differs on instance " + std::to_string(t));
    o.require(sapbert_dataset_pairs(ds, onto) == oracle::sapbert_dataset(ds, onto),
              "sapbert_dataset_pairs differs on instance " + std::to_string(t));
    o.require(sapbert_op_pairs(onto) == oracle::sapbert_op(onto), "sapbert_op_pairs differs on instance " + std::to_string(t));
  }
  const CoderSamples ex = coder_samples(testing::appendix_b_dataset(), testing::toy_ontology());
  std::ostringstream pairs, triples;
  write_pairs(pairs, ex.pairs);
  write_triples(triples, ex.triples);
  o.require(pairs.str() ==
                "{\"left\":\"weak knees\",\"polarity\":\"positive\",\"right\":\"zap me of all energy\"}\n"
                "{\"left\":\"weak knees\",\"polarity\":\"negative\",\"right\":\"feel like crap\"}\n"
                "{\"left\":\"zap me of all energy\",\"polarity\":\"negative\",\"right\":\"feel like crap\"}\n",
            "worked example pairs differ");
  o.require(triples.str() ==
                "{\"left\":\"weak knees\",\"relation\":\"RO\",\"right\":\"feel like crap\"}\n"
                "{\"left\":\"zap me of all energy\",\"relation\":\"RO\",\"right\":\"feel like crap\"}\n",
            "worked example triples differ");
  if (o.ok) o.detail = "200 instances + worked example (1 positive, 2 negatives, 2 RO triples)";
  return o;
}

Outcome retrieval_oracle() {
  Outcome o;
  Rng rng(202);
  const std::vector<std::string> vocab = {"head ache", "ache", "nausea", "fever", "sore", "head", "rash"};
  std::size_t ties = 0;
  for (int t = 0; t < 500 && o.ok; ++t) {
    // A small text vocabulary makes duplicate candidate texts, and so exact ties, common.
    std::vector<Concept> cs;
    std::vector<LltEntry> ls;
    const std::size_t n_pt = 1 + rng.uniform_index(6);
    for (std::size_t p = 0; p < n_pt; ++p) {
      const std::string id = "P" + testing::pad(rng.uniform_index(1000), 3) + "_" + std::to_string(p);
      cs.push_back({id, vocab[rng.uniform_index(vocab.size())], {}, {}});
      for (std::size_t k = rng.uniform_index(3); k > 0; --k) {
        ls.push_back({"L" + std::to_string(ls.size()), vocab[rng.uniform_index(vocab.size())], id});
      }
    }
    const Ontology onto(cs, ls);
    DualEncoder enc = DualEncoder::init({64, {1, 3}}, 1 + rng.uniform_index(8), 0.07, rng.next());
    for (double& p : enc.projection) p = rng.uniform(-1.0, 1.0);
    const bool llts = rng.bernoulli(0.5);
    const PtIndex index = PtIndex::build(enc, onto, llts);
    const std::string query =
        rng.bernoulli(0.5) ? vocab[rng.uniform_index(vocab.size())] : gradcheck::random_text(rng);
    const std::string got = retrieve(index, enc, query);
    o.require(got == oracle::retrieve_scan(enc, onto, query, llts), "mismatch on instance " + std::to_string(t));
    // count instances whose best score is shared by two PTs
    const auto q = oracle::dense_embed(enc, query);
    std::map<std::string, double> best;
    auto score = [&](const std::string& pt, const std::string& text) {
      const auto e = oracle::dense_embed(enc, text);
      const double s = dot(q, e);
      auto [it, fresh] = best.emplace(pt, s);
      if (!fresh) it->second = std::max(it->second, s);
    };
    for (const auto& c : onto.concepts()) score(c.pt_id, c.pt_text);
    if (llts) {
      for (const auto& l : onto.llts()) score(l.parent_pt_id, l.llt_text);
    }
    double top = -2.0;
    for (const auto& [pt, s] : best) top = std::max(top, s);
    std::size_t at_top = 0;
    for (const auto& [pt, s] : best) at_top += s == top;
    ties += at_top > 1;
  }
  o.require(ties > 0, "no tied instance was generated");
  if (o.ok) o.detail = "500 instances, " + std::to_string(ties) + " with tied best PTs";
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  Rng rng(303);
  double worst_clf = 0.0, worst_nce = 0.0;
  for (int t = 0; t < 100; ++t) worst_clf = std::max(worst_clf, gradcheck::classifier_error(rng));
  for (int t = 0; t < 100; ++t) worst_nce = std::max(worst_nce, gradcheck::infonce_error(rng));
  o.require(worst_clf <= 1e-4, "classifier relative error " + fmt("%.3g", worst_clf));
  o.require(worst_nce <= 1e-4, "InfoNCE relative error " + fmt("%.3g", worst_nce));
  if (o.ok) o.detail = "max relative error: classifier " + fmt("%.2e", worst_clf) + ", InfoNCE " + fmt("%.2e", worst_nce);
  return o;
}

Outcome metric_oracle() {
  Outcome o;
  Rng rng(404);
  for (int t = 0; t < 200 && o.ok; ++t) {
    const std::size_t classes = 1 + rng.uniform_index(10);
    const std::size_t n = 1 + rng.uniform_index(100);
    Dataset gold;
    gold.name = "g";
    Split split;
    PredictionSet ps;
    std::vector<std::string> g_in, g_out, g_all;
    std::vector<std::optional<std::string>> p_in, p_out, p_all;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "s" + testing::pad(i, 3);
      const std::string label = "C" + std::to_string(rng.uniform_index(classes));
      gold.samples.push_back({id, "t", label, {}, {}});
      split.test.push_back(id);
      const Category cat = rng.bernoulli(0.5) ? Category::In : Category::Out;
      split.category[id] = cat;
      std::optional<std::string> pred;
      if (!rng.bernoulli(0.05)) pred = rng.bernoulli(0.4) ? label : "C" + std::to_string(rng.uniform_index(classes + 1));
      ps.predicted[id] = pred;
      (cat == Category::In ? g_in : g_out).push_back(label);
      (cat == Category::In ? p_in : p_out).push_back(pred);
      g_all.push_back(label);
      p_all.push_back(pred);
    }
    const Metrics m = evaluate(ps, split, gold);
    auto near = [](const std::optional<double>& a, double b) { return a && std::abs(*a - b) <= 1e-10; };
    const std::string tag = " on instance " + std::to_string(t);
    const auto all = oracle::confusion_score(g_all, p_all);
    o.require(near(m.accuracy_overall, all.accuracy) && near(m.f1_overall, all.macro_f1), "overall" + tag);
    if (!g_in.empty()) {
      const auto s = oracle::confusion_score(g_in, p_in);
      o.require(near(m.accuracy_in, s.accuracy) && near(m.f1_in, s.macro_f1), "IN subset" + tag);
    } else {
      o.require(!m.accuracy_in && !m.f1_in, "empty IN subset must be undefined" + tag);
    }
    if (!g_out.empty()) {
      const auto s = oracle::confusion_score(g_out, p_out);
      o.require(near(m.accuracy_out, s.accuracy) && near(m.f1_out, s.macro_f1), "OUT subset" + tag);
    } else {
      o.require(!m.accuracy_out && !m.f1_out, "empty OUT subset must be undefined" + tag);
    }
    if (m.accuracy_in && m.accuracy_out) {
      const auto n_in = static_cast<double>(m.support_in);
      const auto n_out = static_cast<double>(m.support_out);
      o.require(*m.accuracy_overall == (n_in * *m.accuracy_in + n_out * *m.accuracy_out) / (n_in + n_out),
                "weighted-mean identity" + tag);
    }
  }
  if (o.ok) o.detail = "200 instances within 1e-10, weighted identity exact";
  return o;
}

Outcome split_contract() {
  Outcome o;
  Rng rng(505);
  std::size_t calls = 0;
  while (calls < 1000 && o.ok) {
    const Ontology onto = testing::random_ontology(rng);
    const bool grouped = rng.bernoulli(0.3);
    const std::size_t n = 2 + rng.uniform_index(60);
    const Dataset ds = testing::random_dataset(rng, onto, n, grouped ? 0.6 : 0.0, 1 + rng.uniform_index(6));
    std::array<std::uint64_t, 3> seeds = split_seeds(rng.next());
    const auto splits = make_splits(ds, seeds);
    o.require(make_splits(ds, seeds) == splits, "repeat differs");
    ++calls;
    for (const Split& s : splits) {
      std::set<std::string> train(s.train.begin(), s.train.end()), test(s.test.begin(), s.test.end()), all;
      for (const auto& smp : ds.samples) all.insert(smp.id);
      std::set<std::string> joined = train;
      joined.insert(test.begin(), test.end());
      o.require(train.size() == s.train.size() && test.size() == s.test.size(), "duplicate ids");
      o.require(train.size() + test.size() == n && joined == all, "not a disjoint exhaustive partition");
      std::set<std::string> train_labels;
      for (const auto& id : s.train) train_labels.insert(ds.find(id)->label);
      for (const auto& id : s.test) {
        const Category want = train_labels.contains(ds.find(id)->label) ? Category::In : Category::Out;
        o.require(s.category.count(id) == 1 && s.category.at(id) == want, "wrong IN/OUT tag");
      }
      o.require(s.category.size() == s.test.size(), "tags for non-test ids");
      bool any_group = false;
      for (const auto& smp : ds.samples) any_group = any_group || smp.group.has_value();
      if (!any_group) o.require(s.train.size() == (6 * n + 5) / 10, "ungrouped train size is not round(0.6 N)");
    }
  }
  if (o.ok) o.detail = std::to_string(calls) + " make_splits calls";
  return o;
}

Outcome op_corpus() {
  Outcome o;
  Rng rng(606);
  for (int t = 0; t < 100 && o.ok; ++t) {
    const Ontology onto = testing::random_ontology(rng, {8, 3, 4, 0, 0.2});
    const Dataset corpus = build_op_corpus(onto);
    o.require(corpus.size() == onto.llt_count(), "corpus size differs from LLT count");
    std::multiset<std::string> got, want;
    for (const auto& s : corpus.samples) got.insert(s.label);
    for (const auto& l : onto.llts()) want.insert(l.parent_pt_id);
    o.require(got == want, "label multiset differs");
  }
  std::set<std::pair<std::string, std::string>> toy;
  for (const auto& s : build_op_corpus(testing::toy_ontology()).samples) toy.emplace(s.text, s.label);
  const std::set<std::pair<std::string, std::string>> expected = {
      {"weakness", "asthenia"}, {"loss of energy", "asthenia"}, {"feeling unwell", "malaise"}};
  o.require(toy == expected && build_op_corpus(testing::toy_ontology()).size() == 3, "toy corpus differs");
  if (o.ok) o.detail = "100 ontologies + toy example";
  return o;
}

// Criteria 7 and 8 share one run of the default pipeline.
struct DefaultRun {
  PipelineResult result;
  double seconds = 0.0;
};

double mean_of(const AggregateReport& r, const char* field) { return r.at(field).mean.value_or(-1.0); }

Outcome directional_in_dataset(const DefaultRun& run, const PipelineConfig& pc) {
  Outcome o;
  std::ostringstream detail;
  for (const auto& name : run.result.ft.names) {
    const auto& ft = run.result.ft.cell(name, name);
    const auto& opft = run.result.op_ft.cell(name, name);
    const double ft_out = mean_of(ft, "accuracy_out"), opft_out = mean_of(opft, "accuracy_out");
    const double ft_all = mean_of(ft, "accuracy_overall"), opft_all = mean_of(opft, "accuracy_overall");
    o.require(ft_out >= 0.0 && ft_out <= 0.02, name + ": FT OUT accuracy " + fmt("%.4f", ft_out) + " > 0.02");
    o.require(opft_out - ft_out >= 0.10, name + ": OP+FT OUT gain " + fmt("%.4f", opft_out - ft_out) + " < 0.10");
    o.require(opft_all >= ft_all, name + ": OP+FT overall below FT");
    detail << name << " FT out/all " << fmt("%.3f", ft_out) << "/" << fmt("%.3f", ft_all) << ", OP+FT "
           << fmt("%.3f", opft_out) << "/" << fmt("%.3f", opft_all) << "; ";
  }
  // FT-only classifiers predict labels seen in their training split.
  const auto& bench = run.result.bench;
  for (const auto& ds : bench.datasets) {
    const Split& split = run.result.splits.at(ds.name)[0];
    const AnyModel model = run_strategy(pc.ft, bench.ontology, subset(ds, split.train));
    std::set<std::string> seen;
    for (const auto& id : split.train) seen.insert(ds.find(id)->label);
    const PredictionSet ps = predict(model, bench.ontology, ds, split.test);
    std::size_t inside = 0;
    for (const auto& [id, p] : ps.predicted) inside += p && seen.contains(*p);
    const double frac = static_cast<double>(inside) / static_cast<double>(ps.predicted.size());
    o.require(frac >= 0.99, ds.name + ": FT predictions inside the training label set " + fmt("%.3f", frac));
    detail << ds.name << " FT in-train-label predictions " << fmt("%.3f", frac) << "; ";
  }
  o.require(run.seconds < 300.0, "pipeline took " + fmt("%.1f", run.seconds) + " s");
  if (o.ok) o.detail = detail.str() + "pipeline " + fmt("%.1f", run.seconds) + " s";
  return o;
}

Outcome directional_cross_dataset(const DefaultRun& run) {
  Outcome o;
  const double ft = cross_dataset_drop(run.result.ft);
  const double opft = cross_dataset_drop(run.result.op_ft);
  o.require(opft < ft, "OP+FT drop " + fmt("%.4f", opft) + " is not below FT drop " + fmt("%.4f", ft));
  o.require(run.seconds < 600.0, "pipeline took " + fmt("%.1f", run.seconds) + " s");
  if (o.ok) o.detail = "cross-dataset drop FT " + fmt("%.3f", ft) + " vs OP+FT " + fmt("%.3f", opft);
  return o;
}

Outcome byte_stability(const DefaultRun& run, const PipelineConfig& pc) {
  Outcome o;
  const Dataset ds = testing::appendix_b_dataset();
  for (const auto& [style, name] : {std::pair{PromptStyle::Gpt2, "prompts_gpt2.jsonl"},
                                    std::pair{PromptStyle::Sci5, "prompts_sci5.jsonl"}}) {
    std::ifstream in(std::string(TERMNORM_GOLDEN_DIR) + "/" + name, std::ios::binary);
    std::ostringstream golden;
    golden << in.rdbuf();
    o.require(!golden.str().empty() && render_prompts(ds, style) == golden.str(), std::string(name) + " differs");
  }
  const PipelineResult again = run_pipeline(pc);
  o.require(again.report.dump(2) == run.result.report.dump(2), "pipeline reports differ between equal-seed runs");
  if (o.ok) o.detail = "prompt goldens match; two equal-seed pipeline reports identical";
  return o;
}

Outcome stats_oracle() {
  Outcome o;
  SynthConfig sc;
  sc.noise_styles = {{0.10, 0.60}, {0.02, 0.10}, {0.05, 0.30}};
  sc.seed = 11;
  const SynthBenchmark b = gen_synthetic(sc);
  o.require(b.datasets.size() == 3, "expected three datasets");
  const OverlapReport r = dataset_stats(b.datasets);
  const auto want = oracle::overlap(b.datasets);
  o.require(r.per_dataset_unique == want.unique, "unique counts differ");
  o.require(r.shared_two_or_more == want.shared_two, "shared-by-two count differs");
  o.require(r.shared_all == want.shared_all, "shared-by-all count differs");
  o.require(r.union_size == want.union_size, "union size differs");

  std::ifstream in(TERMNORM_README);
  std::ostringstream readme;
  readme << in.rdbuf();
  const std::string text = readme.str();
  for (const char* marker : {"## PT overlap across datasets", "| Unique to dataset |", "| Shared by 2 or more |",
                             "| Shared by all |"}) {
    o.require(text.find(marker) != std::string::npos, std::string("README lacks '") + marker + "'");
  }
  if (o.ok) {
    o.detail = "unique";
    for (const auto& [name, n] : r.per_dataset_unique) o.detail += " " + name + "=" + std::to_string(n);
    o.detail += ", shared>=2=" + std::to_string(r.shared_two_or_more) + ", shared all=" + std::to_string(r.shared_all);
  }
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int k, const char* name, const std::function<Outcome()>& fn, double limit_s) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && s >= limit_s && o.ok) {
      o.ok = false;
      o.detail = "took " + fmt("%.1f", s) + " s, limit " + fmt("%.0f", limit_s) + " s";
    }
    failures += !o.ok;
    std::cout << (o.ok ? "PASS" : "FAIL") << " " << k << " " << name << " (" << fmt("%.2f", s) << " s): " << o.detail
              << std::endl;
  };

  report(1, "contrastive generation oracle", contrastive_oracle, 5.0);
  report(2, "retrieval oracle", retrieval_oracle, 5.0);
  report(3, "gradient checks", gradient_checks, 30.0);
  report(4, "metric oracle", metric_oracle, 0.0);
  report(5, "split contract", split_contract, 0.0);
  report(6, "OP corpus", op_corpus, 0.0);

  const PipelineConfig pc = pipeline_config_from(KeyValueConfig{});
  DefaultRun run;
  std::string pipeline_error;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run.result = run_pipeline(pc);
    } catch (const std::exception& e) {
      pipeline_error = e.what();
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  auto needs_pipeline = [&](std::function<Outcome()> fn) {
    return [&, fn]() -> Outcome {
      if (!pipeline_error.empty()) return {false, "default pipeline failed: " + pipeline_error};
      return fn();
    };
  };
  report(7, "OP+FT vs FT on the default benchmark", needs_pipeline([&] { return directional_in_dataset(run, pc); }), 0.0);
  report(8, "cross-dataset drop", needs_pipeline([&] { return directional_cross_dataset(run); }), 0.0);
  report(9, "byte stability", needs_pipeline([&] { return byte_stability(run, pc); }), 0.0);
  report(10, "overlap stats", stats_oracle, 0.0);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
