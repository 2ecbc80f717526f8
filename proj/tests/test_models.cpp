#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "termnorm/error.hpp"
#include "termnorm/models.hpp"

using namespace termnorm;

namespace {

ClassifierModel small_classifier(Rng& rng, std::size_t classes, std::uint32_t dim = 64) {
  ClassifierModel m;
  m.featurizer = {dim, {1, 3}};
  for (std::size_t c = 0; c < classes; ++c) m.pt_order.push_back("P" + std::to_string(c));
  m.weights.resize(dim * classes);
  m.bias.resize(classes);
  for (double& w : m.weights) w = rng.uniform(-1.0, 1.0);
  for (double& b : m.bias) b = rng.uniform(-1.0, 1.0);
  return m;
}

FeatureVector basis(std::uint32_t dim, std::uint32_t i) { return FeatureVector(dim, {{i, 1.0}}); }

}  // namespace

TEST_CASE("classifier forward equals a dense matrix product") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const ClassifierModel m = small_classifier(rng, 1 + rng.uniform_index(6));
    const FeatureVector x = classifier_input(m, gradcheck::random_text(rng));
    std::vector<double> dense(m.dim(), 0.0);
    for (const auto& [f, v] : x.entries()) dense[f] = v;
    const auto logits = classifier_forward(m, x);
    for (std::size_t c = 0; c < m.num_classes(); ++c) {
      double z = m.bias[c];
      for (std::size_t f = 0; f < m.dim(); ++f) z += dense[f] * m.weights[f * m.num_classes() + c];
      CHECK(logits[c] == doctest::Approx(z).epsilon(1e-12));
    }
  }
}

TEST_CASE("classifier edge cases") {
  Rng rng(2);
  ClassifierModel m = small_classifier(rng, 4);
  SUBCASE("zero input gives the bias") {
    CHECK(classifier_forward(m, FeatureVector(64)) == m.bias);
  }
  SUBCASE("uniform logits give ln C") {
    std::fill(m.weights.begin(), m.weights.end(), 0.0);
    std::fill(m.bias.begin(), m.bias.end(), 0.0);
    const auto [loss, grad] = classifier_loss_grad(m, classifier_input(m, "abc"), 2);
    CHECK(loss == doctest::Approx(std::log(4.0)));
    CHECK(grad.bias[2] == doctest::Approx(0.25 - 1.0));
    CHECK(grad.bias[0] == doctest::Approx(0.25));
  }
  SUBCASE("saturated logits stay finite") {
    std::fill(m.weights.begin(), m.weights.end(), 0.0);
    m.bias = {1000.0, 0.0, -1000.0, 0.0};
    const FeatureVector x(64);
    CHECK(classifier_loss_grad(m, x, 0).first == doctest::Approx(0.0));
    CHECK(classifier_loss_grad(m, x, 2).first == doctest::Approx(2000.0));
    CHECK(std::isfinite(classifier_loss_grad(m, x, 2).second.bias[0]));
  }
  SUBCASE("argmax ties go to the lowest index") {
    const std::vector<double> z = {1.0, 3.0, 3.0};
    CHECK(argmax_class(z) == 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(classifier_forward(m, FeatureVector(128)), InvalidArgument);
    CHECK_THROWS_AS(classifier_loss_grad(m, FeatureVector(64), 4), InvalidArgument);
  }
}

TEST_CASE("classifier gradient matches finite differences") {
  Rng rng(3);
  for (int t = 0; t < 25; ++t) CHECK(gradcheck::classifier_error(rng) <= 1e-4);
}

TEST_CASE("classifier init covers the full PT inventory") {
  Rng rng(4);
  const Ontology o = testing::random_ontology(rng, {6, 2, 2, 0, 0.0});
  const ClassifierModel m = ClassifierModel::init(o, {256, {2, 4}}, 9);
  CHECK(m.num_classes() == o.pt_count());
  for (std::size_t c = 0; c < o.pt_count(); ++c) CHECK(m.pt_order[c] == o.concepts()[c].pt_id);
  for (double w : m.weights) CHECK(std::abs(w) <= 0.01);
  CHECK(ClassifierModel::init(o, {256, {2, 4}}, 9) == m);
}

TEST_CASE("embeddings are unit norm and match the dense oracle") {
  Rng rng(5);
  DualEncoder enc = DualEncoder::init({64, {1, 3}}, 8, 0.07, 3);
  for (int t = 0; t < 50; ++t) {
    const std::string text = gradcheck::random_text(rng);
    const auto e = embed(enc, text);
    CHECK(std::sqrt(dot(e, e)) == doctest::Approx(1.0));
    const auto want = oracle::dense_embed(enc, text);
    for (std::size_t j = 0; j < e.size(); ++j) CHECK(e[j] == doctest::Approx(want[j]).epsilon(1e-12));
  }
  const auto empty = embed(enc, "");
  CHECK(empty[0] == 1.0);
}

TEST_CASE("identity projection embeds the normalized features") {
  const DualEncoder enc = DualEncoder::identity({16, {2, 2}});
  const FeatureVector x = featurize("abcab", enc.featurizer).normalized();
  const auto e = embed(enc, "abcab");
  for (std::uint32_t f = 0; f < 16; ++f) CHECK(e[f] == doctest::Approx(x.weight(f)));
}

TEST_CASE("InfoNCE closed form with orthogonal inputs") {
  // cos(a,p) = 1 and cos(a,n) = 0 at tau = 1: loss = -log(e / (e + k)).
  const DualEncoder enc = DualEncoder::identity({16, {2, 2}});
  for (std::size_t k = 1; k <= 5; ++k) {
    std::vector<FeatureVector> negs;
    for (std::uint32_t i = 1; i <= k; ++i) negs.push_back(basis(16, i));
    const double loss = contrastive_loss_grad(enc, basis(16, 0), basis(16, 0), negs, 1.0).first;
    CHECK(loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + static_cast<double>(k)))));
  }
}

TEST_CASE("InfoNCE is symmetric in the order of negatives") {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    DualEncoder enc = DualEncoder::init({64, {1, 3}}, 6, 0.07, rng.next());
    for (double& p : enc.projection) p = rng.uniform(-1.0, 1.0);
    std::vector<std::string> negs = {gradcheck::random_text(rng), gradcheck::random_text(rng),
                                     gradcheck::random_text(rng)};
    const std::string a = gradcheck::random_text(rng), p = gradcheck::random_text(rng);
    const auto [l1, g1] = contrastive_loss_grad(enc, a, p, negs, 0.1);
    std::swap(negs[0], negs[2]);
    const auto [l2, g2] = contrastive_loss_grad(enc, a, p, negs, 0.1);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    for (const auto& [f, row] : g1.rows) {
      for (std::size_t j = 0; j < row.size(); ++j) CHECK(row[j] == doctest::Approx(g2.at(f, j)).epsilon(1e-10));
    }
  }
  const DualEncoder enc = DualEncoder::identity({16, {2, 2}});
  CHECK_THROWS_AS(contrastive_loss_grad(enc, "a", "b", std::vector<std::string>{}, 0.1), InvalidArgument);
}

TEST_CASE("InfoNCE gradient matches finite differences") {
  Rng rng(7);
  for (int t = 0; t < 25; ++t) CHECK(gradcheck::infonce_error(rng) <= 1e-4);
}

TEST_CASE("retrieve equals an exhaustive scan") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const Ontology o = testing::random_ontology(rng, {6, 2, 3, 0, 0.2});
    DualEncoder enc = DualEncoder::init({64, {1, 3}}, 4, 0.07, rng.next());
    for (double& p : enc.projection) p = rng.uniform(-1.0, 1.0);
    const bool llts = t % 2 == 1;
    const PtIndex index = PtIndex::build(enc, o, llts);
    for (int q = 0; q < 5; ++q) {
      const std::string query = q == 0 ? o.concepts().back().pt_text : gradcheck::random_text(rng);
      CHECK(retrieve(index, enc, query) == oracle::retrieve_scan(enc, o, query, llts));
    }
  }
}

TEST_CASE("retrieve ties go to the smallest pt_id") {
  // Identical texts embed identically.
  const Ontology o({{"B", "same", {}, {}}, {"A", "same", {}, {}}, {"C", "other", {}, {}}}, {{"1", "same", "C"}});
  const DualEncoder enc = DualEncoder::init({64, {2, 3}}, 8, 0.07, 1);
  CHECK(retrieve(PtIndex::build(enc, o), enc, "same") == "A");
  CHECK(retrieve(PtIndex::build(enc, o, true), enc, "same") == "A");
  const Ontology o2({{"Z", "same", {}, {}}, {"Y", "other", {}, {}}}, {{"1", "same", "Y"}});
  CHECK(retrieve(PtIndex::build(enc, o2), enc, "same") == "Z");
  CHECK(retrieve(PtIndex::build(enc, o2, true), enc, "same") == "Y");
}

TEST_CASE("retrieve errors") {
  DualEncoder enc = DualEncoder::init({64, {2, 3}}, 8, 0.07, 1);
  const PtIndex index = PtIndex::build(enc, testing::toy_ontology());
  enc.projection[0] += 1.0;
  enc.touch();
  CHECK_THROWS_AS(retrieve(index, enc, "weak"), InvalidArgument);
  CHECK_THROWS_AS(retrieve(PtIndex::build(enc, Ontology{}), enc, "weak"), InvalidArgument);
}

TEST_CASE("prompts match golden files") {
  const Dataset ds = testing::appendix_b_dataset();
  for (const auto& [style, name] : {std::pair{PromptStyle::Gpt2, "prompts_gpt2.jsonl"},
                                    std::pair{PromptStyle::Sci5, "prompts_sci5.jsonl"}}) {
    const std::string golden = testing::read_file(std::string(TERMNORM_GOLDEN_DIR) + "/" + name);
    CHECK(render_prompts(ds, style) == golden);
  }
  CHECK(prompt_for("weak knees", PromptStyle::Gpt2) == "INPUT: weak knees\nMEANING:");
  CHECK(prompt_for("weak knees", PromptStyle::Sci5) == "normalize: weak knees");
}

TEST_CASE("parse_predictions") {
  const Ontology o = testing::toy_ontology();
  Split split;
  split.test = {"s1", "s2", "s3", "s4"};
  for (const auto& id : split.test) split.category[id] = Category::In;
  auto parse = [&](const std::string& text) {
    std::istringstream in(text);
    return parse_predictions(in, o, split);
  };
  const PredictionSet ps = parse(
      "{\"id\":\"s1\",\"predicted\":\"Malaise\"}\n"
      "{\"id\":\"s2\",\"predicted\":\"asthenia\"}\n"
      "{\"id\":\"s3\",\"predicted\":\"some novel phrase\"}\n"
      "{\"id\":\"s4\",\"predicted\":null}\n");
  CHECK(ps.predicted.at("s1") == "malaise");
  CHECK(ps.predicted.at("s2") == "asthenia");
  CHECK_FALSE(ps.predicted.at("s3").has_value());
  CHECK_FALSE(ps.predicted.at("s4").has_value());
  CHECK(ps.unresolved() == 2);
  CHECK_THROWS_AS(parse("{\"id\":\"x9\",\"predicted\":\"malaise\"}\n"), UnknownIdError);
  CHECK_THROWS_AS(parse("{\"id\":\"s1\",\"predicted\":\"malaise\"}\n{\"id\":\"s1\",\"predicted\":\"malaise\"}\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse("{\"id\":\"s1\",\"predicted\":3}\n"), ParseError);
}

TEST_CASE("parse_predictions equals a dictionary lookup") {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Ontology o = testing::random_ontology(rng);
    std::map<std::string, std::string> dict;  // normalized text -> smallest pt_id
    for (const auto& c : o.concepts()) dict.emplace(normalize_text(c.pt_text), c.pt_id);
    Split split;
    std::string text;
    std::map<std::string, std::optional<std::string>> want;
    for (int i = 0; i < 8; ++i) {
      const std::string id = "s" + std::to_string(i);
      split.test.push_back(id);
      split.category[id] = Category::Out;
      const auto& c = o.concepts()[rng.uniform_index(o.pt_count())];
      std::string value;
      switch (rng.uniform_index(3)) {
        case 0: value = c.pt_id; break;
        case 1: value = "  " + c.pt_text; break;
        default: value = "zz " + testing::random_word(rng);
      }
      text += nlohmann::json{{"id", id}, {"predicted", value}}.dump() + "\n";
      if (o.find_concept(value) != nullptr) {
        want[id] = value;
      } else if (auto it = dict.find(normalize_text(value)); it != dict.end()) {
        want[id] = it->second;
      } else {
        want[id] = std::nullopt;
      }
    }
    std::istringstream in(text);
    CHECK(parse_predictions(in, o, split).predicted == want);
  }
}

TEST_CASE("checkpoints round trip") {
  const Ontology o = testing::toy_ontology();
  testing::TempDir dir;
  const AnyModel clf = ClassifierModel::init(o, {256, {2, 3}}, 5);
  const AnyModel de = DualEncoder::init({256, {2, 3}}, 8, 0.05, 6);
  for (const AnyModel& m : {clf, de}) {
    save_checkpoint(dir.file("m.ckpt"), m, o);
    const AnyModel back = load_checkpoint(dir.file("m.ckpt"), o);
    CHECK(back.index() == m.index());
    CHECK(back == m);
    CHECK(testing::read_file(dir.file("m.ckpt")).rfind("TNCKPT01", 0) == 0);
  }
  Rng rng(1);
  const Ontology other = testing::random_ontology(rng);
  save_checkpoint(dir.file("m.ckpt"), clf, o);
  CHECK_THROWS_AS(load_checkpoint(dir.file("m.ckpt"), other), ValidationError);
  testing::write_file(dir.file("bad.ckpt"), "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt"), o), ParseError);
  std::string bytes = testing::read_file(dir.file("m.ckpt"));
  bytes.resize(bytes.size() - 3);
  testing::write_file(dir.file("cut.ckpt"), bytes);
  CHECK_THROWS_AS(load_checkpoint(dir.file("cut.ckpt"), o), ParseError);
}

TEST_CASE("predict is independent of the job count") {
  Rng rng(10);
  const Ontology o = testing::random_ontology(rng, {8, 2, 3, 1, 0.0});
  const Dataset ds = testing::random_dataset(rng, o, 40);
  std::vector<std::string> ids;
  for (const auto& s : ds.samples) ids.push_back(s.id);
  DualEncoder enc = DualEncoder::init({256, {2, 3}}, 8, 0.07, 2);
  for (double& p : enc.projection) p = rng.uniform(-1.0, 1.0);
  for (const AnyModel& m : {AnyModel(ClassifierModel::init(o, {256, {2, 3}}, 1)), AnyModel(enc)}) {
    const PredictionSet one = predict(m, o, ds, ids, {false, 1});
    CHECK(predict(m, o, ds, ids, {false, 4}) == one);
    CHECK(one.predicted.size() == ids.size());
  }
  const std::vector<std::string> bad = {"missing"};
  CHECK_THROWS_AS(predict(AnyModel(enc), o, ds, bad), UnknownIdError);
}
