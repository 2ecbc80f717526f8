#include <bit>
#include <cstring>
#include <fstream>

#include "termnorm/error.hpp"
#include "termnorm/io.hpp"
#include "termnorm/models.hpp"

namespace termnorm {

namespace {

constexpr char kMagic[8] = {'T', 'N', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kFormatVersion = 1;

static_assert(sizeof(double) == 8);

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void append_doubles(std::string& out, const std::vector<double>& values) {
  for (double d : values) append_u64(out, std::bit_cast<std::uint64_t>(d));
}

json featurizer_json(const FeaturizerConfig& f) {
  return {{"dim", f.dim}, {"ngram_lo", f.ngrams.lo}, {"ngram_hi", f.ngrams.hi}};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AnyModel& model, const Ontology& ontology) {
  json header;
  header["format_version"] = kFormatVersion;
  header["kind"] = model_kind_name(model);
  std::vector<const std::vector<double>*> arrays;
  if (const auto* clf = std::get_if<ClassifierModel>(&model)) {
    header["featurizer"] = featurizer_json(clf->featurizer);
    header["pt_order"] = clf->pt_order;
    header["parameters"] = {{{"name", "weights"}, {"count", clf->weights.size()}},
                            {{"name", "bias"}, {"count", clf->bias.size()}}};
    arrays = {&clf->weights, &clf->bias};
  } else {
    const auto& enc = std::get<DualEncoder>(model);
    std::vector<std::string> order;
    for (const auto& c : ontology.concepts()) order.push_back(c.pt_id);
    header["featurizer"] = featurizer_json(enc.featurizer);
    header["pt_order"] = order;
    header["embed_dim"] = enc.embed_dim;
    header["temperature"] = enc.temperature;
    header["parameters"] = {{{"name", "projection"}, {"count", enc.projection.size()}}};
    arrays = {&enc.projection};
  }
  header["ontology_version"] = ontology.version_tag();

  const std::string head = header.dump();
  std::string blob(kMagic, sizeof kMagic);
  append_u64(blob, head.size());
  blob += head;
  for (const auto* a : arrays) append_doubles(blob, *a);
  atomic_write(path, blob);
}

AnyModel load_checkpoint(const std::filesystem::path& path, const Ontology& ontology) {
  const std::string name = path.string();
  auto in = open_input(path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError(name + ": not a checkpoint file");
  }
  const std::uint64_t head_len = read_u64(bytes + 8);
  if (head_len > blob.size() - 16) throw ParseError(name + ": truncated header");
  json header;
  try {
    header = json::parse(blob.substr(16, head_len));
  } catch (const json::parse_error& e) {
    throw ParseError(name + ": bad header: " + e.what());
  }

  std::size_t offset = 16 + head_len;
  auto read_array = [&](std::size_t count) {
    if (count > (blob.size() - offset) / 8) throw ParseError(name + ": truncated parameters");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(read_u64(bytes + offset + 8 * i));
    offset += 8 * count;
    return out;
  };

  try {
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw ParseError(name + ": unsupported checkpoint version");
    }
    FeaturizerConfig feat;
    feat.dim = header.at("featurizer").at("dim").get<std::uint32_t>();
    feat.ngrams.lo = header.at("featurizer").at("ngram_lo").get<int>();
    feat.ngrams.hi = header.at("featurizer").at("ngram_hi").get<int>();
    validate(feat);
    const auto pt_order = header.at("pt_order").get<std::vector<std::string>>();
    std::vector<std::string> expected;
    for (const auto& c : ontology.concepts()) expected.push_back(c.pt_id);
    if (pt_order != expected) {
      throw ValidationError(name + ": checkpoint PT inventory does not match the ontology");
    }
    const auto& params = header.at("parameters");
    const std::string kind = header.at("kind").get<std::string>();

    AnyModel model;
    if (kind == "classifier") {
      ClassifierModel m;
      m.featurizer = feat;
      m.pt_order = pt_order;
      m.weights = read_array(params.at(0).at("count").get<std::size_t>());
      m.bias = read_array(params.at(1).at("count").get<std::size_t>());
      if (m.weights.size() != static_cast<std::size_t>(feat.dim) * m.pt_order.size() ||
          m.bias.size() != m.pt_order.size()) {
        throw ValidationError(name + ": classifier parameter sizes are inconsistent");
      }
      model = std::move(m);
    } else if (kind == "dual_encoder") {
      DualEncoder e;
      e.featurizer = feat;
      e.embed_dim = header.at("embed_dim").get<std::size_t>();
      e.temperature = header.at("temperature").get<double>();
      e.projection = read_array(params.at(0).at("count").get<std::size_t>());
      if (e.projection.size() != static_cast<std::size_t>(feat.dim) * e.embed_dim) {
        throw ValidationError(name + ": projection size is inconsistent");
      }
      e.touch();
      model = std::move(e);
    } else {
      throw ParseError(name + ": unknown model kind '" + kind + "'");
    }
    if (offset != blob.size()) throw ParseError(name + ": trailing bytes after parameters");
    return model;
  } catch (const json::exception& e) {
    throw ParseError(name + ": bad header: " + e.what());
  }
}

}  // namespace termnorm
