#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "termnorm/ontology.hpp"
#include "termnorm/sample.hpp"

namespace termnorm {

/// Whether a test sample's gold PT occurs among the training labels.
enum class Category { In, Out };

const char* to_string(Category c);

/// A train/test partition of one dataset. Both id lists are sorted ascending.
struct Split {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::map<std::string, Category> category;  // test id -> IN/OUT

  friend bool operator==(const Split&, const Split&) = default;
};

/// Reads the JSON-lines dataset format. Rows labeled by `llt_id` are relabeled
/// to the LLT's parent PT.
Dataset parse_dataset(std::istream& in, const Ontology& ontology, std::string name,
                      const std::string& source = "<dataset>");
/// The dataset name is the file stem.
Dataset load_dataset(const std::filesystem::path& path, const Ontology& ontology);
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Samples of `dataset` whose ids appear in `ids`, in dataset order.
Dataset subset(const Dataset& dataset, std::span<const std::string> ids);

constexpr double kDefaultTrainRatio = 0.6;

/// One deterministic split.
///
/// Samples are first sorted by id. Samples sharing a group key form one unit;
/// a sample without a group key is a unit of its own. Units are ordered by
/// their smallest sample id, shuffled with Rng(seed), and taken into the train
/// set in that order until the train size reaches floor(ratio * N + 0.5).
/// Without group keys this gives exactly that many train samples.
Split make_split(const Dataset& dataset, std::uint64_t seed, double train_ratio = kDefaultTrainRatio);

/// Three splits with distinct seeds. Throws InvalidArgument on N < 2, a ratio
/// outside (0, 1), or repeated seeds.
std::array<Split, 3> make_splits(const Dataset& dataset, const std::array<std::uint64_t, 3>& seeds,
                                 double train_ratio = kDefaultTrainRatio);

/// The three split seeds derived from one master seed.
std::array<std::uint64_t, 3> split_seeds(std::uint64_t master_seed);

/// Fraction of test samples tagged OUT. Throws InvalidArgument on an empty test set.
double out_fraction(const Split& split);

nlohmann::json split_to_json(const Split& split);
Split split_from_json(const nlohmann::json& j, const std::string& source = "<split>");
Split load_split(const std::filesystem::path& path);
void save_split(const std::filesystem::path& path, const Split& split);

/// PT overlap across datasets (the unique / shared-by-two-or-more / shared-by-all partition).
struct OverlapReport {
  std::vector<std::string> dataset_names;
  std::map<std::string, std::size_t> per_dataset_unique;
  std::size_t shared_two_or_more = 0;
  std::size_t shared_all = 0;
  std::size_t union_size = 0;
  /// dataset name -> PT id -> sample count
  std::map<std::string, std::map<std::string, std::size_t>> pt_frequency;
};

/// Throws InvalidArgument when `datasets` is empty or names repeat.
OverlapReport dataset_stats(std::span<const Dataset> datasets);
nlohmann::json overlap_to_json(const OverlapReport& report);

}  // namespace termnorm
