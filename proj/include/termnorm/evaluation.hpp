#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "termnorm/dataset.hpp"
#include "termnorm/models.hpp"

namespace termnorm {

/// Accuracy and macro-F1 on the IN subset, the OUT subset, and all test samples.
/// A subset without samples has undefined (nullopt) metrics.
struct Metrics {
  std::optional<double> accuracy_in, accuracy_out, accuracy_overall;
  std::optional<double> f1_in, f1_out, f1_overall;
  std::size_t support_in = 0;
  std::size_t support_out = 0;
  std::size_t unresolved = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct SubsetScore {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Scores one subset. Macro-F1 averages per-class F1 over the classes present
/// in `gold`; a class with precision + recall = 0 scores 0. Unresolved
/// predictions (nullopt) count as wrong. Requires a nonempty subset.
SubsetScore score_subset(std::span<const std::string> gold, std::span<const std::optional<std::string>> predicted);

/// Throws ValidationError when a test id lacks a prediction, and
/// UnknownIdError when a prediction or test id is unknown.
Metrics evaluate(const PredictionSet& predictions, const Split& split, const Dataset& gold);

struct AggregateStat {
  std::optional<double> mean;
  std::optional<double> std;  // sample standard deviation (n - 1); needs two defined values
  std::size_t n_defined = 0;
};

struct AggregateReport {
  std::array<Metrics, 3> splits;
  std::map<std::string, AggregateStat> stats;  // keyed by metric field name

  const AggregateStat& at(const std::string& field) const { return stats.at(field); }
};

/// Field-wise mean and n-1 standard deviation over exactly three Metrics.
/// Undefined values are skipped; n_defined records how many contributed.
AggregateReport aggregate(std::span<const Metrics> metrics);

struct CrossMatrix {
  std::vector<std::string> names;                    // rows = training set, cols = test set
  std::vector<std::vector<AggregateReport>> cells;   // cells[train][test]

  const AggregateReport& cell(const std::string& train, const std::string& test) const;
};

/// Supplies the model trained on `dataset`'s split `split_index`.
using ModelSource = std::function<AnyModel(const std::string& dataset, std::size_t split_index)>;

/// For every (train d1, test d2) cell, predicts d2's three test splits with the
/// models trained on d1's splits of the same index, scoring with d2's own
/// IN/OUT categories. Each model is requested once.
CrossMatrix cross_matrix(const ModelSource& models, std::span<const Dataset> datasets,
                         const std::map<std::string, std::array<Split, 3>>& splits, const Ontology& ontology,
                         const PredictOptions& options = {});

/// Convenience form: one model per dataset (reused for all splits) or three.
CrossMatrix cross_matrix(const std::map<std::string, std::vector<AnyModel>>& checkpoints,
                         std::span<const Dataset> datasets,
                         const std::map<std::string, std::array<Split, 3>>& splits, const Ontology& ontology,
                         const PredictOptions& options = {});

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const AggregateReport& r);
nlohmann::json to_json(const CrossMatrix& m);

/// Rows "label,subset,accuracy_mean,accuracy_std,f1_mean,f1_std" for subsets in, out, overall.
std::string aggregate_csv_rows(const std::string& label, const AggregateReport& r);
std::string aggregate_csv_header();
/// One CSV per metric field: header "train\\test,<names...>", cells hold the mean.
std::string cross_matrix_csv(const CrossMatrix& m, const std::string& field);

}  // namespace termnorm
