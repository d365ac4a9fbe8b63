#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "playtrace/common.hpp"
#include "playtrace/dataset.hpp"
#include "playtrace/forest.hpp"
#include "playtrace/knn.hpp"
#include "playtrace/mlp.hpp"

namespace playtrace {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> pred, std::span<const int> truth, int positive = 1);
double accuracy(std::span<const int> pred, std::span<const int> truth);
/// F1 of the positive class. When nothing is predicted positive, or no
/// positive exists, the undefined precision or recall counts as 0.
double f1(std::span<const int> pred, std::span<const int> truth, int positive = 1);
double f1(const ConfusionCounts& counts);
/// Unweighted mean of the per-class F1 over the classes present in truth or pred.
double macro_f1(std::span<const int> pred, std::span<const int> truth);

/// F1 of always predicting the positive class when a share p of labels is positive.
double majority_baseline_f1(double positive_rate);

enum class ModelKind { Knn, Mlp, Forest };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

struct KnnConfig {
  std::size_t k = 5;
  Metric metric = Metric::Euclidean;

  bool operator==(const KnnConfig&) const = default;
};

/// Everything needed to build and score one model.
struct ModelConfig {
  ModelKind kind = ModelKind::Knn;
  KnnConfig knn;
  MlpConfig mlp;
  ForestConfig forest;
  PreprocessOptions preprocess;
  std::size_t folds = 5;

  bool operator==(const ModelConfig&) const = default;
};

/// Standard settings per kind: 10 folds for KNN and 5 for the others;
/// standardized inputs for KNN and MLP.
ModelConfig default_model_config(ModelKind kind);

using FittedModel = std::variant<KnnModel, MlpModel, ForestModel>;

FittedModel fit_model(const ModelConfig& config, const Matrix& x, std::span<const int> y);
std::vector<int> predict(const FittedModel& model, const Matrix& x);
ModelKind kind_of(const FittedModel& model);

/// A fitted classifier plus the preprocessing fitted on its training rows.
struct TrainedModel {
  ModelConfig config;
  Preprocessor preprocessor;
  FittedModel model;

  std::vector<int> predict(const JoinedDataset& data) const;
};

TrainedModel train_model(const ModelConfig& config, const JoinedDataset& train);

using Predictor = std::function<std::vector<int>(const Matrix&)>;
/// Builds a predictor from preprocessed training data.
using ModelFactory = std::function<Predictor(const Matrix& x, std::span<const int> y)>;

ModelFactory factory_for(const ModelConfig& config);

struct FoldResult {
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  double f1 = 0;
  double accuracy = 0;
  double macro_f1 = 0;
  ConfusionCounts confusion;
};

struct EvalReport {
  std::string model;
  std::string protocol;  ///< "cv" or "holdout"
  std::vector<FoldResult> folds;
  double mean_f1 = 0;
  double mean_accuracy = 0;
  double mean_macro_f1 = 0;
  ConfusionCounts totals;
  std::string fingerprint;
  double runtime_seconds = 0;  ///< wall clock; kept out of deterministic output
};

/// Preprocessing is re-fitted inside every training fold. Errors are
/// rethrown with the fold index prefixed.
EvalReport cross_validate(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                          const SplitPlan& plan, const std::string& name);
/// One train/test split per plan.test_fraction.
EvalReport holdout(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                   const SplitPlan& plan, const std::string& name);

struct BenchmarkRow {
  std::string model;
  std::optional<double> f1;
  std::optional<double> accuracy;
  std::string protocol;
  bool reference = false;  ///< literature number, never computed
};

struct BenchmarkResult {
  std::vector<EvalReport> reports;
  std::vector<BenchmarkRow> table;  ///< one row per model plus the reference row
  double positive_rate = 0;
  double baseline_f1 = 0;
};

/// Cross-validates each model with its own fold count (plan.fold_count is
/// ignored) and appends the published reference row.
BenchmarkResult benchmark(std::span<const ModelConfig> models, const JoinedDataset& data, const SplitPlan& plan);

nlohmann::json to_json(const ConfusionCounts& counts);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const BenchmarkResult& result);
/// Aligned plain-text comparison table.
std::string format_table(const BenchmarkResult& result);

}  // namespace playtrace
