#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "playtrace/aggregation.hpp"
#include "playtrace/common.hpp"
#include "playtrace/events.hpp"

namespace playtrace {

/// Level group each question is asked in, indexed by question - 1.
using QuestionMap = std::array<LevelGroup, kQuestionCount>;

/// Questions 1-3 -> 0-4, 4-13 -> 5-12, 14-18 -> 13-22.
QuestionMap default_question_map();

struct RowKey {
  SessionId session_id = 0;
  int question = 0;

  auto operator<=>(const RowKey&) const = default;
};

/// Features joined to labels, before imputation.
struct JoinedDataset {
  std::vector<std::string> feature_names;
  std::vector<bool> code_columns;  ///< dictionary-coded categorical columns
  MaybeMatrix x;
  std::vector<int> y;
  std::vector<RowKey> row_keys;
  std::size_t dropped = 0;  ///< labels without a matching feature row

  std::size_t rows() const noexcept { return y.size(); }
};

/// Fully numeric dataset ready for a model.
struct LabeledDataset {
  std::vector<std::string> feature_names;
  Matrix x;
  std::vector<int> y;
  std::vector<RowKey> row_keys;

  std::size_t rows() const noexcept { return y.size(); }
};

JoinedDataset join(const FeatureMatrix& features, std::span<const LabelRecord> labels,
                   const QuestionMap& q_map = default_question_map());

JoinedDataset subset(const JoinedDataset& data, std::span<const std::size_t> rows);
/// Keeps only the named feature columns, in the given order.
JoinedDataset select_columns(const JoinedDataset& data, std::span<const std::string> names);

struct Imputation {
  Matrix x;
  std::vector<double> means;
};

/// Replaces absent cells with the mean of the present cells of their column.
Imputation impute_mean(const MaybeMatrix& x, std::span<const std::string> names = {});
/// Test-time imputation with means fitted elsewhere.
Matrix apply_imputation(const MaybeMatrix& x, std::span<const double> means);

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> stddev;  ///< population (divide-by-n) convention
  std::vector<bool> constant;

  bool operator==(const ScalerParams&) const = default;
};

struct Standardized {
  Matrix x;
  ScalerParams params;
};

/// Fits (when params is empty) and applies (v - mean) / std per column.
/// Constant columns map to 0.
Standardized standardize(const Matrix& x, const std::optional<ScalerParams>& params = std::nullopt);

/// Category lists per column for one-hot expansion; an empty list leaves the
/// column untouched. Unseen or absent codes expand to all zeros.
struct OneHotEncoder {
  std::vector<std::vector<double>> categories;

  static OneHotEncoder fit(const MaybeMatrix& x, const std::vector<bool>& code_columns);
  MaybeMatrix transform(const MaybeMatrix& x) const;
  std::vector<std::string> output_names(std::span<const std::string> input_names) const;
  bool active() const;
};

struct PreprocessOptions {
  bool one_hot = true;  ///< no-op unless code columns are present
  bool standardize = false;

  bool operator==(const PreprocessOptions&) const = default;
};

/// Train-fitted preprocessing: one-hot, mean imputation, optional scaling.
/// transform() only ever reads the parameters fitted here.
struct Preprocessor {
  PreprocessOptions options;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  OneHotEncoder encoder;
  std::vector<double> impute_means;
  std::optional<ScalerParams> scaler;

  static Preprocessor fit(const JoinedDataset& train, const PreprocessOptions& options);
  Matrix transform_features(const MaybeMatrix& x) const;
  LabeledDataset transform(const JoinedDataset& data) const;
};

enum class Grouping { ByRow, BySession };

std::string_view to_string(Grouping grouping);
std::optional<Grouping> parse_grouping(std::string_view text);

struct SplitPlan {
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  std::size_t fold_count = 5;
  Grouping grouping = Grouping::BySession;
};

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;  ///< test or validation rows
};

IndexSplit split_train_test(std::span<const RowKey> keys, const SplitPlan& plan);
std::vector<IndexSplit> kfold(std::span<const RowKey> keys, const SplitPlan& plan);

/// "session_id,question,fold" per row, for auditing fold membership.
void write_fold_assignments(std::ostream& out, std::span<const RowKey> keys, std::span<const IndexSplit> folds);

}  // namespace playtrace
