#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "playtrace/bytes.hpp"
#include "playtrace/common.hpp"

namespace playtrace {

using ClassCounts = std::vector<std::size_t>;

/// Shannon entropy in bits. Throws EmptySet when every count is zero.
double entropy(std::span<const std::size_t> counts);
/// 1 - sum of squared class shares. Throws EmptySet when every count is zero.
double gini(std::span<const std::size_t> counts);

enum class Criterion { Gini, Entropy };

std::string_view to_string(Criterion criterion);
std::optional<Criterion> parse_criterion(std::string_view text);

double impurity(std::span<const std::size_t> counts, Criterion criterion);

/// Parent impurity minus the size-weighted child impurity. Throws
/// PartitionMismatch unless the children sum to the parent class by class.
double information_gain(std::span<const std::size_t> parent, std::span<const ClassCounts> children,
                        Criterion criterion = Criterion::Entropy);

enum class FeatureSubsample { All, Sqrt };

std::string_view to_string(FeatureSubsample rule);
std::optional<FeatureSubsample> parse_feature_subsample(std::string_view text);

struct TreeConfig {
  Criterion criterion = Criterion::Gini;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
  FeatureSubsample feature_subsample = FeatureSubsample::All;
  std::uint64_t seed = 42;

  bool operator==(const TreeConfig&) const = default;
};

/// Throws ConfigInvalid on max_depth 0 or min_samples_split below 2.
void validate(const TreeConfig& config);

struct Split {
  std::size_t feature = 0;
  double threshold = 0;
  double gain = 0;

  bool operator==(const Split&) const = default;
};

/// Best axis-aligned split over the candidate features, trying the midpoint
/// of every pair of consecutive distinct values. Ties go to the lower feature
/// index, then the lower threshold. None when no split has positive gain.
/// Gains are compared with a 1e-12 tolerance, so candidates that differ only
/// by rounding count as ties and a rounding-sized gain counts as zero.
std::optional<Split> best_split(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, Criterion criterion, std::size_t classes = 2);

/// Flat preorder node; leaves have left == right == 0 (the root is never a child).
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  int label = 0;
  ClassCounts counts;

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  int predict(std::span<const double> x) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

/// Leaves predict the majority class; ties go to label 0.
Tree tree_fit(const Matrix& x, std::span<const int> y, const TreeConfig& config);
/// Fits on the given rows (with repeats) only; also accumulates per-feature
/// gain into `importance` when it is non-null.
Tree tree_fit_rows(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                   const TreeConfig& config, std::vector<double>* importance = nullptr);

struct ForestConfig {
  std::size_t tree_count = 100;
  TreeConfig tree{Criterion::Gini, std::nullopt, 2, FeatureSubsample::Sqrt, 42};
  bool bootstrap = true;
  std::uint64_t seed = 42;

  bool operator==(const ForestConfig&) const = default;
};

struct ForestModel {
  ForestConfig config;
  std::size_t input_dim = 0;
  std::vector<Tree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<double> importances;  ///< total gain per feature, summing to 1

  bool operator==(const ForestModel&) const = default;
};

/// Trees are fitted in parallel; each draws its bootstrap sample and feature
/// candidates from a seed derived from the master seed and its index.
ForestModel forest_fit(const Matrix& x, std::span<const int> y, const ForestConfig& config = {});
ForestModel forest_fit_serial(const Matrix& x, std::span<const int> y, const ForestConfig& config = {});

/// Majority vote of the trees; ties go to label 0.
std::vector<int> forest_predict(const ForestModel& model, const Matrix& queries);
std::vector<int> forest_predict_serial(const ForestModel& model, const Matrix& queries);

void write_forest(ByteWriter& out, const ForestModel& model);
ForestModel read_forest(ByteReader& in);

}  // namespace playtrace
