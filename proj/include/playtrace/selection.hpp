#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "playtrace/common.hpp"

namespace playtrace {

/// Sample Pearson correlation; nullopt when either column is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
  std::vector<std::string> names;  ///< feature names, then "label"
  std::vector<std::optional<double>> r;

  std::size_t size() const noexcept { return names.size(); }
  const std::optional<double>& at(std::size_t i, std::size_t j) const { return r[i * names.size() + j]; }
};

/// Pairwise correlations of every column of x plus the label, which is
/// appended as the last row and column. Column pairs run in parallel.
CorrelationMatrix correlation_matrix(const Matrix& x, std::span<const std::string> names, std::span<const int> label);
CorrelationMatrix correlation_matrix_serial(const Matrix& x, std::span<const std::string> names,
                                            std::span<const int> label);

enum class InfoUnit { Nats, Bits };

/// Plug-in mutual information between a feature and a binary label from the
/// joint histogram. Continuous features are binned into `bins` equal-width
/// bins over their observed range; categorical features use their values as
/// categories.
double mutual_information(std::span<const double> feature, std::span<const int> label, int bins,
                          bool categorical = false, InfoUnit unit = InfoUnit::Nats);

struct SelectionPolicy {
  std::size_t k = 11;
  double redundancy_threshold = 0.9;
  std::vector<std::string> mandatory_drops = {"page", "hover_duration", "text_fqid", "text"};
  int mi_bins = 10;
};

struct FeatureScore {
  std::string name;
  std::string source;
  std::optional<double> pearson_vs_label;
  double mi = 0;  ///< nats
  std::size_t rank = 0;  ///< 1-based relevance rank; 0 for mandatory drops
  bool kept = false;
  std::string reason;
};

struct SelectionInput {
  std::vector<std::string> names;
  std::vector<std::string> sources;   ///< event column each feature aggregates
  std::vector<bool> categorical;      ///< integer-coded categorical features
  Matrix x;                           ///< no absent values
  std::vector<int> label;
};

struct SelectionResult {
  std::vector<std::string> selected;  ///< in rank order
  std::vector<FeatureScore> scores;   ///< every input feature, in rank order
};

/// Filter selection: drop mandatory columns, rank by |r| with the label
/// (ties: higher MI, then name), keep greedily while skipping features whose
/// |r| with an already kept feature exceeds the threshold, stop at k.
SelectionResult select_features(const SelectionInput& input, const SelectionPolicy& policy);

nlohmann::json to_json(const SelectionResult& result, const SelectionPolicy& policy);
nlohmann::json to_json(const CorrelationMatrix& matrix);

}  // namespace playtrace
