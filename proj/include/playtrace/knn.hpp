#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "playtrace/bytes.hpp"
#include "playtrace/common.hpp"

namespace playtrace {

enum class Metric { Euclidean, Manhattan, Cosine };

std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view text);

/// Cosine distance is 1 - cosine similarity, so smaller is closer for every
/// metric. Throws ZeroVector when a cosine operand has zero norm.
double distance(std::span<const double> a, std::span<const double> b, Metric metric);

struct KnnModel {
  Matrix train;
  std::vector<int> labels;
  std::size_t k = 5;
  Metric metric = Metric::Euclidean;

  bool operator==(const KnnModel&) const = default;
};

KnnModel knn_fit(const Matrix& x, std::span<const int> y, std::size_t k, Metric metric = Metric::Euclidean);

/// Exact brute-force search. Distance ties go to the lower stored row; vote
/// ties go to the class with the smaller summed distance, then the smaller
/// label. Queries run in parallel.
std::vector<int> knn_predict(const KnnModel& model, const Matrix& queries);
std::vector<int> knn_predict_serial(const KnnModel& model, const Matrix& queries);

void write_knn(ByteWriter& out, const KnnModel& model);
KnnModel read_knn(ByteReader& in);

}  // namespace playtrace
