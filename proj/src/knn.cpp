#include "playtrace/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace playtrace {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Euclidean: return "euclidean";
    case Metric::Manhattan: return "manhattan";
    case Metric::Cosine: return "cosine";
  }
  return "?";
}

std::optional<Metric> parse_metric(std::string_view text) {
  if (text == "euclidean") return Metric::Euclidean;
  if (text == "manhattan") return Metric::Manhattan;
  if (text == "cosine") return Metric::Cosine;
  return std::nullopt;
}

namespace {

double norm(std::span<const double> a) {
  double s = 0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double raw_distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  switch (metric) {
    case Metric::Euclidean: {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    }
    case Metric::Manhattan: {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
      return s;
    }
    case Metric::Cosine: {
      double dot = 0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
      return 1.0 - dot / (norm(a) * norm(b));
    }
  }
  return 0;
}

bool has_zero_row(const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (norm(m.row(r)) == 0.0) return true;
  return false;
}

int predict_one(const KnnModel& model, std::span<const double> query, std::vector<std::pair<double, std::size_t>>& scratch) {
  const std::size_t n = model.train.rows();
  scratch.resize(n);
  for (std::size_t j = 0; j < n; ++j) scratch[j] = {raw_distance(query, model.train.row(j), model.metric), j};
  const auto k = static_cast<std::ptrdiff_t>(model.k);
  std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end());

  struct Tally {
    int label;
    std::size_t votes;
    double total;
  };
  std::vector<Tally> tallies;
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const auto& [d, j] = scratch[static_cast<std::size_t>(i)];
    const int label = model.labels[j];
    auto it = std::find_if(tallies.begin(), tallies.end(), [&](const Tally& t) { return t.label == label; });
    if (it == tallies.end()) {
      tallies.push_back({label, 1, d});
    } else {
      ++it->votes;
      it->total += d;
    }
  }
  const auto best = std::min_element(tallies.begin(), tallies.end(), [](const Tally& a, const Tally& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.total != b.total) return a.total < b.total;
    return a.label < b.label;
  });
  return best->label;
}

void check_queries(const KnnModel& model, const Matrix& queries) {
  if (queries.cols() != model.train.cols())
    throw Error(ErrorCode::DimensionMismatch, "query width " + std::to_string(queries.cols()) + " vs model width " +
                                                  std::to_string(model.train.cols()));
  if (model.metric == Metric::Cosine && has_zero_row(queries))
    throw Error(ErrorCode::ZeroVector, "cosine distance on a zero-norm query");
}

}  // namespace

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "distance: vector sizes differ");
  if (metric == Metric::Cosine && (norm(a) == 0.0 || norm(b) == 0.0))
    throw Error(ErrorCode::ZeroVector, "cosine distance on a zero-norm vector");
  return raw_distance(a, b, metric);
}

KnnModel knn_fit(const Matrix& x, std::span<const int> y, std::size_t k, Metric metric) {
  if (y.size() != x.rows()) throw Error(ErrorCode::LengthMismatch, "knn_fit: label count differs from rows");
  if (k < 1) throw Error(ErrorCode::ConfigInvalid, "k must be >= 1");
  if (k > x.rows())
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds " + std::to_string(x.rows()) + " rows");
  if (metric == Metric::Cosine && has_zero_row(x))
    throw Error(ErrorCode::ZeroVector, "cosine metric with a zero-norm training row");
  return KnnModel{x, std::vector<int>(y.begin(), y.end()), k, metric};
}

std::vector<int> knn_predict_serial(const KnnModel& model, const Matrix& queries) {
  check_queries(model, queries);
  std::vector<int> out(queries.rows());
  std::vector<std::pair<double, std::size_t>> scratch;
  for (std::size_t q = 0; q < queries.rows(); ++q) out[q] = predict_one(model, queries.row(q), scratch);
  return out;
}

std::vector<int> knn_predict(const KnnModel& model, const Matrix& queries) {
  check_queries(model, queries);
  std::vector<int> out(queries.rows());
  const auto nq = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel num_threads(parallel::workers())
  {
    std::vector<std::pair<double, std::size_t>> scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t q = 0; q < nq; ++q) {
      auto uq = static_cast<std::size_t>(q);
      out[uq] = predict_one(model, queries.row(uq), scratch);
    }
  }
  return out;
}

void write_knn(ByteWriter& out, const KnnModel& model) {
  out.str(to_string(model.metric));
  out.u64(model.k);
  out.matrix(model.train);
  out.u64(model.labels.size());
  for (int l : model.labels) out.i64(l);
}

KnnModel read_knn(ByteReader& in) {
  KnnModel m;
  auto metric = parse_metric(in.str());
  if (!metric) throw Error(ErrorCode::Format, "unknown knn metric");
  m.metric = *metric;
  m.k = in.u64();
  m.train = in.matrix();
  const auto n = in.u64();
  if (n != m.train.rows()) throw Error(ErrorCode::Format, "knn label count differs from stored rows");
  m.labels.resize(n);
  for (auto& l : m.labels) l = static_cast<int>(in.i64());
  if (m.k < 1 || m.k > m.train.rows()) throw Error(ErrorCode::Format, "knn k out of range");
  return m;
}

}  // namespace playtrace
