#include "playtrace/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace playtrace {

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson: lengths differ");
  if (x.size() < 2) throw Error(ErrorCode::LengthMismatch, "pearson: need at least two values");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;

  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

namespace {

std::vector<std::vector<double>> columns_with_label(const Matrix& x, std::span<const int> label) {
  if (label.size() != x.rows()) throw Error(ErrorCode::LengthMismatch, "label length differs from row count");
  std::vector<std::vector<double>> cols;
  cols.reserve(x.cols() + 1);
  for (std::size_t c = 0; c < x.cols(); ++c) cols.push_back(x.column(c));
  cols.emplace_back(label.begin(), label.end());
  return cols;
}

CorrelationMatrix empty_matrix(std::span<const std::string> names, std::size_t cols) {
  if (names.size() != cols) throw Error(ErrorCode::LengthMismatch, "one name per column required");
  CorrelationMatrix m;
  m.names.assign(names.begin(), names.end());
  m.names.push_back("label");
  m.r.assign(m.names.size() * m.names.size(), std::nullopt);
  return m;
}

}  // namespace

CorrelationMatrix correlation_matrix_serial(const Matrix& x, std::span<const std::string> names,
                                            std::span<const int> label) {
  auto cols = columns_with_label(x, label);
  CorrelationMatrix m = empty_matrix(names, x.cols());
  const std::size_t d = m.size();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      auto r = i == j ? (pearson(cols[i], cols[i]) ? std::optional<double>(1.0) : std::nullopt)
                      : pearson(cols[i], cols[j]);
      m.r[i * d + j] = r;
      m.r[j * d + i] = r;
    }
  return m;
}

CorrelationMatrix correlation_matrix(const Matrix& x, std::span<const std::string> names, std::span<const int> label) {
  auto cols = columns_with_label(x, label);
  CorrelationMatrix m = empty_matrix(names, x.cols());
  const std::size_t d = m.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) pairs.emplace_back(i, j);

  const auto np = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 4) num_threads(parallel::workers())
  for (std::ptrdiff_t p = 0; p < np; ++p) {
    auto [i, j] = pairs[static_cast<std::size_t>(p)];
    auto r = i == j ? (pearson(cols[i], cols[i]) ? std::optional<double>(1.0) : std::nullopt)
                    : pearson(cols[i], cols[j]);
    m.r[i * d + j] = r;
    m.r[j * d + i] = r;
  }
  return m;
}

double mutual_information(std::span<const double> feature, std::span<const int> label, int bins, bool categorical,
                          InfoUnit unit) {
  if (feature.size() != label.size()) throw Error(ErrorCode::LengthMismatch, "mutual_information: lengths differ");
  if (feature.empty()) return 0.0;
  if (!categorical && bins < 2) throw Error(ErrorCode::ConfigInvalid, "mutual_information: bins must be >= 2");

  std::vector<std::size_t> xcat(feature.size());
  std::size_t nx = 0;
  if (categorical) {
    std::map<double, std::size_t> ids;
    for (double v : feature) ids.emplace(v, 0);
    for (auto& [v, id] : ids) id = nx++;
    for (std::size_t i = 0; i < feature.size(); ++i) xcat[i] = ids.at(feature[i]);
  } else {
    auto [lo_it, hi_it] = std::minmax_element(feature.begin(), feature.end());
    const double lo = *lo_it, hi = *hi_it;
    nx = static_cast<std::size_t>(bins);
    for (std::size_t i = 0; i < feature.size(); ++i) {
      if (hi == lo) {
        xcat[i] = 0;
        continue;
      }
      auto b = static_cast<std::ptrdiff_t>(std::floor((feature[i] - lo) / (hi - lo) * bins));
      xcat[i] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, bins - 1));
    }
  }
  std::map<int, std::size_t> yids;
  for (int v : label) yids.emplace(v, 0);
  std::size_t ny = 0;
  for (auto& [v, id] : yids) id = ny++;

  std::vector<double> joint(nx * ny, 0.0), px(nx, 0.0), py(ny, 0.0);
  for (std::size_t i = 0; i < feature.size(); ++i) {
    const std::size_t a = xcat[i], b = yids.at(label[i]);
    joint[a * ny + b] += 1;
    px[a] += 1;
    py[b] += 1;
  }
  const double n = static_cast<double>(feature.size());
  double mi = 0;
  for (std::size_t a = 0; a < nx; ++a)
    for (std::size_t b = 0; b < ny; ++b) {
      const double c = joint[a * ny + b];
      if (c > 0) mi += (c / n) * std::log(c * n / (px[a] * py[b]));
    }
  return unit == InfoUnit::Bits ? mi / std::log(2.0) : mi;
}

SelectionResult select_features(const SelectionInput& input, const SelectionPolicy& policy) {
  const std::size_t d = input.names.size();
  if (input.x.cols() != d || input.sources.size() != d || input.categorical.size() != d)
    throw Error(ErrorCode::LengthMismatch, "selection input columns disagree");
  if (input.label.size() != input.x.rows()) throw Error(ErrorCode::LengthMismatch, "label length");
  if (policy.k < 1) throw Error(ErrorCode::ConfigInvalid, "selection k must be >= 1");
  if (!(policy.redundancy_threshold > 0.0 && policy.redundancy_threshold <= 1.0))
    throw Error(ErrorCode::ConfigInvalid, "redundancy_threshold must be in (0, 1]");

  const std::vector<double> label(input.label.begin(), input.label.end());
  std::vector<std::vector<double>> cols(d);
  std::vector<FeatureScore> scores(d);
  std::vector<bool> dropped(d, false);
  for (std::size_t c = 0; c < d; ++c) {
    cols[c] = input.x.column(c);
    auto& s = scores[c];
    s.name = input.names[c];
    s.source = input.sources[c];
    const auto& drops = policy.mandatory_drops;
    dropped[c] = std::find(drops.begin(), drops.end(), s.source) != drops.end() ||
                 std::find(drops.begin(), drops.end(), s.name) != drops.end();
    if (input.x.rows() >= 2) s.pearson_vs_label = pearson(cols[c], label);
    s.mi = mutual_information(cols[c], input.label, policy.mi_bins, input.categorical[c]);
  }

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < d; ++c)
    if (!dropped[c]) order.push_back(c);
  auto relevance = [&](std::size_t c) { return scores[c].pearson_vs_label ? std::fabs(*scores[c].pearson_vs_label) : -1.0; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (relevance(a) != relevance(b)) return relevance(a) > relevance(b);
    if (scores[a].mi != scores[b].mi) return scores[a].mi > scores[b].mi;
    return scores[a].name < scores[b].name;
  });

  SelectionResult result;
  std::vector<std::size_t> kept;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t c = order[pos];
    auto& s = scores[c];
    s.rank = pos + 1;
    if (kept.size() >= policy.k) {
      s.reason = "not needed: k reached";
      continue;
    }
    std::optional<std::pair<std::size_t, double>> clash;
    for (auto other : kept) {
      auto r = pearson(cols[c], cols[other]);
      if (r && std::fabs(*r) > policy.redundancy_threshold) {
        clash = std::make_pair(other, std::fabs(*r));
        break;
      }
    }
    if (clash) {
      s.reason = "redundant with " + scores[clash->first].name + " (|r|=" + format_double(clash->second) + ")";
      continue;
    }
    kept.push_back(c);
    s.kept = true;
    s.reason = "kept";
    result.selected.push_back(s.name);
  }
  if (kept.size() < policy.k)
    throw Error(ErrorCode::PolicyUnsatisfiable, "only " + std::to_string(kept.size()) + " of " +
                                                    std::to_string(policy.k) + " requested features survive");

  for (auto c : order) result.scores.push_back(scores[c]);
  std::vector<std::size_t> drop_list;
  for (std::size_t c = 0; c < d; ++c)
    if (dropped[c]) drop_list.push_back(c);
  std::sort(drop_list.begin(), drop_list.end(), [&](std::size_t a, std::size_t b) { return scores[a].name < scores[b].name; });
  for (auto c : drop_list) {
    scores[c].reason = "mandatory drop";
    result.scores.push_back(scores[c]);
  }
  return result;
}

nlohmann::json to_json(const SelectionResult& result, const SelectionPolicy& policy) {
  nlohmann::json j;
  j["policy"] = {{"k", policy.k},
                 {"redundancy_threshold", policy.redundancy_threshold},
                 {"mandatory_drops", policy.mandatory_drops},
                 {"mi_bins", policy.mi_bins},
                 {"mi_unit", "nats"}};
  j["selected"] = result.selected;
  auto& features = j["features"] = nlohmann::json::array();
  for (const auto& s : result.scores) {
    features.push_back({{"feature", s.name},
                        {"source", s.source},
                        {"pearson_vs_label", s.pearson_vs_label ? nlohmann::json(*s.pearson_vs_label) : nlohmann::json()},
                        {"mi", s.mi},
                        {"rank", s.rank},
                        {"kept", s.kept},
                        {"reason", s.reason}});
  }
  return j;
}

nlohmann::json to_json(const CorrelationMatrix& matrix) {
  nlohmann::json j;
  j["names"] = matrix.names;
  auto& rows = j["r"] = nlohmann::json::array();
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < matrix.size(); ++k) {
      const auto& v = matrix.at(i, k);
      row.push_back(v ? nlohmann::json(*v) : nlohmann::json());
    }
    rows.push_back(std::move(row));
  }
  return j;
}

}  // namespace playtrace
