#include "playtrace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace playtrace {

QuestionMap default_question_map() {
  QuestionMap m{};
  for (int q = 1; q <= kQuestionCount; ++q)
    m[static_cast<std::size_t>(q - 1)] = q <= 3 ? LevelGroup::L0_4 : q <= 13 ? LevelGroup::L5_12 : LevelGroup::L13_22;
  return m;
}

JoinedDataset join(const FeatureMatrix& features, std::span<const LabelRecord> labels, const QuestionMap& q_map) {
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  row_of.reserve(features.rows.size());
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    const auto& r = features.rows[i];
    row_of.emplace(r.session_id * 3 + static_cast<std::uint64_t>(r.level_group), i);
  }

  JoinedDataset out;
  out.feature_names = features.column_names();
  for (std::size_t c = 0; c < features.columns.size(); ++c) out.code_columns.push_back(features.is_code_column(c));
  out.x = MaybeMatrix(0, features.columns.size());
  for (const auto& label : labels) {
    if (label.question < 1 || label.question > kQuestionCount)
      throw Error(ErrorCode::QuestionOutOfRange, std::to_string(label.question));
    const LevelGroup group = q_map[static_cast<std::size_t>(label.question - 1)];
    auto it = row_of.find(label.session_id * 3 + static_cast<std::uint64_t>(group));
    if (it == row_of.end()) {
      ++out.dropped;
      continue;
    }
    out.x.append_row(features.rows[it->second].values);
    out.y.push_back(label.correct ? 1 : 0);
    out.row_keys.push_back(RowKey{label.session_id, label.question});
  }
  if (out.y.empty() && !labels.empty())
    throw Error(ErrorCode::EmptyJoin, "no label matched a feature row (" + std::to_string(out.dropped) + " dropped)");
  if (out.y.empty()) throw Error(ErrorCode::EmptyJoin, "no labels");
  return out;
}

JoinedDataset subset(const JoinedDataset& data, std::span<const std::size_t> rows) {
  JoinedDataset out;
  out.feature_names = data.feature_names;
  out.code_columns = data.code_columns;
  out.x = data.x.select_rows(rows);
  out.y.reserve(rows.size());
  out.row_keys.reserve(rows.size());
  for (auto r : rows) {
    out.y.push_back(data.y[r]);
    out.row_keys.push_back(data.row_keys[r]);
  }
  return out;
}

JoinedDataset select_columns(const JoinedDataset& data, std::span<const std::string> names) {
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), name);
    if (it == data.feature_names.end()) throw Error(ErrorCode::MissingColumn, name);
    cols.push_back(static_cast<std::size_t>(it - data.feature_names.begin()));
  }
  JoinedDataset out;
  out.y = data.y;
  out.row_keys = data.row_keys;
  out.dropped = data.dropped;
  out.x = MaybeMatrix(data.rows(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.feature_names.push_back(data.feature_names[cols[j]]);
    out.code_columns.push_back(data.code_columns[cols[j]]);
    for (std::size_t r = 0; r < data.rows(); ++r) out.x(r, j) = data.x(r, cols[j]);
  }
  return out;
}

Imputation impute_mean(const MaybeMatrix& x, std::span<const std::string> names) {
  Imputation out{Matrix(x.rows(), x.cols()), std::vector<double>(x.cols(), 0.0)};
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < x.rows(); ++r)
      if (x(r, c)) {
        sum += *x(r, c);
        ++n;
      }
    if (n == 0) {
      std::string name = c < names.size() ? names[c] : "column " + std::to_string(c);
      throw Error(ErrorCode::AllMissingColumn, name);
    }
    out.means[c] = sum / static_cast<double>(n);
  }
  out.x = apply_imputation(x, out.means);
  return out;
}

Matrix apply_imputation(const MaybeMatrix& x, std::span<const double> means) {
  if (means.size() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "imputation means do not match column count");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c).value_or(means[c]);
  return out;
}

Standardized standardize(const Matrix& x, const std::optional<ScalerParams>& params) {
  Standardized out;
  if (params) {
    if (params->mean.size() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "scaler does not match column count");
    out.params = *params;
  } else {
    const std::size_t n = x.rows();
    out.params.mean.assign(x.cols(), 0.0);
    out.params.stddev.assign(x.cols(), 0.0);
    out.params.constant.assign(x.cols(), true);
    for (std::size_t c = 0; c < x.cols() && n > 0; ++c) {
      double sum = 0;
      for (std::size_t r = 0; r < n; ++r) sum += x(r, c);
      const double mean = sum / static_cast<double>(n);
      double ss = 0;
      for (std::size_t r = 0; r < n; ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      out.params.mean[c] = mean;
      out.params.stddev[c] = sd;
      // Round-off on a constant column leaves a tiny nonzero spread.
      out.params.constant[c] = !(sd > 1e-12 * std::max(1.0, std::fabs(mean)));
    }
  }
  out.x = Matrix(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.x(r, c) = out.params.constant[c] ? 0.0 : (x(r, c) - out.params.mean[c]) / out.params.stddev[c];
  return out;
}

OneHotEncoder OneHotEncoder::fit(const MaybeMatrix& x, const std::vector<bool>& code_columns) {
  OneHotEncoder enc;
  enc.categories.resize(x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (c >= code_columns.size() || !code_columns[c]) continue;
    auto& cats = enc.categories[c];
    for (std::size_t r = 0; r < x.rows(); ++r)
      if (x(r, c)) cats.push_back(*x(r, c));
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  }
  return enc;
}

bool OneHotEncoder::active() const {
  return std::any_of(categories.begin(), categories.end(), [](const auto& c) { return !c.empty(); });
}

MaybeMatrix OneHotEncoder::transform(const MaybeMatrix& x) const {
  if (x.cols() != categories.size()) throw Error(ErrorCode::ShapeMismatch, "one-hot encoder width");
  std::size_t width = 0;
  for (const auto& cats : categories) width += cats.empty() ? 1 : cats.size();
  MaybeMatrix out(x.rows(), width);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t o = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const auto& cats = categories[c];
      if (cats.empty()) {
        out(r, o++) = x(r, c);
        continue;
      }
      for (double cat : cats) out(r, o++) = (x(r, c) && *x(r, c) == cat) ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<std::string> OneHotEncoder::output_names(std::span<const std::string> input_names) const {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    if (categories[c].empty()) {
      names.push_back(input_names[c]);
      continue;
    }
    for (double cat : categories[c]) names.push_back(input_names[c] + "=" + format_double(cat));
  }
  return names;
}

Preprocessor Preprocessor::fit(const JoinedDataset& train, const PreprocessOptions& options) {
  Preprocessor p;
  p.options = options;
  p.input_names = train.feature_names;
  p.encoder.categories.assign(train.x.cols(), {});
  if (options.one_hot) p.encoder = OneHotEncoder::fit(train.x, train.code_columns);
  p.output_names = p.encoder.output_names(p.input_names);
  auto encoded = p.encoder.transform(train.x);
  auto imputed = impute_mean(encoded, p.output_names);
  p.impute_means = std::move(imputed.means);
  if (options.standardize) p.scaler = standardize(imputed.x).params;
  return p;
}

Matrix Preprocessor::transform_features(const MaybeMatrix& x) const {
  if (x.cols() != input_names.size()) throw Error(ErrorCode::DimensionMismatch, "preprocessor input width");
  Matrix imputed = apply_imputation(encoder.transform(x), impute_means);
  if (!scaler) return imputed;
  return standardize(imputed, scaler).x;
}

LabeledDataset Preprocessor::transform(const JoinedDataset& data) const {
  return LabeledDataset{output_names, transform_features(data.x), data.y, data.row_keys};
}

std::string_view to_string(Grouping grouping) { return grouping == Grouping::ByRow ? "by_row" : "by_session"; }

std::optional<Grouping> parse_grouping(std::string_view text) {
  if (text == "by_row") return Grouping::ByRow;
  if (text == "by_session") return Grouping::BySession;
  return std::nullopt;
}

namespace {

void check_plan(const SplitPlan& plan) {
  if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0))
    throw Error(ErrorCode::ConfigInvalid, "test_fraction must be in (0, 1)");
  if (plan.fold_count < 2) throw Error(ErrorCode::ConfigInvalid, "fold_count must be at least 2");
}

/// Units that are shuffled and assigned as a whole: rows or sessions.
std::vector<std::vector<std::size_t>> grouping_units(std::span<const RowKey> keys, Grouping grouping) {
  std::vector<std::vector<std::size_t>> units;
  if (grouping == Grouping::ByRow) {
    units.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) units[i] = {i};
    return units;
  }
  std::map<SessionId, std::vector<std::size_t>> by_session;
  for (std::size_t i = 0; i < keys.size(); ++i) by_session[keys[i].session_id].push_back(i);
  units.reserve(by_session.size());
  for (auto& [session, rows] : by_session) units.push_back(std::move(rows));
  return units;
}

constexpr std::uint64_t kSplitStream = 0x5e11;
constexpr std::uint64_t kFoldStream = 0xf01d;

}  // namespace

IndexSplit split_train_test(std::span<const RowKey> keys, const SplitPlan& plan) {
  check_plan(plan);
  auto units = grouping_units(keys, plan.grouping);
  const std::size_t n = units.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * plan.test_fraction));
  if (n_test == 0 || n_test >= n)
    throw Error(ErrorCode::TooFewRows, "cannot split " + std::to_string(n) + " " +
                                           std::string(plan.grouping == Grouping::ByRow ? "rows" : "sessions") +
                                           " with test fraction " + format_double(plan.test_fraction));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(plan.seed, kSplitStream));
  rng.shuffle(std::span(order));

  IndexSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& side = i < n_test ? split.test : split.train;
    side.insert(side.end(), units[order[i]].begin(), units[order[i]].end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<IndexSplit> kfold(std::span<const RowKey> keys, const SplitPlan& plan) {
  check_plan(plan);
  auto units = grouping_units(keys, plan.grouping);
  const std::size_t n = units.size();
  const std::size_t k = plan.fold_count;
  if (k > n)
    throw Error(ErrorCode::TooFewRows, std::to_string(k) + " folds over " + std::to_string(n) + " " +
                                           std::string(plan.grouping == Grouping::ByRow ? "rows" : "sessions"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(plan.seed, kFoldStream));
  rng.shuffle(std::span(order));

  std::vector<std::size_t> fold_of_row(keys.size());
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j, ++pos)
      for (auto row : units[order[pos]]) fold_of_row[row] = f;
  }
  std::vector<IndexSplit> folds(k);
  for (std::size_t row = 0; row < keys.size(); ++row)
    for (std::size_t f = 0; f < k; ++f) (f == fold_of_row[row] ? folds[f].test : folds[f].train).push_back(row);
  return folds;
}

void write_fold_assignments(std::ostream& out, std::span<const RowKey> keys, std::span<const IndexSplit> folds) {
  std::vector<std::size_t> fold_of(keys.size(), 0);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (auto row : folds[f].test) fold_of[row] = f;
  out << "session_id,question,fold\n";
  for (std::size_t i = 0; i < keys.size(); ++i)
    out << keys[i].session_id << ',' << keys[i].question << ',' << fold_of[i] << '\n';
}

}  // namespace playtrace
