#include "playtrace/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace playtrace {

namespace {

constexpr double kGainTolerance = 1e-12;

std::size_t total_of(std::span<const std::size_t> counts) {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

// Shared by information_gain and best_split so both produce identical bits.
double weighted_gain(double parent_impurity, double n, std::span<const std::size_t> left, std::size_t nl,
                     std::span<const std::size_t> right, std::size_t nr, Criterion criterion) {
  return parent_impurity - (static_cast<double>(nl) / n) * impurity(left, criterion) -
         (static_cast<double>(nr) / n) * impurity(right, criterion);
}

}  // namespace

double entropy(std::span<const std::size_t> counts) {
  const std::size_t total = total_of(counts);
  if (total == 0) throw Error(ErrorCode::EmptySet, "entropy of an empty node");
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double gini(std::span<const std::size_t> counts) {
  const std::size_t total = total_of(counts);
  if (total == 0) throw Error(ErrorCode::EmptySet, "gini of an empty node");
  double s = 0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

std::string_view to_string(Criterion criterion) { return criterion == Criterion::Gini ? "gini" : "entropy"; }

std::optional<Criterion> parse_criterion(std::string_view text) {
  if (text == "gini") return Criterion::Gini;
  if (text == "entropy") return Criterion::Entropy;
  return std::nullopt;
}

double impurity(std::span<const std::size_t> counts, Criterion criterion) {
  return criterion == Criterion::Gini ? gini(counts) : entropy(counts);
}

double information_gain(std::span<const std::size_t> parent, std::span<const ClassCounts> children,
                        Criterion criterion) {
  ClassCounts sum(parent.size(), 0);
  for (const auto& child : children) {
    if (child.size() != parent.size()) throw Error(ErrorCode::PartitionMismatch, "child has a different class count");
    for (std::size_t k = 0; k < child.size(); ++k) sum[k] += child[k];
  }
  if (!std::equal(sum.begin(), sum.end(), parent.begin()))
    throw Error(ErrorCode::PartitionMismatch, "children do not partition the parent");
  const std::size_t total = total_of(parent);
  const double n = static_cast<double>(total);
  const double base = impurity(parent, criterion);
  std::vector<const ClassCounts*> nonempty;
  for (const auto& child : children)
    if (total_of(child) > 0) nonempty.push_back(&child);
  if (nonempty.size() == 2)
    return weighted_gain(base, n, *nonempty[0], total_of(*nonempty[0]), *nonempty[1], total_of(*nonempty[1]),
                         criterion);
  double gain = base;
  for (const auto* child : nonempty) gain -= (static_cast<double>(total_of(*child)) / n) * impurity(*child, criterion);
  return gain;
}

std::string_view to_string(FeatureSubsample rule) { return rule == FeatureSubsample::All ? "all" : "sqrt"; }

std::optional<FeatureSubsample> parse_feature_subsample(std::string_view text) {
  if (text == "all") return FeatureSubsample::All;
  if (text == "sqrt") return FeatureSubsample::Sqrt;
  return std::nullopt;
}

void validate(const TreeConfig& config) {
  if (config.max_depth && *config.max_depth < 1) throw Error(ErrorCode::ConfigInvalid, "max_depth must be >= 1");
  if (config.min_samples_split < 2) throw Error(ErrorCode::ConfigInvalid, "min_samples_split must be >= 2");
}

std::optional<Split> best_split(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, Criterion criterion, std::size_t classes) {
  if (rows.size() < 2) return std::nullopt;
  ClassCounts parent(classes, 0);
  for (auto r : rows) ++parent[static_cast<std::size_t>(y[r])];
  const double n = static_cast<double>(rows.size());
  const double base = impurity(parent, criterion);

  std::optional<Split> best;
  std::vector<std::pair<double, int>> sorted(rows.size());
  ClassCounts left(classes), right(classes);
  for (auto f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {x(rows[i], f), y[rows[i]]};
    std::sort(sorted.begin(), sorted.end());
    std::fill(left.begin(), left.end(), 0);
    right = parent;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const auto k = static_cast<std::size_t>(sorted[i].second);
      ++left[k];
      --right[k];
      const double lo = sorted[i].first, hi = sorted[i + 1].first;
      if (lo == hi) continue;
      const double gain = weighted_gain(base, n, left, i + 1, right, sorted.size() - i - 1, criterion);
      // Gains within kGainTolerance of zero or of the incumbent are rounding
      // noise: treat them as no gain and as ties.
      if (!(gain > kGainTolerance)) continue;
      if (!best || gain > best->gain + kGainTolerance) {
        double t = lo + (hi - lo) / 2;
        if (!(t < hi)) t = lo;
        best = Split{f, t, gain};
      }
    }
  }
  return best;
}

int Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].leaf) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].label;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].leaf) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
  }
  return deepest;
}

namespace {

std::size_t class_count(std::span<const int> y) {
  int top = 1;
  for (int v : y) {
    if (v < 0) throw Error(ErrorCode::ConfigInvalid, "labels must be non-negative");
    top = std::max(top, v);
  }
  return static_cast<std::size_t>(top) + 1;
}

struct Builder {
  const Matrix& x;
  std::span<const int> y;
  const TreeConfig& config;
  std::size_t classes;
  Rng rng;
  std::vector<double>* importance;
  Tree tree;
  std::vector<std::size_t> all_features;

  std::vector<std::size_t> candidates() {
    if (config.feature_subsample == FeatureSubsample::All) return all_features;
    const std::size_t d = all_features.size();
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    std::vector<std::size_t> pool = all_features;
    // Partial Fisher-Yates: the first m entries become the sample.
    for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng.below(d - i)]);
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  std::size_t build(std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    ClassCounts counts(classes, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(y[r])];
    const auto majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
    const bool depth_done = config.max_depth && depth >= *config.max_depth;

    std::optional<Split> split;
    if (!pure && !depth_done && rows.size() >= config.min_samples_split)
      split = best_split(x, y, rows, candidates(), config.criterion, classes);
    if (!split) {
      auto& node = tree.nodes[id];
      node.leaf = true;
      node.label = majority;
      node.counts = std::move(counts);
      return id;
    }
    if (importance) (*importance)[split->feature] += split->gain * static_cast<double>(rows.size());

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) (x(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = build(left_rows, depth + 1);
    const std::size_t r = build(right_rows, depth + 1);
    auto& node = tree.nodes[id];
    node.leaf = false;
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    node.label = majority;
    node.counts = std::move(counts);
    return id;
  }
};

Tree fit_rows(const Matrix& x, std::span<const int> y, std::vector<std::size_t> rows, const TreeConfig& config,
              std::size_t classes, std::vector<double>* importance) {
  validate(config);
  if (rows.empty()) throw Error(ErrorCode::EmptySet, "tree_fit needs at least one row");
  if (importance) importance->assign(x.cols(), 0.0);
  Builder b{x, y, config, classes, Rng(config.seed), importance, {}, {}};
  b.all_features.resize(x.cols());
  std::iota(b.all_features.begin(), b.all_features.end(), std::size_t{0});
  b.build(rows, 0);
  return std::move(b.tree);
}

void check_xy(const Matrix& x, std::span<const int> y) {
  if (y.size() != x.rows()) throw Error(ErrorCode::LengthMismatch, "label count differs from row count");
}

ForestModel fit_forest(const Matrix& x, std::span<const int> y, const ForestConfig& config, bool parallel) {
  check_xy(x, y);
  validate(config.tree);
  if (config.tree_count < 1) throw Error(ErrorCode::ConfigInvalid, "tree_count must be >= 1");
  if (x.rows() == 0) throw Error(ErrorCode::EmptySet, "forest_fit needs at least one row");
  const std::size_t classes = class_count(y);
  const std::size_t n = x.rows();

  ForestModel model;
  model.config = config;
  model.input_dim = x.cols();
  model.trees.resize(config.tree_count);
  model.tree_seeds.resize(config.tree_count);
  std::vector<std::vector<double>> gains(config.tree_count);
  for (std::size_t t = 0; t < config.tree_count; ++t) model.tree_seeds[t] = derive_seed(config.seed, t);

  auto fit_one = [&](std::size_t t) {
    Rng rng(model.tree_seeds[t]);
    std::vector<std::size_t> rows(n);
    if (config.bootstrap)
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    else
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    TreeConfig tc = config.tree;
    tc.seed = rng.next();
    model.trees[t] = fit_rows(x, y, std::move(rows), tc, classes, &gains[t]);
  };
  const auto count = static_cast<std::ptrdiff_t>(config.tree_count);
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(parallel::workers())
    for (std::ptrdiff_t t = 0; t < count; ++t) fit_one(static_cast<std::size_t>(t));
  } else {
    for (std::ptrdiff_t t = 0; t < count; ++t) fit_one(static_cast<std::size_t>(t));
  }

  model.importances.assign(x.cols(), 0.0);
  for (const auto& g : gains)
    for (std::size_t f = 0; f < g.size(); ++f) model.importances[f] += g[f];
  const double total = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (total > 0)
    for (auto& v : model.importances) v /= total;
  return model;
}

int vote(const ForestModel& model, std::span<const double> q, std::vector<std::size_t>& tally) {
  std::fill(tally.begin(), tally.end(), 0);
  for (const auto& tree : model.trees) {
    const auto label = static_cast<std::size_t>(tree.predict(q));
    if (label >= tally.size()) tally.resize(label + 1, 0);
    ++tally[label];
  }
  return static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
}

std::vector<int> predict_forest(const ForestModel& model, const Matrix& queries, bool parallel) {
  if (queries.cols() != model.input_dim)
    throw Error(ErrorCode::DimensionMismatch, "query width " + std::to_string(queries.cols()) + ", forest expects " +
                                                  std::to_string(model.input_dim));
  std::vector<int> out(queries.rows());
  const auto nq = static_cast<std::ptrdiff_t>(queries.rows());
  if (parallel) {
#pragma omp parallel num_threads(parallel::workers())
    {
      std::vector<std::size_t> tally(2);
#pragma omp for schedule(static)
      for (std::ptrdiff_t q = 0; q < nq; ++q)
        out[static_cast<std::size_t>(q)] = vote(model, queries.row(static_cast<std::size_t>(q)), tally);
    }
  } else {
    std::vector<std::size_t> tally(2);
    for (std::ptrdiff_t q = 0; q < nq; ++q)
      out[static_cast<std::size_t>(q)] = vote(model, queries.row(static_cast<std::size_t>(q)), tally);
  }
  return out;
}

void write_tree_config(ByteWriter& out, const TreeConfig& c) {
  out.str(to_string(c.criterion));
  out.u8(c.max_depth ? 1 : 0);
  out.u64(c.max_depth.value_or(0));
  out.u64(c.min_samples_split);
  out.str(to_string(c.feature_subsample));
  out.u64(c.seed);
}

TreeConfig read_tree_config(ByteReader& in) {
  TreeConfig c;
  auto crit = parse_criterion(in.str());
  if (!crit) throw Error(ErrorCode::Format, "unknown split criterion");
  c.criterion = *crit;
  const bool has_depth = in.u8() != 0;
  const auto depth = in.u64();
  if (has_depth) c.max_depth = depth;
  c.min_samples_split = in.u64();
  auto rule = parse_feature_subsample(in.str());
  if (!rule) throw Error(ErrorCode::Format, "unknown feature subsample rule");
  c.feature_subsample = *rule;
  c.seed = in.u64();
  return c;
}

}  // namespace

Tree tree_fit(const Matrix& x, std::span<const int> y, const TreeConfig& config) {
  check_xy(x, y);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_rows(x, y, std::move(rows), config, class_count(y), nullptr);
}

Tree tree_fit_rows(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                   const TreeConfig& config, std::vector<double>* importance) {
  check_xy(x, y);
  return fit_rows(x, y, std::vector<std::size_t>(rows.begin(), rows.end()), config, class_count(y), importance);
}

ForestModel forest_fit(const Matrix& x, std::span<const int> y, const ForestConfig& config) {
  return fit_forest(x, y, config, true);
}

ForestModel forest_fit_serial(const Matrix& x, std::span<const int> y, const ForestConfig& config) {
  return fit_forest(x, y, config, false);
}

std::vector<int> forest_predict(const ForestModel& model, const Matrix& queries) {
  return predict_forest(model, queries, true);
}

std::vector<int> forest_predict_serial(const ForestModel& model, const Matrix& queries) {
  return predict_forest(model, queries, false);
}

void write_forest(ByteWriter& out, const ForestModel& model) {
  const auto& c = model.config;
  out.u64(c.tree_count);
  write_tree_config(out, c.tree);
  out.u8(c.bootstrap ? 1 : 0);
  out.u64(c.seed);
  out.u64(model.input_dim);
  out.u64(model.trees.size());
  for (const auto& tree : model.trees) {
    out.u64(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      out.u8(node.leaf ? 1 : 0);
      out.u64(node.feature);
      out.f64(node.threshold);
      out.u64(node.left);
      out.u64(node.right);
      out.i64(node.label);
      out.u64(node.counts.size());
      for (auto k : node.counts) out.u64(k);
    }
  }
  out.u64(model.tree_seeds.size());
  for (auto s : model.tree_seeds) out.u64(s);
  out.f64s(model.importances);
}

ForestModel read_forest(ByteReader& in) {
  ForestModel m;
  auto& c = m.config;
  c.tree_count = in.u64();
  c.tree = read_tree_config(in);
  c.bootstrap = in.u8() != 0;
  c.seed = in.u64();
  m.input_dim = in.u64();
  const auto trees = in.u64();
  if (trees != c.tree_count || trees > in.remaining()) throw Error(ErrorCode::Format, "forest tree count mismatch");
  m.trees.resize(trees);
  for (auto& tree : m.trees) {
    const auto nodes = in.u64();
    if (nodes == 0 || nodes > in.remaining()) throw Error(ErrorCode::Format, "bad tree node count");
    tree.nodes.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      auto& node = tree.nodes[i];
      node.leaf = in.u8() != 0;
      node.feature = in.u64();
      node.threshold = in.f64();
      node.left = in.u64();
      node.right = in.u64();
      node.label = static_cast<int>(in.i64());
      const auto k = in.u64();
      if (k > in.remaining()) throw Error(ErrorCode::Format, "bad leaf class count");
      node.counts.resize(k);
      for (auto& v : node.counts) v = in.u64();
      // Preorder: children always come after their parent.
      if (!node.leaf && (node.left <= i || node.right <= i || node.left >= nodes || node.right >= nodes ||
                         node.feature >= m.input_dim))
        throw Error(ErrorCode::Format, "tree node links are inconsistent");
    }
  }
  const auto seeds = in.u64();
  if (seeds != trees) throw Error(ErrorCode::Format, "forest seed count mismatch");
  m.tree_seeds.resize(seeds);
  for (auto& s : m.tree_seeds) s = in.u64();
  m.importances = in.f64s();
  return m;
}

}  // namespace playtrace
