#include "playtrace/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <set>
#include <sstream>

namespace playtrace {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

namespace {

void check_lengths(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size())
    throw Error(ErrorCode::LengthMismatch, "predictions " + std::to_string(pred.size()) + " vs truth " +
                                               std::to_string(truth.size()));
  if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "no examples to score");
}

}  // namespace

ConfusionCounts confusion(std::span<const int> pred, std::span<const int> truth, int positive) {
  check_lengths(pred, truth);
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive, t = truth[i] == positive;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double f1(const ConfusionCounts& c) {
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2 * precision * recall / (precision + recall);
}

double f1(std::span<const int> pred, std::span<const int> truth, int positive) {
  return f1(confusion(pred, truth, positive));
}

double macro_f1(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0;
  for (int c : classes) total += f1(pred, truth, c);
  return total / static_cast<double>(classes.size());
}

double majority_baseline_f1(double positive_rate) {
  if (!(positive_rate > 0)) return 0.0;
  return 2 * positive_rate / (1 + positive_rate);
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Knn: return "knn";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Forest: return "rf";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "knn") return ModelKind::Knn;
  if (text == "mlp") return ModelKind::Mlp;
  if (text == "rf" || text == "forest") return ModelKind::Forest;
  return std::nullopt;
}

ModelConfig default_model_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.folds = kind == ModelKind::Knn ? 10 : 5;
  c.preprocess.standardize = kind != ModelKind::Forest;
  return c;
}

FittedModel fit_model(const ModelConfig& config, const Matrix& x, std::span<const int> y) {
  switch (config.kind) {
    case ModelKind::Knn: return knn_fit(x, y, config.knn.k, config.knn.metric);
    case ModelKind::Mlp: {
      MlpConfig mc = config.mlp;
      mc.input_dim = x.cols();
      return mlp_train(mc, x, y);
    }
    case ModelKind::Forest: return forest_fit(x, y, config.forest);
  }
  throw Error(ErrorCode::Internal, "unhandled model kind");
}

std::vector<int> predict(const FittedModel& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) return knn_predict(m, x);
        else if constexpr (std::is_same_v<T, MlpModel>) return mlp_predict(m, x);
        else return forest_predict(m, x);
      },
      model);
}

ModelKind kind_of(const FittedModel& model) {
  switch (model.index()) {
    case 0: return ModelKind::Knn;
    case 1: return ModelKind::Mlp;
    default: return ModelKind::Forest;
  }
}

std::vector<int> TrainedModel::predict(const JoinedDataset& data) const {
  return playtrace::predict(model, preprocessor.transform_features(data.x));
}

TrainedModel train_model(const ModelConfig& config, const JoinedDataset& train) {
  Preprocessor prep = Preprocessor::fit(train, config.preprocess);
  LabeledDataset ready = prep.transform(train);
  FittedModel model = fit_model(config, ready.x, ready.y);
  return TrainedModel{config, std::move(prep), std::move(model)};
}

ModelFactory factory_for(const ModelConfig& config) {
  return [config](const Matrix& x, std::span<const int> y) -> Predictor {
    auto model = std::make_shared<FittedModel>(fit_model(config, x, y));
    return [model](const Matrix& q) { return predict(*model, q); };
  };
}

namespace {

FoldResult run_fold(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                    const IndexSplit& split) {
  JoinedDataset train = subset(data, split.train);
  JoinedDataset test = subset(data, split.test);
  Preprocessor prep = Preprocessor::fit(train, preprocess);
  LabeledDataset ready = prep.transform(train);
  Predictor predictor = factory(ready.x, ready.y);
  std::vector<int> pred = predictor(prep.transform_features(test.x));

  FoldResult r;
  r.train_rows = train.rows();
  r.test_rows = test.rows();
  r.confusion = confusion(pred, test.y);
  r.f1 = f1(r.confusion);
  r.accuracy = accuracy(pred, test.y);
  r.macro_f1 = macro_f1(pred, test.y);
  return r;
}

EvalReport run_splits(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                      std::span<const IndexSplit> splits, const std::string& name, const std::string& protocol) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport report;
  report.model = name;
  report.protocol = protocol;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    try {
      report.folds.push_back(run_fold(factory, preprocess, data, splits[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(i) + ": " + e.message());
    }
  }
  const double n = static_cast<double>(report.folds.size());
  for (const auto& f : report.folds) {
    report.mean_f1 += f.f1 / n;
    report.mean_accuracy += f.accuracy / n;
    report.mean_macro_f1 += f.macro_f1 / n;
    report.totals += f.confusion;
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

EvalReport cross_validate(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                          const SplitPlan& plan, const std::string& name) {
  const auto folds = kfold(data.row_keys, plan);
  return run_splits(factory, preprocess, data, folds, name, "cv");
}

EvalReport holdout(const ModelFactory& factory, const PreprocessOptions& preprocess, const JoinedDataset& data,
                   const SplitPlan& plan, const std::string& name) {
  const IndexSplit split = split_train_test(data.row_keys, plan);
  return run_splits(factory, preprocess, data, std::span<const IndexSplit>(&split, 1), name, "holdout");
}

BenchmarkResult benchmark(std::span<const ModelConfig> models, const JoinedDataset& data, const SplitPlan& plan) {
  if (models.empty()) throw Error(ErrorCode::ConfigInvalid, "benchmark needs at least one model");
  BenchmarkResult result;
  const auto positives = std::count(data.y.begin(), data.y.end(), 1);
  result.positive_rate = data.rows() ? static_cast<double>(positives) / static_cast<double>(data.rows()) : 0.0;
  result.baseline_f1 = majority_baseline_f1(result.positive_rate);
  for (const auto& m : models) {
    SplitPlan p = plan;
    p.fold_count = m.folds;
    const std::string name(to_string(m.kind));
    EvalReport r;
    try {
      r = cross_validate(factory_for(m), m.preprocess, data, p, name);
    } catch (const Error& e) {
      throw Error(e.code(), name + " " + e.message());
    }
    result.table.push_back({name, r.mean_f1, r.mean_accuracy, std::to_string(m.folds) + "-fold cv", false});
    result.reports.push_back(std::move(r));
  }
  result.table.push_back({"French Touch", 0.72, std::nullopt, "published", true});
  return result;
}

nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["protocol"] = report.protocol;
  j["fold_count"] = report.folds.size();
  auto& folds = j["folds"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.folds.size(); ++i) {
    const auto& f = report.folds[i];
    folds.push_back({{"fold", i},
                     {"train_rows", f.train_rows},
                     {"test_rows", f.test_rows},
                     {"f1", f.f1},
                     {"accuracy", f.accuracy},
                     {"macro_f1", f.macro_f1},
                     {"confusion", to_json(f.confusion)}});
  }
  j["mean_f1"] = report.mean_f1;
  j["mean_accuracy"] = report.mean_accuracy;
  j["mean_macro_f1"] = report.mean_macro_f1;
  j["confusion_totals"] = to_json(report.totals);
  j["positive_class"] = 1;
  j["fingerprint"] = report.fingerprint;
  return j;
}

nlohmann::json to_json(const BenchmarkResult& result) {
  nlohmann::json j;
  j["positive_rate"] = result.positive_rate;
  j["majority_baseline_f1"] = result.baseline_f1;
  auto& table = j["table"] = nlohmann::json::array();
  for (const auto& row : result.table) {
    table.push_back({{"model", row.model},
                     {"f1", row.f1 ? nlohmann::json(*row.f1) : nlohmann::json()},
                     {"accuracy", row.accuracy ? nlohmann::json(*row.accuracy) : nlohmann::json("N/A")},
                     {"protocol", row.protocol},
                     {"reference", row.reference}});
  }
  auto& reports = j["reports"] = nlohmann::json::array();
  for (const auto& r : result.reports) reports.push_back(to_json(r));
  return j;
}

std::string format_table(const BenchmarkResult& result) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("N/A");
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << *v;
    return s.str();
  };
  std::size_t width = 5;
  for (const auto& row : result.table) width = std::max(width, row.model.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "model" << "  " << std::setw(8) << "F1" << "  "
      << std::setw(8) << "accuracy" << "  protocol\n";
  for (const auto& row : result.table)
    out << std::left << std::setw(static_cast<int>(width)) << row.model << "  " << std::setw(8) << cell(row.f1) << "  "
        << std::setw(8) << cell(row.accuracy) << "  " << row.protocol << (row.reference ? " (reference)" : "") << "\n";
  out << "majority-class baseline F1 " << cell(result.baseline_f1) << " at positive rate "
      << cell(result.positive_rate) << "\n";
  return out.str();
}

}  // namespace playtrace
