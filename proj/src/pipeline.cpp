#include "playtrace/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "playtrace/aggregation.hpp"
#include "playtrace/container.hpp"
#include "playtrace/selection.hpp"
#include "playtrace/synth.hpp"

namespace playtrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::ifstream open_in(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  return out;
}

json read_json_file(const std::string& path, const char* what) {
  auto in = open_in(path, what);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

Pipeline::Pipeline(RunConfig config, std::ostream& out, std::ostream& err)
    : config_(std::move(config)), fingerprint_(fingerprint(config_)), out_(out), err_(err) {
  parallel::set_workers(config_.workers);
}

std::string Pipeline::model_file(ModelKind kind) { return "model_" + std::string(to_string(kind)) + ".ptm"; }

json Pipeline::stamp(json report) const {
  report["fingerprint"] = to_json(fingerprint_);
  report["workers"] = parallel::workers();
  report["generator"] = std::string("playtrace ") + kVersion;
  return report;
}

void Pipeline::write_json(const std::string& file, const json& doc) const {
  auto out = open_out(config_.paths.in_workdir(file));
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + file + "'");
}

void Pipeline::gen_synthetic() {
  fs::create_directories(config_.paths.workdir);
  const auto start = std::chrono::steady_clock::now();
  auto events = open_out(config_.paths.events_path());
  auto labels = open_out(config_.paths.labels_path());
  SynthSummary s = generate(config_.synth, events, labels);
  events.close();
  labels.close();
  write_json("manifest.json", stamp(manifest_json(s)));
  out_ << "generated " << s.sessions.size() << " sessions, " << s.events_written << " events, " << s.draws.size()
       << " labels in " << fixed(seconds_since(start), 1) << " s\n";
}

void Pipeline::aggregate() {
  const auto start = std::chrono::steady_clock::now();
  auto in = open_in(config_.paths.events_path(), "events file");
  std::size_t errors = 0;
  EventReader reader(
      in, kEventColumns,
      [&](const RowError& e) {
        if (++errors <= 10) err_ << "row " << e.row << " (" << e.column << "): " << e.message << '\n';
      },
      [&](const std::string& w) { err_ << "warning: " << w << '\n'; });
  FeatureMatrix fm = playtrace::aggregate(reader, config_.specs, config_.batch_rows);
  const IngestStats& stats = reader.stats();
  if (errors > 10) err_ << (errors - 10) << " more row errors\n";

  {
    auto csv = open_out(config_.paths.in_workdir("features.csv"));
    write_features_csv(csv, fm);
    if (!csv) throw Error(ErrorCode::Io, "failed writing features.csv");
  }
  json meta = features_metadata(fm);
  meta["ingest"] = {{"rows_total", stats.rows_total},
                    {"events_emitted", stats.events_emitted},
                    {"rows_skipped", stats.rows_skipped},
                    {"group_mismatches", stats.group_mismatches},
                    {"elapsed_regressions", stats.elapsed_regressions},
                    {"bytes_read", stats.bytes_read}};
  write_json("features.meta.json", stamp(meta));
  const CompressionReport report = compression_report(stats, fm);
  write_json("compression.json", stamp(to_json(report)));
  out_ << "aggregated " << stats.events_emitted << " events into " << fm.rows.size() << " rows x "
       << fm.columns.size() << " features";
  if (report.ratio) out_ << " (output " << fixed(*report.ratio * 100, 3) << "% of input bytes)";
  out_ << " in " << fixed(seconds_since(start), 1) << " s\n";
}

namespace {

FeatureMatrix load_features(const RunPaths& paths) {
  const json meta = read_json_file(paths.in_workdir("features.meta.json"), "feature metadata");
  auto csv = open_in(paths.in_workdir("features.csv"), "feature file");
  return read_features(csv, meta);
}

std::vector<LabelRecord> load_labels(const RunPaths& paths) {
  auto in = open_in(paths.labels_path(), "labels file");
  return read_labels(in);
}

}  // namespace

JoinedDataset Pipeline::load_dataset() const {
  const FeatureMatrix fm = load_features(config_.paths);
  const auto labels = load_labels(config_.paths);
  JoinedDataset data = join(fm, labels);
  const std::string sel_path = config_.paths.in_workdir("selection.json");
  if (fs::exists(sel_path)) {
    const json sel = read_json_file(sel_path, "selection report");
    if (!sel.contains("selected") || !sel.at("selected").is_array())
      throw Error(ErrorCode::Format, "selection report has no feature list");
    data = select_columns(data, sel.at("selected").get<std::vector<std::string>>());
  }
  return data;
}

void Pipeline::select() {
  const FeatureMatrix fm = load_features(config_.paths);
  const auto labels = load_labels(config_.paths);
  const JoinedDataset data = join(fm, labels);
  if (data.dropped) err_ << "warning: " << data.dropped << " labels have no feature row\n";

  SelectionInput input;
  input.names = data.feature_names;
  for (const auto& name : data.feature_names) input.sources.push_back(fm.columns[*fm.find_column(name)].source);
  input.categorical = data.code_columns;
  input.x = impute_mean(data.x, data.feature_names).x;
  input.label = data.y;
  const SelectionResult result = select_features(input, config_.selection);

  json report = to_json(result, config_.selection);
  report["rows"] = data.rows();
  report["correlation"] = to_json(correlation_matrix(input.x, input.names, input.label));
  write_json("selection.json", stamp(report));
  out_ << "selected " << result.selected.size() << " of " << input.names.size() << " features:";
  for (const auto& s : result.selected) out_ << ' ' << s;
  out_ << '\n';
}

void Pipeline::train(ModelKind kind) {
  const auto start = std::chrono::steady_clock::now();
  const JoinedDataset data = load_dataset();
  const IndexSplit split = split_train_test(data.row_keys, config_.split);
  const JoinedDataset train_part = subset(data, split.train);
  const ModelConfig& mc = config_.model(kind);
  TrainedModel trained = train_model(mc, train_part);

  ModelContainer c;
  c.kind = kind;
  json meta = stamp(json::object());
  meta.erase("workers");
  meta["model"] = to_string(kind);
  meta["feature_names"] = data.feature_names;
  meta["train_rows"] = train_part.rows();
  meta["split"] = {{"seed", config_.split.seed},
                   {"test_fraction", config_.split.test_fraction},
                   {"grouping", to_string(config_.split.grouping)}};
  c.meta = meta.dump();
  c.model = std::move(trained);
  save_container(config_.paths.in_workdir(model_file(kind)), c);
  out_ << "trained " << to_string(kind) << " on " << train_part.rows() << " rows in "
       << fixed(seconds_since(start), 1) << " s -> " << model_file(kind) << '\n';
}

void Pipeline::evaluate(ModelKind kind) {
  const ModelContainer c = load_container(config_.paths.in_workdir(model_file(kind)));
  const json meta = c.meta_json();
  if (!meta.contains("fingerprint") || meta["fingerprint"].value("hash", "") != fingerprint_.hash)
    err_ << "warning: " << model_file(kind) << " was trained under a different configuration\n";
  const JoinedDataset data = load_dataset();
  if (c.model.preprocessor.input_names != data.feature_names)
    throw Error(ErrorCode::ShapeMismatch, "model was trained on different feature columns");
  const IndexSplit split = split_train_test(data.row_keys, config_.split);
  const JoinedDataset test = subset(data, split.test);
  const std::vector<int> pred = c.model.predict(test);

  EvalReport r;
  r.model = std::string(to_string(kind));
  r.protocol = "holdout";
  FoldResult f;
  f.train_rows = split.train.size();
  f.test_rows = test.rows();
  f.confusion = confusion(pred, test.y);
  f.f1 = playtrace::f1(f.confusion);
  f.accuracy = accuracy(pred, test.y);
  f.macro_f1 = macro_f1(pred, test.y);
  r.folds.push_back(f);
  r.mean_f1 = f.f1;
  r.mean_accuracy = f.accuracy;
  r.mean_macro_f1 = f.macro_f1;
  r.totals = f.confusion;
  r.fingerprint = fingerprint_.hash;
  write_json("eval_" + r.model + ".json", stamp(to_json(r)));
  out_ << r.model << " holdout: F1 " << fixed(f.f1) << ", accuracy " << fixed(f.accuracy) << " on " << f.test_rows
       << " rows\n";
}

void Pipeline::cv(ModelKind kind) {
  const JoinedDataset data = load_dataset();
  const ModelConfig& mc = config_.model(kind);
  SplitPlan plan = config_.split;
  plan.fold_count = mc.folds;
  const std::string name(to_string(kind));
  EvalReport r = cross_validate(factory_for(mc), mc.preprocess, data, plan, name);
  r.fingerprint = fingerprint_.hash;
  write_json("cv_" + name + ".json", stamp(to_json(r)));
  {
    auto folds_out = open_out(config_.paths.in_workdir("folds_" + name + ".csv"));
    write_fold_assignments(folds_out, data.row_keys, kfold(data.row_keys, plan));
  }
  out_ << name << " " << mc.folds << "-fold cv: F1 " << fixed(r.mean_f1) << ", accuracy " << fixed(r.mean_accuracy)
       << " in " << fixed(r.runtime_seconds, 1) << " s\n";
}

void Pipeline::benchmark(const std::vector<ModelKind>& kinds) {
  const auto start = std::chrono::steady_clock::now();
  const JoinedDataset data = load_dataset();
  std::vector<ModelConfig> models;
  for (auto k : kinds) models.push_back(config_.model(k));
  BenchmarkResult result = playtrace::benchmark(models, data, config_.split);
  for (auto& r : result.reports) r.fingerprint = fingerprint_.hash;

  json report = to_json(result);
  report["rows"] = data.rows();
  report["features"] = data.feature_names;
  write_json("benchmark.json", stamp(report));

  json timing;
  timing["total_seconds"] = seconds_since(start);
  for (const auto& r : result.reports) timing["models"][r.model] = r.runtime_seconds;
  timing["workers"] = parallel::workers();
  write_json("benchmark.timing.json", timing);
  out_ << format_table(result);
}

void Pipeline::verify(const std::vector<std::string>& files) {
  std::vector<std::string> targets = files;
  if (targets.empty()) {
    for (const char* f : {"manifest.json", "features.meta.json", "compression.json", "selection.json",
                          "benchmark.json"})
      targets.emplace_back(f);
    for (auto k : {ModelKind::Knn, ModelKind::Mlp, ModelKind::Forest}) {
      const std::string name(to_string(k));
      targets.push_back(model_file(k));
      targets.push_back("cv_" + name + ".json");
      targets.push_back("eval_" + name + ".json");
    }
    std::erase_if(targets, [&](const std::string& f) { return !fs::exists(config_.paths.in_workdir(f)); });
    if (targets.empty()) throw Error(ErrorCode::MissingFile, "no outputs to verify in '" + config_.paths.workdir + "'");
  }

  std::size_t bad = 0;
  for (const auto& t : targets) {
    const std::string path = fs::exists(t) ? t : config_.paths.in_workdir(t);
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "cannot open '" + t + "'");
    json fp;
    if (path.size() > 4 && path.ends_with(".ptm")) {
      const json meta = load_container(path).meta_json();
      fp = meta.value("fingerprint", json());
    } else {
      const json doc = read_json_file(path, "report");
      fp = doc.is_object() ? doc.value("fingerprint", json()) : json();
    }
    std::string status = "ok";
    if (fp.is_null()) status = "no fingerprint";
    else if (!fingerprint_consistent(fp)) status = "altered fingerprint";
    else if (fp.at("hash") != fingerprint_.hash) status = "different configuration (" + fp.at("hash").get<std::string>() + ")";
    if (status != "ok") ++bad;
    out_ << t << ": " << status << '\n';
  }
  if (bad)
    throw Error(ErrorCode::FingerprintMismatch, std::to_string(bad) + " of " + std::to_string(targets.size()) +
                                                    " files do not match fingerprint " + fingerprint_.hash);
  out_ << "all " << targets.size() << " files match fingerprint " << fingerprint_.hash << '\n';
}

}  // namespace playtrace
