#include "playtrace/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace playtrace {

using nlohmann::json;

std::string RunPaths::in_workdir(const std::string& file) const {
  return (std::filesystem::path(workdir) / file).string();
}
std::string RunPaths::events_path() const { return events.empty() ? in_workdir("events.csv") : events; }
std::string RunPaths::labels_path() const { return labels.empty() ? in_workdir("labels.csv") : labels; }

const ModelConfig& RunConfig::model(ModelKind kind) const {
  switch (kind) {
    case ModelKind::Knn: return knn;
    case ModelKind::Mlp: return mlp;
    case ModelKind::Forest: return forest;
  }
  throw Error(ErrorCode::Internal, "unhandled model kind");
}

ModelConfig& RunConfig::model(ModelKind kind) {
  return const_cast<ModelConfig&>(static_cast<const RunConfig&>(*this).model(kind));
}

void RunConfig::set_seed(std::uint64_t seed) {
  split.seed = seed;
  mlp.mlp.seed = seed;
  forest.forest.seed = seed;
  forest.forest.tree.seed = seed;
  synth.seed = seed;
}

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::ConfigInvalid, where + ": " + msg);
}

/// Rejects keys outside `allowed`.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) invalid(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) invalid(where, "unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key, "wrong type");
  }
}

void read_size(const json& obj, const char* key, const std::string& where, std::size_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) invalid(where + "." + key, "expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read_seed(const json& obj, const char* key, const std::string& where, std::uint64_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) invalid(where + "." + key, "expected a non-negative integer");
  out = v.get<std::uint64_t>();
}

template <typename E, typename Parse>
void read_enum(const json& obj, const char* key, const std::string& where, E& out, Parse parse) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string()) invalid(where + "." + key, "expected a string");
  auto v = parse(obj.at(key).get<std::string>());
  if (!v) invalid(where + "." + key, "unknown value '" + obj.at(key).get<std::string>() + "'");
  out = *v;
}

void parse_model(const json& j, const std::string& where, ModelConfig& m) {
  switch (m.kind) {
    case ModelKind::Knn:
      check_keys(j, where, {"k", "metric", "folds", "standardize"});
      read_size(j, "k", where, m.knn.k);
      read_enum(j, "metric", where, m.knn.metric, parse_metric);
      break;
    case ModelKind::Mlp:
      check_keys(j, where,
                 {"hidden_sizes", "epochs", "learning_rate", "batch_size", "seed", "activation", "folds", "standardize"});
      read(j, "hidden_sizes", where, m.mlp.hidden_sizes);
      read_size(j, "epochs", where, m.mlp.epochs);
      read(j, "learning_rate", where, m.mlp.learning_rate);
      read_size(j, "batch_size", where, m.mlp.batch_size);
      read_seed(j, "seed", where, m.mlp.seed);
      read_enum(j, "activation", where, m.mlp.hidden_activation, parse_activation);
      break;
    case ModelKind::Forest:
      check_keys(j, where,
                 {"trees", "seed", "criterion", "max_depth", "min_samples_split", "feature_subsample", "bootstrap",
                  "folds", "standardize"});
      read_size(j, "trees", where, m.forest.tree_count);
      read_seed(j, "seed", where, m.forest.seed);
      m.forest.tree.seed = m.forest.seed;
      read_enum(j, "criterion", where, m.forest.tree.criterion, parse_criterion);
      if (j.contains("max_depth")) {
        if (j.at("max_depth").is_null()) {
          m.forest.tree.max_depth.reset();
        } else {
          std::size_t d = 0;
          read_size(j, "max_depth", where, d);
          m.forest.tree.max_depth = d;
        }
      }
      read_size(j, "min_samples_split", where, m.forest.tree.min_samples_split);
      read_enum(j, "feature_subsample", where, m.forest.tree.feature_subsample, parse_feature_subsample);
      read(j, "bootstrap", where, m.forest.bootstrap);
      break;
  }
  read_size(j, "folds", where, m.folds);
  read(j, "standardize", where, m.preprocess.standardize);
  if (m.folds < 2) invalid(where + ".folds", "must be >= 2");
}

json model_json(const ModelConfig& m) {
  json j;
  switch (m.kind) {
    case ModelKind::Knn:
      j = {{"k", m.knn.k}, {"metric", to_string(m.knn.metric)}};
      break;
    case ModelKind::Mlp:
      j = {{"hidden_sizes", m.mlp.hidden_sizes},
           {"epochs", m.mlp.epochs},
           {"learning_rate", m.mlp.learning_rate},
           {"batch_size", m.mlp.batch_size},
           {"seed", m.mlp.seed},
           {"activation", to_string(m.mlp.hidden_activation)}};
      break;
    case ModelKind::Forest:
      j = {{"trees", m.forest.tree_count},
           {"seed", m.forest.seed},
           {"criterion", to_string(m.forest.tree.criterion)},
           {"max_depth", m.forest.tree.max_depth ? json(*m.forest.tree.max_depth) : json()},
           {"min_samples_split", m.forest.tree.min_samples_split},
           {"feature_subsample", to_string(m.forest.tree.feature_subsample)},
           {"bootstrap", m.forest.bootstrap}};
      break;
  }
  j["folds"] = m.folds;
  j["standardize"] = m.preprocess.standardize;
  return j;
}

void parse_synth(const json& j, SynthConfig& s) {
  const std::string where = "synth";
  check_keys(j, where,
             {"sessions", "events_per_session", "seed", "null_rates", "weights", "bias", "target_positive_rate", "noise"});
  read_size(j, "sessions", where, s.sessions);
  read_size(j, "events_per_session", where, s.events_per_session);
  read_seed(j, "seed", where, s.seed);
  if (j.contains("null_rates")) {
    const auto& rates = j.at("null_rates");
    if (!rates.is_object()) invalid(where + ".null_rates", "expected an object");
    for (const auto& [col, v] : rates.items()) {
      if (!v.is_number()) invalid(where + ".null_rates." + col, "expected a number");
      s.null_rates[col] = v.get<double>();
    }
  }
  read(j, "weights", where, s.weights);
  if (j.contains("bias")) {
    if (j.at("bias").is_null())
      s.bias.reset();
    else if (j.at("bias").is_number())
      s.bias = j.at("bias").get<double>();
    else
      invalid(where + ".bias", "expected a number or null");
  }
  read(j, "target_positive_rate", where, s.target_positive_rate);
  read(j, "noise", where, s.noise);
  validate(s);
}

}  // namespace

RunConfig parse_config(const json& doc, RunConfig c) {
  check_keys(doc, "config",
             {"paths", "aggregation", "selection", "split", "models", "synth", "seed", "workers"});
  // The master seed goes first so explicit per-component seeds override it.
  if (doc.contains("seed")) {
    std::uint64_t seed = 0;
    read_seed(doc, "seed", "config", seed);
    c.set_seed(seed);
  }
  if (doc.contains("workers")) {
    const auto& w = doc.at("workers");
    if (!w.is_number_integer() || w.get<int>() < 0) invalid("config.workers", "expected a non-negative integer");
    c.workers = w.get<int>();
  }
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    check_keys(p, "paths", {"workdir", "events", "labels"});
    read(p, "workdir", "paths", c.paths.workdir);
    read(p, "events", "paths", c.paths.events);
    read(p, "labels", "paths", c.paths.labels);
  }
  if (doc.contains("aggregation")) {
    const auto& a = doc.at("aggregation");
    check_keys(a, "aggregation", {"features", "batch_rows"});
    if (a.contains("features")) {
      std::vector<std::string> names;
      read(a, "features", "aggregation", names);
      c.specs.clear();
      for (const auto& n : names) c.specs.push_back(parse_spec(n));
      if (c.specs.empty()) invalid("aggregation.features", "must not be empty");
    }
    read_size(a, "batch_rows", "aggregation", c.batch_rows);
    if (c.batch_rows < 1) invalid("aggregation.batch_rows", "must be >= 1");
  }
  if (doc.contains("selection")) {
    const auto& s = doc.at("selection");
    check_keys(s, "selection", {"k", "redundancy_threshold", "mandatory_drops", "mi_bins"});
    read_size(s, "k", "selection", c.selection.k);
    read(s, "redundancy_threshold", "selection", c.selection.redundancy_threshold);
    read(s, "mandatory_drops", "selection", c.selection.mandatory_drops);
    read(s, "mi_bins", "selection", c.selection.mi_bins);
  }
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    check_keys(s, "split", {"seed", "test_fraction", "grouping"});
    read_seed(s, "seed", "split", c.split.seed);
    read(s, "test_fraction", "split", c.split.test_fraction);
    read_enum(s, "grouping", "split", c.split.grouping, parse_grouping);
    if (!(c.split.test_fraction > 0 && c.split.test_fraction < 1)) invalid("split.test_fraction", "must be in (0, 1)");
  }
  if (doc.contains("models")) {
    const auto& m = doc.at("models");
    check_keys(m, "models", {"knn", "mlp", "rf"});
    if (m.contains("knn")) parse_model(m.at("knn"), "models.knn", c.knn);
    if (m.contains("mlp")) parse_model(m.at("mlp"), "models.mlp", c.mlp);
    if (m.contains("rf")) parse_model(m.at("rf"), "models.rf", c.forest);
  }
  if (doc.contains("synth")) parse_synth(doc.at("synth"), c.synth);
  return c;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, std::move(base));
}

json canonical_config(const RunConfig& c) {
  json j;
  std::vector<std::string> features;
  for (const auto& s : c.specs) features.push_back(s.output_name);
  j["aggregation"] = {{"features", features}};
  j["selection"] = {{"k", c.selection.k},
                    {"redundancy_threshold", c.selection.redundancy_threshold},
                    {"mandatory_drops", c.selection.mandatory_drops},
                    {"mi_bins", c.selection.mi_bins}};
  j["split"] = {{"seed", c.split.seed},
                {"test_fraction", c.split.test_fraction},
                {"grouping", to_string(c.split.grouping)}};
  j["models"] = {{"knn", model_json(c.knn)}, {"mlp", model_json(c.mlp)}, {"rf", model_json(c.forest)}};
  j["synth"] = to_json(c.synth);
  return j;
}

json to_json(const RunConfig& c) {
  json j = canonical_config(c);
  j["aggregation"]["batch_rows"] = c.batch_rows;
  j["paths"] = {{"workdir", c.paths.workdir}, {"events", c.paths.events}, {"labels", c.paths.labels}};
  j["workers"] = c.workers;
  return j;
}

Fingerprint fingerprint(const RunConfig& config) {
  Fingerprint fp;
  fp.config = canonical_config(config);
  fp.hash = fnv1a_hex(fp.config.dump());
  return fp;
}

json to_json(const Fingerprint& fp) { return {{"hash", fp.hash}, {"config", fp.config}}; }

bool fingerprint_consistent(const json& embedded) {
  if (!embedded.is_object() || !embedded.contains("hash") || !embedded.contains("config")) return false;
  if (!embedded.at("hash").is_string()) return false;
  return fnv1a_hex(embedded.at("config").dump()) == embedded.at("hash").get<std::string>();
}

}  // namespace playtrace
