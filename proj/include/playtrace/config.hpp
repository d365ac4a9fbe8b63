#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "playtrace/aggregation.hpp"
#include "playtrace/dataset.hpp"
#include "playtrace/evaluation.hpp"
#include "playtrace/selection.hpp"
#include "playtrace/synth.hpp"

namespace playtrace {

struct RunPaths {
  std::string workdir = ".";
  std::string events;  ///< defaults to <workdir>/events.csv
  std::string labels;  ///< defaults to <workdir>/labels.csv

  std::string events_path() const;
  std::string labels_path() const;
  std::string in_workdir(const std::string& file) const;
};

struct RunConfig {
  RunPaths paths;
  std::vector<AggregatorSpec> specs = default_specs();
  std::size_t batch_rows = 1 << 15;
  SelectionPolicy selection;
  SplitPlan split;
  ModelConfig knn = default_model_config(ModelKind::Knn);
  ModelConfig mlp = default_model_config(ModelKind::Mlp);
  ModelConfig forest = default_model_config(ModelKind::Forest);
  SynthConfig synth;
  int workers = 0;  ///< 0 = all cores

  const ModelConfig& model(ModelKind kind) const;
  ModelConfig& model(ModelKind kind);
  /// Points every seeded component at one master seed.
  void set_seed(std::uint64_t seed);
};

/// Overlays a JSON document on `base`. Unknown keys are ConfigInvalid.
RunConfig parse_config(const nlohmann::json& doc, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

nlohmann::json to_json(const RunConfig& config);
/// The configuration that determines results: everything except paths and
/// the worker count.
nlohmann::json canonical_config(const RunConfig& config);

struct Fingerprint {
  std::string hash;  ///< FNV-1a of the compact canonical JSON
  nlohmann::json config;
};

Fingerprint fingerprint(const RunConfig& config);
nlohmann::json to_json(const Fingerprint& fp);
/// Recomputes the hash of an embedded fingerprint; false if it was altered.
bool fingerprint_consistent(const nlohmann::json& embedded);

}  // namespace playtrace
