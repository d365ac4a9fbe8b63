#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "playtrace/config.hpp"
#include "playtrace/evaluation.hpp"

namespace playtrace {

/// The subcommands. Each reads its inputs from the configured paths, writes
/// its outputs into the work directory and prints a short summary to `out`;
/// warnings go to `err`. Outputs depend only on inputs and configuration.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::ostream& out, std::ostream& err);

  void gen_synthetic();
  void aggregate();
  void select();
  void train(ModelKind kind);
  void evaluate(ModelKind kind);
  void cv(ModelKind kind);
  void benchmark(const std::vector<ModelKind>& kinds);
  /// Checks the embedded fingerprint of each file (all known outputs in the
  /// work directory when empty). Throws FingerprintMismatch if any differ.
  void verify(const std::vector<std::string>& files);

  /// Features joined to labels, restricted to the selected columns when a
  /// selection report exists.
  JoinedDataset load_dataset() const;

  const RunConfig& config() const noexcept { return config_; }

  static std::string model_file(ModelKind kind);

 private:
  nlohmann::json stamp(nlohmann::json report) const;
  void write_json(const std::string& file, const nlohmann::json& doc) const;

  RunConfig config_;
  Fingerprint fingerprint_;
  std::ostream& out_;
  std::ostream& err_;
};

}  // namespace playtrace
