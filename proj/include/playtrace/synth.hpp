#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "playtrace/events.hpp"

namespace playtrace {

/// Knobs of the synthetic corpus. Labels follow
/// P(correct) = logistic(w . z + b + e), e ~ N(0, noise^2), where z is the
/// standardized vector of the eleven default aggregates of the question's
/// level group.
struct SynthConfig {
  std::size_t sessions = 1000;
  std::size_t events_per_session = 1000;  ///< mean
  std::uint64_t seed = 42;
  /// Chance that an optional cell is left empty. Pages only exist on
  /// notebook events; their rate applies to those.
  std::map<std::string, double> null_rates = {
      {"page", 0.0},         {"room_coor_x", 0.05}, {"room_coor_y", 0.05}, {"screen_coor_x", 0.05},
      {"screen_coor_y", 0.05}, {"hover_duration", 0.85}, {"text", 0.6},    {"fqid", 0.1},
      {"room_fqid", 0.02},   {"text_fqid", 0.6}};
  /// One weight per default aggregate, in default_specs() order.
  std::vector<double> weights = {0.5, 0.4, 0.5, 0.3, -0.5, 0.3, 0.3, 0.5, 2.5, 0.6, 0.4};
  /// Solved for target_positive_rate when absent.
  std::optional<double> bias;
  double target_positive_rate = 0.7;
  double noise = 0.5;

  bool operator==(const SynthConfig&) const = default;
};

/// Throws ConfigInvalid.
void validate(const SynthConfig& config);

SessionId synth_session_id(std::size_t index);

/// Ground truth for one session, computed by the generator from its own events.
struct SessionTruth {
  SessionId session_id = 0;
  std::size_t events = 0;
  std::array<std::size_t, 3> group_events{};
  /// Per level group, the eleven default aggregates (absent when undefined).
  std::array<std::vector<std::optional<double>>, 3> aggregates;
  std::map<std::string, std::size_t> null_counts;  ///< empty cells drawn per optional column
  std::size_t notebook_events = 0;
};

struct LabelDraw {
  SessionId session_id = 0;
  int question = 0;
  double logit = 0;  ///< w . z + b, before noise
  double noise = 0;
  double p = 0;
  double u = 0;  ///< uniform draw; correct iff u < p
  bool correct = false;
};

struct SynthSummary {
  SynthConfig config;
  std::vector<std::string> feature_names;
  std::vector<SessionTruth> sessions;
  std::vector<double> z_mean;
  std::vector<double> z_std;
  double bias = 0;
  std::vector<LabelDraw> draws;
  std::size_t events_written = 0;
  std::string driver;  ///< feature with the largest |weight|
};

/// Events of one session, in file order, with its ground truth.
std::vector<RawEvent> generate_session(const SynthConfig& config, std::size_t index, SessionTruth& truth);

/// Streams the event and label files. Sessions are generated in parallel in
/// chunks and written in session order.
SynthSummary generate(const SynthConfig& config, std::ostream& events, std::ostream& labels);

struct SynthCorpus {
  std::vector<RawEvent> events;
  std::vector<LabelRecord> labels;
  SynthSummary summary;
};

/// Same content as generate(), kept in memory; for small corpora.
SynthCorpus generate_in_memory(const SynthConfig& config);

nlohmann::json to_json(const SynthConfig& config);
nlohmann::json manifest_json(const SynthSummary& summary);

}  // namespace playtrace
