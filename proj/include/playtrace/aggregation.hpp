#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "playtrace/events.hpp"

namespace playtrace {

enum class AggKind { Mean, Sum, Min, Max, First, Last, Count, Nunique };
enum class ColumnClass { Numeric, Categorical };

std::string_view to_string(AggKind kind);
std::optional<AggKind> parse_agg_kind(std::string_view text);
bool is_numeric_kind(AggKind kind);

/// Type class of an event column that can be aggregated; nullopt for
/// columns that cannot (session_id, level_group, text).
std::optional<ColumnClass> column_class(std::string_view column);

struct AggregatorSpec {
  std::string column;
  AggKind kind = AggKind::Mean;
  std::string output_name;  ///< "<column>_<kind>" when built through make_spec

  bool operator==(const AggregatorSpec&) const = default;
};

AggregatorSpec make_spec(std::string column, AggKind kind, std::string output_name = {});
/// Parses "room_coor_x_mean" style names.
AggregatorSpec parse_spec(std::string_view feature_name);

/// The eleven production features.
std::vector<AggregatorSpec> default_specs();
/// Every valid column x kind combination (numeric x {mean,sum,min,max},
/// categorical x {first,last,count,nunique}).
std::vector<AggregatorSpec> candidate_specs();

struct FeatureColumn {
  std::string name;
  std::string source;
  AggKind kind = AggKind::Mean;
};

struct FeatureRow {
  SessionId session_id = 0;
  LevelGroup level_group = LevelGroup::L0_4;
  std::vector<std::optional<double>> values;

  bool operator==(const FeatureRow&) const = default;
};

struct FeatureMatrix {
  std::vector<FeatureColumn> columns;
  std::vector<FeatureRow> rows;  ///< sorted by (session_id, level_group)
  std::vector<AggregatorSpec> specs;
  /// Dictionary codes of first/last columns, code = position.
  std::map<std::string, std::vector<std::string>> code_tables;

  std::vector<std::string> column_names() const;
  std::optional<std::size_t> find_column(std::string_view name) const;
  /// True for dictionary-coded (first/last) columns.
  bool is_code_column(std::size_t c) const;
  /// Decoded categorical value of a code cell.
  std::optional<std::string> decode(std::size_t row, std::size_t col) const;
};

/// One-pass aggregation per (session_id, level_group).
///
/// Accumulators live in a fixed number of partitions keyed by session, so a
/// group is always owned by exactly one partition and sees its events in
/// arrival order. add_batch() processes partitions in parallel; add() is the
/// serial reference path; both leave identical state.
class Aggregator {
 public:
  explicit Aggregator(std::vector<AggregatorSpec> specs, std::size_t partitions = 64);

  void add(const RawEvent& ev);
  void add_batch(std::span<const RawEvent> events);
  void add_batch_serial(std::span<const RawEvent> events);

  /// Folds another aggregator's state into this one. Codes are remapped
  /// through the category strings, so the two dictionaries may differ.
  void merge(const Aggregator& other);

  FeatureMatrix finish() const;

  std::size_t events_seen() const noexcept { return events_seen_; }
  std::size_t group_count() const;

  struct NumAcc {
    double sum = 0;
    double comp = 0;  // Neumaier compensation term
    std::uint64_t count = 0;
    double min = 0;
    double max = 0;
  };
  struct CatAcc {
    std::uint64_t count = 0;
    std::unordered_set<std::uint32_t> distinct;
    std::uint64_t first_index = 0;
    std::uint32_t first_code = 0;
    std::uint64_t last_index = 0;
    std::uint32_t last_code = 0;
  };
  struct GroupState {
    std::vector<NumAcc> num;
    std::vector<CatAcc> cat;
  };
  struct GroupKey {
    SessionId session = 0;
    LevelGroup group = LevelGroup::L0_4;
    bool operator==(const GroupKey&) const = default;
    bool operator<(const GroupKey& o) const {
      return session != o.session ? session < o.session : group < o.group;
    }
  };
  struct GroupKeyHash {
    std::size_t operator()(const GroupKey& k) const noexcept;
  };

 private:
  struct Dictionary {
    std::unordered_map<std::string, std::uint32_t> codes;
    std::vector<std::string> values;
    std::uint32_t intern(std::string_view value);
  };
  using Partition = std::unordered_map<GroupKey, GroupState, GroupKeyHash>;

  std::size_t partition_of(SessionId session) const;
  void encode(const RawEvent& ev, double* num_out, std::uint32_t* cat_out);
  void apply(Partition& part, const GroupKey& key, std::uint64_t index, const double* num, const std::uint32_t* cat);
  void merge_state(GroupState& into, const GroupState& from) const;

  std::vector<AggregatorSpec> specs_;
  using NumGetter = std::optional<double> (*)(const RawEvent&);
  using CatGetter = const std::string* (*)(const RawEvent&);

  std::vector<std::string> num_columns_;
  std::vector<std::string> cat_columns_;
  std::vector<NumGetter> num_get_;
  std::vector<CatGetter> cat_get_;
  std::vector<bool> cat_needs_distinct_;
  std::vector<std::size_t> spec_slot_;  // index into num_columns_ or cat_columns_
  std::vector<Dictionary> dictionaries_;
  std::vector<Partition> partitions_;
  std::size_t events_seen_ = 0;
};

FeatureMatrix aggregate(std::span<const RawEvent> events, const std::vector<AggregatorSpec>& specs);
/// Streams the reader to exhaustion in batches; memory is bounded by the
/// batch size plus per-group accumulator state.
FeatureMatrix aggregate(EventReader& reader, const std::vector<AggregatorSpec>& specs,
                        std::size_t batch_rows = 1 << 15);

/// Concatenates matrices produced from disjoint session shards, re-encoding
/// dictionary-coded columns into one shared code table (shard order).
FeatureMatrix concat_shards(std::span<const FeatureMatrix> shards);

struct CompressionReport {
  std::size_t input_bytes = 0;
  std::size_t output_bytes = 0;
  std::size_t input_rows = 0;
  std::size_t output_rows = 0;
  std::optional<double> ratio;  ///< output/input bytes; nullopt without input
};

CompressionReport compression_report(const IngestStats& ingest, const FeatureMatrix& features);
nlohmann::json to_json(const CompressionReport& report);

void write_features_csv(std::ostream& out, const FeatureMatrix& features);
nlohmann::json features_metadata(const FeatureMatrix& features);
FeatureMatrix read_features(std::istream& csv_in, const nlohmann::json& metadata);

}  // namespace playtrace
