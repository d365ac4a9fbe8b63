#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "playtrace/common.hpp"
#include "playtrace/csv.hpp"

namespace playtrace {

using SessionId = std::uint64_t;

inline constexpr int kMinLevel = 0;
inline constexpr int kMaxLevel = 22;
inline constexpr int kQuestionCount = 18;

enum class LevelGroup : std::uint8_t { L0_4 = 0, L5_12 = 1, L13_22 = 2 };
inline constexpr std::array<LevelGroup, 3> kLevelGroups = {LevelGroup::L0_4, LevelGroup::L5_12,
                                                          LevelGroup::L13_22};

std::string_view to_string(LevelGroup group);
std::optional<LevelGroup> parse_level_group(std::string_view text);
/// The bin a level belongs to: 0-4, 5-12, 13-22.
LevelGroup group_for_level(int level);

struct RawEvent {
  SessionId session_id = 0;
  std::uint64_t index = 0;
  std::int64_t elapsed_time = 0;
  std::string event_name;
  std::string name;
  int level = 0;
  std::optional<std::int64_t> page;
  std::optional<double> room_coor_x;
  std::optional<double> room_coor_y;
  std::optional<double> screen_coor_x;
  std::optional<double> screen_coor_y;
  std::optional<std::int64_t> hover_duration;
  std::optional<std::string> text;
  std::optional<std::string> fqid;
  std::optional<std::string> room_fqid;
  std::optional<std::string> text_fqid;
  std::uint8_t fullscreen = 0;
  std::uint8_t hq = 0;
  std::uint8_t music = 0;
  LevelGroup level_group = LevelGroup::L0_4;

  bool operator==(const RawEvent&) const = default;
};

/// Column order of the event file.
inline constexpr std::array<std::string_view, 20> kEventColumns = {
    "session_id",    "index",         "elapsed_time", "event_name", "name",      "level",     "page",
    "room_coor_x",   "room_coor_y",   "screen_coor_x", "screen_coor_y", "hover_duration", "text",
    "fqid",          "room_fqid",     "text_fqid",    "fullscreen", "hq",        "music",     "level_group"};

/// Columns every event needs regardless of the schema passed to the reader.
inline constexpr std::array<std::string_view, 10> kCoreEventColumns = {
    "session_id", "index", "elapsed_time", "event_name", "name", "level", "fullscreen", "hq", "music", "level_group"};

/// Optional (nullable) columns, in file order.
inline constexpr std::array<std::string_view, 10> kOptionalEventColumns = {
    "page", "room_coor_x", "room_coor_y", "screen_coor_x", "screen_coor_y", "hover_duration",
    "text", "fqid", "room_fqid", "text_fqid"};

bool is_present(const RawEvent& ev, std::string_view optional_column);

std::string event_header();
/// One event as a CSV line in kEventColumns order (no line break).
std::string format_event_row(const RawEvent& ev);

struct RowError {
  std::size_t row = 0;  ///< 1-based data row (the header is row 0)
  std::string column;
  std::string message;
};

struct IngestStats {
  std::size_t rows_total = 0;
  std::size_t events_emitted = 0;
  std::size_t rows_skipped = 0;
  std::size_t group_mismatches = 0;     ///< level_group inconsistent with level
  std::size_t elapsed_regressions = 0;  ///< elapsed_time decreased within a session
  std::size_t bytes_read = 0;
};

using RowErrorSink = std::function<void(const RowError&)>;
using WarningSink = std::function<void(const std::string&)>;

/// Streaming event-file reader. Columns are matched by header name; unknown
/// columns are skipped with one warning each. Rows that fail to parse go to
/// the error sink and are counted, never emitted.
class EventReader {
 public:
  explicit EventReader(std::istream& in,
                       std::span<const std::string_view> required = kEventColumns,
                       RowErrorSink on_error = {}, WarningSink on_warning = {});

  std::optional<RawEvent> next();

  /// Reads up to max_rows records and converts them in parallel into out
  /// (cleared first). Returns false once the input is exhausted and no
  /// record was read; a batch whose rows all failed still returns true.
  bool next_batch(std::vector<RawEvent>& out, std::size_t max_rows);

  const IngestStats& stats() const noexcept { return stats_; }
  const std::vector<std::string>& ignored_columns() const noexcept { return ignored_; }

 private:
  struct Parsed {
    std::optional<RawEvent> event;
    RowError error;
  };

  Parsed convert(const std::string& record, std::size_t row) const;
  void account(Parsed& parsed);

  csv::RecordReader records_;
  RowErrorSink on_error_;
  WarningSink on_warning_;
  std::array<int, kEventColumns.size()> column_pos_{};
  std::size_t header_width_ = 0;
  std::vector<std::string> ignored_;
  IngestStats stats_;
  std::unordered_map<SessionId, std::int64_t> last_elapsed_;
  bool warned_mismatch_ = false;
  bool warned_regression_ = false;
  std::string scratch_;
};

struct LabelRecord {
  SessionId session_id = 0;
  int question = 0;
  bool correct = false;

  bool operator==(const LabelRecord&) const = default;
};

/// Label file: columns session_id, question, correct (0/1), any order.
std::vector<LabelRecord> read_labels(std::istream& in);
void write_labels(std::ostream& out, std::span<const LabelRecord> labels);

struct SessionReport {
  SessionId session_id = 0;
  std::size_t event_count = 0;
  std::array<std::size_t, kMaxLevel + 1> level_counts{};
  std::size_t levels_covered = 0;
  std::size_t elapsed_violations = 0;  ///< elapsed_time decreases between index-ordered neighbours
  std::size_t index_violations = 0;    ///< index not strictly increasing in arrival order
  std::size_t group_mismatches = 0;
  std::map<std::string, double> missing_rate;  ///< per optional column
};

SessionReport validate_session(std::span<const RawEvent> events);

}  // namespace playtrace
