#include "playtrace/events.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace playtrace {

std::string_view to_string(LevelGroup group) {
  switch (group) {
    case LevelGroup::L0_4: return "0-4";
    case LevelGroup::L5_12: return "5-12";
    case LevelGroup::L13_22: return "13-22";
  }
  return "?";
}

std::optional<LevelGroup> parse_level_group(std::string_view text) {
  if (text == "0-4") return LevelGroup::L0_4;
  if (text == "5-12") return LevelGroup::L5_12;
  if (text == "13-22") return LevelGroup::L13_22;
  return std::nullopt;
}

LevelGroup group_for_level(int level) {
  if (level <= 4) return LevelGroup::L0_4;
  if (level <= 12) return LevelGroup::L5_12;
  return LevelGroup::L13_22;
}

bool is_present(const RawEvent& ev, std::string_view column) {
  if (column == "page") return ev.page.has_value();
  if (column == "room_coor_x") return ev.room_coor_x.has_value();
  if (column == "room_coor_y") return ev.room_coor_y.has_value();
  if (column == "screen_coor_x") return ev.screen_coor_x.has_value();
  if (column == "screen_coor_y") return ev.screen_coor_y.has_value();
  if (column == "hover_duration") return ev.hover_duration.has_value();
  if (column == "text") return ev.text.has_value();
  if (column == "fqid") return ev.fqid.has_value();
  if (column == "room_fqid") return ev.room_fqid.has_value();
  if (column == "text_fqid") return ev.text_fqid.has_value();
  return true;
}

std::string event_header() {
  std::string line;
  for (std::size_t i = 0; i < kEventColumns.size(); ++i) csv::append_field(line, kEventColumns[i], i == 0);
  return line;
}

namespace {

template <typename T>
std::string opt_int(const std::optional<T>& v) {
  return v ? std::to_string(*v) : std::string();
}

std::string opt_real(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string format_event_row(const RawEvent& ev) {
  std::string line;
  line.reserve(160);
  csv::append_field(line, std::to_string(ev.session_id), true);
  csv::append_field(line, std::to_string(ev.index), false);
  csv::append_field(line, std::to_string(ev.elapsed_time), false);
  csv::append_field(line, ev.event_name, false);
  csv::append_field(line, ev.name, false);
  csv::append_field(line, std::to_string(ev.level), false);
  csv::append_field(line, opt_int(ev.page), false);
  csv::append_field(line, opt_real(ev.room_coor_x), false);
  csv::append_field(line, opt_real(ev.room_coor_y), false);
  csv::append_field(line, opt_real(ev.screen_coor_x), false);
  csv::append_field(line, opt_real(ev.screen_coor_y), false);
  csv::append_field(line, opt_int(ev.hover_duration), false);
  csv::append_field(line, ev.text.value_or(""), false);
  csv::append_field(line, ev.fqid.value_or(""), false);
  csv::append_field(line, ev.room_fqid.value_or(""), false);
  csv::append_field(line, ev.text_fqid.value_or(""), false);
  csv::append_field(line, std::to_string(ev.fullscreen), false);
  csv::append_field(line, std::to_string(ev.hq), false);
  csv::append_field(line, std::to_string(ev.music), false);
  csv::append_field(line, to_string(ev.level_group), false);
  return line;
}

//
// EventReader
//

namespace {

enum Col : std::size_t {
  kSession, kIndex, kElapsed, kEventName, kName, kLevel, kPage, kRoomX, kRoomY, kScreenX, kScreenY,
  kHover, kText, kFqid, kRoomFqid, kTextFqid, kFullscreen, kHq, kMusic, kLevelGroup
};

std::size_t column_id(std::string_view name) {
  auto it = std::find(kEventColumns.begin(), kEventColumns.end(), name);
  return static_cast<std::size_t>(it - kEventColumns.begin());
}

}  // namespace

EventReader::EventReader(std::istream& in, std::span<const std::string_view> required, RowErrorSink on_error,
                         WarningSink on_warning)
    : records_(in), on_error_(std::move(on_error)), on_warning_(std::move(on_warning)) {
  column_pos_.fill(-1);
  std::string header;
  std::vector<std::string> names;
  if (records_.next_raw(header)) {
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    if (!csv::split(header, names)) throw Error(ErrorCode::Format, "malformed header row");
  }
  header_width_ = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::size_t id = column_id(names[i]);
    if (id == kEventColumns.size()) {
      ignored_.push_back(names[i]);
      if (on_warning_) on_warning_("ignoring unknown column '" + names[i] + "'");
      continue;
    }
    column_pos_[id] = static_cast<int>(i);
  }
  auto require = [&](std::string_view col) {
    if (column_pos_[column_id(col)] < 0) throw Error(ErrorCode::MissingColumn, std::string(col));
  };
  for (auto col : kCoreEventColumns) require(col);
  for (auto col : required) {
    if (column_id(col) == kEventColumns.size())
      throw Error(ErrorCode::MissingColumn, "schema names unknown column '" + std::string(col) + "'");
    require(col);
  }
  stats_.bytes_read = records_.bytes_read();
}

EventReader::Parsed EventReader::convert(const std::string& record, std::size_t row) const {
  Parsed result;
  std::vector<std::string> fields;
  auto fail = [&](std::string_view column, std::string message) {
    result.error = RowError{row, std::string(column), std::move(message)};
    return std::move(result);
  };
  if (!csv::split(record, fields)) return fail("", "malformed quoting");
  if (fields.size() != header_width_)
    return fail("", "expected " + std::to_string(header_width_) + " fields, got " + std::to_string(fields.size()));

  auto cell = [&](std::size_t id) -> std::string_view {
    int pos = column_pos_[id];
    return pos < 0 ? std::string_view{} : std::string_view(fields[static_cast<std::size_t>(pos)]);
  };
  auto col = [](std::size_t id) { return kEventColumns[id]; };

  RawEvent ev;
  auto session = parse_uint(cell(kSession));
  if (!session) return fail(col(kSession), "not an unsigned integer");
  ev.session_id = *session;
  auto index = parse_uint(cell(kIndex));
  if (!index) return fail(col(kIndex), "not an unsigned integer");
  ev.index = *index;
  auto elapsed = parse_int(cell(kElapsed));
  if (!elapsed || *elapsed < 0) return fail(col(kElapsed), "not a non-negative integer");
  ev.elapsed_time = *elapsed;
  if (cell(kEventName).empty()) return fail(col(kEventName), "empty");
  ev.event_name = cell(kEventName);
  ev.name = cell(kName);
  auto level = parse_int(cell(kLevel));
  if (!level || *level < kMinLevel || *level > kMaxLevel) return fail(col(kLevel), "not a level in [0, 22]");
  ev.level = static_cast<int>(*level);

  auto opt_nonneg_int = [&](std::size_t id, std::optional<std::int64_t>& out) -> bool {
    auto text = cell(id);
    if (text.empty()) return true;
    auto v = parse_int(text);
    if (!v || *v < 0) return false;
    out = *v;
    return true;
  };
  auto opt_real = [&](std::size_t id, std::optional<double>& out) -> bool {
    auto text = cell(id);
    if (text.empty()) return true;
    out = parse_double(text);
    return out.has_value();
  };
  auto opt_text = [&](std::size_t id, std::optional<std::string>& out) {
    auto text = cell(id);
    if (!text.empty()) out = std::string(text);
  };
  if (!opt_nonneg_int(kPage, ev.page)) return fail(col(kPage), "not a non-negative integer");
  if (!opt_real(kRoomX, ev.room_coor_x)) return fail(col(kRoomX), "not a real number");
  if (!opt_real(kRoomY, ev.room_coor_y)) return fail(col(kRoomY), "not a real number");
  if (!opt_real(kScreenX, ev.screen_coor_x)) return fail(col(kScreenX), "not a real number");
  if (!opt_real(kScreenY, ev.screen_coor_y)) return fail(col(kScreenY), "not a real number");
  if (!opt_nonneg_int(kHover, ev.hover_duration)) return fail(col(kHover), "not a non-negative integer");
  opt_text(kText, ev.text);
  opt_text(kFqid, ev.fqid);
  opt_text(kRoomFqid, ev.room_fqid);
  opt_text(kTextFqid, ev.text_fqid);

  auto flag = [&](std::size_t id, std::uint8_t& out) -> bool {
    auto v = parse_int(cell(id));
    if (!v || (*v != 0 && *v != 1)) return false;
    out = static_cast<std::uint8_t>(*v);
    return true;
  };
  if (!flag(kFullscreen, ev.fullscreen)) return fail(col(kFullscreen), "not a 0/1 flag");
  if (!flag(kHq, ev.hq)) return fail(col(kHq), "not a 0/1 flag");
  if (!flag(kMusic, ev.music)) return fail(col(kMusic), "not a 0/1 flag");
  auto group = parse_level_group(cell(kLevelGroup));
  if (!group) return fail(col(kLevelGroup), "not one of 0-4, 5-12, 13-22");
  ev.level_group = *group;

  result.event = std::move(ev);
  return result;
}

void EventReader::account(Parsed& parsed) {
  ++stats_.rows_total;
  if (!parsed.event) {
    ++stats_.rows_skipped;
    if (on_error_) on_error_(parsed.error);
    return;
  }
  const RawEvent& ev = *parsed.event;
  if (group_for_level(ev.level) != ev.level_group) {
    ++stats_.group_mismatches;
    if (!warned_mismatch_ && on_warning_) {
      on_warning_("level_group inconsistent with level (first at row " + std::to_string(parsed.error.row) + ")");
      warned_mismatch_ = true;
    }
  }
  auto [it, inserted] = last_elapsed_.try_emplace(ev.session_id, ev.elapsed_time);
  if (!inserted) {
    if (ev.elapsed_time < it->second) {
      ++stats_.elapsed_regressions;
      if (!warned_regression_ && on_warning_) {
        on_warning_("elapsed_time decreased within a session (first at row " + std::to_string(parsed.error.row) + ")");
        warned_regression_ = true;
      }
    }
    it->second = ev.elapsed_time;
  }
  ++stats_.events_emitted;
}

std::optional<RawEvent> EventReader::next() {
  while (records_.next_raw(scratch_)) {
    if (scratch_.empty()) continue;
    const std::size_t row = records_.records_read() - 1;
    Parsed parsed = convert(scratch_, row);
    parsed.error.row = row;
    account(parsed);
    stats_.bytes_read = records_.bytes_read();
    if (parsed.event) return std::move(parsed.event);
  }
  stats_.bytes_read = records_.bytes_read();
  return std::nullopt;
}

bool EventReader::next_batch(std::vector<RawEvent>& out, std::size_t max_rows) {
  out.clear();
  std::vector<std::string> raw;
  std::vector<std::size_t> rows;
  raw.reserve(max_rows);
  rows.reserve(max_rows);
  while (raw.size() < max_rows && records_.next_raw(scratch_)) {
    if (scratch_.empty()) continue;
    raw.push_back(scratch_);
    rows.push_back(records_.records_read() - 1);
  }
  stats_.bytes_read = records_.bytes_read();

  std::vector<Parsed> parsed(raw.size());
  const auto n = static_cast<std::ptrdiff_t>(raw.size());
#pragma omp parallel for schedule(static) num_threads(parallel::workers())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto u = static_cast<std::size_t>(i);
    parsed[u] = convert(raw[u], rows[u]);
    parsed[u].error.row = rows[u];
  }

  for (auto& p : parsed) {
    account(p);
    if (p.event) out.push_back(std::move(*p.event));
  }
  return !raw.empty();
}

//
// Labels
//

std::vector<LabelRecord> read_labels(std::istream& in) {
  csv::RecordReader records(in);
  std::string line;
  std::vector<std::string> fields;
  std::vector<LabelRecord> labels;
  if (!records.next_raw(line)) return labels;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!csv::split(line, fields)) throw Error(ErrorCode::Format, "malformed label header");
  int pos_session = -1, pos_question = -1, pos_correct = -1;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == "session_id") pos_session = static_cast<int>(i);
    if (fields[i] == "question") pos_question = static_cast<int>(i);
    if (fields[i] == "correct") pos_correct = static_cast<int>(i);
  }
  if (pos_session < 0) throw Error(ErrorCode::MissingColumn, "session_id");
  if (pos_question < 0) throw Error(ErrorCode::MissingColumn, "question");
  if (pos_correct < 0) throw Error(ErrorCode::MissingColumn, "correct");
  const std::size_t width = fields.size();

  std::set<std::pair<SessionId, int>> seen;
  while (records.next_raw(line)) {
    if (line.empty()) continue;
    const std::string where = "label row " + std::to_string(records.records_read() - 1);
    if (!csv::split(line, fields) || fields.size() != width) throw Error(ErrorCode::Format, where + ": bad field count");
    auto session = parse_uint(fields[static_cast<std::size_t>(pos_session)]);
    auto question = parse_int(fields[static_cast<std::size_t>(pos_question)]);
    auto correct = parse_int(fields[static_cast<std::size_t>(pos_correct)]);
    if (!session) throw Error(ErrorCode::TypeError, where + ": session_id");
    if (!question) throw Error(ErrorCode::TypeError, where + ": question");
    if (!correct || (*correct != 0 && *correct != 1)) throw Error(ErrorCode::TypeError, where + ": correct");
    if (*question < 1 || *question > kQuestionCount)
      throw Error(ErrorCode::QuestionOutOfRange, where + ": question " + std::to_string(*question));
    const int q = static_cast<int>(*question);
    if (!seen.emplace(*session, q).second)
      throw Error(ErrorCode::DuplicateLabel,
                  "session " + std::to_string(*session) + " question " + std::to_string(q));
    labels.push_back(LabelRecord{*session, q, *correct == 1});
  }
  return labels;
}

void write_labels(std::ostream& out, std::span<const LabelRecord> labels) {
  out << "session_id,question,correct\n";
  for (const auto& l : labels) out << l.session_id << ',' << l.question << ',' << (l.correct ? 1 : 0) << '\n';
}

//
// Session validation
//

SessionReport validate_session(std::span<const RawEvent> events) {
  SessionReport report;
  report.event_count = events.size();
  if (events.empty()) return report;
  report.session_id = events.front().session_id;

  std::map<std::string_view, std::size_t> missing;
  for (auto col : kOptionalEventColumns) missing[col] = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    ++report.level_counts[static_cast<std::size_t>(ev.level)];
    if (group_for_level(ev.level) != ev.level_group) ++report.group_mismatches;
    if (i > 0 && ev.index <= events[i - 1].index) ++report.index_violations;
    for (auto col : kOptionalEventColumns)
      if (!is_present(ev, col)) ++missing[col];
  }
  report.levels_covered = static_cast<std::size_t>(
      std::count_if(report.level_counts.begin(), report.level_counts.end(), [](std::size_t c) { return c > 0; }));

  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return events[a].index < events[b].index; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (events[order[i]].elapsed_time < events[order[i - 1]].elapsed_time) ++report.elapsed_violations;

  const double n = static_cast<double>(events.size());
  for (auto& [col, count] : missing) report.missing_rate[std::string(col)] = static_cast<double>(count) / n;
  return report;
}

}  // namespace playtrace
