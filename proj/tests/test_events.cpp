#include <gtest/gtest.h>

#include <sstream>

#include "playtrace/events.hpp"
#include "playtrace/synth.hpp"

using namespace playtrace;

namespace {

RawEvent sample_event() {
  RawEvent e;
  e.session_id = 20090312431273200ULL;
  e.index = 3;
  e.elapsed_time = 1500;
  e.event_name = "navigate_click";
  e.name = "undefined";
  e.level = 3;
  e.room_coor_x = -413.991;
  e.room_coor_y = 124.5;
  e.screen_coor_x = 380;
  e.screen_coor_y = 494;
  e.text = "Hey, \"you\" there";
  e.fqid = "gramps";
  e.room_fqid = "tunic.historicalsociety.entry";
  e.fullscreen = 0;
  e.hq = 1;
  e.music = 1;
  e.level_group = LevelGroup::L0_4;
  return e;
}

std::string file_of(const std::vector<RawEvent>& events) {
  std::string s = event_header() + "\n";
  for (const auto& e : events) s += format_event_row(e) + "\n";
  return s;
}

std::vector<RawEvent> read_all(const std::string& text, IngestStats* stats = nullptr,
                               std::vector<RowError>* errors = nullptr, std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  EventReader reader(
      in, kEventColumns, [&](const RowError& e) { if (errors) errors->push_back(e); },
      [&](const std::string& w) { if (warnings) warnings->push_back(w); });
  std::vector<RawEvent> out;
  while (auto e = reader.next()) out.push_back(*e);
  if (stats) *stats = reader.stats();
  return out;
}

}  // namespace

TEST(LevelGroups, BinsLevels) {
  EXPECT_EQ(group_for_level(0), LevelGroup::L0_4);
  EXPECT_EQ(group_for_level(4), LevelGroup::L0_4);
  EXPECT_EQ(group_for_level(5), LevelGroup::L5_12);
  EXPECT_EQ(group_for_level(12), LevelGroup::L5_12);
  EXPECT_EQ(group_for_level(13), LevelGroup::L13_22);
  EXPECT_EQ(group_for_level(22), LevelGroup::L13_22);
  for (auto g : kLevelGroups) EXPECT_EQ(parse_level_group(to_string(g)), g);
  EXPECT_FALSE(parse_level_group("0-5"));
}

TEST(EventReader, HeaderOnlyIsEmpty) {
  IngestStats stats;
  std::vector<RowError> errors;
  auto events = read_all(event_header() + "\n", &stats, &errors);
  EXPECT_TRUE(events.empty());
  EXPECT_TRUE(errors.empty());
  EXPECT_EQ(stats.rows_total, 0u);
}

TEST(EventReader, ParsesOneRow) {
  auto events = read_all(file_of({sample_event()}));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0], sample_event());
  EXPECT_EQ(events[0].level, 3);
  EXPECT_EQ(events[0].level_group, LevelGroup::L0_4);
}

TEST(EventReader, CountsGroupInconsistency) {
  RawEvent e = sample_event();
  e.level = 7;
  IngestStats stats;
  std::vector<std::string> warnings;
  auto events = read_all(file_of({e, e}), &stats, nullptr, &warnings);
  EXPECT_EQ(events.size(), 2u);
  EXPECT_EQ(stats.group_mismatches, 2u);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(EventReader, RoundTripIdentity) {
  SynthConfig c;
  c.sessions = 3;
  c.events_per_session = 200;
  auto corpus = generate_in_memory(c);
  auto back = read_all(file_of(corpus.events));
  ASSERT_EQ(back.size(), corpus.events.size());
  for (std::size_t i = 0; i < back.size(); ++i) ASSERT_EQ(back[i], corpus.events[i]) << "event " << i;
  // Second generation of text is byte-identical too.
  EXPECT_EQ(file_of(back), file_of(corpus.events));
}

TEST(EventReader, BadRowsAreSkippedAndAccounted) {
  std::string text = file_of({sample_event()});
  RawEvent ok = sample_event();
  ok.index = 4;
  text += "1,2,notanumber,a,b,3,,,,,,,,,,,0,0,0,0-4\n";  // bad elapsed_time
  text += "1,2,3,a,b,99,,,,,,,,,,,0,0,0,0-4\n";          // level out of range
  text += "1,2,3\n";                                      // short row
  text += format_event_row(ok) + "\n";
  IngestStats stats;
  std::vector<RowError> errors;
  auto events = read_all(text, &stats, &errors);
  EXPECT_EQ(events.size(), 2u);
  EXPECT_EQ(stats.rows_skipped, 3u);
  EXPECT_EQ(stats.rows_total, stats.events_emitted + stats.rows_skipped);
  ASSERT_EQ(errors.size(), 3u);
  EXPECT_EQ(errors[0].row, 2u);
  EXPECT_EQ(errors[0].column, "elapsed_time");
  EXPECT_EQ(errors[1].column, "level");
}

TEST(EventReader, MissingColumnThrows) {
  std::istringstream in("session_id,index\n1,2\n");
  try {
    EventReader reader(in);
    FAIL() << "expected MissingColumn";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
  }
}

TEST(EventReader, UnknownColumnsWarnedOnceAndIgnored) {
  std::string text = event_header() + ",extra\n" + format_event_row(sample_event()) + ",zzz\n";
  std::vector<std::string> warnings;
  auto events = read_all(text, nullptr, nullptr, &warnings);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0], sample_event());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(EventReader, ColumnsMatchedByNameInAnyOrder) {
  // Reverse the header and each row.
  auto reverse_csv = [](const std::string& line) {
    std::vector<std::string> f;
    csv::split(line, f);
    std::string out;
    for (std::size_t i = f.size(); i-- > 0;) csv::append_field(out, f[i], i + 1 == f.size());
    return out;
  };
  std::string text = reverse_csv(event_header()) + "\n" + reverse_csv(format_event_row(sample_event())) + "\n";
  auto events = read_all(text);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0], sample_event());
}

TEST(EventReader, BatchesMatchSingleReads) {
  SynthConfig c;
  c.sessions = 4;
  c.events_per_session = 150;
  auto corpus = generate_in_memory(c);
  std::string text = file_of(corpus.events);
  std::istringstream in(text);
  EventReader reader(in);
  std::vector<RawEvent> all, batch;
  while (reader.next_batch(batch, 97)) all.insert(all.end(), batch.begin(), batch.end());
  EXPECT_EQ(all, corpus.events);
  EXPECT_EQ(reader.stats().rows_total, corpus.events.size());
  EXPECT_EQ(reader.stats().bytes_read, text.size());
}

TEST(EventReader, ElapsedRegressionCounted) {
  RawEvent a = sample_event(), b = sample_event();
  b.index = 4;
  b.elapsed_time = 10;
  IngestStats stats;
  read_all(file_of({a, b}), &stats);
  EXPECT_EQ(stats.elapsed_regressions, 1u);
}

TEST(Labels, EmptyBody) {
  std::istringstream in("session_id,question,correct\n");
  EXPECT_TRUE(read_labels(in).empty());
}

TEST(Labels, DuplicateRejected) {
  std::istringstream in("session_id,question,correct\n5,1,1\n5,1,0\n");
  try {
    read_labels(in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateLabel);
  }
}

TEST(Labels, QuestionRangeAndTypes) {
  std::istringstream a("session_id,question,correct\n5,19,1\n");
  EXPECT_THROW(read_labels(a), Error);
  std::istringstream b("session_id,question,correct\n5,0,1\n");
  EXPECT_THROW(read_labels(b), Error);
  std::istringstream c("session_id,question,correct\n5,3,2\n");
  try {
    read_labels(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TypeError);
  }
  std::istringstream d("question,session_id\n3,5\n");
  try {
    read_labels(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
  }
}

TEST(Labels, ColumnOrderFree) {
  std::istringstream in("correct,session_id,question\n1,7,2\n");
  auto labels = read_labels(in);
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0], (LabelRecord{7, 2, true}));
}

TEST(Labels, SyntheticThreeSessionsGiveFiftyFour) {
  SynthConfig c;
  c.sessions = 3;
  c.events_per_session = 100;
  std::ostringstream ev, lab;
  generate(c, ev, lab);
  std::istringstream in(lab.str());
  auto labels = read_labels(in);
  EXPECT_EQ(labels.size(), 54u);
  std::ostringstream again;
  write_labels(again, labels);
  EXPECT_EQ(again.str(), lab.str());
}

TEST(ValidateSession, SingleEvent) {
  std::vector<RawEvent> one = {sample_event()};
  auto r = validate_session(one);
  EXPECT_EQ(r.event_count, 1u);
  EXPECT_EQ(r.elapsed_violations, 0u);
  EXPECT_EQ(r.index_violations, 0u);
  EXPECT_EQ(r.levels_covered, 1u);
}

TEST(ValidateSession, DecreasingElapsed) {
  RawEvent a = sample_event(), b = sample_event();
  b.index = a.index + 1;
  b.elapsed_time = a.elapsed_time - 1;
  std::vector<RawEvent> evs = {a, b};
  EXPECT_EQ(validate_session(evs).elapsed_violations, 1u);
}

TEST(ValidateSession, SyntheticMissingRatesMatchDraws) {
  SynthConfig c;
  c.events_per_session = 500;
  SessionTruth truth;
  auto events = generate_session(c, 0, truth);
  auto r = validate_session(events);
  EXPECT_EQ(r.event_count, truth.events);
  EXPECT_EQ(r.levels_covered, 23u);
  EXPECT_EQ(r.group_mismatches, 0u);
  EXPECT_EQ(r.elapsed_violations, 0u);
  const double n = static_cast<double>(events.size());
  for (const auto& [col, rate] : c.null_rates) {
    if (col == "page") {
      // Pages only exist on notebook events; the drawn nulls are among those.
      const double structural = n - static_cast<double>(truth.notebook_events);
      EXPECT_DOUBLE_EQ(r.missing_rate.at(col) * n, structural + static_cast<double>(truth.null_counts.at(col)));
      continue;
    }
    EXPECT_DOUBLE_EQ(r.missing_rate.at(col), static_cast<double>(truth.null_counts.at(col)) / n) << col;
    EXPECT_NEAR(r.missing_rate.at(col), rate, 0.02) << col;
  }
}
