#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "playtrace/aggregation.hpp"
#include "playtrace/synth.hpp"

using namespace playtrace;

namespace {

RawEvent ev(SessionId s, std::uint64_t index, LevelGroup g, int level, std::int64_t elapsed) {
  RawEvent e;
  e.session_id = s;
  e.index = index;
  e.level_group = g;
  e.level = level;
  e.elapsed_time = elapsed;
  e.event_name = "navigate_click";
  e.name = "basic";
  return e;
}

/// Every valid spec: numeric x 4 kinds, categorical x 4 kinds.
std::vector<AggregatorSpec> full_specs() { return candidate_specs(); }

std::vector<RawEvent> random_events(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const char* kinds[] = {"navigate_click", "person_click", "cutscene_click", "notebook_click"};
  const char* names[] = {"basic", "undefined", "close", "open"};
  const char* rooms[] = {"a.b", "a.c", "d.e"};
  std::vector<RawEvent> out;
  for (std::size_t i = 0; i < n; ++i) {
    const SessionId s = 100 + rng.below(2);
    const auto g = static_cast<LevelGroup>(rng.below(3));
    const int lo[] = {0, 5, 13}, width[] = {5, 8, 10};
    RawEvent e = ev(s, rng.below(1000000), g, lo[int(g)] + int(rng.below(width[int(g)])),
                    static_cast<std::int64_t>(rng.below(100000)));
    e.event_name = kinds[rng.below(4)];
    e.name = names[rng.below(4)];
    if (rng.bernoulli(0.7)) e.room_coor_x = rng.uniform(-500, 500);
    if (rng.bernoulli(0.7)) e.room_coor_y = rng.uniform(-300, 300);
    if (rng.bernoulli(0.9)) e.screen_coor_x = rng.uniform(0, 1000);
    if (rng.bernoulli(0.9)) e.screen_coor_y = rng.uniform(0, 800);
    if (rng.bernoulli(0.2)) e.hover_duration = static_cast<std::int64_t>(rng.below(5000));
    if (rng.bernoulli(0.1)) e.page = static_cast<std::int64_t>(rng.below(7));
    if (rng.bernoulli(0.8)) e.fqid = std::string("f") + std::to_string(rng.below(6));
    if (rng.bernoulli(0.9)) e.room_fqid = rooms[rng.below(3)];
    if (rng.bernoulli(0.4)) e.text_fqid = std::string("t") + std::to_string(rng.below(4));
    e.music = static_cast<std::uint8_t>(rng.below(2));
    e.hq = static_cast<std::uint8_t>(rng.below(2));
    e.fullscreen = static_cast<std::uint8_t>(rng.below(2));
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(Specs, NamesAndTypeChecks) {
  EXPECT_EQ(make_spec("elapsed_time", AggKind::Sum).output_name, "elapsed_time_sum");
  EXPECT_EQ(parse_spec("room_fqid_nunique"), make_spec("room_fqid", AggKind::Nunique));
  EXPECT_EQ(parse_spec("room_coor_x_mean"), make_spec("room_coor_x", AggKind::Mean));
  EXPECT_EQ(default_specs().size(), 11u);
  try {
    Aggregator a({make_spec("fqid", AggKind::Mean)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpecTypeMismatch);
  }
  try {
    Aggregator a({make_spec("elapsed_time", AggKind::Nunique)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpecTypeMismatch);
  }
  EXPECT_THROW(Aggregator({make_spec("text", AggKind::Count)}), Error);
}

TEST(Aggregate, ElapsedSum) {
  std::vector<RawEvent> evs = {ev(1, 0, LevelGroup::L0_4, 1, 10), ev(1, 1, LevelGroup::L0_4, 1, 20),
                               ev(1, 2, LevelGroup::L0_4, 4, 30)};
  auto m = aggregate(evs, {make_spec("elapsed_time", AggKind::Sum), make_spec("level", AggKind::Mean)});
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.rows[0].values[0], 60.0);
  EXPECT_EQ(m.rows[0].values[1], 2.0);
}

TEST(Aggregate, AbsentValuesIgnoredAndAllAbsentGivesAbsent) {
  auto a = ev(1, 0, LevelGroup::L0_4, 1, 10), b = ev(1, 1, LevelGroup::L0_4, 1, 20);
  a.room_coor_x = 4;
  auto m = aggregate(std::vector<RawEvent>{a, b},
                     {make_spec("room_coor_x", AggKind::Mean), make_spec("hover_duration", AggKind::Max),
                      make_spec("fqid", AggKind::Count), make_spec("fqid", AggKind::First)});
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.rows[0].values[0], 4.0);
  EXPECT_FALSE(m.rows[0].values[1]);
  EXPECT_EQ(m.rows[0].values[2], 0.0);
  EXPECT_FALSE(m.rows[0].values[3]);
}

TEST(Aggregate, FirstLastByIndexNotArrival) {
  auto a = ev(1, 5, LevelGroup::L0_4, 1, 10), b = ev(1, 2, LevelGroup::L0_4, 1, 20), c = ev(1, 9, LevelGroup::L0_4, 1, 30);
  a.fqid = "middle";
  b.fqid = "early";
  c.fqid = "late";
  auto m = aggregate(std::vector<RawEvent>{a, b, c},
                     {make_spec("fqid", AggKind::First), make_spec("fqid", AggKind::Last)});
  EXPECT_EQ(m.decode(0, 0), "early");
  EXPECT_EQ(m.decode(0, 1), "late");
  // Codes are first-appearance order over the run.
  EXPECT_EQ(m.code_tables.at("fqid"), (std::vector<std::string>{"middle", "early", "late"}));
}

TEST(Aggregate, OneRowPerGroupSorted) {
  auto evs = random_events(500, 9);
  auto m = aggregate(evs, default_specs());
  std::set<std::pair<SessionId, int>> keys;
  for (const auto& e : evs) keys.insert({e.session_id, int(e.level_group)});
  ASSERT_EQ(m.rows.size(), keys.size());
  for (std::size_t i = 1; i < m.rows.size(); ++i)
    EXPECT_TRUE(std::make_pair(m.rows[i - 1].session_id, m.rows[i - 1].level_group) <
                std::make_pair(m.rows[i].session_id, m.rows[i].level_group));
  for (const auto& r : m.rows) EXPECT_EQ(r.values.size(), m.columns.size());
}

TEST(Aggregate, MatchesBruteForceOracleOnRandomEvents) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto evs = random_events(100, seed);
    const auto specs = full_specs();
    auto m = aggregate(evs, specs);
    auto want = oracle::aggregate(evs, specs);
    EXPECT_LT(oracle::max_abs_diff(m, want), 1e-9) << "seed " << seed;
  }
}

TEST(Aggregate, StreamedMatchesOracleOnSyntheticCorpus) {
  SynthConfig c;
  c.sessions = 20;
  c.events_per_session = 300;
  auto corpus = generate_in_memory(c);
  std::string text = event_header() + "\n";
  for (const auto& e : corpus.events) text += format_event_row(e) + "\n";
  std::istringstream in(text);
  EventReader reader(in);
  auto m = aggregate(reader, full_specs(), 333);
  EXPECT_LT(oracle::max_abs_diff(m, oracle::aggregate(corpus.events, full_specs())), 1e-9);
}

TEST(Aggregate, PermutationInvariant) {
  auto evs = random_events(400, 77);
  auto base = aggregate(evs, full_specs());
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    auto shuffled = evs;
    rng.shuffle(std::span<RawEvent>(shuffled));
    auto m = aggregate(shuffled, full_specs());
    // Dictionary codes depend on arrival, so compare decoded values.
    EXPECT_LT(oracle::max_abs_diff(m, oracle::aggregate(evs, full_specs())), 1e-9);
    ASSERT_EQ(m.rows.size(), base.rows.size());
    for (std::size_t r = 0; r < m.rows.size(); ++r)
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        if (m.is_code_column(c)) {
          EXPECT_EQ(m.decode(r, c), base.decode(r, c));
        } else if (base.rows[r].values[c]) {
          EXPECT_NEAR(*m.rows[r].values[c], *base.rows[r].values[c], 1e-9 * std::max(1.0, std::fabs(*base.rows[r].values[c])));
        }
      }
  }
}

TEST(Aggregate, ParallelBatchEqualsSerial) {
  auto evs = random_events(3000, 5);
  Aggregator a(full_specs()), b(full_specs());
  a.add_batch(evs);
  b.add_batch_serial(evs);
  auto ma = a.finish(), mb = b.finish();
  EXPECT_EQ(ma.rows, mb.rows);
  EXPECT_EQ(ma.code_tables, mb.code_tables);
  Aggregator c(full_specs());
  for (const auto& e : evs) c.add(e);
  EXPECT_EQ(c.finish().rows, mb.rows);
}

TEST(Aggregate, ShardsByMergeAndConcatEqualSinglePass) {
  auto evs = random_events(1000, 13);
  std::vector<RawEvent> s0, s1;
  for (const auto& e : evs) (e.session_id == 100 ? s0 : s1).push_back(e);
  auto whole = aggregate(evs, full_specs());
  auto want = oracle::aggregate(evs, full_specs());

  Aggregator a(full_specs()), b(full_specs());
  a.add_batch(s1);
  b.add_batch(s0);
  a.merge(b);
  EXPECT_LT(oracle::max_abs_diff(a.finish(), want), 1e-9);

  std::vector<FeatureMatrix> shards = {aggregate(s0, full_specs()), aggregate(s1, full_specs())};
  auto cat = concat_shards(shards);
  EXPECT_LT(oracle::max_abs_diff(cat, want), 1e-9);
  EXPECT_EQ(cat.rows.size(), whole.rows.size());
}

TEST(Aggregate, MergeOfSameGroupAcrossAggregators) {
  // Splitting one group's events between two aggregators and merging equals one pass.
  auto evs = random_events(600, 21);
  Aggregator a(full_specs()), b(full_specs());
  for (std::size_t i = 0; i < evs.size(); ++i) (i % 2 ? a : b).add(evs[i]);
  a.merge(b);
  EXPECT_LT(oracle::max_abs_diff(a.finish(), oracle::aggregate(evs, full_specs())), 1e-9);
}

TEST(AggregateProperties, MeanCountSumMinMaxNunique) {
  auto evs = random_events(2000, 31);
  std::vector<AggregatorSpec> specs;
  for (const char* col : {"room_coor_x", "screen_coor_y", "elapsed_time"})
    for (auto k : {AggKind::Mean, AggKind::Sum, AggKind::Min, AggKind::Max}) specs.push_back(make_spec(col, k));
  // count of a numeric column is taken from the oracle since the library only counts categoricals.
  for (const char* col : {"fqid", "name", "room_fqid"})
    for (auto k : {AggKind::Count, AggKind::Nunique}) specs.push_back(make_spec(col, k));
  auto m = aggregate(evs, specs);
  std::map<std::pair<SessionId, LevelGroup>, std::map<std::string, std::size_t>> present;
  for (const auto& e : evs) {
    auto& p = present[{e.session_id, e.level_group}];
    p["room_coor_x"] += e.room_coor_x.has_value();
    p["screen_coor_y"] += e.screen_coor_y.has_value();
    p["elapsed_time"] += 1;
  }
  for (const auto& row : m.rows) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& mean = row.values[4 * c], sum = row.values[4 * c + 1], mn = row.values[4 * c + 2],
                  mx = row.values[4 * c + 3];
      if (!mean) continue;
      const double n = double(present[{row.session_id, row.level_group}][specs[4 * c].column]);
      EXPECT_NEAR(*mean * n, *sum, 1e-9 * std::max(1.0, std::fabs(*sum)));
      EXPECT_LE(*mn, *mean);
      EXPECT_LE(*mean, *mx);
    }
    for (std::size_t c = 12; c < specs.size(); c += 2) {
      EXPECT_LE(*row.values[c + 1], *row.values[c]);
      EXPECT_EQ(*row.values[c], std::floor(*row.values[c]));
      EXPECT_GE(*row.values[c + 1], 0.0);
    }
  }
}

TEST(FeatureFiles, CsvAndMetadataRoundTrip) {
  auto evs = random_events(800, 41);
  auto m = aggregate(evs, full_specs());
  std::ostringstream csv;
  write_features_csv(csv, m);
  auto meta = features_metadata(m);
  std::istringstream in(csv.str());
  auto back = read_features(in, meta);
  EXPECT_EQ(back.rows, m.rows);
  EXPECT_EQ(back.code_tables, m.code_tables);
  EXPECT_EQ(back.specs, m.specs);
  std::ostringstream again;
  write_features_csv(again, back);
  EXPECT_EQ(again.str(), csv.str());
}

TEST(Compression, ZeroEventsIsNotApplicable) {
  IngestStats none;
  FeatureMatrix empty;
  auto r = compression_report(none, empty);
  EXPECT_FALSE(r.ratio);
  EXPECT_EQ(to_json(r)["ratio"], "n/a");
}

TEST(Compression, RowsEqualDistinctPairsAndBytesShrink) {
  SynthConfig c;
  c.sessions = 30;
  c.events_per_session = 1000;
  std::ostringstream ev, lab;
  auto summary = generate(c, ev, lab);
  std::istringstream in(ev.str());
  EventReader reader(in);
  auto m = aggregate(reader, default_specs());
  auto r = compression_report(reader.stats(), m);
  EXPECT_EQ(r.output_rows, 3 * c.sessions);
  EXPECT_EQ(r.input_rows, summary.events_written);
  EXPECT_EQ(r.input_bytes, ev.str().size());
  ASSERT_TRUE(r.ratio);
  EXPECT_LT(*r.ratio, 0.05);
}
