#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "playtrace/common.hpp"
#include "playtrace/csv.hpp"

using namespace playtrace;

TEST(Splitmix, KnownFirstOutputFromZero) {
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(state), 0x6e789e6aa1b965f4ULL);
}

// Straight transcription of the published xoshiro256** step.
TEST(Rng, MatchesReferenceXoshiro) {
  std::uint64_t st = 1234;
  std::uint64_t s[4];
  for (auto& w : s) w = splitmix64(st);
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  Rng rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t want = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    ASSERT_EQ(rng.next(), want) << "step " << i;
  }
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(13), 13u);
  }
}

TEST(Rng, NormalMomentsAreRoughlyStandard) {
  Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(100), b(100);
  for (int i = 0; i < 100; ++i) a[i] = b[i] = i;
  Rng r1(5), r2(5);
  r1.shuffle(std::span<int>(a));
  r2.shuffle(std::span<int>(b));
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 100u);
}

TEST(DeriveSeed, StreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(42, s));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(40)) - 20);
    const auto back = parse_double(format_double(v));
    ASSERT_TRUE(back.has_value());
    ASSERT_EQ(*back, v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(3), "3");
}

TEST(Parse, RejectsGarbage) {
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_FALSE(parse_int("12a"));
  EXPECT_FALSE(parse_uint("-3"));
  EXPECT_EQ(parse_int("-17"), -17);
  EXPECT_EQ(parse_uint("20090312431273200"), 20090312431273200ULL);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Error, ExitCodes) {
  EXPECT_EQ(exit_code_for(ErrorCode::Usage), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::ConfigInvalid), 1);
  EXPECT_EQ(exit_code_for(ErrorCode::MissingFile), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::TypeError), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::Internal), 3);
  Error e(ErrorCode::MissingFile, "x.csv");
  EXPECT_EQ(e.message(), "x.csv");
  EXPECT_NE(std::string(e.what()).find("MissingFile"), std::string::npos);
}

TEST(Matrix, AppendAndSelectRows) {
  Matrix m;
  m.append_row(std::vector<double>{1, 2});
  m.append_row(std::vector<double>{3, 4});
  EXPECT_THROW(m.append_row(std::vector<double>{1}), Error);
  std::vector<std::size_t> idx = {1, 1, 0};
  Matrix s = m.select_rows(idx);
  EXPECT_EQ(s.rows(), 3u);
  EXPECT_EQ(s(0, 0), 3);
  EXPECT_EQ(s(2, 1), 2);
  EXPECT_EQ(m.column(1), (std::vector<double>{2, 4}));
}

TEST(Parallel, WorkerCap) {
  parallel::set_workers(1);
  EXPECT_EQ(parallel::workers(), 1);
  parallel::set_workers(0);
  EXPECT_EQ(parallel::workers(), parallel::available_cores());
}

TEST(Csv, SplitAndEscapeRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "", "multi\nline"};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) csv::append_field(line, fields[i], i == 0);
  std::vector<std::string> back;
  ASSERT_TRUE(csv::split(line, back));
  EXPECT_EQ(back, fields);
  EXPECT_FALSE(csv::split("\"unterminated", back));
  EXPECT_FALSE(csv::split("\"a\"b", back));
}

TEST(Csv, RecordReaderJoinsQuotedLineBreaks) {
  std::istringstream in("a,b\n\"x\ny\",2\r\nlast,3");
  csv::RecordReader r(in);
  std::string rec;
  ASSERT_TRUE(r.next_raw(rec));
  EXPECT_EQ(rec, "a,b");
  ASSERT_TRUE(r.next_raw(rec));
  EXPECT_EQ(rec, "\"x\ny\",2");
  ASSERT_TRUE(r.next_raw(rec));
  EXPECT_EQ(rec, "last,3");
  EXPECT_FALSE(r.next_raw(rec));
  EXPECT_EQ(r.records_read(), 3u);
}
