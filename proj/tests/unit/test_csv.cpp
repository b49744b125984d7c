#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "meltpool/csv.hpp"

using namespace meltpool;

TEST(CsvNumbers, RoundTripBitExact) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 30) - 15);
    EXPECT_EQ(parse_number(format_number(x)), x);
  }
  for (double x : {0.0, -0.0, 1e-300, 5e-324, 0.1, std::numeric_limits<double>::max()})
    EXPECT_EQ(parse_number(format_number(x)), x);
  EXPECT_THROW(parse_number("abc"), std::invalid_argument);
  EXPECT_THROW(parse_number("1.5x"), std::invalid_argument);
}

TEST(CsvTable, WriteReadRoundTrip) {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}, {"2.5", "y"}};
  std::stringstream ss;
  write_csv(ss, t);
  EXPECT_EQ(ss.str(), "a,b\n1,x\n2.5,y\n");
  auto back = read_csv(ss);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.column("b"), 1u);
  EXPECT_THROW(back.column("c"), std::out_of_range);
}

TEST(CsvTable, RejectsRaggedRows) {
  std::stringstream ss("a,b\n1,2\n3\n");
  EXPECT_THROW(read_csv(ss), std::invalid_argument);
}

TEST(ScanLog, RoundTripRecoversTracks) {
  std::vector<StepRecord> recs;
  for (int k = 0; k < 10; ++k) {
    StepRecord r;
    r.step = k;
    r.time_s = k * 50e-6;
    r.track = k < 6 ? 0 : 1;
    r.track_step = k < 6 ? k : k - 6;
    r.x_mm = r.track == 0 ? 0.04 * k : 0.04 * (6 - r.track_step);
    r.y_mm = 0.1 * r.track;
    r.power_w = 250 + std::sin(k);
    r.speed_mm_s = 800;
    r.melt_area_mm2 = 0.0027 + 1e-5 * k;
    r.lookahead_temp_k = 353 + 1.0 / 3.0 * k;
    recs.push_back(r);
  }
  auto table = scan_log_table(recs);
  EXPECT_EQ(table.header, kScanLogColumns);
  std::stringstream ss;
  write_csv(ss, table);
  auto back = scan_log_from_table(read_csv(ss));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].time_s, recs[i].time_s);
    EXPECT_EQ(back[i].power_w, recs[i].power_w);
    EXPECT_EQ(back[i].lookahead_temp_k, recs[i].lookahead_temp_k);
    EXPECT_EQ(back[i].track, recs[i].track);
    EXPECT_EQ(back[i].track_step, recs[i].track_step);
  }
}
