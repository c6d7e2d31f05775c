#include <gtest/gtest.h>

#include "support.hpp"

using namespace tedpc;
using tedpc::testing::D;

namespace {

// Independent calendar: walks forward one day at a time from 1970-01-01.
struct Ymd {
  int y;
  unsigned m, d;
};

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned month_length(int y, unsigned m) {
  static const unsigned len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : len[m - 1];
}

void step(Ymd& v) {
  if (++v.d > month_length(v.y, v.m)) {
    v.d = 1;
    if (++v.m > 12) {
      v.m = 1;
      ++v.y;
    }
  }
}

}  // namespace

TEST(Date, AgreesWithDayByDayCalendarFrom1970To2040) {
  Ymd v{1970, 1, 1};
  for (int n = 0; v.y < 2040; ++n, step(v)) {
    const auto d = Date::from_ymd(v.y, v.m, v.d);
    ASSERT_TRUE(d.has_value());
    ASSERT_EQ(d->days_since_epoch(), n) << v.y << "-" << v.m << "-" << v.d;
    ASSERT_EQ(d->year(), v.y);
    ASSERT_EQ(d->month(), v.m);
    ASSERT_EQ(d->day(), v.d);
    ASSERT_EQ(Date::parse(d->to_string()), d);
  }
}

TEST(Date, ArithmeticExamples) {
  EXPECT_EQ(D("2020-09-15") - 280, D("2019-12-10"));
  EXPECT_EQ(D("2020-03-01") - 84, D("2019-12-08"));
  EXPECT_EQ(D("2020-06-01") - 144, D("2020-01-09"));
  EXPECT_EQ(D("2020-03-01") - D("2020-02-28"), 2);
  EXPECT_EQ(D("2019-03-01") - D("2019-02-28"), 1);
  EXPECT_EQ((D("2020-12-31") + 1).to_string(), "2021-01-01");
}

TEST(Date, ParseIsStrict) {
  for (const char* bad : {"2020-13-01", "2020-02-30", "2019-02-29", "2020-1-01", "20200101", "2020/01/01",
                          " 2020-01-01", "2020-01-01 ", "", "abcd-ef-gh", "2020-00-10", "2020-01-00"}) {
    EXPECT_FALSE(Date::parse(bad).has_value()) << bad;
  }
  EXPECT_TRUE(Date::parse("2020-02-29").has_value());
  EXPECT_TRUE(Date::parse("1900-01-01").has_value());
}

TEST(Date, Ordering) {
  EXPECT_LT(D("2019-12-31"), D("2020-01-01"));
  EXPECT_EQ(D("2020-01-01"), D("2020-01-01"));
  EXPECT_GT(D("2020-01-02"), D("2020-01-01"));
}

TEST(Date, WholeYears) {
  EXPECT_EQ(whole_years_between(D("2000-01-01"), D("2021-05-31")), 21);
  EXPECT_EQ(whole_years_between(D("2006-06-01"), D("2020-01-01")), 13);
  EXPECT_EQ(whole_years_between(D("2000-06-01"), D("2015-05-31")), 14);
  EXPECT_EQ(whole_years_between(D("2000-06-01"), D("2015-06-01")), 15);
  EXPECT_EQ(whole_years_between(D("2000-02-29"), D("2001-02-28")), 0);
  EXPECT_EQ(whole_years_between(D("2000-02-29"), D("2001-03-01")), 1);
}
