#include <gtest/gtest.h>

#include "oracle.hpp"
#include "support.hpp"

using namespace tedpc;
using namespace tedpc::testing;

namespace {

GestationStart start_at(const char* iso) {
  GestationStart g;
  g.person_id = 1;
  g.start_date = D(iso);
  g.accuracy = AccuracyLevel::High;
  return g;
}

DeliveryRecord dod_at(const char* iso, int rank = 1) {
  DeliveryRecord r;
  r.person_id = 1;
  r.dod = D(iso);
  r.domain_rank = rank;
  return r;
}

PregnancyEpisode episode(const char* start, const char* dod, PersonId pid = 1) {
  PregnancyEpisode e;
  e.person_id = pid;
  e.episode_index = 1;
  e.start_date = D(start);
  e.dod = D(dod);
  e.gestation_days = e.dod - e.start_date;
  e.extreme_flag = extreme_flag_of(e.gestation_days);
  return e;
}

}  // namespace

TEST(Matching, SingleCompatiblePair) {
  const auto r = match_episodes(std::vector{start_at("2019-12-10")}, std::vector{dod_at("2020-09-15")});
  ASSERT_EQ(r.episodes.size(), 1u);
  EXPECT_EQ(r.episodes[0].gestation_days, 280);
  EXPECT_EQ(r.episodes[0].episode_index, 1);
  EXPECT_EQ(r.episodes[0].extreme_flag, ExtremeFlag::None);
}

TEST(Matching, OutOfBoundsPairIsReportedNotDropped) {
  const auto r = match_episodes(std::vector{start_at("2020-01-01")}, std::vector{dod_at("2020-02-01")});
  EXPECT_TRUE(r.episodes.empty());
  EXPECT_EQ(r.unmatched_starts.size(), 1u);
  EXPECT_EQ(r.unmatched_dods.size(), 1u);
}

TEST(Matching, TwoPairsNearestPlausible) {
  const auto r = match_episodes(std::vector{start_at("2019-12-10"), start_at("2020-11-01")},
                                std::vector{dod_at("2021-07-20"), dod_at("2020-09-15")});
  ASSERT_EQ(r.episodes.size(), 2u);
  EXPECT_EQ(r.episodes[0].start_date, D("2019-12-10"));
  EXPECT_EQ(r.episodes[0].dod, D("2020-09-15"));
  EXPECT_EQ(r.episodes[0].episode_index, 1);
  EXPECT_EQ(r.episodes[1].start_date, D("2020-11-01"));
  EXPECT_EQ(r.episodes[1].dod, D("2021-07-20"));
  EXPECT_EQ(r.episodes[1].gestation_days, 261);
  EXPECT_EQ(r.episodes[1].episode_index, 2);
  EXPECT_TRUE(r.unmatched_starts.empty());
}

TEST(Matching, BoundsAreInclusive) {
  EXPECT_EQ(match_episodes(std::vector{start_at("2020-01-01")}, std::vector{dod_at("2020-05-20")}).episodes.size(), 1u);  // 140
  EXPECT_EQ(match_episodes(std::vector{start_at("2020-01-01")}, std::vector{dod_at("2020-05-19")}).episodes.size(), 0u);  // 139
  EXPECT_EQ(match_episodes(std::vector{start_at("2020-01-01")}, std::vector{dod_at("2020-11-04")}).episodes.size(), 1u);  // 308
  EXPECT_EQ(match_episodes(std::vector{start_at("2020-01-01")}, std::vector{dod_at("2020-11-05")}).episodes.size(), 0u);  // 309
}

TEST(Matching, EqualDistanceTieGoesToEarlierStart) {
  // 270 and 290 days are both 10 from the 280-day target.
  const auto r = match_episodes(std::vector{start_at("2020-01-21"), start_at("2020-01-01")},
                                std::vector{dod_at("2020-10-17")});
  ASSERT_EQ(r.episodes.size(), 1u);
  EXPECT_EQ(r.episodes[0].start_date, D("2020-01-01"));
}

TEST(Matching, AgreesWithOracleOnRandomInstances) {
  synth::Rng rng(99);
  const Date base = D("2018-01-01");
  for (int trial = 0; trial < 3000; ++trial) {
    std::vector<GestationStart> starts;
    std::vector<DeliveryRecord> dods;
    std::vector<Date> s_dates, d_dates;
    for (int i = rng.uniform_int(0, 4); i > 0; --i) {
      GestationStart g;
      g.person_id = 1;
      g.start_date = base + rng.uniform_int(0, 1500);
      starts.push_back(g);
      s_dates.push_back(g.start_date);
    }
    for (int i = rng.uniform_int(0, 4); i > 0; --i) {
      DeliveryRecord r;
      r.person_id = 1;
      r.dod = base + rng.uniform_int(100, 1800);
      if (std::find(d_dates.begin(), d_dates.end(), r.dod) != d_dates.end()) continue;
      dods.push_back(r);
      d_dates.push_back(r.dod);
    }
    const auto got = match_episodes(starts, dods);
    std::vector<std::pair<Date, Date>> pairs;
    for (const auto& e : got.episodes) pairs.emplace_back(e.start_date, e.dod);
    ASSERT_EQ(pairs, oracle::match(s_dates, d_dates)) << "trial " << trial;
    EXPECT_EQ(got.episodes.size() + got.unmatched_starts.size(), starts.size());
    EXPECT_EQ(got.episodes.size() + got.unmatched_dods.size(), dods.size());
  }
}

TEST(ExtremeFlag, Thresholds) {
  EXPECT_EQ(extreme_flag_of(149), ExtremeFlag::Short);
  EXPECT_EQ(extreme_flag_of(150), ExtremeFlag::None);
  EXPECT_EQ(extreme_flag_of(300), ExtremeFlag::None);
  EXPECT_EQ(extreme_flag_of(301), ExtremeFlag::Long);
}

TEST(CohortFilter, WindowAndAgeBoundaries) {
  const PersonTable persons(std::vector<Person>{{1, D("2000-01-01"), "F", "", ""},
                                                {2, D("2006-06-01"), "F", "", ""},
                                                {3, D("1971-06-01"), "F", "", ""}});
  const std::vector<PregnancyEpisode> eps = {
      episode("2020-08-24", "2021-05-31", 1),  // age 21, last day of window
      episode("2020-08-25", "2021-06-01", 1),  // one day past window
      episode("2019-04-01", "2020-01-01", 2),  // age 13
      episode("2017-09-01", "2018-06-01", 3),  // first day of window; age 47
      episode("2020-01-01", "2020-10-01", 4),  // unknown person
  };
  const auto r = apply_cohort_filters(eps, persons);
  ASSERT_EQ(r.retained.size(), 2u);
  EXPECT_EQ(r.retained[0].dod, D("2021-05-31"));
  EXPECT_EQ(r.retained[1].dod, D("2018-06-01"));
  EXPECT_EQ(r.excluded.size(), 3u);

  CohortCriteria strict;
  strict.max_age = 45;
  EXPECT_EQ(apply_cohort_filters(eps, persons, strict).retained.size(), 1u);
}

TEST(Timing, BoundaryExamples) {
  const auto ep = episode("2020-01-01", "2020-10-01");
  EXPECT_EQ(gestational_week_of(ep.start_date, ep).week, 1);
  EXPECT_EQ(gestational_week_of(ep.start_date, ep).trimester, Trimester::First);
  EXPECT_EQ(gestational_week_of(ep.start_date + 6, ep).week, 1);
  EXPECT_EQ(gestational_week_of(ep.start_date + 7, ep).week, 2);
  EXPECT_EQ(gestational_week_of(ep.start_date - 10, ep).week, 0);
  EXPECT_EQ(gestational_week_of(ep.start_date - 10, ep).trimester, Trimester::Pre);
  EXPECT_EQ(gestational_week_of(ep.start_date + 189, ep).week, 28);
  EXPECT_EQ(gestational_week_of(ep.start_date + 189, ep).trimester, Trimester::Third);
  EXPECT_EQ(gestational_week_of(ep.start_date + 188, ep).trimester, Trimester::Second);
  EXPECT_EQ(gestational_week_of(ep.dod, ep).trimester, Trimester::Third);
  EXPECT_EQ(gestational_week_of(ep.dod + 1, ep).trimester, Trimester::PostDelivery);
}

TEST(Timing, TrimesterPartitionsEveryWeek) {
  EXPECT_EQ(trimester_of(0), Trimester::Pre);
  for (int w = 1; w <= 45; ++w) {
    const auto t = trimester_of(w);
    EXPECT_EQ(t, w <= 13 ? Trimester::First : w <= 27 ? Trimester::Second : Trimester::Third) << w;
  }
  EXPECT_EQ(trimester_of(13), Trimester::First);
  EXPECT_EQ(trimester_of(14), Trimester::Second);
  EXPECT_EQ(trimester_of(27), Trimester::Second);
  EXPECT_EQ(trimester_of(28), Trimester::Third);
}

TEST(EpisodesCsv, RoundTrip) {
  auto a = episode("2019-12-10", "2020-09-15");
  auto b = episode("2020-11-01", "2021-03-20");
  b.episode_index = 2;
  b.conflict_flag = true;
  b.ga_accuracy = AccuracyLevel::ModerateLow;
  b.dod_domain_rank = 3;
  const std::vector<PregnancyEpisode> eps = {a, b};
  const auto text = write_episodes(eps);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "person_id,episode_index,start_date,dod,gestation_days,ga_accuracy,dod_domain_rank,extreme_flag,conflict_flag");
  const auto back = parse_episodes(csv::Reader(text, "e.csv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(write_episodes(back), text);
  EXPECT_EQ(back[1].extreme_flag, ExtremeFlag::Short);
}

TEST(EpisodesCsv, InconsistentGestationDaysRejected) {
  const std::string text =
      "person_id,episode_index,start_date,dod,gestation_days,ga_accuracy,dod_domain_rank,extreme_flag,conflict_flag\n"
      "1,1,2019-12-10,2020-09-15,281,high,1,none,false\n";
  EXPECT_THROW(parse_episodes(csv::Reader(text, "e.csv")), InputError);
}
