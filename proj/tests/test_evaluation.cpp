#include <gtest/gtest.h>

#include "support.hpp"

using namespace tedpc;
using namespace tedpc::testing;

namespace {

using Counts = std::vector<std::vector<std::int64_t>>;

// Kappa straight from the textbook definition with explicit weight matrices,
// written without the library's helpers.
double reference_kappa(const std::vector<std::vector<double>>& n, bool linear) {
  const std::size_t k = n.size();
  double total = 0;
  std::vector<double> rows(k, 0), cols(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      total += n[i][j];
      rows[i] += n[i][j];
      cols[j] += n[i][j];
    }
  }
  double disagree_obs = 0, disagree_exp = 0;  // weighted disagreement form
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = linear ? std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(k - 1)
                              : (i == j ? 0.0 : 1.0);
      disagree_obs += v * n[i][j] / total;
      disagree_exp += v * rows[i] * cols[j] / (total * total);
    }
  }
  return 1.0 - disagree_obs / disagree_exp;
}

ConfusionMatrix table4() { return ConfusionMatrix(Counts{{33, 1, 0}, {2, 1, 1}, {0, 1, 1}}); }

}  // namespace

TEST(Kappa, Table4Linear) {
  const auto r = cohen_kappa(table4(), Weighting::Linear);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(*r.kappa, 0.62, 0.005);
  EXPECT_NEAR(*r.kappa, 0.6240601503759399, 1e-12);
  EXPECT_NEAR(*r.kappa, reference_kappa({{33, 1, 0}, {2, 1, 1}, {0, 1, 1}}, true), 1e-12);
}

TEST(Kappa, PerfectAgreementUnweightedIsExactlyOne) {
  for (std::int64_t a = 1; a <= 40; ++a) {
    for (std::int64_t b = 0; b <= 5; ++b) {
      const auto r = cohen_kappa(ConfusionMatrix(Counts{{a, 0, 0}, {0, b, 0}, {0, 0, 1}}), Weighting::Unweighted);
      ASSERT_TRUE(r.ok());
      EXPECT_EQ(*r.kappa, 1.0);
    }
  }
  EXPECT_EQ(*cohen_kappa(ConfusionMatrix(Counts{{39, 0}, {0, 1}}), Weighting::Unweighted).kappa, 1.0);
}

TEST(Kappa, IndependenceIsZero) {
  const auto r = cohen_kappa(ConfusionMatrix(Counts{{25, 25}, {25, 25}}), Weighting::Unweighted);
  ASSERT_TRUE(r.ok());
  EXPECT_DOUBLE_EQ(*r.kappa, 0.0);
}

TEST(Kappa, DegenerateInputsReportErrors) {
  const auto zero = cohen_kappa(ConfusionMatrix(Counts{{0, 0}, {0, 0}}), Weighting::Linear);
  EXPECT_FALSE(zero.ok());
  EXPECT_FALSE(zero.error.empty());
  // Both raters always say the same single category: expected agreement is 1.
  const auto flat = cohen_kappa(ConfusionMatrix(Counts{{40, 0}, {0, 0}}), Weighting::Unweighted);
  EXPECT_FALSE(flat.ok());
  EXPECT_THROW(ConfusionMatrix(Counts{{1}}), std::invalid_argument);
  EXPECT_THROW(ConfusionMatrix(Counts{{1, 2}, {3}}), std::invalid_argument);
  EXPECT_THROW(ConfusionMatrix(Counts{{1, -2}, {3, 4}}), std::invalid_argument);
}

TEST(Kappa, MatchesReferenceAndIsScaleInvariantOnRandomMatrices) {
  synth::Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(2, 5));
    std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k));
    std::vector<std::vector<double>> as_double(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        counts[i][j] = rng.uniform_int(0, i == j ? 30 : 6);
        as_double[i][j] = static_cast<double>(counts[i][j]);
      }
    }
    for (const auto w : {Weighting::Unweighted, Weighting::Linear}) {
      const auto r = cohen_kappa(ConfusionMatrix(counts), w);
      if (!r.ok()) continue;
      EXPECT_NEAR(*r.kappa, reference_kappa(as_double, w == Weighting::Linear), 1e-9);
      EXPECT_LE(*r.kappa, 1.0 + 1e-12);
      // Scaling every cell leaves kappa unchanged.
      auto scaled = counts;
      for (auto& row : scaled) {
        for (auto& v : row) v *= 7;
      }
      EXPECT_NEAR(*cohen_kappa(ConfusionMatrix(scaled), w).kappa, *r.kappa, 1e-9);
      // Swapping the raters (transposing) leaves kappa unchanged.
      auto transposed = counts;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) transposed[i][j] = counts[j][i];
      }
      EXPECT_NEAR(*cohen_kappa(ConfusionMatrix(transposed), w).kappa, *r.kappa, 1e-9);
      // Reversing the category order keeps |i - j| and so both weightings.
      auto reversed = counts;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) reversed[i][j] = counts[k - 1 - i][k - 1 - j];
      }
      EXPECT_NEAR(*cohen_kappa(ConfusionMatrix(reversed), w).kappa, *r.kappa, 1e-9);
    }
  }
}

TEST(Kappa, LinearEqualsUnweightedForTwoCategories) {
  const ConfusionMatrix m({{20, 5}, {3, 12}});
  EXPECT_DOUBLE_EQ(*cohen_kappa(m, Weighting::Linear).kappa, *cohen_kappa(m, Weighting::Unweighted).kappa);
}

TEST(ConfusionCsv, LoadsFixtureAndRejectsMalformed) {
  const auto m = load_confusion_matrix(fixture("table4_accuracy.csv"));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.labels()[1], "Moderate");
  EXPECT_EQ(m.total(), 40);
  EXPECT_EQ(m.row_sum(0), 34);
  EXPECT_EQ(m.col_sum(0), 35);
  EXPECT_THROW(parse_confusion_matrix(csv::Reader("x,A,B\nA,1,2\n", "m.csv")), InputError);
  EXPECT_THROW(parse_confusion_matrix(csv::Reader("x,A,B\nB,1,2\nA,3,4\n", "m.csv")), InputError);
  EXPECT_THROW(parse_confusion_matrix(csv::Reader("x,A,B\nA,1,-2\nB,3,4\n", "m.csv")), InputError);
  EXPECT_THROW(parse_confusion_matrix(csv::Reader("x,A,B\nA,1,2,3\nB,3,4\n", "m.csv")), InputError);
}

namespace {

TruthEpisode truth(PersonId pid, int idx, const char* start, const char* dod) {
  return TruthEpisode{pid, idx, D(start), D(dod), std::nullopt, {}};
}

PregnancyEpisode inferred(PersonId pid, const char* start, const char* dod) {
  PregnancyEpisode e;
  e.person_id = pid;
  e.start_date = D(start);
  e.dod = D(dod);
  e.gestation_days = e.dod - e.start_date;
  return e;
}

}  // namespace

TEST(RoundTrip, PerfectRecovery) {
  const std::vector t = {truth(1, 1, "2019-01-01", "2019-10-01"), truth(2, 1, "2020-01-01", "2020-10-01")};
  const std::vector e = {inferred(1, "2019-01-01", "2019-10-01"), inferred(2, "2020-01-01", "2020-10-01")};
  const auto r = round_trip_score(e, t);
  EXPECT_EQ(r.exact_start_rate(), 1.0);
  EXPECT_EQ(r.exact_dod_rate(), 1.0);
  EXPECT_EQ(r.count_match_rate(), 1.0);
}

TEST(RoundTrip, FourDaysOffIsWithinSevenNotExact) {
  const auto r = round_trip_score(std::vector{inferred(1, "2020-01-05", "2020-10-01")},
                                  std::vector{truth(1, 1, "2020-01-01", "2020-10-01")});
  EXPECT_EQ(r.exact_start, 0u);
  EXPECT_EQ(r.start_within_7, 1u);
  EXPECT_EQ(r.exact_dod, 1u);
}

TEST(RoundTrip, CountMismatchRecorded) {
  const std::vector t = {truth(1, 1, "2019-01-01", "2019-10-01"), truth(1, 2, "2020-06-01", "2021-03-01")};
  const auto r = round_trip_score(std::vector{inferred(1, "2019-01-01", "2019-10-01")}, t);
  EXPECT_EQ(r.persons_count_match, 0u);
  ASSERT_EQ(r.count_mismatch_persons.size(), 1u);
  EXPECT_EQ(r.count_mismatch_persons[0], 1);
  EXPECT_DOUBLE_EQ(r.exact_start_rate(), 0.5);
  EXPECT_NE(format_scorecard(r).find("episode_count_match: 0.0000"), std::string::npos);
}

TEST(TruthCsv, RoundTrip) {
  std::vector t = {truth(1, 1, "2019-01-01", "2019-10-01"), truth(1, 2, "2020-06-01", "2021-03-01")};
  t[1].index_event_week = 12;
  const auto text = write_truth(t);
  const auto back = parse_truth(csv::Reader(text, "truth.csv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].index_event_week, 12);
  EXPECT_FALSE(back[0].index_event_week.has_value());
  EXPECT_EQ(write_truth(back), text);
}
