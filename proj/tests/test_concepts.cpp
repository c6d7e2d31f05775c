#include <gtest/gtest.h>

#include "support.hpp"

using namespace tedpc;
using namespace tedpc::testing;

namespace {

GAConceptSet ga_from(const std::string& body) {
  return parse_ga_concepts(csv::Reader(
      "concept_id,name,accuracy_level,week_low,week_high,domain,vocabulary\n" + body, "ga.csv"));
}

DODConceptSet dod_from(const std::string& body) {
  return parse_dod_concepts(csv::Reader("concept_id,name,domain,vocabulary\n" + body, "dod.csv"));
}

}  // namespace

TEST(ClassifyAccuracy, Examples) {
  EXPECT_EQ(classify_accuracy(40, 40), AccuracyLevel::High);
  EXPECT_EQ(classify_accuracy(9, 13), AccuracyLevel::ModerateHigh);
  EXPECT_EQ(classify_accuracy(28, 35), AccuracyLevel::ModerateLow);
  EXPECT_EQ(classify_accuracy(1, 13), AccuracyLevel::Low);
  EXPECT_THROW(classify_accuracy(1, 20), std::invalid_argument);
  EXPECT_THROW(classify_accuracy(0, 3), std::invalid_argument);
  EXPECT_THROW(classify_accuracy(10, 9), std::invalid_argument);
  EXPECT_THROW(classify_accuracy(40, 46), std::invalid_argument);
}

TEST(ClassifyAccuracy, TotalOverAllValidPairsAndMonotoneInWidth) {
  for (int lo = 1; lo <= 45; ++lo) {
    for (int hi = lo; hi <= 45; ++hi) {
      const int width = hi - lo + 1;
      if (width > 13) {
        EXPECT_THROW(classify_accuracy(lo, hi), std::invalid_argument);
        continue;
      }
      const auto level = classify_accuracy(lo, hi);
      const AccuracyLevel expected = width == 1   ? AccuracyLevel::High
                                     : width <= 5  ? AccuracyLevel::ModerateHigh
                                     : width <= 10 ? AccuracyLevel::ModerateLow
                                                   : AccuracyLevel::Low;
      EXPECT_EQ(level, expected) << lo << ".." << hi;
      // Same width, same level regardless of position.
      EXPECT_EQ(level, classify_accuracy(1, width));
    }
  }
}

TEST(GAConcepts, ShippedFilePartition) {
  const auto& ga = shipped().ga;
  EXPECT_EQ(ga.size(), 138u);
  EXPECT_EQ(ga.counts.high, 42u);
  EXPECT_EQ(ga.counts.moderate_high, 9u);
  EXPECT_EQ(ga.counts.moderate_low, 5u);
  EXPECT_EQ(ga.counts.low, 82u);
  for (const auto& s : ga.all()) {
    EXPECT_LE(s.week_high - s.week_low + 1, 13) << s.concept_id;
    EXPECT_EQ(classify_accuracy(s.week_low, s.week_high), s.accuracy) << s.concept_id;
  }
  ASSERT_NE(ga.find(4181468), nullptr);
  EXPECT_EQ(ga.find(4181468)->week_low, 9);
  EXPECT_EQ(ga.find(4181468)->week_high, 13);
}

TEST(GAConcepts, EmptyFileAndIdenticalDuplicate) {
  const auto empty = ga_from("");
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(empty.counts.total(), 0u);
  const auto one = ga_from("444098,\"Gestation period, 40 weeks\",high,40,40,Condition,SNOMED\n"
                           "444098,\"Gestation period, 40 weeks\",high,40,40,Condition,SNOMED\n");
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.counts.high, 1u);
}

TEST(GAConcepts, RejectsBadRows) {
  // Conflicting duplicate.
  EXPECT_THROW(ga_from("1,a,high,40,40,Condition,S\n1,a,high,39,39,Condition,S\n"), InputError);
  // Declared level disagrees with the range.
  EXPECT_THROW(ga_from("1,a,low,40,40,Condition,S\n"), InputError);
  // Range wider than a trimester.
  EXPECT_THROW(ga_from("1,a,low,1,20,Condition,S\n"), InputError);
  // Malformed id and width.
  EXPECT_THROW(ga_from("x,a,high,40,40,Condition,S\n"), InputError);
  EXPECT_THROW(ga_from("1,a,high,40,40,Condition\n"), InputError);
}

TEST(GAConcepts, ManifestDeviationFails) {
  const auto text = slurp(data_path("ga_concepts.csv"));
  // Drop the last data row: the declared partition no longer holds.
  auto trimmed = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(parse_ga_concepts(csv::Reader(trimmed, "trimmed.csv")), InputError);
  // A manifest that disagrees with the rows also fails.
  EXPECT_THROW(ga_from("#manifest total=2 high=1 mh=0 ml=0 low=0\n1,a,high,40,40,Condition,S\n"), InputError);
}

TEST(GAConcepts, ReserializationIsAFixedPoint) {
  const auto once = serialize(shipped().ga);
  const auto reparsed = parse_ga_concepts(csv::Reader(once, "once.csv"));
  EXPECT_EQ(serialize(reparsed), once);
  EXPECT_EQ(reparsed.counts.total(), 138u);
}

TEST(DODConcepts, ShippedFileHas105UniqueConcepts) {
  const auto& dod = shipped().dod;
  EXPECT_EQ(dod.size(), 105u);
  for (const auto& s : dod.all()) {
    EXPECT_EQ(s.domain_rank, *dod_domain_rank(s.domain));
  }
  const auto once = serialize(dod);
  EXPECT_EQ(serialize(parse_dod_concepts(csv::Reader(once, "once.csv"))), once);
}

TEST(DODConcepts, DedupAndProcedureRank) {
  const auto set = dod_from("2110316,Cesarean delivery only,Procedure,CPT4\n"
                            "2110316,Cesarean delivery only,Procedure,CPT4\n");
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.find(2110316)->domain_rank, 1);
}

TEST(DODConcepts, UnrankedDomainAndManifestMismatchFail) {
  EXPECT_THROW(dod_from("1,x,Measurement,LOINC\n"), InputError);
  EXPECT_THROW(dod_from("1,x,Drug,RxNorm\n"), InputError);
  EXPECT_THROW(dod_from("#manifest total=2\n1,x,Procedure,CPT4\n"), InputError);
  const auto text = slurp(data_path("dod_concepts.csv"));
  auto trimmed = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(parse_dod_concepts(csv::Reader(trimmed, "trimmed.csv")), InputError);
}

TEST(Phenotype, KeywordExamples) {
  const auto vocab = load_vocabulary(fixture("vocabulary.csv"));
  const auto hits = phenotype_search(vocab, PhenotypeQuery{});
  std::set<ConceptId> ids;
  for (const auto& h : hits) ids.insert(h.concept_id);
  EXPECT_TRUE(ids.count(4299535));   // "Third trimester pregnancy"
  EXPECT_TRUE(ids.count(3004410));   // "PREGNANCY test", case-insensitive
  EXPECT_FALSE(ids.count(320128));   // "Hypertensive disorder"
  EXPECT_FALSE(ids.count(45000001)); // Device domain filtered out
  EXPECT_FALSE(ids.count(45000002)); // non-standard
  EXPECT_FALSE(ids.count(45000003)); // invalid
  EXPECT_TRUE(std::is_sorted(hits.begin(), hits.end(),
                             [](const auto& a, const auto& b) { return a.concept_id < b.concept_id; }));

  PhenotypeQuery loose;
  loose.standard_only = false;
  loose.valid_only = false;
  EXPECT_EQ(phenotype_search(vocab, loose).size(), hits.size() + 2);
  PhenotypeQuery none;
  none.keywords.clear();
  EXPECT_THROW(phenotype_search(vocab, none), std::invalid_argument);
}

TEST(Phenotype, AddingKeywordsNeverShrinksTheResult) {
  const auto vocab = load_vocabulary(fixture("vocabulary.csv"));
  const std::vector<std::string> pool = {"trimester", "gestation", "pregnan", "birth", "cesarean", "zzz"};
  for (unsigned mask = 1; mask < (1u << pool.size()); ++mask) {
    PhenotypeQuery q;
    q.keywords.clear();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (mask & (1u << i)) q.keywords.push_back(pool[i]);
    }
    const auto base = phenotype_search(vocab, q);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (mask & (1u << i)) continue;
      auto wider = q;
      wider.keywords.push_back(pool[i]);
      const auto more = phenotype_search(vocab, wider);
      EXPECT_TRUE(std::includes(more.begin(), more.end(), base.begin(), base.end(),
                                [](const auto& a, const auto& b) { return a.concept_id < b.concept_id; }));
    }
  }
}

TEST(Phenotype, DuplicateVocabularyIdFails) {
  EXPECT_THROW(parse_vocabulary(csv::Reader("concept_id,name,domain,standard,valid\n1,a,Condition,true,true\n"
                                            "1,b,Condition,true,true\n",
                                            "v.csv")),
               InputError);
}
