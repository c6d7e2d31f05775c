/*
 * Copyright 2026 The tedpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <algorithm>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tedpc/csv.hpp"
#include "tedpc/dod_engine.hpp"
#include "tedpc/ga_engine.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

// Plausible gestation lengths for pairing a start with a delivery.
struct MatchBounds {
  int min_days = 140;
  int max_days = 308;
  int target_days = 280;
};

inline constexpr int kShortGestationDays = 150;
inline constexpr int kLongGestationDays = 300;

enum class ExtremeFlag : std::uint8_t { None, Short, Long };

inline std::string_view to_string(ExtremeFlag f) {
  switch (f) {
    case ExtremeFlag::None: return "none";
    case ExtremeFlag::Short: return "short";
    case ExtremeFlag::Long: return "long";
  }
  return "?";
}

inline std::optional<ExtremeFlag> parse_extreme_flag(std::string_view s) {
  if (s == "none") return ExtremeFlag::None;
  if (s == "short") return ExtremeFlag::Short;
  if (s == "long") return ExtremeFlag::Long;
  return std::nullopt;
}

inline ExtremeFlag extreme_flag_of(int gestation_days) {
  if (gestation_days < kShortGestationDays) return ExtremeFlag::Short;
  if (gestation_days > kLongGestationDays) return ExtremeFlag::Long;
  return ExtremeFlag::None;
}

struct PregnancyEpisode {
  PersonId person_id = 0;
  int episode_index = 0;  // 1-based, ascending dod within a person
  Date start_date;
  Date dod;
  int gestation_days = 0;
  AccuracyLevel ga_accuracy = AccuracyLevel::Low;
  int dod_domain_rank = 3;
  ExtremeFlag extreme_flag = ExtremeFlag::None;
  bool conflict_flag = false;
  // Provenance; not part of episodes.csv.
  ConceptId ga_anchor_concept_id = 0;
  ConceptId dod_anchor_concept_id = 0;
};

struct MatchResult {
  std::vector<PregnancyEpisode> episodes;
  std::vector<GestationStart> unmatched_starts;
  std::vector<DeliveryRecord> unmatched_dods;
};

// Pairs deliveries (latest first) with the unused start whose gestation length
// falls inside the bounds and is closest to the target; ties go to the earlier
// start. Everything left over is reported, nothing is dropped.
inline MatchResult match_episodes(std::span<const GestationStart> starts,
                                  std::span<const DeliveryRecord> dods,
                                  const MatchBounds& bounds = {}) {
  MatchResult result;
  std::vector<std::size_t> dod_order(dods.size());
  for (std::size_t i = 0; i < dods.size(); ++i) dod_order[i] = i;
  std::stable_sort(dod_order.begin(), dod_order.end(),
                   [&](std::size_t a, std::size_t b) { return dods[a].dod > dods[b].dod; });

  std::vector<bool> used(starts.size(), false);
  for (const std::size_t d : dod_order) {
    const auto& rec = dods[d];
    std::optional<std::size_t> best;
    int best_distance = 0;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      if (used[s]) continue;
      const int days = rec.dod - starts[s].start_date;
      if (days < bounds.min_days || days > bounds.max_days) continue;
      const int distance = std::abs(days - bounds.target_days);
      if (!best || distance < best_distance ||
          (distance == best_distance && starts[s].start_date < starts[*best].start_date)) {
        best = s;
        best_distance = distance;
      }
    }
    if (!best) {
      result.unmatched_dods.push_back(rec);
      continue;
    }
    used[*best] = true;
    const auto& gs = starts[*best];
    PregnancyEpisode ep;
    ep.person_id = rec.person_id;
    ep.start_date = gs.start_date;
    ep.dod = rec.dod;
    ep.gestation_days = rec.dod - gs.start_date;
    ep.ga_accuracy = gs.accuracy;
    ep.dod_domain_rank = rec.domain_rank;
    ep.extreme_flag = extreme_flag_of(ep.gestation_days);
    ep.conflict_flag = gs.conflict_flag;
    ep.ga_anchor_concept_id = gs.anchor.event.concept_id;
    ep.dod_anchor_concept_id = rec.anchor_concept_id;
    result.episodes.push_back(ep);
  }
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (!used[s]) result.unmatched_starts.push_back(starts[s]);
  }
  std::sort(result.episodes.begin(), result.episodes.end(),
            [](const PregnancyEpisode& a, const PregnancyEpisode& b) { return a.dod < b.dod; });
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    result.episodes[i].episode_index = static_cast<int>(i + 1);
  }
  return result;
}

struct CohortCriteria {
  Date window_first = *Date::from_ymd(2018, 6, 1);
  Date window_last = *Date::from_ymd(2021, 5, 31);
  int min_age = 15;
  int max_age = 49;
};

struct Exclusion {
  PregnancyEpisode episode;
  std::string reason;
};

struct FilterResult {
  std::vector<PregnancyEpisode> retained;
  std::vector<Exclusion> excluded;
};

// Keeps episodes whose dod lies in the window (inclusive) and whose mother's
// age at dod, in whole years, is within [min_age, max_age].
inline FilterResult apply_cohort_filters(std::span<const PregnancyEpisode> episodes,
                                         const PersonTable& persons,
                                         const CohortCriteria& criteria = {}) {
  FilterResult out;
  for (const auto& ep : episodes) {
    const auto* person = persons.find(ep.person_id);
    if (!person) {
      out.excluded.push_back({ep, "person not in persons table"});
      continue;
    }
    if (ep.dod < criteria.window_first || ep.dod > criteria.window_last) {
      out.excluded.push_back({ep, "dod outside cohort window"});
      continue;
    }
    const int age = whole_years_between(person->birth_date, ep.dod);
    if (age < criteria.min_age || age > criteria.max_age) {
      out.excluded.push_back({ep, "age " + std::to_string(age) + " at dod outside [" +
                                      std::to_string(criteria.min_age) + ", " +
                                      std::to_string(criteria.max_age) + "]"});
      continue;
    }
    out.retained.push_back(ep);
  }
  return out;
}

enum class Trimester : std::uint8_t { Pre, First, Second, Third, PostDelivery };

inline std::string_view to_string(Trimester t) {
  switch (t) {
    case Trimester::Pre: return "pre";
    case Trimester::First: return "first";
    case Trimester::Second: return "second";
    case Trimester::Third: return "third";
    case Trimester::PostDelivery: return "post_delivery";
  }
  return "?";
}

// Week 0 is pre-pregnancy; 1-13 first, 14-27 second, 28 and later third.
inline Trimester trimester_of(int week) {
  if (week <= 0) return Trimester::Pre;
  if (week <= 13) return Trimester::First;
  if (week <= 27) return Trimester::Second;
  return Trimester::Third;
}

struct GestationalTiming {
  int week = 0;
  Trimester trimester = Trimester::Pre;

  bool operator==(const GestationalTiming&) const = default;
};

// Day 0 of the episode falls in week 1.
inline GestationalTiming gestational_week_of(Date event_date, const PregnancyEpisode& episode) {
  if (event_date < episode.start_date) return {0, Trimester::Pre};
  const int week = (event_date - episode.start_date) / 7 + 1;
  if (event_date > episode.dod) return {week, Trimester::PostDelivery};
  return {week, trimester_of(week)};
}

inline constexpr std::array<std::string_view, 9> kEpisodeHeader = {
    "person_id",       "episode_index", "start_date",   "dod",          "gestation_days",
    "ga_accuracy",     "dod_domain_rank", "extreme_flag", "conflict_flag"};

inline std::string write_episodes(std::span<const PregnancyEpisode> episodes) {
  csv::Writer w;
  w.row(kEpisodeHeader);
  for (const auto& e : episodes) {
    w.row({std::to_string(e.person_id), std::to_string(e.episode_index), e.start_date.to_string(),
           e.dod.to_string(), std::to_string(e.gestation_days), to_string(e.ga_accuracy),
           std::to_string(e.dod_domain_rank), to_string(e.extreme_flag),
           e.conflict_flag ? "true" : "false"});
  }
  return w.str();
}

inline std::vector<PregnancyEpisode> parse_episodes(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header(kEpisodeHeader);
  std::vector<PregnancyEpisode> out;
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 9, source);
    PregnancyEpisode e;
    const auto pid = csv::parse_int<PersonId>(row.fields[0]);
    const auto idx = csv::parse_int<int>(row.fields[1]);
    const auto start = Date::parse(row.fields[2]);
    const auto dod = Date::parse(row.fields[3]);
    const auto days = csv::parse_int<int>(row.fields[4]);
    const auto acc = parse_accuracy(row.fields[5]);
    const auto rank = csv::parse_int<int>(row.fields[6]);
    const auto flag = parse_extreme_flag(row.fields[7]);
    const auto conflict = csv::parse_bool(row.fields[8]);
    if (!pid || !idx || !start || !dod || !days || !acc || !rank || !flag || !conflict) {
      throw InputError(row_message(source, row.line, "malformed episode row"));
    }
    if (*dod - *start != *days) {
      throw InputError(row_message(source, row.line, "gestation_days does not equal dod - start_date"));
    }
    e.person_id = *pid;
    e.episode_index = *idx;
    e.start_date = *start;
    e.dod = *dod;
    e.gestation_days = *days;
    e.ga_accuracy = *acc;
    e.dod_domain_rank = *rank;
    e.extreme_flag = *flag;
    e.conflict_flag = *conflict;
    out.push_back(e);
  }
  return out;
}

inline std::vector<PregnancyEpisode> load_episodes(const std::string& path) {
  return parse_episodes(csv::Reader::open(path));
}

}  // namespace tedpc
