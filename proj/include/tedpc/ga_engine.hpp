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

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <span>
#include <vector>

#include "tedpc/concepts.hpp"
#include "tedpc/date.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

// Constants shared by both estimation engines.
struct EngineConfig {
  // Candidates within this many days (inclusive) of an anchor join its cluster.
  int window_days = 270;
  // Absorbed High candidates further than this from the anchor raise conflict_flag.
  int conflict_threshold_days = 14;
};

// Gestational age in days implied by a concept: the median of its week range,
// 7 * (low + high) / 2 rounded half up.
inline int ga_days(const GAConceptSpec& spec) {
  return (7 * (spec.week_low + spec.week_high) + 1) / 2;
}

inline Date start_date_from_event(Date event_date, const GAConceptSpec& spec) {
  return event_date - ga_days(spec);
}

struct GACandidate {
  ClinicalEvent event;
  const GAConceptSpec* spec = nullptr;  // non-owning; points into the registry
  Date start_date;
  AccuracyLevel accuracy = AccuracyLevel::Low;
};

inline GACandidate make_candidate(const ClinicalEvent& event, const GAConceptSpec& spec) {
  return GACandidate{event, &spec, start_date_from_event(event.event_date, spec), spec.accuracy};
}

// GA-bearing events of one person, in the input (canonical) order.
inline std::vector<GACandidate> ga_candidates(std::span<const ClinicalEvent> events,
                                              const GAConceptSet& registry) {
  std::vector<GACandidate> out;
  for (const auto& e : events) {
    if (const auto* spec = registry.find(e.concept_id)) out.push_back(make_candidate(e, *spec));
  }
  return out;
}

struct GestationStart {
  PersonId person_id = 0;
  Date start_date;
  GACandidate anchor;
  AccuracyLevel accuracy = AccuracyLevel::Low;
  bool conflict_flag = false;
  std::size_t cluster_size = 0;
};

// Repeatedly picks the best remaining candidate (accuracy rank, then earliest
// event date, then lowest concept id) as an anchor and absorbs every remaining
// candidate whose start date lies within the window of the anchor's. Output is
// ordered by start date.
inline std::vector<GestationStart> infer_gestation_starts(std::span<const GACandidate> candidates,
                                                          const EngineConfig& config = {}) {
  const std::size_t n = candidates.size();
  std::vector<GestationStart> out;
  if (n == 0) return out;

  std::vector<std::size_t> priority(n);
  std::iota(priority.begin(), priority.end(), 0);
  std::stable_sort(priority.begin(), priority.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = candidates[a];
    const auto& y = candidates[b];
    if (x.accuracy != y.accuracy) return rank(x.accuracy) < rank(y.accuracy);
    if (x.event.event_date != y.event.event_date) return x.event.event_date < y.event.event_date;
    return x.event.concept_id < y.event.concept_id;
  });

  std::vector<std::size_t> by_start(n);
  std::iota(by_start.begin(), by_start.end(), 0);
  std::stable_sort(by_start.begin(), by_start.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].start_date < candidates[b].start_date;
  });

  std::vector<bool> alive(n, true);
  for (const std::size_t idx : priority) {
    if (!alive[idx]) continue;
    const auto& anchor = candidates[idx];
    GestationStart gs;
    gs.person_id = anchor.event.person_id;
    gs.start_date = anchor.start_date;
    gs.anchor = anchor;
    gs.accuracy = anchor.accuracy;

    const Date lo = anchor.start_date - config.window_days;
    const Date hi = anchor.start_date + config.window_days;
    auto first = std::lower_bound(by_start.begin(), by_start.end(), lo,
                                  [&](std::size_t i, Date d) { return candidates[i].start_date < d; });
    for (auto it = first; it != by_start.end() && candidates[*it].start_date <= hi; ++it) {
      if (!alive[*it]) continue;
      alive[*it] = false;
      ++gs.cluster_size;
      const auto& c = candidates[*it];
      if (*it != idx && c.accuracy == AccuracyLevel::High &&
          std::abs(c.start_date - anchor.start_date) > config.conflict_threshold_days) {
        gs.conflict_flag = true;
      }
    }
    out.push_back(std::move(gs));
  }
  std::sort(out.begin(), out.end(), [](const GestationStart& a, const GestationStart& b) {
    return a.start_date < b.start_date;
  });
  return out;
}

}  // namespace tedpc
