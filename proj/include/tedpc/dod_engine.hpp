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
#include "tedpc/ga_engine.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

struct DeliveryRecord {
  PersonId person_id = 0;
  Date dod;
  ConceptId anchor_concept_id = 0;
  int domain_rank = 3;
  std::size_t cluster_size = 0;
};

// Procedure 1, Condition 2, Observation 3. Other domains are ranked 3 and
// reported through `unranked` when given.
inline int delivery_rank(Domain d, bool* unranked = nullptr) {
  if (const auto r = dod_domain_rank(d)) return *r;
  if (unranked) *unranked = true;
  return 3;
}

// Delivery-indicating events of one person, in the input order.
inline std::vector<ClinicalEvent> delivery_events(std::span<const ClinicalEvent> events,
                                                  const DODConceptSet& registry) {
  std::vector<ClinicalEvent> out;
  for (const auto& e : events) {
    if (registry.contains(e.concept_id)) out.push_back(e);
  }
  return out;
}

// Repeatedly picks the best remaining event (domain rank, then latest date,
// then lowest concept id) as the delivery date and removes every remaining
// event dated within the window of it. Output is ordered latest first.
// `unranked_events`, when given, receives the count of events whose domain
// has no delivery rank.
inline std::vector<DeliveryRecord> infer_delivery_dates(std::span<const ClinicalEvent> events,
                                                        const EngineConfig& config = {},
                                                        std::size_t* unranked_events = nullptr) {
  const std::size_t n = events.size();
  std::vector<DeliveryRecord> out;
  if (n == 0) return out;

  std::vector<int> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool unranked = false;
    ranks[i] = delivery_rank(events[i].domain, &unranked);
    if (unranked && unranked_events) ++*unranked_events;
  }

  std::vector<std::size_t> priority(n);
  std::iota(priority.begin(), priority.end(), 0);
  std::stable_sort(priority.begin(), priority.end(), [&](std::size_t a, std::size_t b) {
    if (ranks[a] != ranks[b]) return ranks[a] < ranks[b];
    if (events[a].event_date != events[b].event_date) return events[a].event_date > events[b].event_date;
    return events[a].concept_id < events[b].concept_id;
  });

  std::vector<std::size_t> by_date(n);
  std::iota(by_date.begin(), by_date.end(), 0);
  std::stable_sort(by_date.begin(), by_date.end(), [&](std::size_t a, std::size_t b) {
    return events[a].event_date < events[b].event_date;
  });

  std::vector<bool> alive(n, true);
  for (const std::size_t idx : priority) {
    if (!alive[idx]) continue;
    const auto& anchor = events[idx];
    DeliveryRecord rec;
    rec.person_id = anchor.person_id;
    rec.dod = anchor.event_date;
    rec.anchor_concept_id = anchor.concept_id;
    rec.domain_rank = ranks[idx];

    const Date lo = anchor.event_date - config.window_days;
    const Date hi = anchor.event_date + config.window_days;
    auto first = std::lower_bound(by_date.begin(), by_date.end(), lo,
                                  [&](std::size_t i, Date d) { return events[i].event_date < d; });
    for (auto it = first; it != by_date.end() && events[*it].event_date <= hi; ++it) {
      if (!alive[*it]) continue;
      alive[*it] = false;
      ++rec.cluster_size;
    }
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(),
            [](const DeliveryRecord& a, const DeliveryRecord& b) { return a.dod > b.dod; });
  return out;
}

}  // namespace tedpc
