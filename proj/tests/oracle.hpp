// Straightforward reference implementations used to cross-check the engines.
// Each one follows the selection/removal loop literally, with linear scans and
// no indexing, so it shares no code paths with the library versions.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <vector>

#include "tedpc/tedpc.hpp"

namespace tedpc::oracle {

struct GAResult {
  Date start;
  ConceptId anchor_concept;
  Date anchor_event_date;
  int accuracy_rank;
  bool conflict;
  std::size_t cluster_size;
  bool operator==(const GAResult&) const = default;
};

struct DODResult {
  Date dod;
  ConceptId anchor_concept;
  int rank;
  std::size_t cluster_size;
  bool operator==(const DODResult&) const = default;
};

inline std::vector<GAResult> ga(std::vector<GACandidate> remaining, int window = 270, int conflict_days = 14) {
  std::vector<GAResult> out;
  while (!remaining.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const auto& a = remaining[i];
      const auto& b = remaining[best];
      const int ra = rank(a.accuracy), rb = rank(b.accuracy);
      if (ra < rb || (ra == rb && a.event.event_date < b.event.event_date) ||
          (ra == rb && a.event.event_date == b.event.event_date && a.event.concept_id < b.event.concept_id)) {
        best = i;
      }
    }
    const GACandidate anchor = remaining[best];
    GAResult r{anchor.start_date, anchor.event.concept_id, anchor.event.event_date, rank(anchor.accuracy), false, 0};
    std::vector<GACandidate> rest;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const int delta = std::abs(remaining[i].start_date - anchor.start_date);
      if (delta <= window) {
        ++r.cluster_size;
        if (i != best && remaining[i].accuracy == AccuracyLevel::High && delta > conflict_days) r.conflict = true;
      } else {
        rest.push_back(remaining[i]);
      }
    }
    out.push_back(r);
    remaining = std::move(rest);
  }
  std::sort(out.begin(), out.end(), [](const GAResult& a, const GAResult& b) { return a.start < b.start; });
  return out;
}

inline int dod_rank(Domain d) {
  if (d == Domain::Procedure) return 1;
  if (d == Domain::Condition) return 2;
  return 3;
}

inline std::vector<DODResult> dod(std::vector<ClinicalEvent> remaining, int window = 270) {
  std::vector<DODResult> out;
  while (!remaining.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const auto& a = remaining[i];
      const auto& b = remaining[best];
      const int ra = dod_rank(a.domain), rb = dod_rank(b.domain);
      if (ra < rb || (ra == rb && a.event_date > b.event_date) ||
          (ra == rb && a.event_date == b.event_date && a.concept_id < b.concept_id)) {
        best = i;
      }
    }
    const ClinicalEvent anchor = remaining[best];
    DODResult r{anchor.event_date, anchor.concept_id, dod_rank(anchor.domain), 0};
    std::vector<ClinicalEvent> rest;
    for (const auto& e : remaining) {
      if (std::abs(e.event_date - anchor.event_date) <= window) {
        ++r.cluster_size;
      } else {
        rest.push_back(e);
      }
    }
    out.push_back(r);
    remaining = std::move(rest);
  }
  std::sort(out.begin(), out.end(), [](const DODResult& a, const DODResult& b) { return a.dod > b.dod; });
  return out;
}

// Matching reference: deliveries latest first; each takes the unused start
// with in-bounds gestation closest to the target, earlier start on ties.
inline std::vector<std::pair<Date, Date>> match(std::vector<Date> starts, std::vector<Date> dods,
                                                const MatchBounds& b = {}) {
  std::sort(dods.rbegin(), dods.rend());
  std::vector<std::pair<Date, Date>> out;
  for (const Date d : dods) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const int g = d - starts[i];
      if (g < b.min_days || g > b.max_days) continue;
      if (!pick) {
        pick = i;
        continue;
      }
      const int cur = std::abs(g - b.target_days);
      const int prev = std::abs((d - starts[*pick]) - b.target_days);
      if (cur < prev || (cur == prev && starts[i] < starts[*pick])) pick = i;
    }
    if (pick) {
      out.emplace_back(starts[*pick], d);
      starts.erase(starts.begin() + static_cast<std::ptrdiff_t>(*pick));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

}  // namespace tedpc::oracle

namespace tedpc::oracle {

// Random per-person instances dense enough that windows overlap and ties on
// accuracy, date and concept id occur often.
inline std::vector<GACandidate> random_ga_instance(synth::Rng& rng, const GAConceptSet& registry) {
  const auto all = registry.all();
  const int n = rng.uniform_int(0, 10);
  const Date base = *Date::from_ymd(2019, 1, 1);
  std::vector<GACandidate> out;
  for (int i = 0; i < n; ++i) {
    // Half the draws come from a handful of concepts to force id ties.
    const std::size_t pick = rng.bernoulli(0.5) ? static_cast<std::size_t>(rng.uniform_int(0, 5))
                                                : static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(all.size()) - 1));
    const auto& spec = all[pick];
    const Date when = base + rng.uniform_int(0, rng.bernoulli(0.3) ? 30 : 1000);
    const Domain dom = rng.bernoulli(0.8) ? spec.domain : Domain::Observation;
    out.push_back(make_candidate(ClinicalEvent{1, spec.concept_id, dom, when}, spec));
  }
  return out;
}

inline std::vector<ClinicalEvent> random_dod_instance(synth::Rng& rng) {
  static const Domain domains[] = {Domain::Procedure, Domain::Condition, Domain::Observation, Domain::Measurement};
  const int n = rng.uniform_int(0, 10);
  const Date base = *Date::from_ymd(2019, 1, 1);
  std::vector<ClinicalEvent> out;
  for (int i = 0; i < n; ++i) {
    const Date when = base + rng.uniform_int(0, rng.bernoulli(0.3) ? 20 : 1200);
    out.push_back(ClinicalEvent{1, 100 + rng.uniform_int(0, 4), domains[rng.uniform_int(0, 3)], when});
  }
  return out;
}

inline std::vector<GAResult> project(std::span<const GestationStart> starts) {
  std::vector<GAResult> out;
  for (const auto& s : starts) {
    out.push_back({s.start_date, s.anchor.event.concept_id, s.anchor.event.event_date, rank(s.accuracy),
                   s.conflict_flag, s.cluster_size});
  }
  return out;
}

inline std::vector<DODResult> project(std::span<const DeliveryRecord> dods) {
  std::vector<DODResult> out;
  for (const auto& d : dods) out.push_back({d.dod, d.anchor_concept_id, d.domain_rank, d.cluster_size});
  return out;
}

}  // namespace tedpc::oracle
