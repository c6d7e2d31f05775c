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
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tedpc/analytics.hpp"
#include "tedpc/concepts.hpp"
#include "tedpc/dod_engine.hpp"
#include "tedpc/episodes.hpp"
#include "tedpc/error.hpp"
#include "tedpc/ga_engine.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

struct RunConfig {
  std::string persons;
  std::string events;
  std::string ga_concepts;
  std::string dod_concepts;
  std::string index_events;
  std::string out = ".";
  EngineConfig engine;
  MatchBounds bounds;
  CohortCriteria cohort;
  bool apply_cohort_filter = true;
  bool write_cohorts = false;
  int suppression_threshold = kDefaultSuppressionThreshold;
  Date cutoff = kDefaultPandemicCutoff;
  unsigned threads = 1;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (engine.window_days <= 0) fail("window_days must be positive");
    if (engine.conflict_threshold_days <= 0) fail("conflict_threshold_days must be positive");
    if (bounds.min_days <= 0 || bounds.max_days <= 0) fail("match bounds must be positive");
    if (bounds.min_days >= bounds.max_days) fail("match_min must be less than match_max");
    if (bounds.target_days <= 0) fail("match_target must be positive");
    if (suppression_threshold <= 0) fail("suppression_threshold must be positive");
    if (threads == 0) fail("threads must be positive");
    if (cohort.window_last < cohort.window_first) fail("cohort window ends before it starts");
    if (cohort.min_age <= 0 || cohort.min_age > cohort.max_age) fail("bad cohort age range");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"persons", c.persons},
          {"events", c.events},
          {"ga_concepts", c.ga_concepts},
          {"dod_concepts", c.dod_concepts},
          {"index_events", c.index_events},
          {"out", c.out},
          {"window_days", c.engine.window_days},
          {"conflict_threshold_days", c.engine.conflict_threshold_days},
          {"match_min", c.bounds.min_days},
          {"match_max", c.bounds.max_days},
          {"match_target", c.bounds.target_days},
          {"cohort_window", {c.cohort.window_first.to_string(), c.cohort.window_last.to_string()}},
          {"min_age", c.cohort.min_age},
          {"max_age", c.cohort.max_age},
          {"apply_cohort_filter", c.apply_cohort_filter},
          {"write_cohorts", c.write_cohorts},
          {"suppression_threshold", c.suppression_threshold},
          {"cutoff", c.cutoff.to_string()},
          {"threads", c.threads},
          {"seed", c.seed}};
}

inline void merge_json(RunConfig& c, const nlohmann::json& j, const std::string& source = "config") {
  auto date = [&](const nlohmann::json& v, const std::string& key) {
    const auto d = v.is_string() ? Date::parse(v.get<std::string>()) : std::nullopt;
    if (!d) throw ConfigError(source + ": `" + key + "` must be an ISO-8601 date");
    return *d;
  };
  if (!j.is_object()) throw ConfigError(source + ": expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "persons") c.persons = v.get<std::string>();
      else if (key == "events") c.events = v.get<std::string>();
      else if (key == "ga_concepts") c.ga_concepts = v.get<std::string>();
      else if (key == "dod_concepts") c.dod_concepts = v.get<std::string>();
      else if (key == "index_events") c.index_events = v.get<std::string>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "window_days") c.engine.window_days = v.get<int>();
      else if (key == "conflict_threshold_days") c.engine.conflict_threshold_days = v.get<int>();
      else if (key == "match_min") c.bounds.min_days = v.get<int>();
      else if (key == "match_max") c.bounds.max_days = v.get<int>();
      else if (key == "match_target") c.bounds.target_days = v.get<int>();
      else if (key == "cohort_window") {
        if (!v.is_array() || v.size() != 2) throw ConfigError(source + ": `cohort_window` must be [first, last]");
        c.cohort.window_first = date(v[0], key);
        c.cohort.window_last = date(v[1], key);
      } else if (key == "min_age") c.cohort.min_age = v.get<int>();
      else if (key == "max_age") c.cohort.max_age = v.get<int>();
      else if (key == "apply_cohort_filter") c.apply_cohort_filter = v.get<bool>();
      else if (key == "write_cohorts") c.write_cohorts = v.get<bool>();
      else if (key == "suppression_threshold") c.suppression_threshold = v.get<int>();
      else if (key == "cutoff") c.cutoff = date(v, key);
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError(source + ": unknown key `" + key + "`");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  const auto text = csv::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

struct InferenceResult {
  std::vector<GestationStart> ga_cohort;
  std::vector<DeliveryRecord> dod_cohort;
  std::vector<PregnancyEpisode> episodes;
  std::vector<GestationStart> unmatched_starts;
  std::vector<DeliveryRecord> unmatched_dods;
  std::size_t unranked_delivery_events = 0;
};

struct PersonInference {
  std::vector<GestationStart> starts;
  std::vector<DeliveryRecord> dods;
  MatchResult match;
  std::size_t unranked = 0;
};

inline PersonInference infer_person(std::span<const ClinicalEvent> events, const Registries& registries,
                                    const EngineConfig& engine, const MatchBounds& bounds) {
  PersonInference r;
  const auto candidates = ga_candidates(events, registries.ga);
  r.starts = infer_gestation_starts(candidates, engine);
  const auto deliveries = delivery_events(events, registries.dod);
  r.dods = infer_delivery_dates(deliveries, engine, &r.unranked);
  r.match = match_episodes(r.starts, r.dods, bounds);
  return r;
}

// Runs both engines and matching for every person. Persons are split into
// contiguous blocks across `threads` workers; results are merged in person_id
// order, so the output does not depend on the thread count.
inline InferenceResult infer_episodes(const EventTable& events, const Registries& registries,
                                      const EngineConfig& engine = {}, const MatchBounds& bounds = {},
                                      unsigned threads = 1) {
  const auto persons = events.persons();
  std::vector<PersonInference> per_person(persons.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      per_person[i] = infer_person(events.events_of(persons[i]), registries, engine, bounds);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min<std::size_t>(threads, persons.size()));
  if (n_threads == 1) {
    work(0, persons.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (persons.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * block;
      const std::size_t end = std::min(persons.size(), begin + block);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  InferenceResult out;
  for (auto& r : per_person) {
    out.ga_cohort.insert(out.ga_cohort.end(), r.starts.begin(), r.starts.end());
    out.dod_cohort.insert(out.dod_cohort.end(), r.dods.begin(), r.dods.end());
    out.episodes.insert(out.episodes.end(), r.match.episodes.begin(), r.match.episodes.end());
    out.unmatched_starts.insert(out.unmatched_starts.end(), r.match.unmatched_starts.begin(),
                                r.match.unmatched_starts.end());
    out.unmatched_dods.insert(out.unmatched_dods.end(), r.match.unmatched_dods.begin(),
                              r.match.unmatched_dods.end());
    out.unranked_delivery_events += r.unranked;
  }
  return out;
}

inline std::string write_ga_cohort(std::span<const GestationStart> starts) {
  csv::Writer w;
  w.row({"person_id", "start_date", "anchor_concept_id", "anchor_event_date", "accuracy", "cluster_size",
         "conflict_flag"});
  for (const auto& s : starts) {
    w.row({std::to_string(s.person_id), s.start_date.to_string(), std::to_string(s.anchor.event.concept_id),
           s.anchor.event.event_date.to_string(), to_string(s.accuracy), std::to_string(s.cluster_size),
           s.conflict_flag ? "true" : "false"});
  }
  return w.str();
}

inline std::string write_dod_cohort(std::span<const DeliveryRecord> dods) {
  csv::Writer w;
  w.row({"person_id", "dod", "anchor_concept_id", "domain_rank", "cluster_size"});
  for (const auto& d : dods) {
    w.row({std::to_string(d.person_id), d.dod.to_string(), std::to_string(d.anchor_concept_id),
           std::to_string(d.domain_rank), std::to_string(d.cluster_size)});
  }
  return w.str();
}

struct Diagnostics {
  csv::Writer writer;
  Diagnostics() { writer.row({"kind", "person_id", "date", "concept_id", "detail"}); }

  void add(std::string_view kind, PersonId pid, std::optional<Date> date, std::optional<ConceptId> concept_id,
           const std::string& detail) {
    writer.row({kind, std::to_string(pid), date ? date->to_string() : std::string(),
                concept_id ? std::to_string(*concept_id) : std::string(), detail});
  }
};

inline Diagnostics build_diagnostics(const EventTable& events, const InferenceResult& inference,
                                     std::span<const Exclusion> exclusions) {
  Diagnostics d;
  for (const auto& q : events.quarantine) {
    d.add("quarantined_event", q.event.person_id, q.event.event_date, q.event.concept_id,
          "line " + std::to_string(q.line) + ": " + q.reason);
  }
  for (const auto& w : events.warnings) d.add("domain_mismatch", 0, std::nullopt, std::nullopt, "line " + std::to_string(w.line) + ": " + w.message);
  for (const auto& s : inference.unmatched_starts) {
    d.add("unmatched_start", s.person_id, s.start_date, s.anchor.event.concept_id,
          "no delivery within match bounds");
  }
  for (const auto& r : inference.unmatched_dods) {
    d.add("unmatched_dod", r.person_id, r.dod, r.anchor_concept_id, "no start within match bounds");
  }
  for (const auto& x : exclusions) {
    d.add("cohort_exclusion", x.episode.person_id, x.episode.dod, std::nullopt, x.reason);
  }
  if (inference.unranked_delivery_events) {
    d.add("unranked_delivery_domain", 0, std::nullopt, std::nullopt,
          std::to_string(inference.unranked_delivery_events) + " delivery events outside Procedure/Condition/Observation ranked 3");
  }
  return d;
}

}  // namespace tedpc
