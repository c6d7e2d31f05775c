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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tedpc/csv.hpp"
#include "tedpc/date.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

// One known gestation of a synthetic person.
struct TruthEpisode {
  PersonId person_id = 0;
  int episode_index = 0;
  Date true_start;
  Date true_dod;
  std::optional<int> index_event_week;  // earliest in-scope index event
  // Bookkeeping only (not serialized): which configured comorbidities were
  // emitted for this gestation, by position in the generator config.
  std::vector<bool> comorbidities;
};

inline std::string write_truth(std::span<const TruthEpisode> truth) {
  csv::Writer w;
  w.row({"person_id", "episode_index", "true_start", "true_dod", "index_event_week"});
  for (const auto& t : truth) {
    w.row({std::to_string(t.person_id), std::to_string(t.episode_index), t.true_start.to_string(),
           t.true_dod.to_string(), t.index_event_week ? std::to_string(*t.index_event_week) : ""});
  }
  return w.str();
}

inline std::vector<TruthEpisode> parse_truth(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header({"person_id", "episode_index", "true_start", "true_dod", "index_event_week"});
  std::vector<TruthEpisode> out;
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 5, source);
    TruthEpisode t;
    const auto pid = csv::parse_int<PersonId>(row.fields[0]);
    const auto idx = csv::parse_int<int>(row.fields[1]);
    const auto start = Date::parse(row.fields[2]);
    const auto dod = Date::parse(row.fields[3]);
    if (!pid || !idx || !start || !dod) throw InputError(row_message(source, row.line, "malformed truth row"));
    t.person_id = *pid;
    t.episode_index = *idx;
    t.true_start = *start;
    t.true_dod = *dod;
    if (!row.fields[4].empty()) {
      const auto week = csv::parse_int<int>(row.fields[4]);
      if (!week) throw InputError(row_message(source, row.line, "bad index_event_week"));
      t.index_event_week = *week;
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<TruthEpisode> load_truth(const std::string& path) {
  return parse_truth(csv::Reader::open(path));
}

}  // namespace tedpc
