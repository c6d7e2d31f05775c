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
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tedpc/concepts.hpp"
#include "tedpc/csv.hpp"
#include "tedpc/date.hpp"
#include "tedpc/error.hpp"

namespace tedpc {

using PersonId = std::int64_t;

struct Person {
  PersonId person_id = 0;
  Date birth_date;
  std::string sex;
  std::string race;
  std::string ethnicity;

  bool operator==(const Person&) const = default;
};

struct ClinicalEvent {
  PersonId person_id = 0;
  ConceptId concept_id = 0;
  Domain domain = Domain::Condition;
  Date event_date;

  bool operator==(const ClinicalEvent&) const = default;
};

inline const Date kEarliestEventDate = *Date::from_ymd(1900, 1, 1);
inline const Date kLatestEventDate = *Date::from_ymd(2100, 12, 31);

// Tie-break order among same-date, same-concept events.
inline int domain_sort_key(Domain d) {
  switch (d) {
    case Domain::Procedure: return 1;
    case Domain::Condition: return 2;
    case Domain::Observation: return 3;
    case Domain::Measurement: return 4;
    case Domain::Drug: return 5;
  }
  return 6;
}

// Canonical per-person order: (event_date, concept_id, domain rank).
inline bool canonical_less(const ClinicalEvent& a, const ClinicalEvent& b) {
  if (a.person_id != b.person_id) return a.person_id < b.person_id;
  if (a.event_date != b.event_date) return a.event_date < b.event_date;
  if (a.concept_id != b.concept_id) return a.concept_id < b.concept_id;
  return domain_sort_key(a.domain) < domain_sort_key(b.domain);
}

class PersonTable {
 public:
  PersonTable() = default;
  explicit PersonTable(std::vector<Person> persons) : persons_(std::move(persons)) {
    std::sort(persons_.begin(), persons_.end(),
              [](const Person& a, const Person& b) { return a.person_id < b.person_id; });
  }

  const Person* find(PersonId id) const {
    auto it = std::lower_bound(persons_.begin(), persons_.end(), id,
                               [](const Person& p, PersonId v) { return p.person_id < v; });
    return (it != persons_.end() && it->person_id == id) ? &*it : nullptr;
  }
  std::span<const Person> all() const { return persons_; }
  std::size_t size() const { return persons_.size(); }

 private:
  std::vector<Person> persons_;
};

inline PersonTable parse_persons(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header({"person_id", "birth_date", "sex", "race", "ethnicity"});
  const Date today = Date::today();
  std::vector<Person> out;
  std::unordered_map<PersonId, std::pair<std::size_t, std::size_t>> seen;  // id -> (index, line)
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 5, source);
    Person p;
    const auto id = csv::parse_int<PersonId>(row.fields[0]);
    if (!id) throw InputError(row_message(source, row.line, "bad person_id `" + row.fields[0] + "`"));
    p.person_id = *id;
    const auto birth = Date::parse(row.fields[1]);
    if (!birth) throw InputError(row_message(source, row.line, "unparseable birth_date `" + row.fields[1] + "`"));
    if (*birth > today) throw InputError(row_message(source, row.line, "birth_date in the future"));
    p.birth_date = *birth;
    p.sex = row.fields[2];
    p.race = row.fields[3];
    p.ethnicity = row.fields[4];
    auto [it, inserted] = seen.try_emplace(p.person_id, out.size(), row.line);
    if (inserted) {
      out.push_back(std::move(p));
    } else if (!(out[it->second.first] == p)) {
      throw InputError(row_message(source, row.line,
                                   "person_id " + std::to_string(p.person_id) +
                                       " duplicates row " + std::to_string(it->second.second) +
                                       " with conflicting fields"));
    }
  }
  return PersonTable(std::move(out));
}

inline PersonTable load_persons(const std::string& path) {
  return parse_persons(csv::Reader::open(path));
}

struct QuarantinedEvent {
  std::size_t line = 0;
  ClinicalEvent event;
  std::string reason;
};

struct LoadWarning {
  std::size_t line = 0;
  std::string message;
};

// Events grouped by person in canonical order. Immutable once built.
class EventTable {
 public:
  struct Slice {
    PersonId person_id;
    std::size_t begin;
    std::size_t end;
  };

  EventTable() = default;

  // Sorts `events` canonically and builds the person index.
  explicit EventTable(std::vector<ClinicalEvent> events) : events_(std::move(events)) {
    std::sort(events_.begin(), events_.end(), canonical_less);
    for (std::size_t i = 0; i < events_.size();) {
      std::size_t j = i;
      while (j < events_.size() && events_[j].person_id == events_[i].person_id) ++j;
      slices_.push_back({events_[i].person_id, i, j});
      i = j;
    }
  }

  std::span<const Slice> persons() const { return slices_; }
  std::span<const ClinicalEvent> events_of(const Slice& s) const {
    return std::span<const ClinicalEvent>(events_).subspan(s.begin, s.end - s.begin);
  }
  std::span<const ClinicalEvent> events_of(PersonId id) const {
    auto it = std::lower_bound(slices_.begin(), slices_.end(), id,
                               [](const Slice& s, PersonId v) { return s.person_id < v; });
    if (it == slices_.end() || it->person_id != id) return {};
    return events_of(*it);
  }
  std::span<const ClinicalEvent> all() const { return events_; }
  std::size_t size() const { return events_.size(); }

  std::vector<QuarantinedEvent> quarantine;
  std::vector<LoadWarning> warnings;
  std::size_t input_rows = 0;

 private:
  std::vector<ClinicalEvent> events_;
  std::vector<Slice> slices_;
};

inline ClinicalEvent parse_event_row(const csv::Row& row, const std::string& source) {
  detail::require_width(row, 4, source);
  ClinicalEvent e;
  const auto pid = csv::parse_int<PersonId>(row.fields[0]);
  if (!pid) throw InputError(row_message(source, row.line, "bad person_id `" + row.fields[0] + "`"));
  e.person_id = *pid;
  e.concept_id = detail::require_id(row, 1, source);
  const auto domain = parse_domain(row.fields[2]);
  if (!domain) throw InputError(row_message(source, row.line, "unknown domain `" + row.fields[2] + "`"));
  e.domain = *domain;
  if (row.fields[3].empty()) throw InputError(row_message(source, row.line, "missing event_date"));
  const auto date = Date::parse(row.fields[3]);
  if (!date) throw InputError(row_message(source, row.line, "unparseable event_date `" + row.fields[3] + "`"));
  if (*date < kEarliestEventDate || *date > kLatestEventDate) {
    throw InputError(row_message(source, row.line, "event_date " + row.fields[3] + " outside [1900-01-01, 2100-12-31]"));
  }
  e.event_date = *date;
  return e;
}

// Events for persons absent from `persons` go to quarantine. When `registries`
// is given, an event whose domain disagrees with its registry concept's domain
// yields a warning.
inline EventTable parse_events(csv::Reader reader, const PersonTable& persons,
                               const Registries* registries = nullptr) {
  const auto& source = reader.name();
  reader.expect_header({"person_id", "concept_id", "domain", "event_date"});
  std::vector<ClinicalEvent> kept;
  std::vector<QuarantinedEvent> quarantine;
  std::vector<LoadWarning> warnings;
  std::size_t rows = 0;
  csv::Row row;
  while (reader.next(row)) {
    ++rows;
    auto e = parse_event_row(row, source);
    if (registries) {
      const Domain* expected = nullptr;
      if (const auto* ga = registries->ga.find(e.concept_id)) expected = &ga->domain;
      else if (const auto* dod = registries->dod.find(e.concept_id)) expected = &dod->domain;
      if (expected && *expected != e.domain) {
        warnings.push_back({row.line, "concept " + std::to_string(e.concept_id) + " has domain " +
                                          std::string(to_string(e.domain)) + ", registry says " +
                                          std::string(to_string(*expected))});
      }
    }
    if (!persons.find(e.person_id)) {
      quarantine.push_back({row.line, e, "unknown person_id " + std::to_string(e.person_id)});
      continue;
    }
    kept.push_back(e);
  }
  EventTable table(std::move(kept));
  table.quarantine = std::move(quarantine);
  table.warnings = std::move(warnings);
  table.input_rows = rows;
  return table;
}

inline EventTable load_events(const std::string& path, const PersonTable& persons,
                              const Registries* registries = nullptr) {
  return parse_events(csv::Reader::open(path), persons, registries);
}

}  // namespace tedpc
