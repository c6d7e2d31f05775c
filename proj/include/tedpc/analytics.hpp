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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tedpc/concepts.hpp"
#include "tedpc/episodes.hpp"
#include "tedpc/error.hpp"
#include "tedpc/ingestion.hpp"

namespace tedpc {

using ConceptIdSet = std::set<ConceptId>;

// For each episode (same order as `episodes`), the index events in its scope:
// dated after the person's previous episode dod and on or before this dod,
// ascending by date.
inline std::vector<std::vector<ClinicalEvent>> scope_index_events(
    std::span<const PregnancyEpisode> episodes, const EventTable& events,
    const ConceptIdSet& index_concepts) {
  std::vector<std::vector<ClinicalEvent>> out(episodes.size());
  std::vector<std::size_t> order(episodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (episodes[a].person_id != episodes[b].person_id) return episodes[a].person_id < episodes[b].person_id;
    return episodes[a].dod < episodes[b].dod;
  });
  std::optional<Date> previous_dod;
  PersonId current = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& ep = episodes[order[k]];
    if (k == 0 || ep.person_id != current) {
      previous_dod.reset();
      current = ep.person_id;
    }
    for (const auto& e : events.events_of(ep.person_id)) {
      if (!index_concepts.count(e.concept_id)) continue;
      if (e.event_date > ep.dod) continue;
      if (previous_dod && e.event_date <= *previous_dod) continue;
      out[order[k]].push_back(e);
    }
    previous_dod = ep.dod;
  }
  return out;
}

inline constexpr int kHistogramWeeks = 45;

struct WeekHistogram {
  std::array<std::size_t, kHistogramWeeks + 1> counts{};  // index = week, 0 = pre-pregnancy
  std::size_t overflow = 0;                               // weeks beyond 45

  std::size_t total() const {
    std::size_t t = overflow;
    for (auto c : counts) t += c;
    return t;
  }
};

// Each episode contributes its earliest in-scope index event, bucketed by
// gestational week.
inline WeekHistogram infection_week_histogram(std::span<const PregnancyEpisode> episodes,
                                              const EventTable& events,
                                              const ConceptIdSet& index_concepts) {
  WeekHistogram h;
  const auto scoped = scope_index_events(episodes, events, index_concepts);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (scoped[i].empty()) continue;
    const auto timing = gestational_week_of(scoped[i].front().event_date, episodes[i]);
    if (timing.week <= kHistogramWeeks) {
      ++h.counts[static_cast<std::size_t>(timing.week)];
    } else {
      ++h.overflow;
    }
  }
  return h;
}

enum class PandemicStratum : std::uint8_t { Pre, Peri };

inline std::string_view to_string(PandemicStratum s) {
  return s == PandemicStratum::Pre ? "pre_pandemic" : "peri_pandemic";
}

inline const Date kDefaultPandemicCutoff = *Date::from_ymd(2020, 3, 1);

inline PandemicStratum pandemic_stratum_of(Date dod, Date cutoff = kDefaultPandemicCutoff) {
  return dod < cutoff ? PandemicStratum::Pre : PandemicStratum::Peri;
}

inline constexpr int kDefaultSuppressionThreshold = 20;

inline std::string suppress_small_cells(std::int64_t count,
                                        int threshold = kDefaultSuppressionThreshold) {
  return count < threshold ? std::string("-") : std::to_string(count);
}

struct DateWindow {
  Date first;
  Date last;
  bool contains(Date d) const { return d >= first && d <= last; }
};

// How episodes are assigned to the pre/peri columns. By default a single
// cutoff splits the cohort window; explicit windows, when set, take over and
// episodes outside both are left out of the table.
struct StrataSpec {
  DateWindow cohort{*Date::from_ymd(2018, 6, 1), *Date::from_ymd(2021, 5, 31)};
  Date cutoff = kDefaultPandemicCutoff;
  std::optional<DateWindow> pre_window;
  std::optional<DateWindow> peri_window;
  int threshold = kDefaultSuppressionThreshold;
  // Third-trimester columns only count gestations longer than this.
  int third_trimester_min_gestation_days = 27 * 7;

  std::optional<PandemicStratum> stratum_of(Date dod) const {
    if (pre_window || peri_window) {
      if (pre_window && pre_window->contains(dod)) return PandemicStratum::Pre;
      if (peri_window && peri_window->contains(dod)) return PandemicStratum::Peri;
      return std::nullopt;
    }
    if (!cohort.contains(dod)) return std::nullopt;
    return pandemic_stratum_of(dod, cutoff);
  }
};

namespace detail {
inline Date json_date(const nlohmann::json& j, const char* key, const std::string& source) {
  if (!j.is_string()) throw ConfigError(source + ": `" + key + "` must be an ISO date string");
  const auto d = Date::parse(j.get<std::string>());
  if (!d) throw ConfigError(source + ": `" + key + "` is not a valid date");
  return *d;
}

inline DateWindow json_window(const nlohmann::json& j, const char* key, const std::string& source) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(source + ": `" + key + "` must be [first, last]");
  DateWindow w{json_date(j[0], key, source), json_date(j[1], key, source)};
  if (w.last < w.first) throw ConfigError(source + ": `" + key + "` ends before it starts");
  return w;
}
}  // namespace detail

// {"cohort_window": [..], "cutoff": "..", "pre_window": [..], "peri_window": [..], "threshold": n}
inline StrataSpec parse_strata_spec(const nlohmann::json& j, const std::string& source = "strata") {
  StrataSpec s;
  if (!j.is_object()) throw ConfigError(source + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "cohort_window") s.cohort = detail::json_window(value, "cohort_window", source);
    else if (key == "cutoff") s.cutoff = detail::json_date(value, "cutoff", source);
    else if (key == "pre_window") s.pre_window = detail::json_window(value, "pre_window", source);
    else if (key == "peri_window") s.peri_window = detail::json_window(value, "peri_window", source);
    else if (key == "threshold") {
      if (!value.is_number_integer() || value.get<int>() <= 0) throw ConfigError(source + ": `threshold` must be a positive integer");
      s.threshold = value.get<int>();
    } else if (key == "third_trimester_min_gestation_days") {
      if (!value.is_number_integer() || value.get<int>() <= 0) throw ConfigError(source + ": bad third_trimester_min_gestation_days");
      s.third_trimester_min_gestation_days = value.get<int>();
    } else {
      throw ConfigError(source + ": unknown key `" + key + "`");
    }
  }
  return s;
}

inline StrataSpec load_strata_spec(const std::string& path) {
  const auto text = csv::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  return parse_strata_spec(j, path);
}

inline const std::array<std::string_view, 7>& age_group_labels() {
  static const std::array<std::string_view, 7> labels = {"15-19", "20-24", "25-29", "30-34",
                                                         "35-39", "40-44", "45-49"};
  return labels;
}

inline std::optional<std::size_t> age_group_of(int age) {
  if (age < 15 || age > 49) return std::nullopt;
  return static_cast<std::size_t>((age - 15) / 5);
}

inline const std::array<std::string_view, 7>& race_labels() {
  static const std::array<std::string_view, 7> labels = {
      "White", "Black", "Hispanic/Latino", "Asian", "NHOPI", "Other/unknown", "Multiracial"};
  return labels;
}

// Hispanic ethnicity takes precedence over race; unrecognised codes fall into
// Other/unknown.
inline std::size_t race_category_of(const Person& p) {
  const auto eth = detail::lower(p.ethnicity);
  if (eth.find("hispanic") != std::string::npos && eth.find("not") == std::string::npos) return 2;
  const auto race = detail::lower(p.race);
  if (race == "white") return 0;
  if (race == "black" || race == "black or african american") return 1;
  if (race == "hispanic/latino" || race == "hispanic") return 2;
  if (race == "asian") return 3;
  if (race == "nhopi" || race == "native hawaiian or other pacific islander") return 4;
  if (race == "multiracial" || race == "multiple" || race == "multiple race") return 6;
  return 5;
}

struct StratifiedTable {
  struct Row {
    std::string characteristic;
    std::string category;
    std::vector<std::int64_t> counts;  // one per column
  };

  std::vector<std::string> column_labels;
  std::vector<std::int64_t> column_totals;
  std::vector<Row> rows;
  int threshold = kDefaultSuppressionThreshold;

  bool suppressed(std::int64_t count) const { return count < threshold; }

  // Percent of the column total; nullopt when the total is zero.
  static std::optional<double> percent(std::int64_t count, std::int64_t total) {
    if (total <= 0) return std::nullopt;
    return 100.0 * static_cast<double>(count) / static_cast<double>(total);
  }

  std::string cell_count(std::int64_t count, bool unsuppressed) const {
    return unsuppressed ? std::to_string(count) : suppress_small_cells(count, threshold);
  }

  std::string cell_percent(std::int64_t count, std::int64_t total, bool unsuppressed) const {
    if (!unsuppressed && suppressed(count)) return "-";
    const auto p = percent(count, total);
    if (!p) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", *p);
    return buf;
  }

  std::string render_markdown(bool unsuppressed = false) const {
    std::string out = "| Characteristic | Category |";
    for (std::size_t c = 0; c < column_labels.size(); ++c) {
      out += " " + column_labels[c] + " (n=" + cell_count(column_totals[c], unsuppressed) + ") | % |";
    }
    out += "\n|---|---|";
    for (std::size_t c = 0; c < column_labels.size(); ++c) out += "---:|---:|";
    out += "\n";
    for (const auto& r : rows) {
      out += "| " + r.characteristic + " | " + r.category + " |";
      for (std::size_t c = 0; c < r.counts.size(); ++c) {
        out += " " + cell_count(r.counts[c], unsuppressed) + " | " +
               cell_percent(r.counts[c], column_totals[c], unsuppressed) + " |";
      }
      out += "\n";
    }
    if (!unsuppressed) out += "\n-: fewer than " + std::to_string(threshold) + " patients, not reported\n";
    return out;
  }

  std::string render_csv(bool unsuppressed = false) const {
    csv::Writer w;
    std::vector<std::string> header = {"characteristic", "category"};
    for (const auto& l : column_labels) {
      header.push_back(l);
      header.push_back(l + " %");
    }
    w.row(header);
    std::vector<std::string> totals = {"total", "n"};
    for (std::size_t c = 0; c < column_labels.size(); ++c) {
      totals.push_back(cell_count(column_totals[c], unsuppressed));
      totals.push_back(cell_percent(column_totals[c], column_totals[c], unsuppressed));
    }
    w.row(totals);
    for (const auto& r : rows) {
      std::vector<std::string> fields = {r.characteristic, r.category};
      for (std::size_t c = 0; c < r.counts.size(); ++c) {
        fields.push_back(cell_count(r.counts[c], unsuppressed));
        fields.push_back(cell_percent(r.counts[c], column_totals[c], unsuppressed));
      }
      w.row(fields);
    }
    return w.str();
  }
};

enum StratifiedColumn : std::size_t {
  kPreTotal = 0,
  kPeriTotal,
  kPeriCovidBeforeDodNo,
  kPeriCovidBeforeDodYes,
  kPeriCovidEarlyNo,
  kPeriCovidEarlyYes,
  kPeriCovidThirdNo,
  kPeriCovidThirdYes,
  kStratifiedColumnCount
};

// Named comorbidity concept sets; each becomes a No/Yes row pair.
using ComorbiditySets = std::vector<std::pair<std::string, ConceptIdSet>>;

inline ComorbiditySets load_comorbidity_sets(const std::vector<std::pair<std::string, std::string>>& named_paths) {
  ComorbiditySets sets;
  for (const auto& [name, path] : named_paths) {
    try {
      sets.emplace_back(name, load_concept_id_set(path));
    } catch (const InputError& e) {
      throw InputError("comorbidity set `" + name + "`: " + e.what());
    }
  }
  return sets;
}

// Columns per episode: pre/peri totals, then within peri: any in-scope index
// event (No/Yes), one in weeks 1-27 (No/Yes), and one in week 28+ among
// gestations longer than the third-trimester minimum (No/Yes).
inline StratifiedTable stratified_table(std::span<const PregnancyEpisode> episodes,
                                        const PersonTable& persons, const EventTable& events,
                                        const ConceptIdSet& index_concepts,
                                        const ComorbiditySets& comorbidities,
                                        const StrataSpec& spec = {}) {
  StratifiedTable t;
  t.threshold = spec.threshold;
  t.column_labels = {"Pre-pandemic total",      "Peri-pandemic total",
                     "COVID before DOD: No",    "COVID before DOD: Yes",
                     "COVID weeks 1-27: No",    "COVID weeks 1-27: Yes",
                     "COVID weeks 28+: No",     "COVID weeks 28+: Yes"};
  t.column_totals.assign(kStratifiedColumnCount, 0);
  for (auto label : age_group_labels()) {
    t.rows.push_back({"Age group", std::string(label), std::vector<std::int64_t>(kStratifiedColumnCount, 0)});
  }
  const std::size_t race_offset = t.rows.size();
  for (auto label : race_labels()) {
    t.rows.push_back({"Race", std::string(label), std::vector<std::int64_t>(kStratifiedColumnCount, 0)});
  }
  const std::size_t comorbidity_offset = t.rows.size();
  for (const auto& [name, ids] : comorbidities) {
    t.rows.push_back({name, "No", std::vector<std::int64_t>(kStratifiedColumnCount, 0)});
    t.rows.push_back({name, "Yes", std::vector<std::int64_t>(kStratifiedColumnCount, 0)});
  }

  const auto scoped = scope_index_events(episodes, events, index_concepts);
  std::vector<std::size_t> columns;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& ep = episodes[i];
    const auto stratum = spec.stratum_of(ep.dod);
    if (!stratum) continue;
    columns.clear();
    if (*stratum == PandemicStratum::Pre) {
      columns.push_back(kPreTotal);
    } else {
      columns.push_back(kPeriTotal);
      bool early = false;
      bool third = false;
      for (const auto& e : scoped[i]) {
        const auto timing = gestational_week_of(e.event_date, ep);
        if (timing.week >= 1 && timing.week <= 27) early = true;
        if (timing.week >= 28) third = true;
      }
      columns.push_back(scoped[i].empty() ? kPeriCovidBeforeDodNo : kPeriCovidBeforeDodYes);
      columns.push_back(early ? kPeriCovidEarlyYes : kPeriCovidEarlyNo);
      if (ep.gestation_days > spec.third_trimester_min_gestation_days) {
        columns.push_back(third ? kPeriCovidThirdYes : kPeriCovidThirdNo);
      }
    }
    for (auto c : columns) ++t.column_totals[c];

    std::vector<std::size_t> row_hits;
    if (const auto* person = persons.find(ep.person_id)) {
      if (const auto g = age_group_of(whole_years_between(person->birth_date, ep.dod))) {
        row_hits.push_back(*g);
      }
      row_hits.push_back(race_offset + race_category_of(*person));
    } else {
      row_hits.push_back(race_offset + 5);
    }
    const auto person_events = events.events_of(ep.person_id);
    for (std::size_t k = 0; k < comorbidities.size(); ++k) {
      const auto& ids = comorbidities[k].second;
      const bool yes = std::any_of(person_events.begin(), person_events.end(), [&](const ClinicalEvent& e) {
        return e.event_date <= ep.dod && ids.count(e.concept_id);
      });
      row_hits.push_back(comorbidity_offset + 2 * k + (yes ? 1 : 0));
    }
    for (auto r : row_hits) {
      for (auto c : columns) ++t.rows[r].counts[c];
    }
  }
  return t;
}

inline std::string write_histogram(const WeekHistogram& h, bool unsuppressed = true,
                                   int threshold = kDefaultSuppressionThreshold) {
  csv::Writer w;
  w.row({"gestational_week", "count"});
  for (std::size_t week = 0; week < h.counts.size(); ++week) {
    const auto n = static_cast<std::int64_t>(h.counts[week]);
    w.row({std::to_string(week), unsuppressed ? std::to_string(n) : suppress_small_cells(n, threshold)});
  }
  if (h.overflow) {
    const auto n = static_cast<std::int64_t>(h.overflow);
    w.row({">45", unsuppressed ? std::to_string(n) : suppress_small_cells(n, threshold)});
  }
  return w.str();
}

}  // namespace tedpc
