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
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tedpc/csv.hpp"
#include "tedpc/error.hpp"

namespace tedpc {

using ConceptId = std::int64_t;

enum class Domain : std::uint8_t { Condition, Procedure, Observation, Measurement, Drug };

inline constexpr std::array<Domain, 5> kAllDomains = {Domain::Condition, Domain::Procedure,
                                                      Domain::Observation, Domain::Measurement,
                                                      Domain::Drug};

inline std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::Condition: return "Condition";
    case Domain::Procedure: return "Procedure";
    case Domain::Observation: return "Observation";
    case Domain::Measurement: return "Measurement";
    case Domain::Drug: return "Drug";
  }
  return "?";
}

namespace detail {
inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace detail

// Case-insensitive; vocabularies mix "Condition" and "condition".
inline std::optional<Domain> parse_domain(std::string_view text) {
  const auto s = detail::lower(text);
  if (s == "condition") return Domain::Condition;
  if (s == "procedure") return Domain::Procedure;
  if (s == "observation") return Domain::Observation;
  if (s == "measurement") return Domain::Measurement;
  if (s == "drug") return Domain::Drug;
  return std::nullopt;
}

// Lower rank means higher accuracy.
enum class AccuracyLevel : std::uint8_t { High = 1, ModerateHigh = 2, ModerateLow = 3, Low = 4 };

inline constexpr int rank(AccuracyLevel a) { return static_cast<int>(a); }

inline std::string_view to_string(AccuracyLevel a) {
  switch (a) {
    case AccuracyLevel::High: return "high";
    case AccuracyLevel::ModerateHigh: return "moderate_high";
    case AccuracyLevel::ModerateLow: return "moderate_low";
    case AccuracyLevel::Low: return "low";
  }
  return "?";
}

inline std::optional<AccuracyLevel> parse_accuracy(std::string_view text) {
  if (text == "high") return AccuracyLevel::High;
  if (text == "moderate_high") return AccuracyLevel::ModerateHigh;
  if (text == "moderate_low") return AccuracyLevel::ModerateLow;
  if (text == "low") return AccuracyLevel::Low;
  return std::nullopt;
}

inline constexpr int kMinWeek = 1;
inline constexpr int kMaxWeek = 45;
inline constexpr int kMaxRangeWeeks = 13;

// Accuracy tier implied by the width of a gestational-week range:
// 1 week High, 2-5 ModerateHigh, 6-10 ModerateLow, 11-13 Low.
inline AccuracyLevel classify_accuracy(int week_low, int week_high) {
  if (week_low < kMinWeek || week_high > kMaxWeek || week_low > week_high) {
    throw std::invalid_argument("invalid week range [" + std::to_string(week_low) + ", " +
                                std::to_string(week_high) + "]");
  }
  const int width = week_high - week_low + 1;
  if (width == 1) return AccuracyLevel::High;
  if (width <= 5) return AccuracyLevel::ModerateHigh;
  if (width <= 10) return AccuracyLevel::ModerateLow;
  if (width <= kMaxRangeWeeks) return AccuracyLevel::Low;
  throw std::invalid_argument("range broader than one trimester: " + std::to_string(width) +
                              " weeks");
}

struct GAConceptSpec {
  ConceptId concept_id = 0;
  std::string name;
  int week_low = 1;
  int week_high = 1;
  AccuracyLevel accuracy = AccuracyLevel::High;
  Domain domain = Domain::Condition;
  std::string vocabulary;

  bool operator==(const GAConceptSpec&) const = default;
};

// 1 = Procedure, 2 = Condition, 3 = Observation; nullopt for unranked domains.
inline std::optional<int> dod_domain_rank(Domain d) {
  switch (d) {
    case Domain::Procedure: return 1;
    case Domain::Condition: return 2;
    case Domain::Observation: return 3;
    default: return std::nullopt;
  }
}

struct DODConceptSpec {
  ConceptId concept_id = 0;
  std::string name;
  Domain domain = Domain::Procedure;
  int domain_rank = 1;
  std::string vocabulary;

  bool operator==(const DODConceptSpec&) const = default;
};

struct VocabularyEntry {
  ConceptId concept_id = 0;
  std::string name;
  // Vocabularies carry domains (Device, Visit, ...) the engines never read;
  // those rows keep their text and simply never match a domain filter.
  std::string domain_name;
  std::optional<Domain> domain;
  bool standard = true;
  bool valid = true;

  bool operator==(const VocabularyEntry&) const = default;
};

// Expected totals declared by a `#manifest` comment line.
struct Manifest {
  std::map<std::string, std::int64_t, std::less<>> values;

  std::optional<std::int64_t> get(std::string_view key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }
};

inline std::optional<Manifest> parse_manifest(const std::vector<std::string>& comments,
                                              const std::string& source) {
  std::optional<Manifest> found;
  for (const auto& line : comments) {
    std::string_view rest(line);
    constexpr std::string_view tag = "#manifest";
    if (rest.substr(0, tag.size()) != tag) continue;
    if (found) throw InputError(source + ": more than one #manifest line");
    rest.remove_prefix(tag.size());
    Manifest m;
    while (!rest.empty()) {
      while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
      if (rest.empty()) break;
      const auto end = rest.find(' ');
      const auto token = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
      const auto eq = token.find('=');
      const auto value = eq == std::string_view::npos
                             ? std::nullopt
                             : csv::parse_int<std::int64_t>(token.substr(eq + 1));
      if (!value) throw InputError(source + ": malformed manifest token `" + std::string(token) + "`");
      m.values.emplace(std::string(token.substr(0, eq)), *value);
    }
    found = std::move(m);
  }
  return found;
}

struct AccuracyCounts {
  std::size_t high = 0;
  std::size_t moderate_high = 0;
  std::size_t moderate_low = 0;
  std::size_t low = 0;

  std::size_t total() const { return high + moderate_high + moderate_low + low; }
  std::size_t& operator[](AccuracyLevel a) {
    switch (a) {
      case AccuracyLevel::High: return high;
      case AccuracyLevel::ModerateHigh: return moderate_high;
      case AccuracyLevel::ModerateLow: return moderate_low;
      default: return low;
    }
  }
  bool operator==(const AccuracyCounts&) const = default;
};

// Immutable, id-sorted set of concepts with O(1) lookup by concept_id.
template <typename Spec>
class ConceptSet {
 public:
  ConceptSet() = default;
  explicit ConceptSet(std::vector<Spec> specs) : specs_(std::move(specs)) {
    std::sort(specs_.begin(), specs_.end(),
              [](const Spec& a, const Spec& b) { return a.concept_id < b.concept_id; });
    index_.reserve(specs_.size());
    for (std::size_t i = 0; i < specs_.size(); ++i) index_.emplace(specs_[i].concept_id, i);
  }

  const Spec* find(ConceptId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &specs_[it->second];
  }
  bool contains(ConceptId id) const { return index_.count(id) != 0; }
  std::span<const Spec> all() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }

 private:
  std::vector<Spec> specs_;
  std::unordered_map<ConceptId, std::size_t> index_;
};

struct GAConceptSet : ConceptSet<GAConceptSpec> {
  using ConceptSet::ConceptSet;
  AccuracyCounts counts;
};

using DODConceptSet = ConceptSet<DODConceptSpec>;

namespace detail {

template <typename Spec>
std::vector<Spec> dedup_by_id(std::vector<std::pair<std::size_t, Spec>> rows,
                              const std::string& source) {
  std::unordered_map<ConceptId, std::size_t> first_row;
  std::vector<Spec> out;
  std::unordered_map<ConceptId, std::size_t> pos;
  for (auto& [line, spec] : rows) {
    auto it = pos.find(spec.concept_id);
    if (it == pos.end()) {
      pos.emplace(spec.concept_id, out.size());
      first_row.emplace(spec.concept_id, line);
      out.push_back(std::move(spec));
    } else if (!(out[it->second] == spec)) {
      throw InputError(row_message(source, line,
                                   "concept_id " + std::to_string(spec.concept_id) +
                                       " duplicates row " +
                                       std::to_string(first_row[spec.concept_id]) +
                                       " with conflicting fields"));
    }
  }
  return out;
}

inline ConceptId require_id(const csv::Row& row, std::size_t col, const std::string& source) {
  const auto id = csv::parse_int<ConceptId>(row.fields[col]);
  if (!id) throw InputError(row_message(source, row.line, "bad concept_id `" + row.fields[col] + "`"));
  return *id;
}

inline void require_width(const csv::Row& row, std::size_t n, const std::string& source) {
  if (row.fields.size() != n) {
    throw InputError(row_message(source, row.line,
                                 "expected " + std::to_string(n) + " fields, got " +
                                     std::to_string(row.fields.size())));
  }
}

}  // namespace detail

inline GAConceptSet parse_ga_concepts(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header(
      {"concept_id", "name", "accuracy_level", "week_low", "week_high", "domain", "vocabulary"});
  std::vector<std::pair<std::size_t, GAConceptSpec>> rows;
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 7, source);
    GAConceptSpec spec;
    spec.concept_id = detail::require_id(row, 0, source);
    spec.name = row.fields[1];
    const auto level = parse_accuracy(row.fields[2]);
    if (!level) throw InputError(row_message(source, row.line, "unknown accuracy_level `" + row.fields[2] + "`"));
    const auto lo = csv::parse_int<int>(row.fields[3]);
    const auto hi = csv::parse_int<int>(row.fields[4]);
    if (!lo || !hi) throw InputError(row_message(source, row.line, "bad week range"));
    spec.week_low = *lo;
    spec.week_high = *hi;
    AccuracyLevel derived;
    try {
      derived = classify_accuracy(*lo, *hi);
    } catch (const std::invalid_argument& e) {
      throw InputError(row_message(source, row.line, e.what()));
    }
    if (derived != *level) {
      throw InputError(row_message(source, row.line,
                                   "accuracy mismatch: declared " + row.fields[2] +
                                       ", week range implies " + std::string(to_string(derived))));
    }
    spec.accuracy = derived;
    const auto domain = parse_domain(row.fields[5]);
    if (!domain) throw InputError(row_message(source, row.line, "unknown domain `" + row.fields[5] + "`"));
    spec.domain = *domain;
    spec.vocabulary = row.fields[6];
    rows.emplace_back(row.line, std::move(spec));
  }
  GAConceptSet set(detail::dedup_by_id(std::move(rows), source));
  for (const auto& s : set.all()) set.counts[s.accuracy]++;

  if (const auto manifest = parse_manifest(reader.comments(), source)) {
    auto check = [&](std::string_view key, std::size_t actual) {
      const auto expected = manifest->get(key);
      if (expected && static_cast<std::size_t>(*expected) != actual) {
        throw InputError(source + ": manifest " + std::string(key) + "=" +
                         std::to_string(*expected) + " but file has " + std::to_string(actual));
      }
    };
    check("total", set.size());
    check("high", set.counts.high);
    check("mh", set.counts.moderate_high);
    check("ml", set.counts.moderate_low);
    check("low", set.counts.low);
  }
  return set;
}

inline GAConceptSet load_ga_concepts(const std::string& path) {
  return parse_ga_concepts(csv::Reader::open(path));
}

inline DODConceptSet parse_dod_concepts(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header({"concept_id", "name", "domain", "vocabulary"});
  std::vector<std::pair<std::size_t, DODConceptSpec>> rows;
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 4, source);
    DODConceptSpec spec;
    spec.concept_id = detail::require_id(row, 0, source);
    spec.name = row.fields[1];
    const auto domain = parse_domain(row.fields[2]);
    const auto rank = domain ? dod_domain_rank(*domain) : std::nullopt;
    if (!rank) {
      throw InputError(row_message(source, row.line,
                                   "domain `" + row.fields[2] +
                                       "` is not one of Procedure, Condition, Observation"));
    }
    spec.domain = *domain;
    spec.domain_rank = *rank;
    spec.vocabulary = row.fields[3];
    rows.emplace_back(row.line, std::move(spec));
  }
  DODConceptSet set(detail::dedup_by_id(std::move(rows), source));
  if (const auto manifest = parse_manifest(reader.comments(), source)) {
    if (const auto total = manifest->get("total"); total && static_cast<std::size_t>(*total) != set.size()) {
      throw InputError(source + ": manifest total=" + std::to_string(*total) + " but file has " +
                       std::to_string(set.size()) + " unique concepts");
    }
  }
  return set;
}

inline DODConceptSet load_dod_concepts(const std::string& path) {
  return parse_dod_concepts(csv::Reader::open(path));
}

// Canonical form: header, manifest, rows by ascending concept_id.
inline std::string serialize(const GAConceptSet& set) {
  csv::Writer w;
  const auto& c = set.counts;
  w.comment("#manifest total=" + std::to_string(set.size()) + " high=" + std::to_string(c.high) +
            " mh=" + std::to_string(c.moderate_high) + " ml=" + std::to_string(c.moderate_low) +
            " low=" + std::to_string(c.low));
  w.row({"concept_id", "name", "accuracy_level", "week_low", "week_high", "domain", "vocabulary"});
  for (const auto& s : set.all()) {
    w.row({std::to_string(s.concept_id), s.name, to_string(s.accuracy), std::to_string(s.week_low),
           std::to_string(s.week_high), to_string(s.domain), s.vocabulary});
  }
  return w.str();
}

inline std::string serialize(const DODConceptSet& set) {
  csv::Writer w;
  w.comment("#manifest total=" + std::to_string(set.size()));
  w.row({"concept_id", "name", "domain", "vocabulary"});
  for (const auto& s : set.all()) {
    w.row({std::to_string(s.concept_id), s.name, to_string(s.domain), s.vocabulary});
  }
  return w.str();
}

struct Registries {
  GAConceptSet ga;
  DODConceptSet dod;
};

inline std::vector<VocabularyEntry> parse_vocabulary(csv::Reader reader) {
  const auto& source = reader.name();
  reader.expect_header({"concept_id", "name", "domain", "standard", "valid"});
  std::vector<VocabularyEntry> out;
  std::unordered_map<ConceptId, std::size_t> seen;
  csv::Row row;
  while (reader.next(row)) {
    detail::require_width(row, 5, source);
    VocabularyEntry e;
    e.concept_id = detail::require_id(row, 0, source);
    e.name = row.fields[1];
    e.domain_name = row.fields[2];
    e.domain = parse_domain(row.fields[2]);
    const auto standard = csv::parse_bool(row.fields[3]);
    const auto valid = csv::parse_bool(row.fields[4]);
    if (!standard || !valid) throw InputError(row_message(source, row.line, "standard/valid must be true or false"));
    e.standard = *standard;
    e.valid = *valid;
    if (!seen.emplace(e.concept_id, row.line).second) {
      throw InputError(row_message(source, row.line,
                                   "duplicate concept_id " + std::to_string(e.concept_id)));
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<VocabularyEntry> load_vocabulary(const std::string& path) {
  return parse_vocabulary(csv::Reader::open(path));
}

inline const std::vector<std::string>& default_phenotype_keywords() {
  static const std::vector<std::string> k = {"trimester", "gestation", "pregnan"};
  return k;
}

struct PhenotypeQuery {
  std::vector<std::string> keywords = default_phenotype_keywords();
  std::set<Domain> domains = {Domain::Condition, Domain::Observation, Domain::Procedure,
                              Domain::Measurement};
  bool standard_only = true;
  bool valid_only = true;
};

// Case-insensitive substring match of any keyword, filtered by domain and the
// standard/valid flags. Result ordered by concept_id.
inline std::vector<VocabularyEntry> phenotype_search(std::span<const VocabularyEntry> vocabulary,
                                                     const PhenotypeQuery& query) {
  if (query.keywords.empty()) throw std::invalid_argument("phenotype_search: no keywords");
  std::vector<std::string> needles;
  for (const auto& k : query.keywords) needles.push_back(detail::lower(k));
  std::vector<VocabularyEntry> out;
  for (const auto& e : vocabulary) {
    if (!e.domain || !query.domains.count(*e.domain)) continue;
    if (query.standard_only && !e.standard) continue;
    if (query.valid_only && !e.valid) continue;
    const auto name = detail::lower(e.name);
    const bool hit = std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
      return name.find(n) != std::string::npos;
    });
    if (hit) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const VocabularyEntry& a, const VocabularyEntry& b) { return a.concept_id < b.concept_id; });
  return out;
}

// A plain concept-id list (index events, comorbidity sets): header starting
// with `concept_id`, extra columns ignored.
inline std::set<ConceptId> load_concept_id_set(const std::string& path) {
  auto reader = csv::Reader::open(path);
  csv::Row row;
  if (!reader.next(row) || row.fields.empty() || row.fields[0] != "concept_id") {
    throw InputError(path + ": expected header starting with `concept_id`");
  }
  std::set<ConceptId> ids;
  while (reader.next(row)) ids.insert(detail::require_id(row, 0, path));
  return ids;
}

}  // namespace tedpc
