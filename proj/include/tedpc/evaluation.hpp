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
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tedpc/csv.hpp"
#include "tedpc/episodes.hpp"
#include "tedpc/truth.hpp"

namespace tedpc {

// Square k x k table of counts; rows are rater 1, columns rater 2.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::vector<std::string> labels, std::vector<std::vector<std::int64_t>> counts)
      : labels_(std::move(labels)) {
    const std::size_t k = labels_.size();
    if (k < 2) throw std::invalid_argument("confusion matrix needs at least 2 categories");
    if (counts.size() != k) throw std::invalid_argument("confusion matrix is not square");
    counts_.reserve(k * k);
    for (const auto& row : counts) {
      if (row.size() != k) throw std::invalid_argument("confusion matrix is not square");
      for (auto v : row) {
        if (v < 0) throw std::invalid_argument("confusion matrix has a negative count");
        counts_.push_back(v);
      }
    }
  }

  explicit ConfusionMatrix(const std::vector<std::vector<std::int64_t>>& counts)
      : ConfusionMatrix(default_labels(counts.size()), counts) {}

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::int64_t at(std::size_t i, std::size_t j) const { return counts_[i * size() + j]; }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
  }
  std::int64_t row_sum(std::size_t i) const {
    std::int64_t t = 0;
    for (std::size_t j = 0; j < size(); ++j) t += at(i, j);
    return t;
  }
  std::int64_t col_sum(std::size_t j) const {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += at(i, j);
    return t;
  }

 private:
  static std::vector<std::string> default_labels(std::size_t k) {
    std::vector<std::string> l;
    for (std::size_t i = 0; i < k; ++i) l.push_back(std::to_string(i + 1));
    return l;
  }

  std::vector<std::string> labels_;
  std::vector<std::int64_t> counts_;
};

enum class Weighting : std::uint8_t { Unweighted, Linear };

inline std::string_view to_string(Weighting w) {
  return w == Weighting::Linear ? "linear" : "unweighted";
}

inline std::optional<Weighting> parse_weighting(std::string_view s) {
  if (s == "linear") return Weighting::Linear;
  if (s == "unweighted" || s == "none") return Weighting::Unweighted;
  return std::nullopt;
}

struct KappaResult {
  std::optional<double> kappa;  // empty when undefined; see `error`
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  Weighting weighting = Weighting::Unweighted;
  std::string error;

  bool ok() const { return kappa.has_value(); }
};

// Agreement weight: 1 on the diagonal; linear weighting credits near misses
// with 1 - |i - j| / (k - 1).
inline double agreement_weight(std::size_t i, std::size_t j, std::size_t k, Weighting w) {
  if (w == Weighting::Unweighted) return i == j ? 1.0 : 0.0;
  const double d = i > j ? static_cast<double>(i - j) : static_cast<double>(j - i);
  return 1.0 - d / static_cast<double>(k - 1);
}

inline KappaResult cohen_kappa(const ConfusionMatrix& m, Weighting weighting) {
  KappaResult r;
  r.weighting = weighting;
  const std::size_t k = m.size();
  const double n = static_cast<double>(m.total());
  if (n <= 0) {
    r.error = "matrix total is zero";
    return r;
  }
  double po = 0.0;
  double pe = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ri = static_cast<double>(m.row_sum(i));
    for (std::size_t j = 0; j < k; ++j) {
      const double w = agreement_weight(i, j, k, weighting);
      po += w * static_cast<double>(m.at(i, j));
      pe += w * ri * static_cast<double>(m.col_sum(j));
    }
  }
  po /= n;
  pe /= n * n;
  r.observed_agreement = po;
  r.expected_agreement = pe;
  if (pe >= 1.0) {
    r.error = "expected agreement is 1 (degenerate marginals); kappa undefined";
    return r;
  }
  r.kappa = (po - pe) / (1.0 - pe);
  return r;
}

// Layout: header `<corner>,<label1>,...,<labelk>`, then one row per label
// `<label>,<count>,...`. Row labels must repeat the column labels in order.
inline ConfusionMatrix parse_confusion_matrix(csv::Reader reader) {
  const auto& source = reader.name();
  csv::Row row;
  if (!reader.next(row) || row.fields.size() < 3) throw InputError(source + ": missing or short header");
  std::vector<std::string> labels(row.fields.begin() + 1, row.fields.end());
  std::vector<std::vector<std::int64_t>> counts;
  while (reader.next(row)) {
    if (row.fields.size() != labels.size() + 1) {
      throw InputError(row_message(source, row.line, "row width does not match header"));
    }
    const std::size_t i = counts.size();
    if (i >= labels.size() || row.fields[0] != labels[i]) {
      throw InputError(row_message(source, row.line, "row label `" + row.fields[0] + "` does not match column order"));
    }
    std::vector<std::int64_t> values;
    for (std::size_t j = 1; j < row.fields.size(); ++j) {
      const auto v = csv::parse_int<std::int64_t>(row.fields[j]);
      if (!v || *v < 0) throw InputError(row_message(source, row.line, "bad count `" + row.fields[j] + "`"));
      values.push_back(*v);
    }
    counts.push_back(std::move(values));
  }
  if (counts.size() != labels.size()) throw InputError(source + ": matrix is not square");
  return ConfusionMatrix(std::move(labels), std::move(counts));
}

inline ConfusionMatrix load_confusion_matrix(const std::string& path) {
  return parse_confusion_matrix(csv::Reader::open(path));
}

struct RoundTripReport {
  std::size_t truth_episodes = 0;
  std::size_t inferred_episodes = 0;
  std::size_t paired = 0;
  std::size_t exact_start = 0;
  std::size_t start_within_7 = 0;
  std::size_t exact_dod = 0;
  std::size_t dod_within_1 = 0;
  std::size_t persons = 0;
  std::size_t persons_count_match = 0;
  std::vector<PersonId> count_mismatch_persons;

  static double fraction(std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
  }
  double exact_start_rate() const { return fraction(exact_start, truth_episodes); }
  double start_within_7_rate() const { return fraction(start_within_7, truth_episodes); }
  double exact_dod_rate() const { return fraction(exact_dod, truth_episodes); }
  double dod_within_1_rate() const { return fraction(dod_within_1, truth_episodes); }
  double count_match_rate() const { return fraction(persons_count_match, persons); }
};

// Within each person, every truth episode is paired with the unused inferred
// episode whose dod is nearest (ties to the earlier one). Unpaired truth
// episodes count as misses in every field.
inline RoundTripReport round_trip_score(std::span<const PregnancyEpisode> inferred,
                                        std::span<const TruthEpisode> truth) {
  RoundTripReport r;
  r.truth_episodes = truth.size();
  r.inferred_episodes = inferred.size();
  std::map<PersonId, std::pair<std::vector<const TruthEpisode*>, std::vector<const PregnancyEpisode*>>> by_person;
  for (const auto& t : truth) by_person[t.person_id].first.push_back(&t);
  for (const auto& e : inferred) by_person[e.person_id].second.push_back(&e);

  for (auto& [pid, lists] : by_person) {
    auto& [ts, es] = lists;
    ++r.persons;
    if (ts.size() == es.size()) {
      ++r.persons_count_match;
    } else {
      r.count_mismatch_persons.push_back(pid);
    }
    std::sort(ts.begin(), ts.end(), [](auto* a, auto* b) { return a->true_dod < b->true_dod; });
    std::sort(es.begin(), es.end(), [](auto* a, auto* b) { return a->dod < b->dod; });
    std::vector<bool> used(es.size(), false);
    for (const auto* t : ts) {
      std::optional<std::size_t> best;
      for (std::size_t k = 0; k < es.size(); ++k) {
        if (used[k]) continue;
        if (!best || std::abs(es[k]->dod - t->true_dod) < std::abs(es[*best]->dod - t->true_dod)) best = k;
      }
      if (!best) continue;
      used[*best] = true;
      ++r.paired;
      const auto* e = es[*best];
      const int ds = std::abs(e->start_date - t->true_start);
      const int dd = std::abs(e->dod - t->true_dod);
      if (ds == 0) ++r.exact_start;
      if (ds <= 7) ++r.start_within_7;
      if (dd == 0) ++r.exact_dod;
      if (dd <= 1) ++r.dod_within_1;
    }
  }
  return r;
}

inline std::string format_scorecard(const RoundTripReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "truth_episodes: %zu\n"
                "inferred_episodes: %zu\n"
                "paired: %zu\n"
                "exact_start: %.4f\n"
                "start_within_7_days: %.4f\n"
                "exact_dod: %.4f\n"
                "dod_within_1_day: %.4f\n"
                "persons: %zu\n"
                "episode_count_match: %.4f\n",
                r.truth_episodes, r.inferred_episodes, r.paired, r.exact_start_rate(),
                r.start_within_7_rate(), r.exact_dod_rate(), r.dod_within_1_rate(), r.persons,
                r.count_match_rate());
  return buf;
}

}  // namespace tedpc
