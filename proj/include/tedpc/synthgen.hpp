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
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tedpc/concepts.hpp"
#include "tedpc/episodes.hpp"
#include "tedpc/error.hpp"
#include "tedpc/ga_engine.hpp"
#include "tedpc/ingestion.hpp"
#include "tedpc/truth.hpp"

namespace tedpc::synth {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-person stream seed. `salt` separates independent streams (generation
// vs noise) for the same person.
inline constexpr std::uint64_t person_seed(std::uint64_t seed, PersonId person, std::uint64_t salt = 0) {
  return splitmix64(splitmix64(seed ^ salt) ^ static_cast<std::uint64_t>(person));
}

inline constexpr std::uint64_t kNoiseSalt = 0x6E6F697365ULL;

// mt19937_64 (its output sequence is fixed by the C++ standard) with
// hand-written transforms, so streams reproduce on any conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one draw per call.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  const T& pick(std::span<const T> items) {
    return items[static_cast<std::size_t>(uniform_int(0, static_cast<int>(items.size()) - 1))];
  }

 private:
  std::mt19937_64 engine_;
};

enum class ConflictMode : std::uint8_t {
  // A low-accuracy event whose implied start is 15-40 days off the truth.
  LowAccuracy,
  // A second High event on the same date as an existing one, 1-3 weeks apart.
  SameDateHigh,
};

struct NoiseSpec {
  double drop_ga = 0.0;
  double conflict_ga = 0.0;
  ConflictMode conflict_mode = ConflictMode::LowAccuracy;
  double shift = 0.0;
  int shift_max_days = 7;
  double drop_dod = 0.0;
  double pre_pregnancy_index = 0.0;

  bool any() const {
    return drop_ga > 0 || conflict_ga > 0 || shift > 0 || drop_dod > 0 || pre_pregnancy_index > 0;
  }
};

struct ComorbiditySpec {
  std::string name;
  ConceptId concept_id = 0;
  Domain domain = Domain::Condition;
  double prevalence = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t n_persons = 100;
  // P(1), P(2), P(3) gestations per person.
  std::array<double, 3> gestation_count_weights = {0.6, 0.3, 0.1};
  double gestation_mean_days = 274.0;
  double gestation_sd_days = 12.0;
  int gestation_min_days = 140;
  int gestation_max_days = 308;
  // GA events emitted per gestation at each accuracy level.
  int high_events = 2;
  int moderate_high_events = 1;
  int moderate_low_events = 1;
  int low_events = 2;
  // Delivery events per gestation by domain, all dated on the true dod.
  int procedure_events = 1;
  int condition_events = 1;
  int observation_events = 1;
  std::vector<int> visit_weeks = {8, 12, 16, 20, 24, 28, 32, 36, 38, 40};
  Date dod_first = *Date::from_ymd(2018, 6, 1);
  Date dod_last = *Date::from_ymd(2021, 5, 31);
  int min_interpregnancy_days = 60;
  int max_interpregnancy_days = 720;
  // Truth starts and dods of one person are kept more than
  // window_days + separation_margin_days apart.
  int window_days = 270;
  int separation_margin_days = 60;
  int min_age_at_dod = 16;
  int max_age_at_dod = 45;
  double index_event_rate = 0.1;
  ConceptId index_concept_id = 37311061;
  std::vector<ComorbiditySpec> comorbidities;
  NoiseSpec noise;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("synth config: " + m); };
    auto rate = [&](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must be in [0, 1]");
    };
    if (n_persons == 0) fail("n_persons must be positive");
    double wsum = 0;
    for (double w : gestation_count_weights) {
      if (w < 0) fail("gestation_count_weights must be non-negative");
      wsum += w;
    }
    if (wsum <= 0) fail("gestation_count_weights must not all be zero");
    if (gestation_min_days <= 0 || gestation_min_days > gestation_max_days) fail("bad gestation clamp");
    if (gestation_sd_days < 0) fail("gestation_sd_days must be non-negative");
    if (high_events < 0 || moderate_high_events < 0 || moderate_low_events < 0 || low_events < 0 ||
        procedure_events < 0 || condition_events < 0 || observation_events < 0) {
      fail("event counts must be non-negative");
    }
    if (dod_last < dod_first) fail("dod window ends before it starts");
    if (min_interpregnancy_days < 1 || min_interpregnancy_days > max_interpregnancy_days) fail("bad interpregnancy range");
    if (window_days <= 0 || separation_margin_days < 0) fail("bad separation constants");
    if (min_age_at_dod < 15 || max_age_at_dod > 49 || min_age_at_dod > max_age_at_dod - 4) fail("bad age range");
    for (int w : visit_weeks) {
      if (w < 1 || w > 42) fail("visit weeks must lie in 1..42");
    }
    rate(index_event_rate, "index_event_rate");
    rate(noise.drop_ga, "noise.drop_ga");
    rate(noise.conflict_ga, "noise.conflict_ga");
    rate(noise.shift, "noise.shift");
    rate(noise.drop_dod, "noise.drop_dod");
    rate(noise.pre_pregnancy_index, "noise.pre_pregnancy_index");
    if (noise.shift_max_days < 1) fail("noise.shift_max_days must be positive");
    for (const auto& c : comorbidities) rate(c.prevalence, "comorbidity prevalence");
  }
};

inline nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["n_persons"] = c.n_persons;
  j["gestation_count_weights"] = c.gestation_count_weights;
  j["gestation_mean_days"] = c.gestation_mean_days;
  j["gestation_sd_days"] = c.gestation_sd_days;
  j["gestation_min_days"] = c.gestation_min_days;
  j["gestation_max_days"] = c.gestation_max_days;
  j["high_events"] = c.high_events;
  j["moderate_high_events"] = c.moderate_high_events;
  j["moderate_low_events"] = c.moderate_low_events;
  j["low_events"] = c.low_events;
  j["procedure_events"] = c.procedure_events;
  j["condition_events"] = c.condition_events;
  j["observation_events"] = c.observation_events;
  j["visit_weeks"] = c.visit_weeks;
  j["dod_window"] = {c.dod_first.to_string(), c.dod_last.to_string()};
  j["min_interpregnancy_days"] = c.min_interpregnancy_days;
  j["max_interpregnancy_days"] = c.max_interpregnancy_days;
  j["window_days"] = c.window_days;
  j["separation_margin_days"] = c.separation_margin_days;
  j["min_age_at_dod"] = c.min_age_at_dod;
  j["max_age_at_dod"] = c.max_age_at_dod;
  j["index_event_rate"] = c.index_event_rate;
  j["index_concept_id"] = c.index_concept_id;
  j["comorbidities"] = nlohmann::json::array();
  for (const auto& m : c.comorbidities) {
    j["comorbidities"].push_back({{"name", m.name},
                                  {"concept_id", m.concept_id},
                                  {"domain", std::string(to_string(m.domain))},
                                  {"prevalence", m.prevalence}});
  }
  j["noise"] = {{"drop_ga", c.noise.drop_ga},
                {"conflict_ga", c.noise.conflict_ga},
                {"conflict_mode", c.noise.conflict_mode == ConflictMode::LowAccuracy ? "low_accuracy" : "same_date_high"},
                {"shift", c.noise.shift},
                {"shift_max_days", c.noise.shift_max_days},
                {"drop_dod", c.noise.drop_dod},
                {"pre_pregnancy_index", c.noise.pre_pregnancy_index}};
  return j;
}

// Keys absent from `j` keep their current values in `c`.
inline void merge_json(SynthConfig& c, const nlohmann::json& j) {
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "n_persons") c.n_persons = v.get<std::size_t>();
      else if (key == "gestation_count_weights") c.gestation_count_weights = v.get<std::array<double, 3>>();
      else if (key == "gestation_mean_days") c.gestation_mean_days = v.get<double>();
      else if (key == "gestation_sd_days") c.gestation_sd_days = v.get<double>();
      else if (key == "gestation_min_days") c.gestation_min_days = v.get<int>();
      else if (key == "gestation_max_days") c.gestation_max_days = v.get<int>();
      else if (key == "high_events") c.high_events = v.get<int>();
      else if (key == "moderate_high_events") c.moderate_high_events = v.get<int>();
      else if (key == "moderate_low_events") c.moderate_low_events = v.get<int>();
      else if (key == "low_events") c.low_events = v.get<int>();
      else if (key == "procedure_events") c.procedure_events = v.get<int>();
      else if (key == "condition_events") c.condition_events = v.get<int>();
      else if (key == "observation_events") c.observation_events = v.get<int>();
      else if (key == "visit_weeks") c.visit_weeks = v.get<std::vector<int>>();
      else if (key == "dod_window") {
        const auto w = v.get<std::vector<std::string>>();
        if (w.size() != 2) throw ConfigError("synth config: dod_window must be [first, last]");
        const auto a = Date::parse(w[0]);
        const auto b = Date::parse(w[1]);
        if (!a || !b) throw ConfigError("synth config: dod_window dates must be ISO-8601");
        c.dod_first = *a;
        c.dod_last = *b;
      } else if (key == "min_interpregnancy_days") c.min_interpregnancy_days = v.get<int>();
      else if (key == "max_interpregnancy_days") c.max_interpregnancy_days = v.get<int>();
      else if (key == "window_days") c.window_days = v.get<int>();
      else if (key == "separation_margin_days") c.separation_margin_days = v.get<int>();
      else if (key == "min_age_at_dod") c.min_age_at_dod = v.get<int>();
      else if (key == "max_age_at_dod") c.max_age_at_dod = v.get<int>();
      else if (key == "index_event_rate") c.index_event_rate = v.get<double>();
      else if (key == "index_concept_id") c.index_concept_id = v.get<ConceptId>();
      else if (key == "comorbidities") {
        c.comorbidities.clear();
        for (const auto& m : v) {
          ComorbiditySpec s;
          s.name = m.at("name").get<std::string>();
          s.concept_id = m.at("concept_id").get<ConceptId>();
          if (m.contains("domain")) {
            const auto d = parse_domain(m.at("domain").get<std::string>());
            if (!d) throw ConfigError("synth config: unknown comorbidity domain");
            s.domain = *d;
          }
          s.prevalence = m.at("prevalence").get<double>();
          c.comorbidities.push_back(std::move(s));
        }
      } else if (key == "noise") {
        for (const auto& [nk, nv] : v.items()) {
          if (nk == "drop_ga") c.noise.drop_ga = nv.get<double>();
          else if (nk == "conflict_ga") c.noise.conflict_ga = nv.get<double>();
          else if (nk == "conflict_mode") {
            const auto m = nv.get<std::string>();
            if (m == "low_accuracy") c.noise.conflict_mode = ConflictMode::LowAccuracy;
            else if (m == "same_date_high") c.noise.conflict_mode = ConflictMode::SameDateHigh;
            else throw ConfigError("synth config: unknown noise.conflict_mode `" + m + "`");
          } else if (nk == "shift") c.noise.shift = nv.get<double>();
          else if (nk == "shift_max_days") c.noise.shift_max_days = nv.get<int>();
          else if (nk == "drop_dod") c.noise.drop_dod = nv.get<double>();
          else if (nk == "pre_pregnancy_index") c.noise.pre_pregnancy_index = nv.get<double>();
          else throw ConfigError("synth config: unknown key `noise." + nk + "`");
        }
      } else {
        throw ConfigError("synth config: unknown key `" + key + "`");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
}

struct NoiseLogEntry {
  PersonId person_id = 0;
  int episode_index = 0;
  std::string channel;
  ConceptId concept_id = 0;
  std::optional<Date> original_date;  // empty for added events
  std::optional<Date> new_date;       // empty for dropped events
};

struct Cohort {
  std::vector<Person> persons;
  std::vector<ClinicalEvent> events;  // canonical order
  std::vector<TruthEpisode> truth;
  std::vector<NoiseLogEntry> noise_log;
};

// Concept pools drawn from the registries, bucketed for fast lookup.
class ConceptPools {
 public:
  explicit ConceptPools(const Registries& reg) {
    for (const auto& s : reg.ga.all()) {
      const auto level = static_cast<std::size_t>(rank(s.accuracy) - 1);
      for (int w = s.week_low; w <= s.week_high; ++w) by_level_week_[level][static_cast<std::size_t>(w)].push_back(&s);
      by_level_[level].push_back(&s);
      if (s.accuracy == AccuracyLevel::Low && s.week_low == 1) first_trimester_low_.push_back(&s);
    }
    for (const auto& s : reg.dod.all()) by_rank_[static_cast<std::size_t>(s.domain_rank - 1)].push_back(&s);
  }

  std::span<const GAConceptSpec* const> ga(AccuracyLevel level, int week) const {
    if (week < 0 || week > kMaxWeek) return {};
    return by_level_week_[static_cast<std::size_t>(rank(level) - 1)][static_cast<std::size_t>(week)];
  }
  std::span<const GAConceptSpec* const> ga(AccuracyLevel level) const {
    return by_level_[static_cast<std::size_t>(rank(level) - 1)];
  }
  std::span<const GAConceptSpec* const> first_trimester_low() const { return first_trimester_low_; }
  std::span<const DODConceptSpec* const> dod(int domain_rank) const {
    return by_rank_[static_cast<std::size_t>(domain_rank - 1)];
  }

 private:
  std::array<std::array<std::vector<const GAConceptSpec*>, kMaxWeek + 1>, 4> by_level_week_;
  std::array<std::vector<const GAConceptSpec*>, 4> by_level_;
  std::vector<const GAConceptSpec*> first_trimester_low_;
  std::array<std::vector<const DODConceptSpec*>, 3> by_rank_;
};

namespace detail {

struct Gestation {
  Date start;
  Date dod;
};

inline int draw_gestation_days(Rng& rng, const SynthConfig& c) {
  const double g = rng.normal(c.gestation_mean_days, c.gestation_sd_days);
  return std::clamp(static_cast<int>(std::lround(g)), c.gestation_min_days, c.gestation_max_days);
}

inline int draw_gestation_count(Rng& rng, const SynthConfig& c) {
  const double total = c.gestation_count_weights[0] + c.gestation_count_weights[1] + c.gestation_count_weights[2];
  double u = rng.uniform() * total;
  for (int k = 0; k < 3; ++k) {
    if (u < c.gestation_count_weights[static_cast<std::size_t>(k)]) return k + 1;
    u -= c.gestation_count_weights[static_cast<std::size_t>(k)];
  }
  for (int k = 2; k >= 0; --k) {
    if (c.gestation_count_weights[static_cast<std::size_t>(k)] > 0) return k + 1;
  }
  return 1;
}

// Lays out `count` gestations with every dod in the configured window and
// consecutive starts and dods more than window + margin days apart.
inline std::vector<Gestation> place_gestations(Rng& rng, const SynthConfig& c, int count, PersonId pid) {
  const int separation = c.window_days + c.separation_margin_days + 1;
  const int window_len = c.dod_last - c.dod_first;
  const int minimum_span = (count - 1) * std::max(separation, c.gestation_min_days + c.min_interpregnancy_days);
  if (minimum_span > window_len) {
    throw ConfigError("synth: person " + std::to_string(pid) + " needs " + std::to_string(count) +
                      " gestations at least " + std::to_string(separation) +
                      " days apart, which cannot fit in a " + std::to_string(window_len) +
                      "-day delivery window");
  }
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<int> g(static_cast<std::size_t>(count));
    for (auto& x : g) x = draw_gestation_days(rng, c);
    // Smallest allowed dod increments given the drawn lengths.
    std::vector<int> step(static_cast<std::size_t>(count), 0);
    int required = 0;
    for (std::size_t i = 1; i < g.size(); ++i) {
      step[i] = std::max({separation, g[i] + c.min_interpregnancy_days, separation + g[i] - g[i - 1]});
      required += step[i];
    }
    if (required > window_len) continue;
    int slack = window_len - required;
    for (std::size_t i = 1; i < g.size(); ++i) {
      const int extra = rng.uniform_int(0, std::min(slack, c.max_interpregnancy_days - c.min_interpregnancy_days));
      step[i] += extra;
      slack -= extra;
    }
    Date dod = c.dod_first + rng.uniform_int(0, slack);
    std::vector<Gestation> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dod = dod + step[i];
      out.push_back({dod - g[i], dod});
    }
    return out;
  }
  throw ConfigError("synth: could not place " + std::to_string(count) + " separable gestations for person " +
                    std::to_string(pid) + " inside the delivery window");
}

inline Person make_person(Rng& rng, const SynthConfig& c, PersonId pid, Date first_dod) {
  static constexpr std::array<std::string_view, 7> kRaces = {"White", "Black", "White", "Asian", "NHOPI", "Unknown", "Multiracial"};
  static constexpr std::array<double, 7> kRaceWeights = {0.50, 0.18, 0.16, 0.05, 0.01, 0.07, 0.03};
  const int age = rng.uniform_int(c.min_age_at_dod, c.max_age_at_dod - 4);
  // Birthday uniformly within the year preceding the age-th anniversary.
  const Date anchor = *Date::from_ymd(first_dod.year() - age, first_dod.month(), first_dod.month() == 2 && first_dod.day() == 29 ? 28 : first_dod.day());
  Person p;
  p.person_id = pid;
  p.birth_date = anchor - rng.uniform_int(0, 364);
  p.sex = "F";
  double u = rng.uniform();
  std::size_t r = 0;
  for (; r + 1 < kRaces.size(); ++r) {
    if (u < kRaceWeights[r]) break;
    u -= kRaceWeights[r];
  }
  p.race = std::string(kRaces[r]);
  p.ethnicity = r == 2 ? "Hispanic or Latino" : "Not Hispanic or Latino";
  return p;
}

}  // namespace detail

// Per-person generation; pure function of (config, registries, person id).
inline void generate_person(const SynthConfig& c, const ConceptPools& pools, PersonId pid, Cohort& out) {
  Rng rng(person_seed(c.seed, pid));
  const int count = detail::draw_gestation_count(rng, c);
  const auto gestations = detail::place_gestations(rng, c, count, pid);
  out.persons.push_back(detail::make_person(rng, c, pid, gestations.front().dod));

  const std::array<std::pair<AccuracyLevel, int>, 4> ga_plan = {{{AccuracyLevel::High, c.high_events},
                                                                  {AccuracyLevel::ModerateHigh, c.moderate_high_events},
                                                                  {AccuracyLevel::ModerateLow, c.moderate_low_events},
                                                                  {AccuracyLevel::Low, c.low_events}}};
  for (std::size_t gi = 0; gi < gestations.size(); ++gi) {
    const auto& gest = gestations[gi];
    const int length = gest.dod - gest.start;
    std::vector<int> visits;
    for (int w : c.visit_weeks) {
      if (7 * w < length) visits.push_back(w);
    }
    for (const auto& [level, n] : ga_plan) {
      for (int k = 0; k < n && !visits.empty(); ++k) {
        const int offset = rng.uniform_int(0, static_cast<int>(visits.size()) - 1);
        for (std::size_t t = 0; t < visits.size(); ++t) {
          const int week = visits[(static_cast<std::size_t>(offset) + t) % visits.size()];
          const auto pool = pools.ga(level, week);
          if (pool.empty()) continue;
          const auto* spec = rng.pick(pool);
          out.events.push_back({pid, spec->concept_id, spec->domain, gest.start + 7 * week});
          break;
        }
      }
    }
    const std::array<int, 3> dod_plan = {c.procedure_events, c.condition_events, c.observation_events};
    for (int r = 1; r <= 3; ++r) {
      const auto pool = pools.dod(r);
      for (int k = 0; k < dod_plan[static_cast<std::size_t>(r - 1)] && !pool.empty(); ++k) {
        const auto* spec = rng.pick(pool);
        out.events.push_back({pid, spec->concept_id, spec->domain, gest.dod});
      }
    }
    if (rng.bernoulli(c.index_event_rate)) {
      out.events.push_back({pid, c.index_concept_id, Domain::Condition, gest.start + rng.uniform_int(0, length)});
    }
    TruthEpisode t;
    t.person_id = pid;
    t.episode_index = static_cast<int>(gi + 1);
    t.true_start = gest.start;
    t.true_dod = gest.dod;
    for (const auto& m : c.comorbidities) {
      const bool yes = rng.bernoulli(m.prevalence);
      t.comorbidities.push_back(yes);
      if (yes) out.events.push_back({pid, m.concept_id, m.domain, gest.start + rng.uniform_int(0, length)});
    }
    out.truth.push_back(std::move(t));
  }
}

// Perturbs one person's events in place. `truth` holds that person's truth
// episodes in dod order; `events` is the person's event list.
inline void inject_noise(std::vector<ClinicalEvent>& events, std::span<const TruthEpisode> truth,
                         const NoiseSpec& noise, const Registries& reg, const ConceptPools& pools,
                         ConceptId index_concept_id, std::uint64_t seed,
                         std::vector<NoiseLogEntry>& log) {
  if (truth.empty()) return;
  const PersonId pid = truth.front().person_id;
  Rng rng(person_seed(seed, pid, kNoiseSalt));

  auto episode_of = [&](Date d) {
    for (const auto& t : truth) {
      if (d <= t.true_dod) return t.episode_index;
    }
    return truth.back().episode_index;
  };

  // Removal and shifting, in the given order.
  std::vector<ClinicalEvent> kept;
  kept.reserve(events.size());
  for (auto e : events) {
    const bool is_ga = reg.ga.contains(e.concept_id);
    const bool is_dod = reg.dod.contains(e.concept_id);
    const bool drop = (is_ga && rng.bernoulli(noise.drop_ga)) | (is_dod && rng.bernoulli(noise.drop_dod));
    if (drop) {
      log.push_back({pid, episode_of(e.event_date), is_ga ? "drop_ga" : "drop_dod", e.concept_id, e.event_date, std::nullopt});
      continue;
    }
    if (rng.bernoulli(noise.shift)) {
      const int magnitude = rng.uniform_int(1, noise.shift_max_days);
      const int delta = rng.bernoulli(0.5) ? magnitude : -magnitude;
      log.push_back({pid, episode_of(e.event_date), "shift", e.concept_id, e.event_date, e.event_date + delta});
      e.event_date = e.event_date + delta;
    }
    kept.push_back(e);
  }

  // Additions, per gestation.
  std::optional<Date> previous_dod;
  for (const auto& t : truth) {
    const Date start = t.true_start;
    const Date dod = t.true_dod;
    if (rng.bernoulli(noise.conflict_ga)) {
      if (noise.conflict_mode == ConflictMode::LowAccuracy) {
        const auto pool = pools.ga(AccuracyLevel::Low);
        const GAConceptSpec* spec = pool.empty() ? nullptr : rng.pick(pool);
        const int magnitude = rng.uniform_int(15, 40);
        int delta = rng.bernoulli(0.5) ? magnitude : -magnitude;
        auto fits = [&](const GAConceptSpec* s, int d) {
          const Date when = start + ga_days(*s) + d;
          return when >= start && when <= dod;
        };
        if (spec && !fits(spec, delta)) delta = -delta;
        if (spec && !fits(spec, delta) && !pools.first_trimester_low().empty()) {
          spec = rng.pick(pools.first_trimester_low());
          if (!fits(spec, delta)) delta = -delta;
        }
        if (spec && fits(spec, delta)) {
          const Date when = start + ga_days(*spec) + delta;
          kept.push_back({pid, spec->concept_id, spec->domain, when});
          log.push_back({pid, t.episode_index, "conflict_ga", spec->concept_id, std::nullopt, when});
        }
      } else {
        std::vector<ClinicalEvent> highs;
        for (const auto& e : kept) {
          const auto* s = reg.ga.find(e.concept_id);
          if (s && s->accuracy == AccuracyLevel::High && e.event_date >= start && e.event_date <= dod) highs.push_back(e);
        }
        if (!highs.empty()) {
          const auto& base = rng.pick(std::span<const ClinicalEvent>(highs));
          const int week = reg.ga.find(base.concept_id)->week_low;
          const int magnitude = rng.uniform_int(1, 3);
          int other = rng.bernoulli(0.5) ? week + magnitude : week - magnitude;
          if (other < 1 || other > 42) other = week + (other < 1 ? magnitude : -magnitude);
          const auto pool = pools.ga(AccuracyLevel::High, other);
          if (!pool.empty()) {
            const auto* spec = rng.pick(pool);
            kept.push_back({pid, spec->concept_id, spec->domain, base.event_date});
            log.push_back({pid, t.episode_index, "conflict_ga_same_date", spec->concept_id, std::nullopt, base.event_date});
          }
        }
      }
    }
    if (rng.bernoulli(noise.pre_pregnancy_index)) {
      const int room = previous_dod ? std::min(60, (start - *previous_dod) - 1) : 60;
      if (room >= 1) {
        const Date when = start - rng.uniform_int(1, room);
        kept.push_back({pid, index_concept_id, Domain::Condition, when});
        log.push_back({pid, t.episode_index, "pre_pregnancy_index", index_concept_id, std::nullopt, when});
      }
    }
    previous_dod = dod;
  }
  events = std::move(kept);
}

// Truth index week: earliest index event in (previous dod, dod], mapped onto
// the true timeline.
inline void annotate_index_weeks(std::span<TruthEpisode> truth, std::span<const ClinicalEvent> events,
                                 ConceptId index_concept_id) {
  std::optional<Date> previous_dod;
  for (auto& t : truth) {
    std::optional<Date> earliest;
    for (const auto& e : events) {
      if (e.concept_id != index_concept_id || e.event_date > t.true_dod) continue;
      if (previous_dod && e.event_date <= *previous_dod) continue;
      if (!earliest || e.event_date < *earliest) earliest = e.event_date;
    }
    if (earliest) {
      PregnancyEpisode ep;
      ep.start_date = t.true_start;
      ep.dod = t.true_dod;
      t.index_event_week = gestational_week_of(*earliest, ep).week;
    } else {
      t.index_event_week.reset();
    }
    previous_dod = t.true_dod;
  }
}

inline Cohort generate_cohort(const SynthConfig& config, const Registries& registries) {
  config.validate();
  if (registries.ga.empty() || registries.dod.empty()) throw ConfigError("synth: registries are empty");
  const ConceptPools pools(registries);
  Cohort cohort;
  for (std::size_t i = 0; i < config.n_persons; ++i) {
    const auto pid = static_cast<PersonId>(i + 1);
    Cohort one;
    generate_person(config, pools, pid, one);
    inject_noise(one.events, one.truth, config.noise, registries, pools, config.index_concept_id, config.seed,
                 one.noise_log);
    std::sort(one.events.begin(), one.events.end(), canonical_less);
    annotate_index_weeks(one.truth, one.events, config.index_concept_id);
    for (auto& p : one.persons) cohort.persons.push_back(std::move(p));
    cohort.events.insert(cohort.events.end(), one.events.begin(), one.events.end());
    for (auto& t : one.truth) cohort.truth.push_back(std::move(t));
    cohort.noise_log.insert(cohort.noise_log.end(), one.noise_log.begin(), one.noise_log.end());
  }
  return cohort;
}

inline std::string write_persons(std::span<const Person> persons) {
  csv::Writer w;
  w.row({"person_id", "birth_date", "sex", "race", "ethnicity"});
  for (const auto& p : persons) {
    w.row({std::to_string(p.person_id), p.birth_date.to_string(), p.sex, p.race, p.ethnicity});
  }
  return w.str();
}

inline std::string write_events(std::span<const ClinicalEvent> events) {
  csv::Writer w;
  w.row({"person_id", "concept_id", "domain", "event_date"});
  for (const auto& e : events) {
    w.row({std::to_string(e.person_id), std::to_string(e.concept_id), to_string(e.domain), e.event_date.to_string()});
  }
  return w.str();
}

inline std::string write_noise_log(std::span<const NoiseLogEntry> log) {
  csv::Writer w;
  w.row({"person_id", "episode_index", "channel", "concept_id", "original_date", "new_date"});
  for (const auto& n : log) {
    w.row({std::to_string(n.person_id), std::to_string(n.episode_index), n.channel, std::to_string(n.concept_id),
           n.original_date ? n.original_date->to_string() : "", n.new_date ? n.new_date->to_string() : ""});
  }
  return w.str();
}

}  // namespace tedpc::synth
