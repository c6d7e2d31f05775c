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

// tedpc: pregnancy episode inference from normalized clinical event tables.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tedpc/tedpc.hpp"

namespace fs = std::filesystem;
using namespace tedpc;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInvariant = 4;

std::string data_dir() {
  if (const char* env = std::getenv("TEDPC_DATA_DIR"); env && *env) return env;
  return TEDPC_DEFAULT_DATA_DIR;
}

// Relative paths that do not exist under the working directory are retried
// under TEDPC_DATA_DIR.
std::string resolve_input(const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute() || fs::exists(p)) return path;
  if (const char* env = std::getenv("TEDPC_DATA_DIR"); env && *env) {
    const auto alt = fs::path(env) / p;
    if (fs::exists(alt)) return alt.string();
  }
  return path;
}

std::string require_input(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string("missing required flag ") + flag);
  const auto resolved = resolve_input(path);
  if (!fs::exists(resolved)) throw InputError(std::string(flag) + ": no such file: " + path);
  return resolved;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
}

std::string out_path(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

Registries load_registries(const RunConfig& cfg) {
  Registries reg;
  reg.ga = load_ga_concepts(require_input(cfg.ga_concepts, "--ga-concepts"));
  reg.dod = load_dod_concepts(require_input(cfg.dod_concepts, "--dod-concepts"));
  return reg;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Flags that override RunConfig values when given on the command line.
struct RunFlags {
  std::string config_path;
  bool print_config = false;
  std::string persons, events, ga_concepts, dod_concepts, index_events, out;
  int window_days = 0, match_min = 0, match_max = 0;
  std::string cutoff;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool no_filter = false;
  bool cohorts = false;

  CLI::Option* o_persons = nullptr;
  CLI::Option* o_events = nullptr;
  CLI::Option* o_ga = nullptr;
  CLI::Option* o_dod = nullptr;
  CLI::Option* o_index = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_window = nullptr;
  CLI::Option* o_min = nullptr;
  CLI::Option* o_max = nullptr;
  CLI::Option* o_cutoff = nullptr;
  CLI::Option* o_threads = nullptr;
  CLI::Option* o_seed = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    app->add_flag("--print-config", print_config, "Print the effective configuration and exit");
    o_persons = app->add_option("--persons", persons, "persons.csv");
    o_events = app->add_option("--events", events, "events.csv");
    o_ga = app->add_option("--ga-concepts", ga_concepts, "GA concept set CSV");
    o_dod = app->add_option("--dod-concepts", dod_concepts, "delivery concept set CSV");
    o_index = app->add_option("--index-events", index_events, "index-event concept id list");
    o_out = app->add_option("--out", out, "output directory");
    o_window = app->add_option("--window-days", window_days, "clustering window in days (default 270)");
    o_min = app->add_option("--match-min", match_min, "minimum gestation days for matching (default 140)");
    o_max = app->add_option("--match-max", match_max, "maximum gestation days for matching (default 308)");
    o_cutoff = app->add_option("--cutoff", cutoff, "pandemic cutoff date (default 2020-03-01)");
    o_threads = app->add_option("--threads", threads, "worker threads");
    o_seed = app->add_option("--seed", seed, "random seed");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    cfg.ga_concepts = (fs::path(data_dir()) / "ga_concepts.csv").string();
    cfg.dod_concepts = (fs::path(data_dir()) / "dod_concepts.csv").string();
    if (!config_path.empty()) merge_json(cfg, load_json_file(require_input(config_path, "--config")), config_path);
    if (o_persons->count()) cfg.persons = persons;
    if (o_events->count()) cfg.events = events;
    if (o_ga->count()) cfg.ga_concepts = ga_concepts;
    if (o_dod->count()) cfg.dod_concepts = dod_concepts;
    if (o_index->count()) cfg.index_events = index_events;
    if (o_out->count()) cfg.out = out;
    if (o_window->count()) cfg.engine.window_days = window_days;
    if (o_min->count()) cfg.bounds.min_days = match_min;
    if (o_max->count()) cfg.bounds.max_days = match_max;
    if (o_cutoff->count()) {
      const auto d = Date::parse(cutoff);
      if (!d) throw ConfigError("--cutoff: not an ISO-8601 date: " + cutoff);
      cfg.cutoff = *d;
    }
    if (o_threads->count()) cfg.threads = threads;
    if (o_seed->count()) cfg.seed = seed;
    if (no_filter) cfg.apply_cohort_filter = false;
    if (cohorts) cfg.write_cohorts = true;
    cfg.validate();
    return cfg;
  }
};

void check_invariants(const InferenceResult& r, const EngineConfig& engine, const MatchBounds& bounds) {
  auto breach = [](const std::string& m) { throw InvariantError(m); };
  for (std::size_t i = 1; i < r.ga_cohort.size(); ++i) {
    const auto& a = r.ga_cohort[i - 1];
    const auto& b = r.ga_cohort[i];
    if (a.person_id == b.person_id && b.start_date - a.start_date <= engine.window_days) {
      breach("person " + std::to_string(a.person_id) + " has two starts within the window");
    }
  }
  for (std::size_t i = 1; i < r.dod_cohort.size(); ++i) {
    const auto& a = r.dod_cohort[i - 1];
    const auto& b = r.dod_cohort[i];
    if (a.person_id == b.person_id && a.dod - b.dod <= engine.window_days) {
      breach("person " + std::to_string(a.person_id) + " has two delivery dates within the window");
    }
  }
  for (const auto& e : r.episodes) {
    if (e.gestation_days != e.dod - e.start_date || e.gestation_days < bounds.min_days ||
        e.gestation_days > bounds.max_days) {
      breach("episode for person " + std::to_string(e.person_id) + " violates gestation bounds");
    }
  }
}

int run_infer(const RunFlags& flags) {
  const auto cfg = flags.resolve();
  if (flags.print_config) {
    std::cout << to_json(cfg).dump(2) << "\n";
    return 0;
  }
  const auto persons_path = require_input(cfg.persons, "--persons");
  const auto events_path = require_input(cfg.events, "--events");
  const auto registries = load_registries(cfg);
  const auto persons = load_persons(persons_path);
  const auto events = load_events(events_path, persons, &registries);

  const auto inference = infer_episodes(events, registries, cfg.engine, cfg.bounds, cfg.threads);
  check_invariants(inference, cfg.engine, cfg.bounds);

  std::vector<PregnancyEpisode> episodes = inference.episodes;
  std::vector<Exclusion> exclusions;
  if (cfg.apply_cohort_filter) {
    auto filtered = apply_cohort_filters(episodes, persons, cfg.cohort);
    episodes = std::move(filtered.retained);
    exclusions = std::move(filtered.excluded);
  }

  ensure_out_dir(cfg.out);
  const auto text = write_episodes(episodes);
  {
    std::ofstream f(out_path(cfg.out, "episodes.csv"), std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + out_path(cfg.out, "episodes.csv"));
    f << text;
  }
  build_diagnostics(events, inference, exclusions).writer.save(out_path(cfg.out, "diagnostics.csv"));
  if (cfg.write_cohorts) {
    std::ofstream(out_path(cfg.out, "ga_cohort.csv"), std::ios::binary) << write_ga_cohort(inference.ga_cohort);
    std::ofstream(out_path(cfg.out, "dod_cohort.csv"), std::ios::binary) << write_dod_cohort(inference.dod_cohort);
  }
  std::cerr << "persons: " << persons.size() << ", events: " << events.size()
            << ", quarantined: " << events.quarantine.size() << ", starts: " << inference.ga_cohort.size()
            << ", deliveries: " << inference.dod_cohort.size() << ", episodes: " << episodes.size()
            << ", unmatched starts: " << inference.unmatched_starts.size()
            << ", unmatched deliveries: " << inference.unmatched_dods.size()
            << ", excluded: " << exclusions.size() << "\n";
  return 0;
}

// Persons table for commands that only need events keyed by known episodes.
PersonTable persons_or_from_episodes(const std::string& persons_path, const std::vector<PregnancyEpisode>& episodes) {
  if (!persons_path.empty()) return load_persons(require_input(persons_path, "--persons"));
  std::set<PersonId> ids;
  for (const auto& e : episodes) ids.insert(e.person_id);
  std::vector<Person> persons;
  for (auto id : ids) persons.push_back({id, *Date::from_ymd(1970, 1, 1), "", "", ""});
  return PersonTable(std::move(persons));
}

int run_timeline(const RunFlags& flags, const std::string& episodes_flag) {
  const auto cfg = flags.resolve();
  if (flags.print_config) {
    std::cout << to_json(cfg).dump(2) << "\n";
    return 0;
  }
  const auto episodes = load_episodes(require_input(episodes_flag, "--episodes"));
  const auto index = load_concept_id_set(require_input(cfg.index_events, "--index-events"));
  const auto persons = persons_or_from_episodes(cfg.persons, episodes);
  const auto events = load_events(require_input(cfg.events, "--events"), persons);
  const auto scoped = scope_index_events(episodes, events, index);

  csv::Writer w;
  w.row({"person_id", "episode_index", "index_concept_id", "event_date", "gestational_week", "trimester"});
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    for (const auto& e : scoped[i]) {
      const auto timing = gestational_week_of(e.event_date, episodes[i]);
      w.row({std::to_string(episodes[i].person_id), std::to_string(episodes[i].episode_index),
             std::to_string(e.concept_id), e.event_date.to_string(), std::to_string(timing.week),
             to_string(timing.trimester)});
    }
  }
  ensure_out_dir(cfg.out);
  w.save(out_path(cfg.out, "timing.csv"));
  return 0;
}

int run_stats(const RunFlags& flags, const std::string& episodes_flag, const std::string& strata_path,
              const std::vector<std::string>& comorbidity_flags, bool unsuppressed) {
  const auto cfg = flags.resolve();
  if (flags.print_config) {
    std::cout << to_json(cfg).dump(2) << "\n";
    return 0;
  }
  const auto episodes = load_episodes(require_input(episodes_flag, "--episodes"));
  const auto persons = load_persons(require_input(cfg.persons, "--persons"));
  const auto events = load_events(require_input(cfg.events, "--events"), persons);
  const auto index = load_concept_id_set(require_input(cfg.index_events, "--index-events"));

  StrataSpec strata;
  strata.cohort = {cfg.cohort.window_first, cfg.cohort.window_last};
  strata.cutoff = cfg.cutoff;
  strata.threshold = cfg.suppression_threshold;
  if (!strata_path.empty()) strata = load_strata_spec(require_input(strata_path, "--strata"));
  if (flags.o_cutoff->count()) strata.cutoff = cfg.cutoff;

  std::vector<std::pair<std::string, std::string>> named;
  for (const auto& spec : comorbidity_flags) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--comorbidity expects name=path, got `" + spec + "`");
    const auto name = spec.substr(0, eq);
    const auto path = resolve_input(spec.substr(eq + 1));
    if (!fs::exists(path)) throw InputError("comorbidity set `" + name + "`: no such file: " + spec.substr(eq + 1));
    named.emplace_back(name, path);
  }
  const auto comorbidities = load_comorbidity_sets(named);

  const auto histogram = infection_week_histogram(episodes, events, index);
  const auto table = stratified_table(episodes, persons, events, index, comorbidities, strata);

  ensure_out_dir(cfg.out);
  {
    std::ofstream f(out_path(cfg.out, "histogram.csv"), std::ios::binary | std::ios::trunc);
    f << write_histogram(histogram, unsuppressed, strata.threshold);
  }
  {
    std::ofstream f(out_path(cfg.out, "report.md"), std::ios::binary | std::ios::trunc);
    f << "# Index events by gestational week\n\n| Week | Episodes |\n|---:|---:|\n";
    for (std::size_t week = 0; week < histogram.counts.size(); ++week) {
      const auto n = static_cast<std::int64_t>(histogram.counts[week]);
      f << "| " << (week == 0 ? std::string("0 (pre-pregnancy)") : std::to_string(week)) << " | "
        << (unsuppressed ? std::to_string(n) : suppress_small_cells(n, strata.threshold)) << " |\n";
    }
    f << "\n# Characteristics by pandemic period and index-event timing\n\n" << table.render_markdown(unsuppressed);
  }
  {
    std::ofstream f(out_path(cfg.out, "report.csv"), std::ios::binary | std::ios::trunc);
    f << table.render_csv(unsuppressed);
  }
  return 0;
}

int run_simulate(const std::string& config_path, bool print_config, const RunFlags& flags, std::size_t n_persons,
                 bool n_given) {
  synth::SynthConfig sc;
  if (!config_path.empty()) synth::merge_json(sc, load_json_file(require_input(config_path, "--config")));
  if (flags.o_seed->count()) sc.seed = flags.seed;
  if (n_given) sc.n_persons = n_persons;
  if (flags.o_window->count()) sc.window_days = flags.window_days;
  sc.validate();
  if (print_config) {
    std::cout << synth::to_json(sc).dump(2) << "\n";
    return 0;
  }
  RunConfig rc;
  rc.ga_concepts = flags.o_ga->count() ? flags.ga_concepts : (fs::path(data_dir()) / "ga_concepts.csv").string();
  rc.dod_concepts = flags.o_dod->count() ? flags.dod_concepts : (fs::path(data_dir()) / "dod_concepts.csv").string();
  const auto registries = load_registries(rc);
  const auto cohort = synth::generate_cohort(sc, registries);
  const std::string out = flags.o_out->count() ? flags.out : ".";
  ensure_out_dir(out);
  auto save = [&](const char* name, const std::string& text) {
    std::ofstream f(out_path(out, name), std::ios::binary | std::ios::trunc);
    if (!f) throw InputError(std::string("cannot write ") + out_path(out, name));
    f << text;
  };
  save("persons.csv", synth::write_persons(cohort.persons));
  save("events.csv", synth::write_events(cohort.events));
  save("truth.csv", write_truth(cohort.truth));
  save("noise_log.csv", synth::write_noise_log(cohort.noise_log));
  save("index_concepts.csv", "concept_id\n" + std::to_string(sc.index_concept_id) + "\n");
  std::cerr << "persons: " << cohort.persons.size() << ", events: " << cohort.events.size()
            << ", gestations: " << cohort.truth.size() << ", noise entries: " << cohort.noise_log.size() << "\n";
  return 0;
}

int run_evaluate(const std::string& matrix_path, const std::string& weighting_text, const std::string& truth_path,
                 const std::string& episodes_path) {
  if (!matrix_path.empty()) {
    const auto weighting = parse_weighting(weighting_text);
    if (!weighting) throw ConfigError("--weighting must be linear or unweighted");
    const auto matrix = load_confusion_matrix(require_input(matrix_path, "--matrix"));
    const auto r = cohen_kappa(matrix, *weighting);
    std::printf("weighting: %s\n", std::string(to_string(r.weighting)).c_str());
    std::printf("observed_agreement: %.4f\n", r.observed_agreement);
    std::printf("expected_agreement: %.4f\n", r.expected_agreement);
    if (!r.ok()) {
      std::printf("kappa: undefined\n");
      throw InputError(matrix_path + ": " + r.error);
    }
    std::printf("kappa: %.4f\n", *r.kappa);
    return 0;
  }
  if (truth_path.empty() || episodes_path.empty()) {
    throw ConfigError("evaluate needs --matrix, or both --truth and --episodes");
  }
  const auto truth = load_truth(require_input(truth_path, "--truth"));
  const auto episodes = load_episodes(require_input(episodes_path, "--episodes"));
  std::cout << format_scorecard(round_trip_score(episodes, truth));
  return 0;
}

int run_phenotype(const std::string& vocabulary_path, const std::string& keywords, const std::string& domains,
                  bool include_nonstandard, bool include_invalid, const std::string& out) {
  PhenotypeQuery q;
  if (!keywords.empty()) q.keywords = split_list(keywords);
  if (q.keywords.empty()) throw ConfigError("--keywords must name at least one keyword");
  if (!domains.empty()) {
    q.domains.clear();
    for (const auto& d : split_list(domains)) {
      const auto parsed = parse_domain(d);
      if (!parsed) throw ConfigError("--domains: unknown domain `" + d + "`");
      q.domains.insert(*parsed);
    }
  }
  q.standard_only = !include_nonstandard;
  q.valid_only = !include_invalid;
  const auto vocab = load_vocabulary(require_input(vocabulary_path, "--vocabulary"));
  const auto hits = phenotype_search(vocab, q);
  csv::Writer w;
  w.row({"concept_id", "name", "domain", "standard", "valid"});
  for (const auto& e : hits) {
    w.row({std::to_string(e.concept_id), e.name, e.domain_name, e.standard ? "true" : "false",
           e.valid ? "true" : "false"});
  }
  if (out.empty()) {
    std::cout << w.str();
  } else {
    w.save(out);
  }
  std::cerr << hits.size() << " of " << vocab.size() << " concepts matched\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tedpc: pregnancy episode inference from clinical event tables"};
  app.require_subcommand(1);

  auto* phenotype = app.add_subcommand("phenotype", "Keyword search over a vocabulary file");
  std::string vocabulary, keywords, domains, phenotype_out;
  bool include_nonstandard = false, include_invalid = false;
  phenotype->add_option("--vocabulary", vocabulary, "vocabulary.csv")->required();
  phenotype->add_option("--keywords", keywords, "comma-separated keywords (default trimester,gestation,pregnan)");
  phenotype->add_option("--domains", domains, "comma-separated domains (default Condition,Observation,Procedure,Measurement)");
  phenotype->add_flag("--include-nonstandard", include_nonstandard, "Keep non-standard concepts");
  phenotype->add_flag("--include-invalid", include_invalid, "Keep invalid (retired) concepts");
  phenotype->add_option("--out", phenotype_out, "output CSV (default stdout)");

  auto* infer = app.add_subcommand("infer", "Infer pregnancy episodes");
  RunFlags infer_flags;
  infer_flags.attach(infer);
  infer->add_flag("--no-cohort-filter", infer_flags.no_filter, "Keep episodes outside the cohort window/age range");
  infer->add_flag("--cohorts", infer_flags.cohorts, "Also write ga_cohort.csv and dod_cohort.csv");

  auto* timeline = app.add_subcommand("timeline", "Map index events onto episode gestational weeks");
  RunFlags timeline_flags;
  timeline_flags.attach(timeline);
  std::string timeline_episodes;
  timeline->add_option("--episodes", timeline_episodes, "episodes.csv from infer");

  auto* stats = app.add_subcommand("stats", "Gestational-week histogram and stratified tables");
  RunFlags stats_flags;
  stats_flags.attach(stats);
  std::string stats_episodes, strata;
  std::vector<std::string> comorbidity;
  bool unsuppressed = false;
  stats->add_option("--episodes", stats_episodes, "episodes.csv from infer");
  stats->add_option("--strata", strata, "strata spec JSON");
  stats->add_option("--comorbidity", comorbidity, "name=path concept id list (repeatable)");
  stats->add_flag("--unsuppressed", unsuppressed, "Show raw counts below the suppression threshold");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort with ground truth");
  RunFlags sim_flags;
  std::string sim_config;
  bool sim_print = false;
  std::size_t n_persons = 0;
  simulate->add_option("--config", sim_config, "synthetic cohort JSON config");
  simulate->add_flag("--print-config", sim_print, "Print the effective synthetic config and exit");
  auto* n_opt = simulate->add_option("--n-persons", n_persons, "number of persons");
  sim_flags.o_seed = simulate->add_option("--seed", sim_flags.seed, "random seed");
  sim_flags.o_out = simulate->add_option("--out", sim_flags.out, "output directory");
  sim_flags.o_ga = simulate->add_option("--ga-concepts", sim_flags.ga_concepts, "GA concept set CSV");
  sim_flags.o_dod = simulate->add_option("--dod-concepts", sim_flags.dod_concepts, "delivery concept set CSV");
  sim_flags.o_window = simulate->add_option("--window-days", sim_flags.window_days, "minimum spacing between generated gestations");

  auto* evaluate = app.add_subcommand("evaluate", "Cohen's kappa or round-trip scoring");
  std::string matrix, weighting = "linear", truth, eval_episodes;
  evaluate->add_option("--matrix", matrix, "square labeled confusion matrix CSV");
  evaluate->add_option("--weighting", weighting, "linear | unweighted (default linear)");
  evaluate->add_option("--truth", truth, "truth.csv from simulate");
  evaluate->add_option("--episodes", eval_episodes, "episodes.csv from infer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*phenotype) return run_phenotype(vocabulary, keywords, domains, include_nonstandard, include_invalid, phenotype_out);
    if (*infer) return run_infer(infer_flags);
    if (*timeline) return run_timeline(timeline_flags, timeline_episodes);
    if (*stats) return run_stats(stats_flags, stats_episodes, strata, comorbidity, unsuppressed);
    if (*simulate) return run_simulate(sim_config, sim_print, sim_flags, n_persons, n_opt->count() > 0);
    if (*evaluate) return run_evaluate(matrix, weighting, truth, eval_episodes);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvariantError& e) {
    std::cerr << "internal invariant breach: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitConfig;
}
