// Shared fixtures for the unit and acceptance suites.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "tedpc/tedpc.hpp"

namespace tedpc::testing {

inline Date D(const char* iso) {
  const auto d = Date::parse(iso);
  if (!d) throw std::invalid_argument(std::string("bad test date ") + iso);
  return *d;
}

inline ClinicalEvent ev(PersonId pid, ConceptId cid, Domain domain, const char* iso) {
  return ClinicalEvent{pid, cid, domain, D(iso)};
}

inline std::string data_path(const char* name) { return std::string(TEDPC_DEFAULT_DATA_DIR) + "/" + name; }
inline std::string fixture(const char* name) { return std::string(TEDPC_TEST_DATA_DIR) + "/" + name; }

inline const Registries& shipped() {
  static const Registries reg{load_ga_concepts(data_path("ga_concepts.csv")),
                              load_dod_concepts(data_path("dod_concepts.csv"))};
  return reg;
}

inline GAConceptSpec ga_spec(ConceptId id, int lo, int hi) {
  GAConceptSpec s;
  s.concept_id = id;
  s.name = "concept " + std::to_string(id);
  s.week_low = lo;
  s.week_high = hi;
  s.accuracy = classify_accuracy(lo, hi);
  return s;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("tedpc_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr, interleaved
};

inline CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + TEDPC_CLI_PATH + "\" " + args + " 2>&1";
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// True when no person has two starts or two delivery dates within `window` days.
inline bool separated(std::span<const GestationStart> starts, std::span<const DeliveryRecord> dods, int window = 270) {
  std::map<PersonId, std::vector<Date>> s, d;
  for (const auto& g : starts) s[g.person_id].push_back(g.start_date);
  for (const auto& r : dods) d[r.person_id].push_back(r.dod);
  for (auto* m : {&s, &d}) {
    for (auto& [pid, dates] : *m) {
      std::sort(dates.begin(), dates.end());
      for (std::size_t i = 1; i < dates.size(); ++i) {
        if (dates[i] - dates[i - 1] <= window) return false;
      }
    }
  }
  return true;
}

}  // namespace tedpc::testing

namespace tedpc::testing {

inline InferenceResult infer_cohort(const synth::Cohort& cohort, unsigned threads = 1) {
  const EventTable events(cohort.events);
  return infer_episodes(events, shipped(), EngineConfig{}, MatchBounds{}, threads);
}

}  // namespace tedpc::testing
