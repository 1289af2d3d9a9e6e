#pragma once

#include <functional>
#include <string>
#include <vector>

#include "curio/config.hpp"
#include "curio/letters.hpp"
#include "curio/reasoning.hpp"
#include "curio/scale.hpp"
#include "curio/social.hpp"
#include "curio/underwater.hpp"

namespace curio {

// Instruments and task sets a run uses, loaded once from the config.
struct RunData {
  std::vector<scale::ScaleItem> items;
  scale::LexiconSet lexicons;
  std::vector<letters::WordPuzzle> words;
  underwater::PathTable path_table;
  social::PersonaSketches personas;
  std::vector<reasoning::ReasoningTask> tasks;  // empty unless reason_eval.tasks is set
  Json fingerprints;                            // name -> sha256 of canonical JSON
};

RunData load_run_data(const RunConfig& cfg);

// Hash over the protocol settings and data fingerprints.
std::string protocol_hash(const RunConfig& cfg, const RunData& data);

std::uint64_t suite_seed(std::uint64_t run_seed, Suite s);

struct RunOptions {
  bool resume = false;
  // Prebuilt backends; when null they are made from the config descriptors.
  BackendPtr subject;
  BackendPtr stranger;
  BackendPtr judge;
  std::function<void(const std::string&)> log;
};

struct SuiteOutcome {
  Suite suite = Suite::Questionnaire;
  std::string status;  // complete | partial | aborted | failed
  std::string detail;
  Json to_json() const;
};

struct RunResult {
  std::string dir;
  std::string protocol_hash;
  std::vector<SuiteOutcome> suites;
  bool all_complete() const;
};

// Runs the selected suites in order into cfg.out. Each finished unit is
// appended to the suite's units.jsonl; with `resume` those units are reused
// and only the missing ones are asked. Final record files are rewritten in
// key order, so an interrupted-and-resumed run ends with the same files as an
// uninterrupted one. An existing directory needs `resume` and a matching
// protocol hash.
RunResult run_suite(const RunConfig& cfg, const RunOptions& opts = {});

// Run-directory layout shared with the report.
namespace layout {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kUnits = "units.jsonl";
std::string questionnaire_dir(const scale::PerturbationSpec& p);  // "questionnaire/<label>"
}  // namespace layout

}  // namespace curio
