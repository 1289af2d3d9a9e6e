#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curio/backend.hpp"
#include "curio/reasoning.hpp"
#include "curio/scale.hpp"
#include "curio/social.hpp"

namespace curio {

enum class Suite { Questionnaire, Letters, Underwater, Social, ReasonEval };

const char* to_string(Suite s);  // "questionnaire", "letters", ...
Suite suite_from_string(const std::string& s);
const std::vector<Suite>& all_suites();

struct QuestionnaireConfig {
  std::string item_bank;  // empty: built-in placeholder bank
  std::string lexicon;    // empty: built-in lexicon
  scale::SdEstimator estimator = scale::SdEstimator::ItemScores;
  bool allow_partial = false;
};

struct LettersConfig {
  std::string word_list;
  int repeats = 10;
};

struct UnderwaterConfig {
  std::string path_table;
  int sessions = 0;  // 0: use repetitions
};

struct SocialConfig {
  std::string personas;
  int sessions = 0;  // 0: use repetitions
  social::CountMode count_mode = social::CountMode::Heuristic;
  std::vector<std::string> partner_keywords;  // empty: built-in list
};

struct ReasonEvalConfig {
  std::string tasks;
  reasoning::TaskFormat format = reasoning::TaskFormat::Native;
  std::string benchmark = "custom";
  std::vector<reasoning::PromptMode> modes = {reasoning::kPromptModes.begin(),
                                              reasoning::kPromptModes.end()};
  reasoning::MatcherConfig matcher;
};

struct BaselineConfig {
  std::string file;         // empty: built-in registry entry
  Json override_patch;      // null: no override
  std::string override_id;  // id of the derived entry
};

struct RunConfig {
  BackendSpec backend;
  std::optional<BackendSpec> stranger_backend;  // defaults to `backend`
  std::optional<BackendSpec> judge_backend;     // required for judge counting
  std::vector<Suite> suites;
  int repetitions = 10;
  int parallelism = 4;
  std::vector<scale::PerturbationSpec> perturbations = {scale::PerturbationSpec{}};
  std::string out;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  std::string model_label;  // empty: backend label

  QuestionnaireConfig questionnaire;
  LettersConfig letters;
  UnderwaterConfig underwater;
  SocialConfig social;
  ReasonEvalConfig reason_eval;
  BaselineConfig baseline;

  bool has_suite(Suite s) const;
  std::string label() const;
  const BackendSpec& stranger() const { return stranger_backend ? *stranger_backend : backend; }
  int underwater_sessions() const { return underwater.sessions > 0 ? underwater.sessions : repetitions; }
  int social_sessions() const { return social.sessions > 0 ? social.sessions : repetitions; }

  // Full configuration, suitable for load_config.
  Json to_json() const;
  // Everything that shapes what is asked and how it is scored. Excludes how
  // backends are reached (kind, URLs, cassettes), the output directory,
  // parallelism and the suite selection, so record and replay agree.
  Json protocol_json() const;
};

// Throws ConfigError listing every offending key or value. Relative file
// paths are resolved against `base_dir`.
RunConfig parse_config(const Json& j, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

}  // namespace curio
