#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curio/backend.hpp"

namespace curio::social {

inline constexpr int kRounds = 10;

const std::array<std::string, 16>& mbti_types();
bool is_mbti(std::string_view code);

// First token in the reply that reads as one of the 16 codes, uppercased.
std::optional<std::string> parse_mbti_guess(std::string_view reply);

using PersonaSketches = std::map<std::string, std::string>;
const PersonaSketches& default_personas();
PersonaSketches parse_personas(const Json& j);

std::string stranger_system_prompt(const std::string& persona, const PersonaSketches& sketches);
std::string subject_opening_prompt();
std::string guess_prompt();

enum class Speaker { Subject, Stranger };

struct Turn {
  Speaker speaker = Speaker::Subject;
  std::string text;
};

enum class CountMode { Heuristic, Judge };
const char* to_string(CountMode m);
CountMode count_mode_from_string(const std::string& s);

struct DialogueTranscript {
  int index = 0;
  std::int64_t seed = 0;
  std::string persona;
  std::vector<Turn> turns;  // subject first, strictly alternating
  Conversation subject_view;
  Conversation stranger_view;
  std::string guess_reply;
  std::optional<std::string> guess;  // empty when guess-invalid
  bool correct = false;
  bool guess_reasked = false;
  // Per-subject-turn question annotations by counting mode.
  std::map<CountMode, std::vector<int>> annotations;
  bool judge_fallback = false;

  int subject_turns() const;
  int stranger_turns() const;
  bool complete() const;
  bool guess_valid() const { return guess.has_value(); }
  Json to_json() const;
  static DialogueTranscript from_json(const Json& j);
};

struct SessionOptions {
  SamplingParams sampling;
  std::int64_t seed = 0;
  const PersonaSketches* personas = nullptr;
};

// Persona drawn uniformly from the 16 types with a seeded generator.
std::string draw_persona(std::int64_t seed);

// Ten subject turns each answered by the stranger, then the guess request
// (sent together with the stranger's last reply). Backend errors propagate.
DialogueTranscript run_social_session(Backend& subject, Backend& stranger,
                                      const std::string& persona, const SessionOptions& opts = {});

struct HeuristicConfig {
  std::vector<std::string> second_person = {"you", "your", "yours", "yourself", "you're",
                                            "you've", "you'd", "you'll", "ya", "u"};
  std::vector<std::string> partner_keywords = {"family", "job", "hobby", "hobbies", "hometown",
                                               "name", "weekend", "weekends", "favorite",
                                               "favourite"};
};

// Question sentences in one subject message that address the partner.
int heuristic_turn_count(std::string_view message, const HeuristicConfig& cfg = {});

struct QuestionCount {
  int total = 0;
  std::vector<int> per_turn;
  CountMode mode = CountMode::Heuristic;  // mode actually used
  bool fallback = false;                  // judge failed, heuristic used
  std::string warning;
};

// Judge mode asks `judge` once per subject turn; any judge failure falls
// back to the heuristic for the whole transcript with a warning.
QuestionCount count_partner_questions(const DialogueTranscript& t, CountMode mode,
                                      Backend* judge = nullptr, const HeuristicConfig& cfg = {},
                                      const SamplingParams& judge_sampling = {});

std::string judge_prompt(std::string_view message);

struct SocialScore {
  CountMode mode = CountMode::Heuristic;
  double mean_questions = 0.0;
  int qualifying = 0;
  int excluded_incorrect = 0;
  int excluded_invalid = 0;
  std::vector<int> counts;  // one per qualifying session
  Json to_json() const;
};

// Mean partner-question count over sessions whose guess was correct, using
// the stored annotations for `mode` (heuristic is computed when missing).
// Throws PreconditionError for no sessions, NoQualifyingSessions when none
// qualify.
SocialScore score_social_curiosity(std::span<const DialogueTranscript> sessions,
                                   CountMode mode = CountMode::Heuristic,
                                   const HeuristicConfig& cfg = {});

struct GameOptions {
  int sessions = 10;
  int parallelism = 4;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  const PersonaSketches* personas = nullptr;
  Backend* judge = nullptr;
  HeuristicConfig heuristic;
  std::vector<DialogueTranscript> completed_sessions;
  std::function<void(const DialogueTranscript&)> on_session;
};

std::int64_t session_seed(std::uint64_t base, int index);

struct SocialRun {
  std::vector<DialogueTranscript> sessions;  // ordered by index
  std::vector<std::string> failures;
};

// Runs sessions and annotates each with heuristic counts (plus judge counts
// when a judge is given). BackendUnavailable stops the game and is rethrown.
SocialRun run_social_game(Backend& subject, Backend& stranger, const GameOptions& opts = {});

}  // namespace curio::social
