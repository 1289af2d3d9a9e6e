#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curio/backend.hpp"

namespace curio::letters {

struct WordPuzzle {
  std::string answer;                 // nine lowercase letters
  std::vector<int> masked_positions;  // 2 or 4 distinct indices, ascending

  // Throws PreconditionError when the invariants do not hold.
  void validate() const;
  // Answer with '_' at each masked position.
  std::string stimulus() const;
  // True if `word` agrees with every unmasked letter of the stimulus.
  bool fits(std::string_view word) const;
};

std::vector<WordPuzzle> default_word_list();
std::vector<WordPuzzle> parse_word_list(const Json& j);
std::vector<WordPuzzle> load_word_list(const std::string& path);

enum class PeekLevel { VeryNeed, Need, NotVeryNeed, NoNeed };

int weight(PeekLevel level);
bool is_peek(PeekLevel level);
const char* to_string(PeekLevel level);
PeekLevel peek_level_from_string(std::string_view s);
// The reply option offered to the model for this level.
const char* option_text(PeekLevel level);

struct PeekParse {
  PeekLevel level;
  std::string reason;
};

// Earliest canonical phrase in the reply; the longer phrase wins when two
// start at the same place ("not very need" over "need"). Throws
// UnparseableResponse when none of the four phrases occurs.
PeekParse parse_peek(std::string_view reply);

std::string completion_prompt(const WordPuzzle& puzzle);
std::string peek_prompt();
std::string peek_reask_prompt();

// First nine-letter word in the reply consistent with the stimulus, else the
// first nine-letter word, else empty.
std::string extract_completion(std::string_view reply, const WordPuzzle& puzzle);

struct LettersTrial {
  int word_index = 0;
  int repeat = 0;
  WordPuzzle puzzle;
  std::int64_t seed = 0;
  Conversation transcript;
  std::string completion;
  bool correct = false;  // recorded only, never sent to the model
  PeekLevel level = PeekLevel::NoNeed;
  std::string reason;
  bool reasked = false;

  Json to_json() const;
  static LettersTrial from_json(const Json& j);
};

struct TrialOptions {
  SamplingParams sampling;
  std::int64_t seed = 0;
};

// Two turns: the completion request, then the peek question. Throws
// UnparseableResponse("unclassifiable peek response") after one re-ask.
LettersTrial run_letters_trial(Backend& backend, const WordPuzzle& puzzle,
                               const TrialOptions& opts = {});

struct GameOptions {
  int repeats = 10;
  int parallelism = 4;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  std::vector<LettersTrial> completed_trials;
  std::function<void(const LettersTrial&)> on_trial;
};

struct LettersRun {
  std::vector<LettersTrial> trials;  // ordered by (word_index, repeat)
  std::vector<std::string> failures;
};

std::int64_t trial_seed(std::uint64_t base, int word_index, int repeat);

// Every puzzle `repeats` times. Failed trials are listed, not scored.
// BackendUnavailable stops the game and is rethrown.
LettersRun run_letters_game(Backend& backend, std::span<const WordPuzzle> puzzles,
                            const GameOptions& opts = {});

struct PeekSummary {
  int n = 0;
  double peek_rate = 0.0;
  double intensity = 0.0;  // mean weight / 3
  Json to_json() const;
};

struct InfoSeekScore {
  PeekSummary overall;
  std::map<int, PeekSummary> by_mask_size;
  std::map<PeekLevel, int> level_counts;
  double completion_accuracy = 0.0;
  Json to_json() const;
};

// Throws PreconditionError on an empty list.
InfoSeekScore score_information_seeking(std::span<const LettersTrial> trials);

}  // namespace curio::letters
