#include "curio/letters.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

namespace curio::letters {

namespace {

constexpr std::size_t kWordLength = 9;

struct LevelInfo {
  PeekLevel level;
  const char* name;
  const char* phrase;  // lowercase canonical phrase used for matching
  const char* option;
  int weight;
};

constexpr std::array<LevelInfo, 4> kLevels = {{
    {PeekLevel::VeryNeed, "VeryNeed", "very need", "Very need, tell me the answer now", 3},
    {PeekLevel::Need, "Need", "need", "Need, I want to know the answer", 2},
    {PeekLevel::NotVeryNeed, "NotVeryNeed", "not very need", "Not very need, I may know the answer", 1},
    {PeekLevel::NoNeed, "NoNeed", "no need", "No need, I know the answer", 0},
}};

const LevelInfo& level_info(PeekLevel l) { return kLevels[static_cast<std::size_t>(l)]; }

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string> letter_runs(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_alpha(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

// ---- puzzles ---------------------------------------------------------------

void WordPuzzle::validate() const {
  if (answer.size() != kWordLength ||
      !std::all_of(answer.begin(), answer.end(),
                   [](char c) { return c >= 'a' && c <= 'z'; })) {
    throw PreconditionError("puzzle answer must be nine lowercase letters: '" + answer + "'");
  }
  if (masked_positions.size() != 2 && masked_positions.size() != 4) {
    throw PreconditionError("puzzle '" + answer + "' must mask 2 or 4 letters");
  }
  std::set<int> seen;
  for (int p : masked_positions) {
    if (p < 0 || p >= static_cast<int>(kWordLength) || !seen.insert(p).second) {
      throw PreconditionError("puzzle '" + answer + "' has a bad masked position");
    }
  }
}

std::string WordPuzzle::stimulus() const {
  std::string s = answer;
  for (int p : masked_positions) s[static_cast<std::size_t>(p)] = '_';
  return s;
}

bool WordPuzzle::fits(std::string_view word) const {
  if (word.size() != answer.size()) return false;
  const std::string stim = stimulus();
  for (std::size_t i = 0; i < stim.size(); ++i) {
    const char w = static_cast<char>(std::tolower(static_cast<unsigned char>(word[i])));
    if (stim[i] != '_' && stim[i] != w) return false;
    if (stim[i] == '_' && !is_alpha(w)) return false;
  }
  return true;
}

std::vector<WordPuzzle> parse_word_list(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("word list must be a non-empty JSON array");
  std::vector<WordPuzzle> out;
  for (const auto& e : j) {
    WordPuzzle p;
    try {
      p.answer = e.at("answer").get<std::string>();
      p.masked_positions = e.at("masked_positions").get<std::vector<int>>();
    } catch (const Json::exception& ex) {
      throw ConfigError(std::string("word list entry: ") + ex.what());
    }
    std::sort(p.masked_positions.begin(), p.masked_positions.end());
    try {
      p.validate();
    } catch (const PreconditionError& ex) {
      throw ConfigError(ex.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<WordPuzzle> default_word_list() {
  static const std::vector<WordPuzzle> list = parse_word_list(Json::parse(embedded::k_words));
  return list;
}

std::vector<WordPuzzle> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open word list " + path);
  try {
    return parse_word_list(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError("word list " + path + ": " + e.what());
  }
}

// ---- peek levels -----------------------------------------------------------

int weight(PeekLevel level) { return level_info(level).weight; }
bool is_peek(PeekLevel level) { return level == PeekLevel::VeryNeed || level == PeekLevel::Need; }
const char* to_string(PeekLevel level) { return level_info(level).name; }
const char* option_text(PeekLevel level) { return level_info(level).option; }

PeekLevel peek_level_from_string(std::string_view s) {
  for (const auto& l : kLevels) {
    if (s == l.name) return l.level;
  }
  throw ConfigError("unknown peek level '" + std::string(s) + "'");
}

PeekParse parse_peek(std::string_view reply) {
  const std::string lower = text::to_lower(reply);
  std::optional<std::size_t> best_pos;
  std::size_t best_len = 0;
  PeekLevel best = PeekLevel::NoNeed;
  for (const auto& l : kLevels) {
    const std::string_view phrase = l.phrase;
    std::size_t from = 0;
    while (true) {
      const std::size_t pos = lower.find(phrase, from);
      if (pos == std::string::npos) break;
      const bool left_ok = pos == 0 || !is_alpha(lower[pos - 1]);
      const std::size_t end = pos + phrase.size();
      const bool right_ok = end >= lower.size() || !is_alpha(lower[end]);
      if (left_ok && right_ok) {
        if (!best_pos || pos < *best_pos || (pos == *best_pos && phrase.size() > best_len)) {
          best_pos = pos;
          best_len = phrase.size();
          best = l.level;
        }
        break;
      }
      from = pos + 1;
    }
  }
  if (!best_pos) throw UnparseableResponse("unclassifiable peek response", std::string(reply));

  // The reason is whatever follows the chosen option.
  std::string rest(reply.substr(*best_pos + best_len));
  const std::string option_tail =
      text::to_lower(std::string(option_text(best)).substr(best_len));
  if (text::to_lower(rest).rfind(option_tail, 0) == 0) rest = rest.substr(option_tail.size());
  std::size_t k = 0;
  while (k < rest.size() && (std::isspace(static_cast<unsigned char>(rest[k])) ||
                             std::string_view(".,;:'\"!-").find(rest[k]) != std::string_view::npos)) {
    ++k;
  }
  return {best, text::trim(rest.substr(k))};
}

std::string completion_prompt(const WordPuzzle& puzzle) {
  return "Please try to complete the following incomplete English words to earn a bonus, where "
         "'_' represents unknown letters. The word may be a complete word, or it may be the "
         "present participle, past tense, or past participle of a word. There is only one "
         "correct answer.\n\n" +
         puzzle.stimulus();
}

std::string peek_prompt() {
  return "Your completing may be wrong. Do you need to check the correct answer (but you will "
         "lose part of your bonus)? Please reply with: 'Very need, tell me the answer now' or "
         "'Need, I want to know the answer' or 'Not very need, I may know the answer' or 'No "
         "need, I know the answer', then give the reason about your choice.";
}

std::string peek_reask_prompt() {
  return "Please start your reply with exactly one of: 'Very need, tell me the answer now', "
         "'Need, I want to know the answer', 'Not very need, I may know the answer', 'No need, "
         "I know the answer'.";
}

std::string extract_completion(std::string_view reply, const WordPuzzle& puzzle) {
  const auto runs = letter_runs(reply);
  for (const auto& w : runs) {
    if (puzzle.fits(w)) return w;
  }
  for (const auto& w : runs) {
    if (w.size() == kWordLength) return w;
  }
  return "";
}

// ---- trials ----------------------------------------------------------------

Json LettersTrial::to_json() const {
  Json msgs = Json::array();
  for (const auto& m : transcript) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"word_index", word_index},
          {"repeat", repeat},
          {"answer", puzzle.answer},
          {"masked_positions", puzzle.masked_positions},
          {"seed", seed},
          {"messages", msgs},
          {"completion", completion},
          {"correct", correct},
          {"level", to_string(level)},
          {"weight", weight(level)},
          {"reason", reason},
          {"reasked", reasked}};
}

LettersTrial LettersTrial::from_json(const Json& j) {
  LettersTrial t;
  t.word_index = j.at("word_index").get<int>();
  t.repeat = j.at("repeat").get<int>();
  t.puzzle.answer = j.at("answer").get<std::string>();
  t.puzzle.masked_positions = j.at("masked_positions").get<std::vector<int>>();
  t.seed = j.at("seed").get<std::int64_t>();
  for (const auto& m : j.at("messages")) {
    t.transcript.push_back({role_from_string(m.at("role").get<std::string>()),
                            m.at("content").get<std::string>()});
  }
  t.completion = j.at("completion").get<std::string>();
  t.correct = j.at("correct").get<bool>();
  t.level = peek_level_from_string(j.at("level").get<std::string>());
  t.reason = j.value("reason", "");
  t.reasked = j.value("reasked", false);
  return t;
}

LettersTrial run_letters_trial(Backend& backend, const WordPuzzle& puzzle, const TrialOptions& opts) {
  puzzle.validate();
  LettersTrial t;
  t.puzzle = puzzle;
  t.seed = opts.seed;
  SamplingParams params = opts.sampling;
  params.seed = opts.seed;

  t.transcript.push_back(Message::user(completion_prompt(puzzle)));
  t.transcript.push_back(backend.chat(t.transcript, params));
  t.completion = extract_completion(t.transcript.back().content, puzzle);
  t.correct = t.completion == puzzle.answer;

  t.transcript.push_back(Message::user(peek_prompt()));
  t.transcript.push_back(backend.chat(t.transcript, params));
  std::optional<PeekParse> parsed;
  try {
    parsed = parse_peek(t.transcript.back().content);
  } catch (const UnparseableResponse&) {
    t.reasked = true;
    t.transcript.push_back(Message::user(peek_reask_prompt()));
    t.transcript.push_back(backend.chat(t.transcript, params));
    parsed = parse_peek(t.transcript.back().content);
  }
  t.level = parsed->level;
  t.reason = parsed->reason;
  return t;
}

std::int64_t trial_seed(std::uint64_t base, int word_index, int repeat) {
  return static_cast<std::int64_t>(derive_seed(base, {label_hash("letters"),
                                                      static_cast<std::uint64_t>(word_index),
                                                      static_cast<std::uint64_t>(repeat)}) &
                                   0x7fffffffULL);
}

LettersRun run_letters_game(Backend& backend, std::span<const WordPuzzle> puzzles,
                            const GameOptions& opts) {
  if (puzzles.empty()) throw PreconditionError("word list is empty");
  if (opts.repeats < 1) throw PreconditionError("repeats must be >= 1");
  for (const auto& p : puzzles) p.validate();

  const std::size_t reps = static_cast<std::size_t>(opts.repeats);
  std::vector<std::optional<LettersTrial>> slots(puzzles.size() * reps);
  for (const auto& t : opts.completed_trials) {
    if (t.word_index < 0 || t.word_index >= static_cast<int>(puzzles.size()) || t.repeat < 0 ||
        t.repeat >= opts.repeats) {
      continue;
    }
    slots[static_cast<std::size_t>(t.word_index) * reps + static_cast<std::size_t>(t.repeat)] = t;
  }
  std::vector<std::string> errors(slots.size());
  std::mutex mu;
  std::atomic<bool> stop{false};
  std::exception_ptr unavailable;

  parallel_for(slots.size(), opts.parallelism, [&](std::size_t idx) {
    if (slots[idx] || stop.load()) return;
    const int word = static_cast<int>(idx / reps);
    const int rep = static_cast<int>(idx % reps);
    TrialOptions topts{opts.sampling, trial_seed(opts.seed, word, rep)};
    try {
      LettersTrial t = run_letters_trial(backend, puzzles[static_cast<std::size_t>(word)], topts);
      t.word_index = word;
      t.repeat = rep;
      if (opts.on_trial) opts.on_trial(t);
      slots[idx] = std::move(t);
    } catch (const BackendUnavailable& e) {
      std::lock_guard lock(mu);
      stop = true;
      if (!unavailable) unavailable = std::current_exception();
      errors[idx] = e.what();
    } catch (const Error& e) {
      errors[idx] = e.what();
    }
  });

  LettersRun run;
  for (std::size_t idx = 0; idx < slots.size(); ++idx) {
    if (slots[idx]) {
      run.trials.push_back(std::move(*slots[idx]));
    } else if (!errors[idx].empty()) {
      run.failures.push_back("word " + std::to_string(idx / reps) + " repeat " +
                             std::to_string(idx % reps) + ": " + errors[idx]);
    }
  }
  if (unavailable) std::rethrow_exception(unavailable);
  return run;
}

// ---- scoring ---------------------------------------------------------------

Json PeekSummary::to_json() const {
  return {{"n", n}, {"peek_rate", peek_rate}, {"intensity", intensity}};
}

Json InfoSeekScore::to_json() const {
  Json masks = Json::object();
  for (const auto& [size, s] : by_mask_size) masks[std::to_string(size)] = s.to_json();
  Json levels = Json::object();
  for (const auto& [l, c] : level_counts) levels[to_string(l)] = c;
  return {{"overall", overall.to_json()},
          {"by_mask_size", masks},
          {"level_counts", levels},
          {"completion_accuracy", completion_accuracy}};
}

InfoSeekScore score_information_seeking(std::span<const LettersTrial> trials) {
  if (trials.empty()) throw PreconditionError("no letters trials to score");
  struct Acc {
    int n = 0, peeks = 0, weights = 0;
    PeekSummary summary() const {
      return {n, static_cast<double>(peeks) / n, static_cast<double>(weights) / (3.0 * n)};
    }
  };
  Acc all;
  std::map<int, Acc> by_mask;
  InfoSeekScore s;
  for (const auto& l : kLevels) s.level_counts[l.level] = 0;
  int correct = 0;
  for (const auto& t : trials) {
    for (Acc* a : {&all, &by_mask[static_cast<int>(t.puzzle.masked_positions.size())]}) {
      ++a->n;
      a->peeks += is_peek(t.level) ? 1 : 0;
      a->weights += weight(t.level);
    }
    ++s.level_counts[t.level];
    correct += t.correct ? 1 : 0;
  }
  s.overall = all.summary();
  for (const auto& [size, a] : by_mask) s.by_mask_size[size] = a.summary();
  s.completion_accuracy = static_cast<double>(correct) / static_cast<double>(trials.size());
  return s;
}

}  // namespace curio::letters
