#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "curio/backend.hpp"

namespace curio::underwater {

enum class Category { Certain, Medium, Unsure };

const char* to_string(Category c);    // "certain", "medium", "unsure"
const char* choice_label(Category c);  // "confirm", "medium confirm", "not sure"
Category category_from_string(const std::string& s);

inline constexpr std::array<Category, 3> kCategories = {Category::Certain, Category::Medium,
                                                        Category::Unsure};

struct UncertaintyLevel {
  enum class Kind { Certain, Medium, Unknown };
  Kind kind = Kind::Certain;
  int n = 1;  // number of fish types shown; 1 for Certain, 2..6 for Medium

  static UncertaintyLevel certain() { return {Kind::Certain, 1}; }
  static UncertaintyLevel medium(int n);
  static UncertaintyLevel unknown() { return {Kind::Unknown, 0}; }

  int option_count(int u_max) const { return kind == Kind::Unknown ? u_max : n; }
  Category category() const;
  // 1 -> Certain, 2..6 -> Medium, "?" -> Unknown
  static UncertaintyLevel from_json(const Json& j);
  Json to_json() const;
  bool operator==(const UncertaintyLevel&) const = default;
};

struct WindowPair {
  UncertaintyLevel left;
  UncertaintyLevel right;
  bool operator==(const WindowPair&) const = default;
};

struct PathTable {
  WindowPair initial;
  // rounds[r] gives the pair for round r + 2 keyed by the previous choice.
  std::vector<std::map<Category, WindowPair>> rounds;
  int u_max = 8;

  int total_rounds() const { return 1 + static_cast<int>(rounds.size()); }
  // Every category present in every round, u_max above every medium count,
  // at least three rounds. Throws ConfigError.
  void validate() const;
  static PathTable from_json(const Json& j);
  Json to_json() const;
};

PathTable default_path_table();
PathTable load_path_table(const std::string& path);

// Pair for the round after `history`; initial pair when history is empty.
// Throws PreconditionError when history already covers every round.
WindowPair next_window_pair(const PathTable& table, std::span<const Category> history);

// Minimal and maximal achievable sums of option counts over a session.
std::pair<int, int> achievable_range(const PathTable& table);

struct RoundRecord {
  WindowPair pair;
  bool swapped = false;  // true when pair.right was shown as Window A
  std::vector<std::string> fish_a;
  std::vector<std::string> fish_b;
  char chosen_window = 'A';
  UncertaintyLevel chosen;
  Category category = Category::Certain;
  int option_count = 0;
  std::string seen_fish;
  bool reasked = false;
};

struct UnderwaterSession {
  int index = 0;
  std::int64_t seed = 0;
  Conversation transcript;
  std::vector<RoundRecord> rounds;
  bool valid = false;
  std::string error;

  std::vector<Category> categories() const;
  Json to_json() const;
  static UnderwaterSession from_json(const Json& j);
};

std::string intro_prompt();
// One line per window, e.g. "Window A: one of 3 possible fish: cod, eel, ray".
std::string describe_window(char letter, const UncertaintyLevel& level,
                            const std::vector<std::string>& fish);
// 'A', 'B', or 0 when the reply names neither (or both equally early).
char parse_window_choice(const std::string& reply);

struct SessionOptions {
  SamplingParams sampling;
  std::int64_t seed = 0;
};

// Parse failures after one re-ask end the session with valid == false.
// Backend errors propagate.
UnderwaterSession run_underwater_session(Backend& backend, const PathTable& table,
                                         const SessionOptions& opts = {});

struct ThrillScore {
  int raw = 0;
  int raw_min = 0;
  int raw_max = 0;
  double normalized = 0.0;
  Json to_json() const;
};

// Throws PreconditionError for an invalid session.
ThrillScore score_thrill_seeking(const UnderwaterSession& session, const PathTable& table);

struct GameOptions {
  int sessions = 10;
  int parallelism = 4;
  std::uint64_t seed = 0;
  SamplingParams sampling;
  std::vector<UnderwaterSession> completed_sessions;
  std::function<void(const UnderwaterSession&)> on_session;
};

std::int64_t session_seed(std::uint64_t base, int index);

// Independent sessions; BackendUnavailable stops the game and is rethrown,
// other errors mark the session invalid.
std::vector<UnderwaterSession> run_underwater_game(Backend& backend, const PathTable& table,
                                                   const GameOptions& opts = {});

}  // namespace curio::underwater
