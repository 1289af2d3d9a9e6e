#include "curio/underwater.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

namespace curio::underwater {

namespace {

const std::vector<std::string>& fish_names() {
  static const std::vector<std::string> names = {
      "clownfish", "angelfish", "pufferfish", "seahorse", "tuna",     "swordfish",
      "grouper",   "lionfish",  "barracuda",  "manta ray", "mackerel", "sunfish"};
  return names;
}

std::string fish_name(std::size_t i) {
  const auto& names = fish_names();
  if (i < names.size()) return names[i];
  return "fish species " + std::to_string(i + 1);
}

std::vector<std::string> pick_fish(Rng& rng, int count, int pool) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(pool));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(fish_name(idx[static_cast<std::size_t>(i)]));
  return out;
}

std::string round_header(int round, int total) {
  return "Round " + std::to_string(round) + " of " + std::to_string(total) + ".";
}

constexpr const char* kChoiceRequest =
    "Which window do you open? Reply with 'Window A' or 'Window B'.";

}  // namespace

const char* to_string(Category c) {
  switch (c) {
    case Category::Certain: return "certain";
    case Category::Medium: return "medium";
    case Category::Unsure: return "unsure";
  }
  return "?";
}

const char* choice_label(Category c) {
  switch (c) {
    case Category::Certain: return "confirm";
    case Category::Medium: return "medium confirm";
    case Category::Unsure: return "not sure";
  }
  return "?";
}

Category category_from_string(const std::string& s) {
  for (Category c : kCategories) {
    if (s == to_string(c)) return c;
  }
  throw ConfigError("unknown path category '" + s + "'");
}

// ---- levels & table --------------------------------------------------------

UncertaintyLevel UncertaintyLevel::medium(int n) {
  if (n < 2 || n > 6) throw ConfigError("medium window must show 2 to 6 fish, got " + std::to_string(n));
  return {Kind::Medium, n};
}

Category UncertaintyLevel::category() const {
  switch (kind) {
    case Kind::Certain: return Category::Certain;
    case Kind::Medium: return Category::Medium;
    case Kind::Unknown: return Category::Unsure;
  }
  return Category::Unsure;
}

UncertaintyLevel UncertaintyLevel::from_json(const Json& j) {
  if (j.is_string() && j.get<std::string>() == "?") return unknown();
  if (j.is_number_integer()) {
    const int n = j.get<int>();
    if (n == 1) return certain();
    return medium(n);
  }
  throw ConfigError("window level must be an integer 1..6 or \"?\", got " + j.dump());
}

Json UncertaintyLevel::to_json() const {
  if (kind == Kind::Unknown) return "?";
  return n;
}

void PathTable::validate() const {
  if (total_rounds() < 3) throw ConfigError("path table needs at least three rounds");
  int max_medium = 1;
  auto check = [&](const WindowPair& p) {
    for (const auto* l : {&p.left, &p.right}) {
      if (l->kind == UncertaintyLevel::Kind::Medium) max_medium = std::max(max_medium, l->n);
    }
  };
  check(initial);
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    for (Category c : kCategories) {
      auto it = rounds[r].find(c);
      if (it == rounds[r].end()) {
        throw ConfigError("path table round " + std::to_string(r + 2) + " has no '" +
                          to_string(c) + "' branch");
      }
      check(it->second);
    }
  }
  if (u_max <= max_medium) {
    throw ConfigError("u_max must exceed every medium window size");
  }
  const auto [lo, hi] = achievable_range(*this);
  if (lo == hi) throw ConfigError("path table admits a single total; scores would be undefined");
}

PathTable PathTable::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("path table must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "u_max" && key != "initial" && key != "rounds") {
      throw ConfigError("unknown path table key '" + key + "'");
    }
  }
  auto pair = [](const Json& p) {
    if (!p.is_array() || p.size() != 2) throw ConfigError("window pair must be [left, right]");
    return WindowPair{UncertaintyLevel::from_json(p[0]), UncertaintyLevel::from_json(p[1])};
  };
  PathTable t;
  t.u_max = j.value("u_max", 8);
  if (!j.contains("initial") || !j.contains("rounds")) {
    throw ConfigError("path table needs 'initial' and 'rounds'");
  }
  t.initial = pair(j.at("initial"));
  for (const auto& r : j.at("rounds")) {
    std::map<Category, WindowPair> branches;
    for (const auto& [key, value] : r.items()) branches[category_from_string(key)] = pair(value);
    t.rounds.push_back(std::move(branches));
  }
  t.validate();
  return t;
}

Json PathTable::to_json() const {
  auto pair = [](const WindowPair& p) { return Json::array({p.left.to_json(), p.right.to_json()}); };
  Json rs = Json::array();
  for (const auto& r : rounds) {
    Json o = Json::object();
    for (const auto& [c, p] : r) o[to_string(c)] = pair(p);
    rs.push_back(o);
  }
  return {{"u_max", u_max}, {"initial", pair(initial)}, {"rounds", rs}};
}

PathTable default_path_table() {
  static const PathTable t = PathTable::from_json(Json::parse(embedded::k_path_table));
  return t;
}

PathTable load_path_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open path table " + path);
  try {
    return PathTable::from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError("path table " + path + ": " + e.what());
  }
}

WindowPair next_window_pair(const PathTable& table, std::span<const Category> history) {
  if (history.size() >= static_cast<std::size_t>(table.total_rounds())) {
    throw PreconditionError("history already covers all " + std::to_string(table.total_rounds()) +
                            " rounds");
  }
  if (history.empty()) return table.initial;
  const auto& branches = table.rounds[history.size() - 1];
  auto it = branches.find(history.back());
  if (it == branches.end()) {
    throw ConfigError(std::string("path table has no '") + to_string(history.back()) +
                      "' branch for round " + std::to_string(history.size() + 1));
  }
  return it->second;
}

std::pair<int, int> achievable_range(const PathTable& table) {
  std::function<std::pair<int, int>(std::size_t, Category)> go = [&](std::size_t round,
                                                                     Category prev) {
    if (round >= static_cast<std::size_t>(table.total_rounds())) return std::pair{0, 0};
    const WindowPair& p = round == 0 ? table.initial : table.rounds[round - 1].at(prev);
    int lo = 0, hi = 0;
    bool first = true;
    for (const auto* l : {&p.left, &p.right}) {
      const auto [sub_lo, sub_hi] = go(round + 1, l->category());
      const int v = l->option_count(table.u_max);
      if (first || v + sub_lo < lo) lo = v + sub_lo;
      if (first || v + sub_hi > hi) hi = v + sub_hi;
      first = false;
    }
    return std::pair{lo, hi};
  };
  return go(0, Category::Certain);
}

// ---- session ---------------------------------------------------------------

std::vector<Category> UnderwaterSession::categories() const {
  std::vector<Category> out;
  for (const auto& r : rounds) out.push_back(r.category);
  return out;
}

Json UnderwaterSession::to_json() const {
  Json msgs = Json::array();
  for (const auto& m : transcript) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  Json rs = Json::array();
  for (const auto& r : rounds) {
    rs.push_back({{"pair", Json::array({r.pair.left.to_json(), r.pair.right.to_json()})},
                  {"swapped", r.swapped},
                  {"fish_a", r.fish_a},
                  {"fish_b", r.fish_b},
                  {"chosen_window", std::string(1, r.chosen_window)},
                  {"chosen", r.chosen.to_json()},
                  {"category", to_string(r.category)},
                  {"choice_label", choice_label(r.category)},
                  {"option_count", r.option_count},
                  {"seen_fish", r.seen_fish},
                  {"reasked", r.reasked}});
  }
  return {{"index", index}, {"seed", seed},   {"messages", msgs},
          {"rounds", rs},   {"valid", valid}, {"error", error}};
}

UnderwaterSession UnderwaterSession::from_json(const Json& j) {
  UnderwaterSession s;
  s.index = j.at("index").get<int>();
  s.seed = j.at("seed").get<std::int64_t>();
  for (const auto& m : j.at("messages")) {
    s.transcript.push_back({role_from_string(m.at("role").get<std::string>()),
                            m.at("content").get<std::string>()});
  }
  for (const auto& r : j.at("rounds")) {
    RoundRecord rec;
    rec.pair = {UncertaintyLevel::from_json(r.at("pair")[0]),
                UncertaintyLevel::from_json(r.at("pair")[1])};
    rec.swapped = r.at("swapped").get<bool>();
    rec.fish_a = r.at("fish_a").get<std::vector<std::string>>();
    rec.fish_b = r.at("fish_b").get<std::vector<std::string>>();
    rec.chosen_window = r.at("chosen_window").get<std::string>().at(0);
    rec.chosen = UncertaintyLevel::from_json(r.at("chosen"));
    rec.category = category_from_string(r.at("category").get<std::string>());
    rec.option_count = r.at("option_count").get<int>();
    rec.seen_fish = r.at("seen_fish").get<std::string>();
    rec.reasked = r.value("reasked", false);
    s.rounds.push_back(std::move(rec));
  }
  s.valid = j.at("valid").get<bool>();
  s.error = j.value("error", "");
  return s;
}

std::string intro_prompt() {
  return "You are inside a submarine exploring the sea. There are two windows, Window A and "
         "Window B, and in each round you may open exactly one of them to look at a fish. "
         "Before you choose, you are told which kinds of fish could appear behind each window. "
         "A question mark means any kind of fish could appear.";
}

std::string describe_window(char letter, const UncertaintyLevel& level,
                            const std::vector<std::string>& fish) {
  std::string head = std::string("Window ") + letter + ": ";
  switch (level.kind) {
    case UncertaintyLevel::Kind::Certain:
      return head + "exactly one possible fish: " + fish.at(0);
    case UncertaintyLevel::Kind::Medium:
      return head + "one of " + std::to_string(level.n) + " possible fish: " + text::join(fish, ", ");
    case UncertaintyLevel::Kind::Unknown:
      return head + "? (unknown fish)";
  }
  return head;
}

char parse_window_choice(const std::string& reply) {
  const std::string lower = text::to_lower(reply);
  auto find_word = [&](const std::string& needle) -> std::size_t {
    std::size_t from = 0;
    while (true) {
      const std::size_t pos = lower.find(needle, from);
      if (pos == std::string::npos) return pos;
      const std::size_t end = pos + needle.size();
      if (end >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[end]))) return pos;
      from = pos + 1;
    }
  };
  const std::size_t a = find_word("window a");
  const std::size_t b = find_word("window b");
  if (a != b) return a < b ? 'A' : 'B';
  const auto w = text::words(reply);
  if (w.size() == 1 && (w[0] == "a" || w[0] == "b")) return w[0] == "a" ? 'A' : 'B';
  return 0;
}

UnderwaterSession run_underwater_session(Backend& backend, const PathTable& table,
                                         const SessionOptions& opts) {
  table.validate();
  UnderwaterSession s;
  s.seed = opts.seed;
  SamplingParams params = opts.sampling;
  params.seed = opts.seed;
  Rng rng(static_cast<std::uint64_t>(opts.seed));
  const int total = table.total_rounds();
  std::vector<Category> history;
  std::string carry;  // outcome of the previous round, prefixed to the next prompt

  for (int round = 1; round <= total; ++round) {
    RoundRecord rec;
    rec.pair = next_window_pair(table, history);
    rec.swapped = rng.index(2) == 1;
    const UncertaintyLevel& la = rec.swapped ? rec.pair.right : rec.pair.left;
    const UncertaintyLevel& lb = rec.swapped ? rec.pair.left : rec.pair.right;
    const int pool = std::max<int>(table.u_max, static_cast<int>(fish_names().size()));
    rec.fish_a = la.kind == UncertaintyLevel::Kind::Unknown ? std::vector<std::string>{}
                                                            : pick_fish(rng, la.n, pool);
    rec.fish_b = lb.kind == UncertaintyLevel::Kind::Unknown ? std::vector<std::string>{}
                                                            : pick_fish(rng, lb.n, pool);

    std::string prompt = round == 1 ? intro_prompt() + "\n\n" : carry + "\n\n";
    prompt += round_header(round, total) + "\n" + describe_window('A', la, rec.fish_a) + "\n" +
              describe_window('B', lb, rec.fish_b) + "\n" + kChoiceRequest;
    s.transcript.push_back(Message::user(prompt));
    s.transcript.push_back(backend.chat(s.transcript, params));
    char choice = parse_window_choice(s.transcript.back().content);
    if (choice == 0) {
      rec.reasked = true;
      s.transcript.push_back(Message::user("Please reply with 'Window A' or 'Window B'."));
      s.transcript.push_back(backend.chat(s.transcript, params));
      choice = parse_window_choice(s.transcript.back().content);
    }
    if (choice == 0) {
      s.rounds.push_back(rec);
      s.valid = false;
      s.error = "unparseable window choice in round " + std::to_string(round);
      return s;
    }
    rec.chosen_window = choice;
    rec.chosen = choice == 'A' ? la : lb;
    rec.category = rec.chosen.category();
    rec.option_count = rec.chosen.option_count(table.u_max);
    const auto& shown = choice == 'A' ? rec.fish_a : rec.fish_b;
    rec.seen_fish = shown.empty() ? fish_name(rng.index(static_cast<std::uint64_t>(table.u_max)))
                                  : shown[rng.index(shown.size())];
    carry = std::string("You open Window ") + choice + " and see a " + rec.seen_fish + ".";
    history.push_back(rec.category);
    s.rounds.push_back(std::move(rec));
  }
  s.valid = true;
  return s;
}

Json ThrillScore::to_json() const {
  return {{"raw", raw}, {"raw_min", raw_min}, {"raw_max", raw_max}, {"normalized", normalized}};
}

ThrillScore score_thrill_seeking(const UnderwaterSession& session, const PathTable& table) {
  if (!session.valid) throw PreconditionError("cannot score an invalid underwater session");
  if (session.rounds.size() != static_cast<std::size_t>(table.total_rounds())) {
    throw PreconditionError("session round count does not match the path table");
  }
  ThrillScore s;
  for (const auto& r : session.rounds) s.raw += r.option_count;
  std::tie(s.raw_min, s.raw_max) = achievable_range(table);
  s.normalized = static_cast<double>(s.raw - s.raw_min) / static_cast<double>(s.raw_max - s.raw_min);
  s.normalized = std::clamp(s.normalized, 0.0, 1.0);
  return s;
}

std::int64_t session_seed(std::uint64_t base, int index) {
  return static_cast<std::int64_t>(
      derive_seed(base, {label_hash("underwater"), static_cast<std::uint64_t>(index)}) & 0x7fffffffULL);
}

std::vector<UnderwaterSession> run_underwater_game(Backend& backend, const PathTable& table,
                                                   const GameOptions& opts) {
  if (opts.sessions < 1) throw PreconditionError("sessions must be >= 1");
  table.validate();
  std::vector<std::optional<UnderwaterSession>> slots(static_cast<std::size_t>(opts.sessions));
  for (const auto& s : opts.completed_sessions) {
    if (s.index >= 0 && s.index < opts.sessions) slots[static_cast<std::size_t>(s.index)] = s;
  }
  std::mutex mu;
  std::atomic<bool> stop{false};
  std::exception_ptr unavailable;
  parallel_for(slots.size(), opts.parallelism, [&](std::size_t idx) {
    if (slots[idx] || stop.load()) return;
    const int index = static_cast<int>(idx);
    UnderwaterSession s;
    try {
      s = run_underwater_session(backend, table, {opts.sampling, session_seed(opts.seed, index)});
    } catch (const BackendUnavailable&) {
      std::lock_guard lock(mu);
      stop = true;
      if (!unavailable) unavailable = std::current_exception();
      return;
    } catch (const Error& e) {
      s.seed = session_seed(opts.seed, index);
      s.valid = false;
      s.error = e.what();
    }
    s.index = index;
    if (opts.on_session) opts.on_session(s);
    slots[idx] = std::move(s);
  });
  std::vector<UnderwaterSession> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  if (unavailable) std::rethrow_exception(unavailable);
  return out;
}

}  // namespace curio::underwater
