#include <gtest/gtest.h>

#include <regex>

#include "curio/errors.hpp"
#include "curio/underwater.hpp"
#include "support/testing.hpp"

using namespace curio;
using namespace curio::underwater;

namespace {

// Option count shown for each window in the latest round prompt.
std::pair<int, int> shown_counts(const std::string& prompt, int u_max) {
  auto count_for = [&](char w) {
    const std::string tag = std::string("Window ") + w + ": ";
    const auto pos = prompt.rfind(tag);
    const std::string line = prompt.substr(pos + tag.size(), prompt.find('\n', pos) - pos - tag.size());
    if (line.rfind("exactly one", 0) == 0) return 1;
    if (line.rfind("?", 0) == 0) return u_max;
    std::smatch m;
    std::regex_search(line, m, std::regex("one of (\\d+)"));
    return std::stoi(m[1]);
  };
  return {count_for('A'), count_for('B')};
}

// Picks a window by the option counts on offer.
BackendPtr chooser(std::function<char(int, int, int)> pick) {
  return make_agent([pick](std::span<const Message> m) {
    int round = 0;
    for (const auto& x : m) round += x.role == Role::User ? 1 : 0;
    const auto [a, b] = shown_counts(m.back().content, 8);
    return std::string("Window ") + pick(round, a, b);
  });
}

}  // namespace

TEST(Levels, JsonAndCategories) {
  EXPECT_EQ(UncertaintyLevel::from_json(1), UncertaintyLevel::certain());
  EXPECT_EQ(UncertaintyLevel::from_json(4), UncertaintyLevel::medium(4));
  EXPECT_EQ(UncertaintyLevel::from_json("?"), UncertaintyLevel::unknown());
  EXPECT_EQ(UncertaintyLevel::medium(3).category(), Category::Medium);
  EXPECT_EQ(UncertaintyLevel::unknown().option_count(8), 8);
  EXPECT_THROW(UncertaintyLevel::medium(7), ConfigError);
  EXPECT_EQ(UncertaintyLevel::unknown().to_json(), "?");
  EXPECT_STREQ(choice_label(Category::Medium), "medium confirm");
}

TEST(PathTable, DefaultRange) {
  const auto t = default_path_table();
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.total_rounds(), 3);
  EXPECT_EQ(achievable_range(t), std::make_pair(3, 24));
  EXPECT_EQ(PathTable::from_json(t.to_json()).to_json(), t.to_json());
}

TEST(PathTable, NextPairFollowsChoices) {
  const auto t = default_path_table();
  EXPECT_EQ(next_window_pair(t, {}), (WindowPair{UncertaintyLevel::certain(), UncertaintyLevel::unknown()}));
  const std::vector<Category> h1 = {Category::Certain};
  EXPECT_EQ(next_window_pair(t, h1), (WindowPair{UncertaintyLevel::certain(), UncertaintyLevel::medium(4)}));
  const std::vector<Category> h2 = {Category::Certain, Category::Medium};
  EXPECT_EQ(next_window_pair(t, h2), (WindowPair{UncertaintyLevel::medium(4), UncertaintyLevel::unknown()}));
  const std::vector<Category> full = {Category::Certain, Category::Medium, Category::Unsure};
  EXPECT_THROW(next_window_pair(t, full), PreconditionError);
}

TEST(PathTable, ValidationFailures) {
  Json j = default_path_table().to_json();
  Json short_table = j;
  short_table["rounds"].erase(1);
  EXPECT_THROW(PathTable::from_json(short_table), ConfigError);
  Json missing = j;
  missing["rounds"][0].erase("medium");
  EXPECT_THROW(PathTable::from_json(missing), ConfigError);
  Json low_umax = j;
  low_umax["u_max"] = 6;
  EXPECT_THROW(PathTable::from_json(low_umax), ConfigError);
  const Json flat = {{"u_max", 8},
                     {"initial", {1, 1}},
                     {"rounds", Json::array({{{"certain", {1, 1}}, {"medium", {1, 1}}, {"unsure", {1, 1}}},
                                             {{"certain", {1, 1}}, {"medium", {1, 1}}, {"unsure", {1, 1}}}})}};
  EXPECT_THROW(PathTable::from_json(flat), ConfigError);
}

TEST(PathTable, RangeMatchesBruteForce) {
  // Enumerate every left/right choice sequence of a deeper table.
  const Json j = {{"u_max", 8},
                  {"initial", {2, "?"}},
                  {"rounds", Json::array({{{"certain", {1, 3}}, {"medium", {2, 5}}, {"unsure", {1, "?"}}},
                                          {{"certain", {1, 2}}, {"medium", {3, "?"}}, {"unsure", {6, "?"}}},
                                          {{"certain", {1, 6}}, {"medium", {1, 2}}, {"unsure", {1, "?"}}}})}};
  const auto t = PathTable::from_json(j);
  int lo = 1 << 30, hi = 0;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<Category> history;
    int sum = 0;
    for (int r = 0; r < 4; ++r) {
      const auto pair = next_window_pair(t, history);
      const auto& pick = (mask >> r) & 1 ? pair.right : pair.left;
      sum += pick.option_count(t.u_max);
      history.push_back(pick.category());
    }
    lo = std::min(lo, sum);
    hi = std::max(hi, sum);
  }
  EXPECT_EQ(achievable_range(t), std::make_pair(lo, hi));
}

TEST(Prompts, WindowDescriptions) {
  EXPECT_EQ(describe_window('A', UncertaintyLevel::certain(), {"cod"}), "Window A: exactly one possible fish: cod");
  EXPECT_EQ(describe_window('B', UncertaintyLevel::medium(2), {"cod", "eel"}),
            "Window B: one of 2 possible fish: cod, eel");
  EXPECT_EQ(describe_window('A', UncertaintyLevel::unknown(), {}), "Window A: ? (unknown fish)");
}

TEST(Prompts, ParseWindowChoice) {
  EXPECT_EQ(parse_window_choice("Window B"), 'B');
  EXPECT_EQ(parse_window_choice("I'll open window a, please."), 'A');
  EXPECT_EQ(parse_window_choice("B"), 'B');
  EXPECT_EQ(parse_window_choice("a."), 'A');
  EXPECT_EQ(parse_window_choice("Window A looks safe but I choose Window B"), 'A');
  EXPECT_EQ(parse_window_choice("Neither"), 0);
  EXPECT_EQ(parse_window_choice("A or B"), 0);
}

TEST(Session, GreedyMaxAndAlwaysCertain) {
  const auto t = default_path_table();
  auto greedy = chooser([](int, int a, int b) { return a >= b ? 'A' : 'B'; });
  auto careful = chooser([](int, int a, int b) { return a <= b ? 'A' : 'B'; });
  for (std::int64_t seed = 0; seed < 10; ++seed) {
    const auto g = run_underwater_session(*greedy, t, {{}, seed});
    ASSERT_TRUE(g.valid);
    EXPECT_EQ(score_thrill_seeking(g, t).normalized, 1.0);
    const auto c = run_underwater_session(*careful, t, {{}, seed});
    EXPECT_EQ(score_thrill_seeking(c, t).normalized, 0.0);
  }
}

TEST(Session, HandComputedExample) {
  const auto t = default_path_table();
  const int want[] = {1, 4, 8};
  auto scripted = chooser([&](int round, int a, int) { return a == want[round - 1] ? 'A' : 'B'; });
  const auto s = run_underwater_session(*scripted, t, {{}, 3});
  ASSERT_TRUE(s.valid);
  const auto score = score_thrill_seeking(s, t);
  EXPECT_EQ(score.raw, 13);
  EXPECT_DOUBLE_EQ(score.normalized, 10.0 / 21.0);
  const std::vector<Category> cats = {Category::Certain, Category::Medium, Category::Unsure};
  EXPECT_EQ(s.categories(), cats);
}

TEST(Session, SidesSwapBySeedAndCarryOutcome) {
  const auto t = default_path_table();
  auto b = curio::testing::constant("Window A");
  int swapped = 0;
  for (std::int64_t seed = 0; seed < 40; ++seed) {
    const auto s = run_underwater_session(*b, t, {{}, seed});
    swapped += s.rounds[0].swapped ? 1 : 0;
    EXPECT_EQ(run_underwater_session(*b, t, {{}, seed}).to_json(), s.to_json());
    EXPECT_NE(s.transcript[2].content.find("You open Window A and see a " + s.rounds[0].seen_fish + "."),
              std::string::npos);
  }
  EXPECT_GT(swapped, 5);
  EXPECT_LT(swapped, 35);
}

TEST(Session, UnparseableChoiceInvalidates) {
  const auto t = default_path_table();
  auto b = curio::testing::constant("I would rather not.");
  const auto s = run_underwater_session(*b, t, {{}, 1});
  EXPECT_FALSE(s.valid);
  EXPECT_EQ(s.transcript.size(), 4u);
  EXPECT_THROW(score_thrill_seeking(s, t), PreconditionError);
  const auto back = UnderwaterSession::from_json(s.to_json());
  EXPECT_FALSE(back.valid);
  EXPECT_EQ(back.error, s.error);
}

TEST(Game, SessionsAreIndexedAndResumable) {
  const auto t = default_path_table();
  int calls = 0;
  std::mutex mu;
  auto b = make_agent([&](std::span<const Message>) {
    std::lock_guard lock(mu);
    ++calls;
    return "Window B";
  });
  GameOptions o;
  o.sessions = 6;
  o.seed = 5;
  const auto all = run_underwater_game(*b, t, o);
  ASSERT_EQ(all.size(), 6u);
  EXPECT_EQ(calls, 18);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(all[i].index, i);
    EXPECT_EQ(all[i].seed, session_seed(5, i));
  }
  o.completed_sessions = {all[0], all[1], all[2]};
  const auto resumed = run_underwater_game(*b, t, o);
  EXPECT_EQ(calls, 27);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(resumed[i].to_json(), all[i].to_json());
}
