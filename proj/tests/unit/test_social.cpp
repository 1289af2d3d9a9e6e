#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "curio/errors.hpp"
#include "curio/social.hpp"
#include "support/testing.hpp"

using namespace curio;
using namespace curio::social;

namespace {

// Stranger that drops its type code as a hint in every reply.
BackendPtr hinting_stranger() {
  return make_agent([](std::span<const Message> m) {
    std::smatch match;
    const std::string& sys = m.front().content;
    std::regex_search(sys, match, std::regex("type is ([A-Z]{4})"));
    return "Ha, I am more of a " + match[1].str() + " kind of person. It was a long week.";
  });
}

// Subject asking one partner question per turn; guesses from the hint.
BackendPtr curious_subject(bool guess_right) {
  return make_agent([guess_right](std::span<const Message> m) -> std::string {
    const std::string& last = m.back().content;
    if (last.find("MBTI personality types") != std::string::npos) {
      std::smatch match;
      std::regex_search(last, match, std::regex("a ([A-Z]{4}) kind"));
      if (guess_right) return "I think " + match[1].str() + ".";
      return match[1].str() == "ESTJ" ? "ISFP" : "ESTJ";
    }
    return "That sounds nice. What do you do on weekends?";
  });
}

}  // namespace

TEST(Mbti, CodesAndGuesses) {
  EXPECT_EQ(mbti_types().size(), 16u);
  EXPECT_TRUE(is_mbti("INFP"));
  EXPECT_TRUE(is_mbti("enfj"));
  EXPECT_FALSE(is_mbti("ABCD"));
  EXPECT_EQ(parse_mbti_guess("I think they are an infj, maybe."), "INFJ");
  EXPECT_EQ(parse_mbti_guess("WORD then ESTP"), "ESTP");
  EXPECT_FALSE(parse_mbti_guess("no idea at all").has_value());
}

TEST(Personas, DrawIsSeededAndCoversAllTypes) {
  std::set<std::string> seen;
  for (std::int64_t s = 0; s < 400; ++s) {
    EXPECT_EQ(draw_persona(s), draw_persona(s));
    seen.insert(draw_persona(s));
  }
  EXPECT_EQ(seen.size(), 16u);
  EXPECT_EQ(default_personas().size(), 16u);
}

TEST(Personas, StrangerPromptKeepsTypeSecretInstruction) {
  const auto p = stranger_system_prompt("INTJ", default_personas());
  EXPECT_NE(p.find("INTJ"), std::string::npos);
  EXPECT_NE(p.find("Do not disclose"), std::string::npos);
  EXPECT_THROW(stranger_system_prompt("XXXX", default_personas()), PreconditionError);
}

TEST(Heuristic, CountsPartnerQuestionsOnly) {
  EXPECT_EQ(heuristic_turn_count("What do you do for work? I love hiking. Do you have a favorite book?"), 2);
  EXPECT_EQ(heuristic_turn_count("Is it raining?"), 0);
  EXPECT_EQ(heuristic_turn_count("What's your name?"), 1);
  EXPECT_EQ(heuristic_turn_count("Hobbies?"), 1);
  EXPECT_EQ(heuristic_turn_count("You seem nice."), 0);
  HeuristicConfig cfg;
  cfg.partner_keywords = {"pets"};
  EXPECT_EQ(heuristic_turn_count("Pets?", cfg), 1);
  EXPECT_EQ(heuristic_turn_count("Hobbies?", cfg), 0);
}

TEST(Session, ShapeAndGuess) {
  auto subject = curious_subject(true);
  auto stranger = hinting_stranger();
  const auto t = run_social_session(*subject, *stranger, "ENFP", {{}, 7, nullptr});
  EXPECT_TRUE(t.complete());
  EXPECT_EQ(t.subject_turns(), kRounds);
  EXPECT_EQ(t.stranger_turns(), kRounds);
  EXPECT_EQ(t.turns.front().speaker, Speaker::Subject);
  EXPECT_EQ(t.subject_view.front().content, subject_opening_prompt());
  EXPECT_EQ(t.stranger_view.front().role, Role::System);
  const auto& final_prompt = t.subject_view[t.subject_view.size() - 2].content;
  EXPECT_NE(final_prompt.find(guess_prompt()), std::string::npos);
  EXPECT_NE(final_prompt.find("ENFP kind of person"), std::string::npos);
  EXPECT_EQ(t.guess, "ENFP");
  EXPECT_TRUE(t.correct);
  EXPECT_EQ(DialogueTranscript::from_json(t.to_json()).to_json(), t.to_json());
}

TEST(Session, GuessReaskedOnce) {
  auto subject = make_agent([](std::span<const Message> m) -> std::string {
    const std::string& last = m.back().content;
    if (last.find("MBTI personality types") != std::string::npos) return "Hard to say!";
    if (last.find("four-letter MBTI code") != std::string::npos) return "INTP";
    return "Hello there.";
  });
  const auto t = run_social_session(*subject, *curio::testing::constant("Hi."), "INTP");
  EXPECT_TRUE(t.guess_reasked);
  EXPECT_TRUE(t.correct);
  auto mute = curio::testing::constant("Hello.");
  const auto u = run_social_session(*mute, *curio::testing::constant("Hi."), "INTP");
  EXPECT_FALSE(u.guess_valid());
  EXPECT_FALSE(u.correct);
}

TEST(Counting, JudgeClampsAndFallsBack) {
  auto subject = curious_subject(true);
  const auto t = run_social_session(*subject, *hinting_stranger(), "ISTJ");
  auto judge = curio::testing::constant("There are 5 questions.");
  const auto judged = count_partner_questions(t, CountMode::Judge, judge.get());
  EXPECT_FALSE(judged.fallback);
  EXPECT_EQ(judged.per_turn, std::vector<int>(kRounds, 2));
  auto broken = curio::testing::constant("I cannot count.");
  const auto fb = count_partner_questions(t, CountMode::Judge, broken.get());
  EXPECT_TRUE(fb.fallback);
  EXPECT_EQ(fb.mode, CountMode::Heuristic);
  EXPECT_FALSE(fb.warning.empty());
  EXPECT_EQ(fb.total, kRounds);
  EXPECT_TRUE(count_partner_questions(t, CountMode::Judge, nullptr).fallback);
}

TEST(Score, OneQuestionPerTurnScoresTen) {
  GameOptions o;
  o.sessions = 4;
  o.seed = 12;
  const auto run = run_social_game(*curious_subject(true), *hinting_stranger(), o);
  ASSERT_EQ(run.sessions.size(), 4u);
  const auto s = score_social_curiosity(run.sessions);
  EXPECT_EQ(s.mean_questions, 10.0);
  EXPECT_EQ(s.qualifying, 4);
  EXPECT_EQ(s.counts, std::vector<int>(4, 10));
}

TEST(Score, WrongGuessesExcluded) {
  GameOptions o;
  o.sessions = 2;
  const auto right = run_social_game(*curious_subject(true), *hinting_stranger(), o).sessions;
  const auto wrong = run_social_game(*curious_subject(false), *hinting_stranger(), o).sessions;
  std::vector<DialogueTranscript> mixed = {right[0], wrong[1]};
  const auto s = score_social_curiosity(mixed);
  EXPECT_EQ(s.qualifying, 1);
  EXPECT_EQ(s.excluded_incorrect, 1);
  EXPECT_EQ(s.mean_questions, 10.0);
  EXPECT_THROW(score_social_curiosity(wrong), NoQualifyingSessions);
  EXPECT_THROW(score_social_curiosity({}), PreconditionError);
}

TEST(Game, JudgeAnnotationsStoredBesideHeuristic) {
  GameOptions o;
  o.sessions = 2;
  auto judge = curio::testing::constant("1");
  o.judge = judge.get();
  const auto run = run_social_game(*curious_subject(true), *hinting_stranger(), o);
  for (const auto& t : run.sessions) {
    EXPECT_EQ(t.annotations.at(CountMode::Heuristic), std::vector<int>(kRounds, 1));
    EXPECT_EQ(t.annotations.at(CountMode::Judge), std::vector<int>(kRounds, 1));
  }
  EXPECT_EQ(score_social_curiosity(run.sessions, CountMode::Judge).mean_questions, 10.0);
}
