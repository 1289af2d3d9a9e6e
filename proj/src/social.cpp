#include "curio/social.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <set>

#include "curio/embedded_data.hpp"
#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

namespace curio::social {

const std::array<std::string, 16>& mbti_types() {
  static const std::array<std::string, 16> types = {
      "ISTJ", "ISFJ", "INFJ", "INTJ", "ISTP", "ISFP", "INFP", "INTP",
      "ESTP", "ESFP", "ENFP", "ENTP", "ESTJ", "ESFJ", "ENFJ", "ENTJ"};
  return types;
}

bool is_mbti(std::string_view code) {
  const std::string up = text::to_upper(code);
  const auto& t = mbti_types();
  return std::find(t.begin(), t.end(), up) != t.end();
}

std::optional<std::string> parse_mbti_guess(std::string_view reply) {
  std::string cur;
  auto check = [&]() -> std::optional<std::string> {
    if (cur.size() == 4 && is_mbti(cur)) return text::to_upper(cur);
    return std::nullopt;
  };
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += c;
      continue;
    }
    if (auto g = check()) return g;
    cur.clear();
  }
  return check();
}

PersonaSketches parse_personas(const Json& j) {
  if (!j.is_object()) throw ConfigError("persona file must map MBTI codes to sketches");
  PersonaSketches out;
  for (const auto& [code, sketch] : j.items()) {
    if (!is_mbti(code)) throw ConfigError("persona file has unknown type '" + code + "'");
    out[text::to_upper(code)] = sketch.get<std::string>();
  }
  for (const auto& code : mbti_types()) {
    if (!out.count(code)) throw ConfigError("persona file lacks a sketch for " + code);
  }
  return out;
}

const PersonaSketches& default_personas() {
  static const PersonaSketches p = parse_personas(Json::parse(embedded::k_personas));
  return p;
}

std::string stranger_system_prompt(const std::string& persona, const PersonaSketches& sketches) {
  auto it = sketches.find(persona);
  if (it == sketches.end()) throw PreconditionError("no persona sketch for '" + persona + "'");
  return "You are role-playing an ordinary person chatting with someone you have just met. "
         "Your MBTI personality type is " + persona + ": " + it->second +
         ". Stay in character and let your personality show through what you say and what you "
         "care about. Do not disclose your personality type or name any MBTI letters directly, "
         "but feel free to give hints. Keep each message to a few sentences.";
}

std::string subject_opening_prompt() {
  return "You have just met a stranger and are having a casual everyday conversation. Say hello "
         "and start chatting. Keep each message to a few sentences.";
}

std::string guess_prompt() {
  return "[The conversation is over.] Based on the conversation, which of the 16 MBTI "
         "personality types do you think the other person has? Reply with the four-letter "
         "code.";
}

const char* to_string(CountMode m) { return m == CountMode::Judge ? "judge" : "heuristic"; }

CountMode count_mode_from_string(const std::string& s) {
  if (s == "heuristic") return CountMode::Heuristic;
  if (s == "judge") return CountMode::Judge;
  throw ConfigError("question counting mode must be heuristic or judge, got '" + s + "'");
}

// ---- transcript ------------------------------------------------------------

int DialogueTranscript::subject_turns() const {
  return static_cast<int>(std::count_if(turns.begin(), turns.end(),
                                        [](const Turn& t) { return t.speaker == Speaker::Subject; }));
}

int DialogueTranscript::stranger_turns() const {
  return static_cast<int>(turns.size()) - subject_turns();
}

bool DialogueTranscript::complete() const {
  return subject_turns() == kRounds && stranger_turns() == kRounds;
}

namespace {

Json conversation_json(const Conversation& c) {
  Json msgs = Json::array();
  for (const auto& m : c) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return msgs;
}

Conversation conversation_from_json(const Json& j) {
  Conversation c;
  for (const auto& m : j) {
    c.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return c;
}

}  // namespace

Json DialogueTranscript::to_json() const {
  Json ts = Json::array();
  for (const auto& t : turns) {
    ts.push_back({{"speaker", t.speaker == Speaker::Subject ? "subject" : "stranger"}, {"text", t.text}});
  }
  Json ann = Json::object();
  for (const auto& [mode, counts] : annotations) ann[to_string(mode)] = counts;
  return {{"index", index},
          {"seed", seed},
          {"persona", persona},
          {"turns", ts},
          {"subject_view", conversation_json(subject_view)},
          {"stranger_view", conversation_json(stranger_view)},
          {"guess_reply", guess_reply},
          {"guess", guess ? Json(*guess) : Json(nullptr)},
          {"correct", correct},
          {"guess_reasked", guess_reasked},
          {"annotations", ann},
          {"judge_fallback", judge_fallback}};
}

DialogueTranscript DialogueTranscript::from_json(const Json& j) {
  DialogueTranscript t;
  t.index = j.at("index").get<int>();
  t.seed = j.at("seed").get<std::int64_t>();
  t.persona = j.at("persona").get<std::string>();
  for (const auto& x : j.at("turns")) {
    t.turns.push_back({x.at("speaker").get<std::string>() == "subject" ? Speaker::Subject
                                                                       : Speaker::Stranger,
                       x.at("text").get<std::string>()});
  }
  t.subject_view = conversation_from_json(j.at("subject_view"));
  t.stranger_view = conversation_from_json(j.at("stranger_view"));
  t.guess_reply = j.value("guess_reply", "");
  if (!j.at("guess").is_null()) t.guess = j.at("guess").get<std::string>();
  t.correct = j.at("correct").get<bool>();
  t.guess_reasked = j.value("guess_reasked", false);
  const Json ann = j.value("annotations", Json::object());
  for (const auto& [mode, counts] : ann.items()) {
    t.annotations[count_mode_from_string(mode)] = counts.get<std::vector<int>>();
  }
  t.judge_fallback = j.value("judge_fallback", false);
  return t;
}

std::string draw_persona(std::int64_t seed) {
  Rng rng(static_cast<std::uint64_t>(seed) ^ label_hash("persona"));
  return mbti_types()[rng.index(16)];
}

DialogueTranscript run_social_session(Backend& subject, Backend& stranger,
                                      const std::string& persona, const SessionOptions& opts) {
  if (!is_mbti(persona)) throw PreconditionError("persona must be an MBTI code, got '" + persona + "'");
  const PersonaSketches& sketches = opts.personas ? *opts.personas : default_personas();
  DialogueTranscript t;
  t.seed = opts.seed;
  t.persona = text::to_upper(persona);
  SamplingParams params = opts.sampling;
  params.seed = opts.seed;

  t.subject_view.push_back(Message::user(subject_opening_prompt()));
  t.stranger_view.push_back(Message::system(stranger_system_prompt(t.persona, sketches)));

  for (int round = 0; round < kRounds; ++round) {
    const Message said = subject.chat(t.subject_view, params);
    t.subject_view.push_back(said);
    t.turns.push_back({Speaker::Subject, said.content});
    t.stranger_view.push_back(Message::user(said.content));

    const Message reply = stranger.chat(t.stranger_view, params);
    t.stranger_view.push_back(reply);
    t.turns.push_back({Speaker::Stranger, reply.content});
    if (round + 1 < kRounds) {
      t.subject_view.push_back(Message::user(reply.content));
    } else {
      t.subject_view.push_back(Message::user(reply.content + "\n\n" + guess_prompt()));
    }
  }

  t.subject_view.push_back(subject.chat(t.subject_view, params));
  t.guess_reply = t.subject_view.back().content;
  t.guess = parse_mbti_guess(t.guess_reply);
  if (!t.guess) {
    t.guess_reasked = true;
    t.subject_view.push_back(
        Message::user("Please answer with one four-letter MBTI code, for example ISTJ."));
    t.subject_view.push_back(subject.chat(t.subject_view, params));
    t.guess_reply = t.subject_view.back().content;
    t.guess = parse_mbti_guess(t.guess_reply);
  }
  t.correct = t.guess && *t.guess == t.persona;
  return t;
}

// ---- question counting -----------------------------------------------------

int heuristic_turn_count(std::string_view message, const HeuristicConfig& cfg) {
  const std::set<std::string> second(cfg.second_person.begin(), cfg.second_person.end());
  const std::set<std::string> keys(cfg.partner_keywords.begin(), cfg.partner_keywords.end());
  int count = 0;
  for (const auto& sentence : text::split_sentences(message)) {
    if (text::count_questions(sentence) == 0) continue;
    for (const auto& w : text::words(sentence)) {
      if (second.count(w) || keys.count(w)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

std::string judge_prompt(std::string_view message) {
  return "Below is one message from a casual conversation between two people who just met. "
         "Count the questions in it that ask the other person about themselves, such as their "
         "life, background, preferences, opinions or experiences. Reply with a single integer "
         "and nothing else.\n\nMessage: " +
         std::string(message);
}

QuestionCount count_partner_questions(const DialogueTranscript& t, CountMode mode, Backend* judge,
                                      const HeuristicConfig& cfg, const SamplingParams& judge_sampling) {
  if (!t.complete()) throw PreconditionError("transcript is incomplete");
  QuestionCount out;
  out.mode = mode;
  std::vector<std::string> messages;
  for (const auto& turn : t.turns) {
    if (turn.speaker == Speaker::Subject) messages.push_back(turn.text);
  }

  if (mode == CountMode::Judge) {
    try {
      if (!judge) throw ConfigError("judge mode needs a judge backend");
      for (const auto& m : messages) {
        const Conversation conv = {Message::user(judge_prompt(m))};
        const std::string reply = judge->chat(conv, judge_sampling).content;
        std::size_t i = 0;
        while (i < reply.size() && !std::isdigit(static_cast<unsigned char>(reply[i]))) ++i;
        if (i == reply.size()) throw UnparseableResponse("judge reply has no count", reply);
        std::size_t j = i;
        while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
        const int sentences = static_cast<int>(text::split_sentences(m).size());
        const int n = std::min(std::stoi(reply.substr(i, std::min<std::size_t>(j - i, 6))), sentences);
        out.per_turn.push_back(n);
        out.total += n;
      }
      return out;
    } catch (const Error& e) {
      out = {};
      out.fallback = true;
      out.warning = std::string("judge failed, heuristic used: ") + e.what();
    }
  }
  out.mode = CountMode::Heuristic;
  for (const auto& m : messages) {
    const int n = heuristic_turn_count(m, cfg);
    out.per_turn.push_back(n);
    out.total += n;
  }
  return out;
}

Json SocialScore::to_json() const {
  return {{"mode", to_string(mode)},
          {"mean_questions", mean_questions},
          {"qualifying", qualifying},
          {"excluded_incorrect", excluded_incorrect},
          {"excluded_invalid", excluded_invalid},
          {"counts", counts}};
}

SocialScore score_social_curiosity(std::span<const DialogueTranscript> sessions, CountMode mode,
                                   const HeuristicConfig& cfg) {
  if (sessions.empty()) throw PreconditionError("no social sessions to score");
  SocialScore s;
  s.mode = mode;
  long sum = 0;
  for (const auto& t : sessions) {
    if (!t.guess_valid()) {
      ++s.excluded_invalid;
      continue;
    }
    if (!t.correct) {
      ++s.excluded_incorrect;
      continue;
    }
    int count = 0;
    auto it = t.annotations.find(mode);
    if (it != t.annotations.end()) {
      for (int c : it->second) count += c;
    } else if (mode == CountMode::Heuristic) {
      count = count_partner_questions(t, CountMode::Heuristic, nullptr, cfg).total;
    } else {
      throw PreconditionError("session " + std::to_string(t.index) + " has no judge annotations");
    }
    s.counts.push_back(count);
    sum += count;
    ++s.qualifying;
  }
  if (s.qualifying == 0) {
    throw NoQualifyingSessions("no social session ended with a correct MBTI guess");
  }
  s.mean_questions = static_cast<double>(sum) / s.qualifying;
  return s;
}

std::int64_t session_seed(std::uint64_t base, int index) {
  return static_cast<std::int64_t>(
      derive_seed(base, {label_hash("social"), static_cast<std::uint64_t>(index)}) & 0x7fffffffULL);
}

SocialRun run_social_game(Backend& subject, Backend& stranger, const GameOptions& opts) {
  if (opts.sessions < 1) throw PreconditionError("sessions must be >= 1");
  std::vector<std::optional<DialogueTranscript>> slots(static_cast<std::size_t>(opts.sessions));
  for (const auto& t : opts.completed_sessions) {
    if (t.index >= 0 && t.index < opts.sessions) slots[static_cast<std::size_t>(t.index)] = t;
  }
  std::vector<std::string> errors(slots.size());
  std::mutex mu;
  std::atomic<bool> stop{false};
  std::exception_ptr unavailable;
  parallel_for(slots.size(), opts.parallelism, [&](std::size_t idx) {
    if (slots[idx] || stop.load()) return;
    const int index = static_cast<int>(idx);
    const std::int64_t seed = session_seed(opts.seed, index);
    try {
      DialogueTranscript t = run_social_session(subject, stranger, draw_persona(seed),
                                                {opts.sampling, seed, opts.personas});
      t.index = index;
      t.annotations[CountMode::Heuristic] =
          count_partner_questions(t, CountMode::Heuristic, nullptr, opts.heuristic).per_turn;
      if (opts.judge) {
        QuestionCount judged =
            count_partner_questions(t, CountMode::Judge, opts.judge, opts.heuristic);
        t.judge_fallback = judged.fallback;
        t.annotations[CountMode::Judge] = judged.per_turn;
      }
      if (opts.on_session) opts.on_session(t);
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
  SocialRun run;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      run.sessions.push_back(std::move(*slots[i]));
    } else if (!errors[i].empty()) {
      run.failures.push_back("session " + std::to_string(i) + ": " + errors[i]);
    }
  }
  if (unavailable) std::rethrow_exception(unavailable);
  return run;
}

}  // namespace curio::social
