// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>

#include "curio/baseline.hpp"
#include "curio/config.hpp"
#include "curio/errors.hpp"
#include "curio/letters.hpp"
#include "curio/psychometrics.hpp"
#include "curio/reasoning.hpp"
#include "curio/report.hpp"
#include "curio/runner.hpp"
#include "curio/scale.hpp"
#include "curio/social.hpp"
#include "curio/underwater.hpp"
#include "support/testing.hpp"

using namespace curio;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kLoadingTol = 1e-3;
constexpr double kOmegaTol = 1e-4;
constexpr double kCfaSeconds = 10.0;
constexpr double kGradRelTol = 1e-6;
constexpr double kGradStep = 1e-6;
constexpr double kDTol = 1e-12;
constexpr double kSpotOmega = 0.79352;
constexpr double kSpotTol = 1e-5;
constexpr double kTotalSeconds = 120.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << what;
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Eigen::MatrixXd implied_corr(const Eigen::VectorXd& lambda) {
  const Eigen::VectorXd theta = (1.0 - lambda.array().square()).matrix();
  return psy::implied_matrix(lambda, theta);
}

double oracle_d(const psy::SampleStats& a, const psy::SampleStats& b) {
  auto var = [](const psy::SampleStats& s) {
    const double n = static_cast<double>(s.n);
    return s.sd_kind == psy::SdKind::Sample ? s.sd * s.sd : s.sd * s.sd * n / (n - 1.0);
  };
  const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
  return (a.mean - b.mean) / std::sqrt(((na - 1) * var(a) + (nb - 1) * var(b)) / (na + nb - 2));
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- criteria --------------------------------------------------------------

void cfa_recovery(Outcome& o) {
  const auto start = Clock::now();
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> lam(0.3, 0.95);
  double worst_l = 0.0, worst_w = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd l(4);
    for (int i = 0; i < 4; ++i) l(i) = lam(gen);
    const auto fit = psy::fit_single_factor_cfa({implied_corr(l), true});
    o.require(fit.converged, "fit did not converge at trial " + std::to_string(trial) + "; ");
    worst_l = std::max(worst_l, (fit.loadings - l).cwiseAbs().maxCoeff());
    const double s = l.sum(), theta = (1.0 - l.array().square()).sum();
    if (fit.converged) worst_w = std::max(worst_w, std::abs(psy::mcdonalds_omega(fit) - s * s / (s * s + theta)));
  }
  const double secs = seconds_since(start);
  o.require(worst_l <= kLoadingTol, "loading error " + num(worst_l) + "; ");
  o.require(worst_w <= kOmegaTol, "omega error " + num(worst_w) + "; ");
  o.require(secs < kCfaSeconds, "runtime " + num(secs) + " s; ");
  o.detail << "max |dλ| " << num(worst_l) << ", max |dω| " << num(worst_w) << ", " << num(secs) << " s";
}

void gradient_check(Outcome& o) {
  std::mt19937_64 gen(202);
  std::uniform_real_distribution<double> lam(0.2, 0.95), th(0.05, 0.9), target(0.3, 0.9);
  double worst = 0.0;
  for (int point = 0; point < 100; ++point) {
    Eigen::VectorXd tl(4), l(4), t(4);
    for (int i = 0; i < 4; ++i) {
      tl(i) = target(gen);
      l(i) = lam(gen);
      t(i) = th(gen);
    }
    const Eigen::MatrixXd r = implied_corr(tl);
    const auto g = psy::uls_gradient(r, l, t);
    for (int i = 0; i < 8; ++i) {
      Eigen::VectorXd lp = l, lm = l, tp = t, tm = t;
      double analytic;
      if (i < 4) {
        lp(i) += kGradStep;
        lm(i) -= kGradStep;
        analytic = g.loadings(i);
      } else {
        tp(i - 4) += kGradStep;
        tm(i - 4) -= kGradStep;
        analytic = g.error_vars(i - 4);
      }
      const double fd = (psy::uls_discrepancy(r, lp, tp) - psy::uls_discrepancy(r, lm, tm)) / (2 * kGradStep);
      worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  o.require(worst <= kGradRelTol, "relative error " + num(worst) + "; ");
  o.detail << "max relative error " << num(worst) << " over 100 points";
}

void cohens_d_oracle(Outcome& o) {
  std::mt19937_64 gen(303);
  std::uniform_int_distribution<int> n(2, 1000);
  std::uniform_real_distribution<double> mean(-5.0, 10.0), sd(0.01, 4.0);
  std::uniform_int_distribution<int> pow2(-4, 4);
  double worst = 0.0;
  int asym = 0, scale_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const psy::SampleStats a{static_cast<std::size_t>(n(gen)), mean(gen), sd(gen),
                             gen() % 2 ? psy::SdKind::Sample : psy::SdKind::Population};
    const psy::SampleStats b{static_cast<std::size_t>(n(gen)), mean(gen), sd(gen),
                             gen() % 2 ? psy::SdKind::Sample : psy::SdKind::Population};
    const double d = psy::cohens_d(a, b);
    worst = std::max(worst, std::abs(d - oracle_d(a, b)));
    asym += psy::cohens_d(b, a) == -d ? 0 : 1;
    const double k = std::ldexp(1.0, pow2(gen));
    const psy::SampleStats ka{a.n, a.mean * k, a.sd * k, a.sd_kind}, kb{b.n, b.mean * k, b.sd * k, b.sd_kind};
    scale_fail += psy::cohens_d(ka, kb) == d ? 0 : 1;
  }
  o.require(worst <= kDTol, "oracle error " + num(worst) + "; ");
  o.require(asym == 0, std::to_string(asym) + " antisymmetry failures; ");
  o.require(scale_fail == 0, std::to_string(scale_fail) + " scale failures; ");
  o.detail << "max |d - oracle| " << num(worst) << " over 1000 pairs";
}

void omega_spot(Outcome& o) {
  const std::vector<double> l(4, 0.7), t(4, 0.51);
  const double w = psy::mcdonalds_omega(l, t);
  o.require(std::abs(w - kSpotOmega) <= kSpotTol, "omega " + num(w) + "; ");
  o.detail << "omega " << num(w);
}

void questionnaire_pipeline(Outcome& o) {
  const auto items = scale::default_item_bank();
  auto check = [&](const std::string& reply, const scale::PerturbationSpec& p, const std::string& tag) {
    const auto run = scale::administer_scale(*testing::constant(reply), items, p, 10);
    const auto stats = scale::score_dimensions(run);
    o.require(stats.size() == 6, tag + ": " + std::to_string(stats.size()) + " rows; ");
    for (const auto& [s, st] : stats) {
      const bool ok = report::fixed(st.mean, 2) == "7.00" && report::fixed(st.sd, 2) == "0.00" && st.n == 10;
      o.require(ok, tag + " " + scale::code(s) + " " + num(st.mean) + "±" + num(st.sd) + "; ");
    }
  };
  check("7", {}, "normal");
  scale::PerturbationSpec rev;
  rev.scale_order = scale::ScaleOrder::Reversed;
  check("1", rev, "reversed");
  o.detail << "6 rows of 7.00±0.00 in both orders";
}

void letters_game(Outcome& o) {
  using namespace letters;
  const auto words = default_word_list();
  std::map<std::string, int> index_of;
  for (std::size_t i = 0; i < words.size(); ++i) index_of[completion_prompt(words[i])] = static_cast<int>(i);
  auto agent = [&](std::function<PeekLevel(int)> level) {
    return make_agent([&index_of, level](std::span<const Message> m) -> std::string {
      if (m.size() == 1) return "no idea";
      return std::string(option_text(level(index_of.at(m.front().content)))) + ".";
    });
  };
  const PeekLevel cycle[] = {PeekLevel::VeryNeed, PeekLevel::Need, PeekLevel::NotVeryNeed, PeekLevel::NoNeed};
  auto score = [&](std::function<PeekLevel(int)> level) {
    const auto run = run_letters_game(*agent(level), words, {});
    return score_information_seeking(run.trials);
  };
  const auto all = score([](int) { return PeekLevel::VeryNeed; });
  const auto none = score([](int) { return PeekLevel::NoNeed; });
  const auto mixed = score([&](int i) { return cycle[i % 4]; });
  o.require(all.overall.n == 600 && none.overall.n == 600 && mixed.overall.n == 600, "trial count; ");
  o.require(all.overall.peek_rate == 1.0 && all.overall.intensity == 1.0, "very-need " + num(all.overall.peek_rate) + "; ");
  o.require(none.overall.peek_rate == 0.0 && none.overall.intensity == 0.0, "no-need " + num(none.overall.peek_rate) + "; ");
  o.require(mixed.overall.peek_rate == 0.5 && mixed.overall.intensity == 0.5,
            "mixed " + num(mixed.overall.peek_rate) + "/" + num(mixed.overall.intensity) + "; ");
  o.detail << "rates " << report::fixed(all.overall.peek_rate, 3) << "/" << report::fixed(none.overall.peek_rate, 3)
           << "/" << report::fixed(mixed.overall.peek_rate, 3) << ", intensities "
           << report::fixed(all.overall.intensity, 3) << "/" << report::fixed(none.overall.intensity, 3) << "/"
           << report::fixed(mixed.overall.intensity, 3) << " over 600 trials each";
}

// Option count shown for a window in the latest round prompt.
int shown_count(const std::string& prompt, char w, int u_max) {
  const std::string tag = std::string("Window ") + w + ": ";
  const auto pos = prompt.rfind(tag);
  const std::string line = prompt.substr(pos + tag.size(), prompt.find('\n', pos) - pos - tag.size());
  if (line.rfind("exactly one", 0) == 0) return 1;
  if (line.rfind("?", 0) == 0) return u_max;
  std::smatch m;
  std::regex_search(line, m, std::regex("one of (\\d+)"));
  return std::stoi(m[1]);
}

void underwater_game(Outcome& o) {
  using namespace underwater;
  const auto table = default_path_table();
  auto chooser = [&](std::function<char(int, int, int)> pick) {
    return make_agent([pick, &table](std::span<const Message> m) {
      int round = 0;
      for (const auto& x : m) round += x.role == Role::User ? 1 : 0;
      const std::string& p = m.back().content;
      return std::string("Window ") + pick(round, shown_count(p, 'A', table.u_max), shown_count(p, 'B', table.u_max));
    });
  };
  auto greedy = chooser([](int, int a, int b) { return a >= b ? 'A' : 'B'; });
  auto careful = chooser([](int, int a, int b) { return a <= b ? 'A' : 'B'; });
  const int want[] = {1, 4, 8};
  auto hand = chooser([&](int round, int a, int) { return a == want[round - 1] ? 'A' : 'B'; });
  for (std::int64_t seed = 0; seed < 10; ++seed) {
    const auto g = run_underwater_session(*greedy, table, {{}, seed});
    const auto c = run_underwater_session(*careful, table, {{}, seed});
    o.require(g.valid && score_thrill_seeking(g, table).normalized == 1.0, "greedy seed " + std::to_string(seed) + "; ");
    o.require(c.valid && score_thrill_seeking(c, table).normalized == 0.0, "certain seed " + std::to_string(seed) + "; ");
  }
  const auto h = score_thrill_seeking(run_underwater_session(*hand, table, {{}, 3}), table);
  o.require(h.raw == 13 && h.normalized == 10.0 / 21.0, "hand example " + num(h.normalized) + "; ");
  o.detail << "greedy 1.0, certain 0.0, (1,4,8) → " << h.raw << " → " << report::fixed(h.normalized, 5);
}

void social_game(Outcome& o) {
  using namespace social;
  auto stranger = make_agent([](std::span<const Message> m) {
    std::smatch match;
    std::regex_search(m.front().content, match, std::regex("type is ([A-Z]{4})"));
    return "Honestly I am a typical " + match[1].str() + " person. Long week.";
  });
  auto subject = [](bool right) {
    return make_agent([right](std::span<const Message> m) -> std::string {
      const std::string& last = m.back().content;
      if (last.find(guess_prompt()) == std::string::npos) return "Sounds good. What do you do for fun?";
      std::smatch match;
      std::regex_search(last, match, std::regex("typical ([A-Z]{4})"));
      if (right) return match[1].str();
      return match[1].str() == "ESTJ" ? "ISFP" : "ESTJ";
    });
  };
  GameOptions g;
  g.sessions = 5;
  g.seed = 8;
  const auto good = run_social_game(*subject(true), *stranger, g).sessions;
  const auto bad = run_social_game(*subject(false), *stranger, g).sessions;
  const auto s = score_social_curiosity(good);
  o.require(s.mean_questions == 10.0 && s.qualifying == 5, "score " + num(s.mean_questions) + "; ");
  std::vector<DialogueTranscript> mixed = {good[0], bad[0]};
  const auto m = score_social_curiosity(mixed);
  o.require(m.qualifying == 1 && m.excluded_incorrect == 1, "wrong guess not excluded; ");
  bool raised = false;
  try {
    score_social_curiosity(bad);
  } catch (const NoQualifyingSessions&) {
    raised = true;
  }
  o.require(raised, "all-wrong batch did not raise; ");
  o.detail << "score " << report::fixed(s.mean_questions, 1) << ", wrong guess excluded, all-wrong raises";
}

void reasoning_eval(Outcome& o) {
  using namespace reasoning;
  std::vector<ReasoningTask> tasks;
  for (int i = 0; i < 10; ++i) {
    tasks.push_back({"q" + std::to_string(i), "", "Item " + std::to_string(i) + ": how many?",
                     std::to_string(100 + i), AnswerKind::Numeric});
  }
  auto b = make_agent([](std::span<const Message> m) {
    const std::string& q = m.back().content;
    const int i = q[q.find("Item ") + 5] - '0';
    return "Thinking.\nAnswer: " + std::to_string(i < 7 ? 100 + i : 7);
  });
  for (PromptMode mode : kPromptModes) {
    const auto r = run_eval(*b, tasks, mode);
    o.require(r.accuracy_tenths() == 700, std::string(to_string(mode)) + " accuracy " + num(r.accuracy()) + "; ");
  }
  const std::map<PromptMode, std::string> pinned = {
      {PromptMode::VanillaCoT, "64124e926fec96b522c8ff9e1947b670e1268467a78a7649e205372ea852eea8"},
      {PromptMode::RefinedCoT, "1f6ff7b1c74da40a49263b353bc5534ee6d671d1d5ba93803ee8e3f8193bbd93"},
      {PromptMode::CuriousCoQ, "e4434c2c78640ec707d173109c3086e025aba2497473052eefe7324742d4a830"}};
  for (const auto& [mode, sum] : pinned) {
    o.require(prompt_checksum(mode) == sum, std::string(to_string(mode)) + " checksum; ");
  }
  o.detail << "accuracy 70.0 in every mode, 3 prompt checksums match";
}

void end_to_end_replay(Outcome& o, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  testing::spit(work / "tasks.jsonl",
                "{\"id\":\"a\",\"question\":\"What is 40 + 2?\",\"answer\":\"42\"}\n"
                "{\"id\":\"b\",\"question\":\"What is 6 * 7?\",\"answer\":\"42\"}\n"
                "{\"id\":\"c\",\"question\":\"What is 50 - 9?\",\"answer\":\"41\"}\n");
  const std::string cassette = (work / "cassette.jsonl").string();
  Json cfg = {{"backend",
               {{"kind", "record"},
                {"cassette", cassette},
                {"inner", {{"kind", "scripted"}, {"id", "fixture"}, {"script", testing::full_suite_script()}}}}},
              {"suites", {"questionnaire", "letters", "underwater", "social", "reason-eval"}},
              {"repetitions", 3},
              {"seed", 5},
              {"model_label", "fixture"},
              {"out", (work / "recorded").string()},
              {"letters", {{"repeats", 1}}},
              {"reason_eval", {{"tasks", (work / "tasks.jsonl").string()}}}};
  const auto recorded = run_suite(parse_config(cfg));
  o.require(recorded.all_complete(), "recording incomplete; ");

  cfg["backend"] = {{"kind", "replay"}, {"cassette", cassette}};
  cfg["out"] = (work / "replayed").string();
  const auto replayed = run_suite(parse_config(cfg));
  o.require(replayed.all_complete(), "replay incomplete; ");

  const auto& human = baseline::builtin();
  const auto a = report::emit_report(recorded.dir, human);
  const auto b = report::emit_report(replayed.dir, human);
  for (const char* f : {"report.md", "report.csv", "report.json"}) {
    const std::string ra = testing::slurp(fs::path(recorded.dir) / "report" / f);
    const std::string rb = testing::slurp(fs::path(replayed.dir) / "report" / f);
    o.require(!ra.empty() && ra == rb, std::string(f) + " differs; ");
  }
  o.detail << "report.md/csv/json byte-identical (" << a.markdown.size() << " md bytes)";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "curio-acceptance";
  const auto start = Clock::now();
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"CFA oracle recovery", cfa_recovery},
      {"ULS gradient check", gradient_check},
      {"Cohen's d oracle", cohens_d_oracle},
      {"Omega spot value", omega_spot},
      {"Questionnaire pipeline", questionnaire_pipeline},
      {"Letters game", letters_game},
      {"Underwater game", underwater_game},
      {"Social game", social_game},
      {"Reasoning eval", reasoning_eval},
      {"End-to-end replay", [&](Outcome& o) { end_to_end_replay(o, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (i + 1 == criteria.size()) {
      const double total = seconds_since(start);
      o.pass = o.pass && total < kTotalSeconds;
      o.detail << "; total runtime " << num(total) << " s";
    }
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.str().c_str());
    failed += o.pass ? 0 : 1;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
