#include "curio/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "curio/errors.hpp"
#include "curio/letters.hpp"
#include "curio/psychometrics.hpp"
#include "curio/reasoning.hpp"
#include "curio/runner.hpp"
#include "curio/social.hpp"
#include "curio/text.hpp"
#include "curio/underwater.hpp"

namespace curio::report {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& p) { return Json::parse(read_text(p)); }

template <class T>
std::vector<T> read_jsonl(const fs::path& p) {
  std::vector<T> out;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(T::from_json(Json::parse(line)));
  }
  return out;
}

RunConfig run_config(const fs::path& dir) {
  const fs::path m = dir / layout::kManifest;
  if (!fs::exists(m)) throw ConfigError("not a run directory (no manifest): " + dir.string());
  return parse_config(read_json(m).at("config"), dir.string());
}

Json error_json(const std::exception& e) { return {{"error", e.what()}}; }

// ---- per-suite scores ------------------------------------------------------

Json omega_entry(const Eigen::MatrixXd& data, scale::Subdimension s) {
  Json j = {{"value", nullptr}, {"converged", false}, {"rows", data.rows()}, {"note", ""}};
  if (data.rows() < 3) {
    j["note"] = "fewer than 3 completed repetitions";
    return j;
  }
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const Eigen::VectorXd col = data.col(c);
    if ((col.array() == col(0)).all()) {
      j["note"] = "zero variance in an item; omega undefined";
      return j;
    }
  }
  try {
    std::vector<std::string> names;
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      names.push_back(std::string(scale::code(s)) + "#" + std::to_string(c + 1));
    }
    const psy::CovMatrix r = psy::sample_correlation(data, names);
    const psy::CFAFit fit = psy::fit_single_factor_cfa(r);
    j["value"] = psy::mcdonalds_omega(fit, true);
    j["converged"] = fit.converged;
    j["fit"] = fit.to_json();
    if (!fit.converged) j["note"] = "fit did not converge";
  } catch (const Error& e) {
    j["note"] = e.what();
  }
  return j;
}

Json questionnaire_scores(const fs::path& dir, const RunConfig& cfg) {
  const auto items = scale::parse_item_bank(read_json(dir / "questionnaire" / "items.json"));
  scale::ScoreOptions so{cfg.questionnaire.allow_partial, cfg.questionnaire.estimator};
  Json conditions = Json::array();
  Json all_sources = Json::array();
  all_sources.push_back("questionnaire/items.json");
  std::map<scale::Subdimension, Eigen::MatrixXd> pooled;
  for (const auto& p : cfg.perturbations) {
    const std::string rel = layout::questionnaire_dir(p) + "/matrix.csv";
    all_sources.push_back(rel);
    scale::ScaleRun run;
    run.items = items;
    run.perturbation = p;
    scale::read_matrix_csv(run, read_text(dir / rel));
    Json c = {{"label", p.label()},
              {"perturbation", p.to_json()},
              {"repetitions", run.repetitions},
              {"completed_repetitions", run.completed_repetitions()},
              {"partial", run.partial()},
              {"sources", Json::array({rel, "questionnaire/items.json"})}};
    try {
      Json stats = Json::object();
      for (const auto& [s, st] : scale::score_dimensions(run, so)) stats[scale::code(s)] = st.to_json();
      c["stats"] = stats;
    } catch (const Error& e) {
      c["stats"] = nullptr;
      c["error"] = e.what();
    }
    if (run.completed_repetitions() > 0) {
      for (auto s : scale::kSubdimensions) {
        const Eigen::MatrixXd m = scale::subdimension_matrix(run, s);
        Eigen::MatrixXd& acc = pooled[s];
        Eigen::MatrixXd next(acc.rows() + m.rows(), m.cols());
        if (acc.rows() > 0) next << acc, m;
        else next = m;
        acc = next;
      }
    }
    conditions.push_back(c);
  }
  Json omega = Json::object();
  for (auto s : scale::kSubdimensions) {
    omega[scale::code(s)] = omega_entry(pooled.count(s) ? pooled[s] : Eigen::MatrixXd(0, 4), s);
  }
  return {{"estimator", cfg.questionnaire.estimator == scale::SdEstimator::RepetitionMeans
                            ? "repetition_means"
                            : "item_scores"},
          {"conditions", conditions},
          {"omega", omega},
          {"sources", all_sources}};
}

Json letters_scores(const fs::path& dir) {
  const std::string rel = "letters/trials.jsonl";
  const auto trials = read_jsonl<letters::LettersTrial>(dir / rel);
  Json j;
  try {
    j = letters::score_information_seeking(trials).to_json();
  } catch (const Error& e) {
    j = error_json(e);
  }
  j["trials"] = trials.size();
  j["sources"] = Json::array({rel});
  return j;
}

Json underwater_scores(const fs::path& dir) {
  const std::string rel = "underwater/sessions.jsonl";
  const std::string table_rel = "underwater/path_table.json";
  const auto table = underwater::PathTable::from_json(read_json(dir / table_rel));
  const auto sessions = read_jsonl<underwater::UnderwaterSession>(dir / rel);
  Json rows = Json::array();
  std::vector<double> normalized;
  int invalid = 0;
  for (const auto& s : sessions) {
    Json r = {{"index", s.index}, {"valid", s.valid}};
    if (s.valid) {
      try {
        const auto t = underwater::score_thrill_seeking(s, table);
        r.update(t.to_json());
        normalized.push_back(t.normalized);
      } catch (const Error& e) {
        r["valid"] = false;
        r["error"] = e.what();
        ++invalid;
      }
    } else {
      r["error"] = s.error;
      ++invalid;
    }
    rows.push_back(r);
  }
  const auto [lo, hi] = underwater::achievable_range(table);
  Json j = {{"sessions", rows},
            {"valid", normalized.size()},
            {"invalid", invalid},
            {"raw_min", lo},
            {"raw_max", hi},
            {"sources", Json::array({rel, table_rel})}};
  if (normalized.empty()) {
    j["mean_normalized"] = nullptr;
    j["error"] = "no valid underwater sessions";
  } else {
    j["mean_normalized"] = psy::summarize(normalized).mean;
    j["sd_normalized"] = psy::summarize(normalized).sd;
  }
  return j;
}

Json social_scores(const fs::path& dir, const RunConfig& cfg) {
  const std::string rel = "social/sessions.jsonl";
  const auto sessions = read_jsonl<social::DialogueTranscript>(dir / rel);
  social::HeuristicConfig hc;
  if (!cfg.social.partner_keywords.empty()) hc.partner_keywords = cfg.social.partner_keywords;
  auto score = [&](social::CountMode m) -> Json {
    try {
      return social::score_social_curiosity(sessions, m, hc).to_json();
    } catch (const Error& e) {
      return error_json(e);
    }
  };
  const bool has_judge = std::any_of(sessions.begin(), sessions.end(), [](const auto& t) {
    return t.annotations.count(social::CountMode::Judge) > 0;
  });
  const int fallbacks = static_cast<int>(
      std::count_if(sessions.begin(), sessions.end(), [](const auto& t) { return t.judge_fallback; }));
  Json j = {{"count_mode", social::to_string(cfg.social.count_mode)},
            {"sessions", sessions.size()},
            {"heuristic", score(social::CountMode::Heuristic)},
            {"judge", has_judge ? score(social::CountMode::Judge) : Json(nullptr)},
            {"judge_fallback_sessions", fallbacks},
            {"sources", Json::array({rel})}};
  return j;
}

Json reasoning_scores(const fs::path& dir, const RunConfig& cfg) {
  Json modes = Json::object();
  Json sources = Json::array();
  for (auto m : cfg.reason_eval.modes) {
    const std::string rel = std::string("reason_eval/") + reasoning::to_string(m) + "/records.jsonl";
    sources.push_back(rel);
    Json r = reasoning::summarize(m, read_jsonl<reasoning::TaskRecord>(dir / rel)).to_json();
    r["sources"] = Json::array({rel});
    modes[reasoning::to_string(m)] = r;
  }
  return {{"benchmark", cfg.reason_eval.benchmark},
          {"matcher", {{"marker", cfg.reason_eval.matcher.marker}, {"rel_tol", cfg.reason_eval.matcher.rel_tol}}},
          {"modes", modes},
          {"sources", sources}};
}

// ---- rendering ---------------------------------------------------------------

struct Cell {
  std::string section;
  std::string row;
  std::string column;
  std::string value;
  std::vector<std::string> sources;
};

std::vector<std::string> sources_of(const Json& j) {
  std::vector<std::string> out;
  if (j.contains("sources")) {
    for (const auto& s : j.at("sources")) out.push_back(s.get<std::string>());
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

class Table {
 public:
  Table(std::string section, std::vector<std::string> columns)
      : section_(std::move(section)), columns_(std::move(columns)) {}

  void add_row(const std::string& row, const std::vector<std::string>& values,
               const std::vector<std::string>& sources) {
    rows_.push_back(row);
    values_.push_back(values);
    sources_.push_back(sources);
  }
  bool empty() const { return rows_.empty(); }

  void render(std::ostringstream& md, std::vector<Cell>& cells, const std::string& row_header) const {
    md << "| " << row_header;
    for (const auto& c : columns_) md << " | " << md_escape(c);
    md << " |\n|---";
    for (std::size_t i = 0; i < columns_.size(); ++i) md << "|---";
    md << "|\n";
    std::vector<std::string> all_sources;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      md << "| " << md_escape(rows_[r]);
      for (std::size_t c = 0; c < columns_.size(); ++c) {
        const std::string& v = c < values_[r].size() ? values_[r][c] : std::string();
        md << " | " << md_escape(v);
        cells.push_back({section_, rows_[r], columns_[c], v, sources_[r]});
      }
      md << " |\n";
      for (const auto& s : sources_[r]) {
        if (std::find(all_sources.begin(), all_sources.end(), s) == all_sources.end()) all_sources.push_back(s);
      }
    }
    md << "\nSources: " << (all_sources.empty() ? "baseline registry" : text::join(all_sources, ", "))
       << "\n\n";
  }

 private:
  std::string section_;
  std::vector<std::string> columns_;
  std::vector<std::string> rows_;
  std::vector<std::vector<std::string>> values_;
  std::vector<std::vector<std::string>> sources_;
};

std::string mean_sd(double mean, double sd) { return fixed(mean, 2) + " ± " + fixed(sd, 2); }

std::string opt_fixed(const Json& j, int decimals) {
  return j.is_number() ? fixed(j.get<double>(), decimals) : std::string("n/a");
}

psy::SampleStats stats_of(const Json& j) { return psy::SampleStats::from_json(j); }

std::vector<std::string> with_baseline(std::vector<std::string> sources) {
  sources.push_back("baseline");
  return sources;
}

struct RankEntry {
  std::string name;
  double value;
};

double dimension_value(scale::Dimension d, const std::map<std::string, double>& sub_means, bool& ok) {
  double sum = 0.0;
  int n = 0;
  for (auto s : scale::kSubdimensions) {
    if (scale::parent(s) != d) continue;
    auto it = sub_means.find(scale::code(s));
    if (it == sub_means.end()) {
      ok = false;
      return 0.0;
    }
    sum += it->second;
    ++n;
  }
  return sum / n;
}

}  // namespace

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::vector<std::string> required_files(const std::string& run_dir, Suite suite) {
  const RunConfig cfg = run_config(run_dir);
  switch (suite) {
    case Suite::Questionnaire: {
      std::vector<std::string> out = {"questionnaire/items.json"};
      for (const auto& p : cfg.perturbations) out.push_back(layout::questionnaire_dir(p) + "/matrix.csv");
      return out;
    }
    case Suite::Letters: return {"letters/trials.jsonl"};
    case Suite::Underwater: return {"underwater/path_table.json", "underwater/sessions.jsonl"};
    case Suite::Social: return {"social/sessions.jsonl"};
    case Suite::ReasonEval: {
      std::vector<std::string> out;
      for (auto m : cfg.reason_eval.modes) {
        out.push_back(std::string("reason_eval/") + reasoning::to_string(m) + "/records.jsonl");
      }
      return out;
    }
  }
  return {};
}

Json suite_scores(const std::string& run_dir, Suite suite) {
  const fs::path dir = run_dir;
  const RunConfig cfg = run_config(dir);
  std::vector<std::string> missing;
  for (const auto& f : required_files(run_dir, suite)) {
    if (!fs::exists(dir / f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    throw ConfigError(std::string("suite ") + to_string(suite) + " is missing " + text::join(missing, ", "));
  }
  switch (suite) {
    case Suite::Questionnaire: return questionnaire_scores(dir, cfg);
    case Suite::Letters: return letters_scores(dir);
    case Suite::Underwater: return underwater_scores(dir);
    case Suite::Social: return social_scores(dir, cfg);
    case Suite::ReasonEval: return reasoning_scores(dir, cfg);
  }
  return nullptr;
}

CuriosityReport build_report(const std::string& run_dir, const baseline::HumanBaseline& human) {
  const fs::path dir = run_dir;
  const RunConfig cfg = run_config(dir);
  const Json manifest = read_json(dir / layout::kManifest);

  std::vector<std::string> absent;
  for (Suite s : cfg.suites) {
    const auto files = required_files(run_dir, s);
    if (std::any_of(files.begin(), files.end(), [&](const std::string& f) { return !fs::exists(dir / f); })) {
      absent.push_back(to_string(s));
    }
  }
  if (!absent.empty()) {
    throw ConfigError("run has no record files for suites: " + text::join(absent, ", "));
  }

  Json scores = Json::object();
  for (Suite s : cfg.suites) scores[to_string(s)] = suite_scores(run_dir, s);

  const std::string label = manifest.value("model_label", cfg.label());
  Json metadata = {{"model_label", label},
                   {"protocol_hash", manifest.value("protocol_hash", "")},
                   {"cassette_hash", manifest.value("cassette_hash", "none")},
                   {"seed", cfg.seed},
                   {"repetitions", cfg.repetitions},
                   {"baseline", {{"id", human.id}, {"provenance", human.provenance}, {"fingerprint", human.fingerprint()}}},
                   {"suites", manifest.value("suites", Json::array())}};

  std::ostringstream md;
  std::vector<Cell> cells;
  md << "# Curiosity report: " << label << "\n\n";
  md << "- Protocol hash: `" << metadata["protocol_hash"].get<std::string>() << "`\n";
  md << "- Cassette hash: `" << metadata["cassette_hash"].get<std::string>() << "`\n";
  md << "- Seed: " << cfg.seed << ", repetitions: " << cfg.repetitions << "\n";
  md << "- Baseline: " << human.id << " (`" << human.fingerprint().substr(0, 16) << "`): " << human.provenance
     << "\n";
  for (const auto& s : metadata["suites"]) {
    md << "- Suite " << s.value("suite", "") << ": " << s.value("status", "");
    if (!s.value("detail", "").empty()) md << " (" << s.value("detail", "") << ")";
    md << "\n";
  }
  md << "\n";

  std::map<std::string, double> model_sub_means;

  if (scores.contains("questionnaire")) {
    const Json& q = scores["questionnaire"];
    const Json& primary = q["conditions"][0];
    const auto src = sources_of(primary);

    md << "## Questionnaire\n\n";
    md << "Condition `" << primary["label"].get<std::string>() << "`, SD estimator " << q["estimator"].get<std::string>()
       << ". Cohen's d is positive when the model scores above the human sample.\n\n";
    if (primary.value("partial", false)) {
      md << "Partial run: " << primary["completed_repetitions"].get<int>() << " of "
         << primary["repetitions"].get<int>() << " repetitions completed.\n\n";
    }
    Table t("questionnaire", {"Subdimension", label, "Human", "d vs human"});
    for (auto s : scale::kSubdimensions) {
      const std::string c = scale::code(s);
      std::string model = "n/a", d = "n/a", hum = "n/a";
      if (human.questionnaire.count(s)) {
        const auto& h = human.questionnaire.at(s);
        hum = mean_sd(h.mean, h.sd);
      }
      if (primary["stats"].is_object()) {
        const auto ms = stats_of(primary["stats"][c]);
        model = mean_sd(ms.mean, ms.sd);
        model_sub_means[c] = ms.mean;
        if (human.questionnaire.count(s)) {
          try {
            d = fixed(psy::cohens_d(ms, human.questionnaire.at(s)), 2);
          } catch (const Error&) {
          }
        }
      }
      t.add_row(c, {scale::full_name(s), model, hum, d}, with_baseline(src));
    }
    t.render(md, cells, "Code");

    if (q["conditions"].size() > 1) {
      md << "### Perturbation robustness\n\n";
      std::vector<std::string> cols;
      for (const auto& c : q["conditions"]) cols.push_back(c["label"].get<std::string>());
      Table pt("perturbations", cols);
      for (auto s : scale::kSubdimensions) {
        std::vector<std::string> vals;
        std::vector<std::string> srcs;
        for (const auto& c : q["conditions"]) {
          if (c["stats"].is_object()) {
            const auto ms = stats_of(c["stats"][scale::code(s)]);
            vals.push_back(mean_sd(ms.mean, ms.sd));
          } else {
            vals.push_back("n/a");
          }
          for (const auto& x : sources_of(c)) {
            if (std::find(srcs.begin(), srcs.end(), x) == srcs.end()) srcs.push_back(x);
          }
        }
        pt.add_row(scale::code(s), vals, srcs);
      }
      pt.render(md, cells, "Code");
    }

    md << "### Reliability (McDonald's omega)\n\n";
    Table ot("omega", {"Omega", "Converged", "Human", "Note"});
    auto osrc = sources_of(q);
    for (auto s : scale::kSubdimensions) {
      const Json& o = q["omega"][scale::code(s)];
      const std::string hum = human.omega.count(s) ? fixed(human.omega.at(s), 3) : "n/a";
      ot.add_row(scale::code(s),
                 {opt_fixed(o["value"], 3), o["converged"].get<bool>() ? "yes" : "no", hum,
                  o.value("note", "")},
                 with_baseline(osrc));
    }
    ot.render(md, cells, "Code");
  }

  const bool behavioral =
      scores.contains("letters") || scores.contains("underwater") || scores.contains("social");
  if (behavioral) {
    md << "## Behavioral games\n\n";
    Table bt("behavioral", {label, "Human", "Difference"});
    if (scores.contains("letters")) {
      const Json& l = scores["letters"];
      const auto src = sources_of(l);
      const std::string hum = human.letters_peek_rate ? fixed(*human.letters_peek_rate, 3) : "n/a";
      if (l.contains("overall")) {
        const double rate = l["overall"]["peek_rate"].get<double>();
        const std::string diff = human.letters_peek_rate ? fixed(rate - *human.letters_peek_rate, 3) : "n/a";
        bt.add_row("Letters peek rate", {fixed(rate, 3), hum, diff}, with_baseline(src));
        bt.add_row("Letters peek intensity", {fixed(l["overall"]["intensity"].get<double>(), 3), "n/a", "n/a"}, src);
        bt.add_row("Letters completion accuracy", {fixed(l["completion_accuracy"].get<double>(), 3), "n/a", "n/a"},
                   src);
      } else {
        bt.add_row("Letters peek rate", {"n/a", hum, "n/a"}, src);
      }
    }
    if (scores.contains("underwater")) {
      const Json& u = scores["underwater"];
      const std::string hum = human.thrill_normalized ? fixed(*human.thrill_normalized, 3) : "n/a";
      std::string diff = "n/a";
      if (u["mean_normalized"].is_number() && human.thrill_normalized) {
        diff = fixed(u["mean_normalized"].get<double>() - *human.thrill_normalized, 3);
      }
      bt.add_row("Underwater thrill (normalized)", {opt_fixed(u["mean_normalized"], 3), hum, diff},
                 with_baseline(sources_of(u)));
      bt.add_row("Underwater valid sessions",
                 {std::to_string(u["valid"].get<int>()) + "/" +
                      std::to_string(u["valid"].get<int>() + u["invalid"].get<int>()),
                  "n/a", "n/a"},
                 sources_of(u));
    }
    if (scores.contains("social")) {
      const Json& s = scores["social"];
      const std::string hum = human.social_questions ? fixed(*human.social_questions, 2) : "n/a";
      for (const char* mode : {"heuristic", "judge"}) {
        const Json& m = s[mode];
        if (m.is_null()) continue;
        const std::string row = std::string("Social partner questions (") + mode + ")";
        if (m.contains("mean_questions")) {
          const double v = m["mean_questions"].get<double>();
          std::string diff = human.social_questions ? fixed(v - *human.social_questions, 2) : "n/a";
          bt.add_row(row, {fixed(v, 2), hum, diff}, with_baseline(sources_of(s)));
          bt.add_row(std::string("Social sessions used (") + mode + ")",
                     {std::to_string(m["qualifying"].get<int>()) + " used, " +
                          std::to_string(m["excluded_incorrect"].get<int>()) + " wrong guess, " +
                          std::to_string(m["excluded_invalid"].get<int>()) + " invalid",
                      "n/a", "n/a"},
                     sources_of(s));
        } else {
          bt.add_row(row, {"n/a", hum, "n/a"}, sources_of(s));
        }
      }
    }
    bt.render(md, cells, "Measure");
    if (scores.contains("social")) {
      md << "Configured counting mode: " << scores["social"]["count_mode"].get<std::string>();
      if (scores["social"]["judge_fallback_sessions"].get<int>() > 0) {
        md << "; judge fell back to the heuristic in " << scores["social"]["judge_fallback_sessions"].get<int>()
           << " sessions";
      }
      md << ".\n\n";
    }
  }

  if (scores.contains("reason-eval")) {
    const Json& r = scores["reason-eval"];
    md << "## Reasoning (" << r["benchmark"].get<std::string>() << ")\n\n";
    md << "Answers are matched with the configurable matcher (marker \"" << r["matcher"]["marker"].get<std::string>()
       << "\", relative tolerance " << r["matcher"]["rel_tol"].get<double>() << "); errored tasks are excluded.\n\n";
    Table rt("reasoning", {"Accuracy (%)", "Correct/Total", "Errored", "No answer", "Self-questions"});
    for (const auto& [mode, m] : r["modes"].items()) {
      rt.add_row(mode,
                 {fixed(m["accuracy"].get<double>(), 1),
                  std::to_string(m["correct"].get<int>()) + "/" + std::to_string(m["total"].get<int>()),
                  std::to_string(m["errored"].get<int>()), std::to_string(m["no_answer"].get<int>()),
                  fixed(m["mean_self_questions"].get<double>(), 2)},
                 sources_of(m));
    }
    rt.render(md, cells, "Mode");
    const Json refs = human.reference_models.value("reasoning_accuracy", Json::object());
    if (!refs.empty()) {
      md << "Reference accuracy (%):\n\n";
      Table ref("reasoning_reference", {"Benchmark", "Mode", "Accuracy (%)"});
      for (const auto& [model, benches] : refs.items()) {
        for (const auto& [bench, modes] : benches.items()) {
          for (const auto& [mode, pct] : modes.items()) {
            ref.add_row(model, {bench, mode, fixed(pct.get<double>(), 1)}, {"baseline"});
          }
        }
      }
      ref.render(md, cells, "Model");
    }
  }

  if (!model_sub_means.empty()) {
    md << "## Rank comparison\n\n";
    std::map<std::string, std::map<std::string, double>> entities;
    entities[label] = model_sub_means;
    for (const auto& [s, st] : human.questionnaire) entities["Human"][scale::code(s)] = st.mean;
    const Json refq = human.reference_models.value("questionnaire", Json::object());
    for (const auto& [model, subs] : refq.items()) {
      if (model == label) continue;
      for (const auto& [c, v] : subs.items()) entities[model][c] = v.at(0).get<double>();
    }
    const std::vector<scale::Dimension> dims = {scale::Dimension::InformationSeeking,
                                                scale::Dimension::ThrillSeeking,
                                                scale::Dimension::SocialCuriosity};
    std::map<std::string, std::vector<std::string>> row_values;
    for (auto d : dims) {
      std::vector<RankEntry> ranked;
      for (const auto& [name, subs] : entities) {
        bool ok = true;
        const double v = dimension_value(d, subs, ok);
        if (ok) ranked.push_back({name, v});
      }
      std::stable_sort(ranked.begin(), ranked.end(), [](const RankEntry& a, const RankEntry& b) {
        return a.value != b.value ? a.value > b.value : a.name < b.name;
      });
      std::map<std::string, std::string> cell;
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        cell[ranked[i].name] = std::to_string(i + 1) + " (" + fixed(ranked[i].value, 2) + ")";
      }
      for (const auto& [name, subs] : entities) {
        row_values[name].push_back(cell.count(name) ? cell[name] : "n/a");
      }
    }
    std::vector<std::string> cols;
    for (auto d : dims) cols.push_back(scale::to_string(d));
    Table kt("rank", cols);
    const auto qsrc = sources_of(scores["questionnaire"]["conditions"][0]);
    kt.add_row(label, row_values[label], qsrc);
    for (const auto& [name, vals] : row_values) {
      if (name != label) kt.add_row(name, vals, {"baseline"});
    }
    md << "Rank (dimension mean) per dimension; the dimension mean averages its subdimension means.\n\n";
    kt.render(md, cells, "Model");
  }

  std::ostringstream csv;
  csv << "section,row,column,value,sources\n";
  Json cells_json = Json::array();
  for (const auto& c : cells) {
    csv << csv_field(c.section) << ',' << csv_field(c.row) << ',' << csv_field(c.column) << ','
        << csv_field(c.value) << ',' << csv_field(text::join(c.sources, ";")) << '\n';
    cells_json.push_back(
        {{"section", c.section}, {"row", c.row}, {"column", c.column}, {"value", c.value}, {"sources", c.sources}});
  }

  CuriosityReport rep;
  rep.data = {{"metadata", metadata}, {"scores", scores}, {"cells", cells_json}};
  rep.markdown = md.str();
  rep.csv = csv.str();
  return rep;
}

CuriosityReport emit_report(const std::string& run_dir, const baseline::HumanBaseline& human,
                            const std::string& out_dir) {
  CuriosityReport rep = build_report(run_dir, human);
  const fs::path out = out_dir.empty() ? fs::path(run_dir) / "report" : fs::path(out_dir);
  fs::create_directories(out);
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + (out / name).string());
    f << content;
  };
  write("report.md", rep.markdown);
  write("report.csv", rep.csv);
  write("report.json", rep.data.dump(2) + "\n");
  return rep;
}

baseline::HumanBaseline baseline_for(const RunConfig& cfg) {
  baseline::HumanBaseline b = cfg.baseline.file.empty() ? baseline::builtin() : baseline::load(cfg.baseline.file);
  if (!cfg.baseline.override_patch.is_null()) {
    b = baseline::with_override(b, cfg.baseline.override_patch, cfg.baseline.override_id);
  }
  return b;
}

}  // namespace curio::report
