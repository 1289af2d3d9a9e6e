#include "curio/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "curio/errors.hpp"
#include "curio/text.hpp"

namespace curio {

namespace fs = std::filesystem;

const char* to_string(Suite s) {
  switch (s) {
    case Suite::Questionnaire: return "questionnaire";
    case Suite::Letters: return "letters";
    case Suite::Underwater: return "underwater";
    case Suite::Social: return "social";
    case Suite::ReasonEval: return "reason-eval";
  }
  return "?";
}

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> s = {Suite::Questionnaire, Suite::Letters, Suite::Underwater,
                                       Suite::Social, Suite::ReasonEval};
  return s;
}

Suite suite_from_string(const std::string& s) {
  std::string key = text::to_lower(s);
  std::replace(key.begin(), key.end(), '_', '-');
  for (Suite x : all_suites()) {
    if (key == to_string(x)) return x;
  }
  std::vector<std::string> names;
  for (Suite x : all_suites()) names.push_back(to_string(x));
  throw ConfigError("unknown suite '" + s + "'; valid suites: " + text::join(names, ", "));
}

bool RunConfig::has_suite(Suite s) const {
  return std::find(suites.begin(), suites.end(), s) != suites.end();
}

std::string RunConfig::label() const { return model_label.empty() ? backend.label() : model_label; }

namespace {

Json sampling_json(const SamplingParams& p) {
  return {{"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}};
}

const char* estimator_name(scale::SdEstimator e) {
  return e == scale::SdEstimator::RepetitionMeans ? "repetition_means" : "item_scores";
}

const char* format_name(reasoning::TaskFormat f) {
  switch (f) {
    case reasoning::TaskFormat::Native: return "native";
    case reasoning::TaskFormat::Detectbench: return "detectbench";
    case reasoning::TaskFormat::NuminaMath: return "numinamath";
  }
  return "native";
}

Json modes_json(const std::vector<reasoning::PromptMode>& modes) {
  Json j = Json::array();
  for (auto m : modes) j.push_back(reasoning::to_string(m));
  return j;
}

Json perturbations_json(const std::vector<scale::PerturbationSpec>& ps) {
  Json j = Json::array();
  for (const auto& p : ps) j.push_back(p.to_json());
  return j;
}

// Collects problems so one error can list all of them.
class Problems {
 public:
  void add(std::string msg) { items_.push_back(std::move(msg)); }
  template <class F>
  void guard(const std::string& where, F&& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      add(where + ": " + e.what());
    } catch (const Json::exception& e) {
      add(where + ": " + e.what());
    }
  }
  void check_keys(const Json& j, const std::string& where, const std::vector<std::string>& known) {
    if (!j.is_object()) {
      add(where + " must be an object");
      return;
    }
    for (const auto& [k, v] : j.items()) {
      (void)v;
      if (std::find(known.begin(), known.end(), k) == known.end()) {
        add("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
      }
    }
  }
  void raise() const {
    if (!items_.empty()) throw ConfigError("invalid configuration: " + text::join(items_, "; "));
  }

 private:
  std::vector<std::string> items_;
};

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void resolve_backend_paths(BackendSpec& s, const std::string& base_dir) {
  s.cassette = resolve(base_dir, s.cassette);
  if (s.inner) {
    auto inner = std::make_shared<BackendSpec>(*s.inner);
    resolve_backend_paths(*inner, base_dir);
    s.inner = inner;
  }
}

}  // namespace

Json RunConfig::to_json() const {
  Json j;
  j["backend"] = backend.to_json();
  if (stranger_backend) j["stranger_backend"] = stranger_backend->to_json();
  if (judge_backend) j["judge_backend"] = judge_backend->to_json();
  Json s = Json::array();
  for (Suite x : suites) s.push_back(to_string(x));
  j["suites"] = s;
  j["repetitions"] = repetitions;
  j["parallelism"] = parallelism;
  j["perturbations"] = perturbations_json(perturbations);
  j["out"] = out;
  j["seed"] = seed;
  j["sampling"] = sampling_json(sampling);
  if (!model_label.empty()) j["model_label"] = model_label;
  j["questionnaire"] = {{"item_bank", questionnaire.item_bank},
                        {"lexicon", questionnaire.lexicon},
                        {"sd_estimator", estimator_name(questionnaire.estimator)},
                        {"allow_partial", questionnaire.allow_partial}};
  j["letters"] = {{"word_list", letters.word_list}, {"repeats", letters.repeats}};
  j["underwater"] = {{"path_table", underwater.path_table}, {"sessions", underwater.sessions}};
  j["social"] = {{"personas", social.personas},
                 {"sessions", social.sessions},
                 {"count_mode", social::to_string(social.count_mode)},
                 {"partner_keywords", social.partner_keywords}};
  j["reason_eval"] = {{"tasks", reason_eval.tasks},
                      {"format", format_name(reason_eval.format)},
                      {"benchmark", reason_eval.benchmark},
                      {"modes", modes_json(reason_eval.modes)},
                      {"marker", reason_eval.matcher.marker},
                      {"rel_tol", reason_eval.matcher.rel_tol}};
  j["baseline"] = {{"file", baseline.file},
                   {"override", baseline.override_patch},
                   {"override_id", baseline.override_id}};
  return j;
}

Json RunConfig::protocol_json() const {
  Json j;
  j["model_label"] = label();
  j["repetitions"] = repetitions;
  j["perturbations"] = perturbations_json(perturbations);
  j["seed"] = seed;
  j["sampling"] = sampling_json(sampling);
  j["questionnaire"] = {{"sd_estimator", estimator_name(questionnaire.estimator)},
                        {"allow_partial", questionnaire.allow_partial}};
  j["letters"] = {{"repeats", letters.repeats}};
  j["underwater"] = {{"sessions", underwater_sessions()}};
  j["social"] = {{"sessions", social_sessions()},
                 {"count_mode", social::to_string(social.count_mode)},
                 {"partner_keywords", social.partner_keywords}};
  j["reason_eval"] = {{"format", format_name(reason_eval.format)},
                      {"benchmark", reason_eval.benchmark},
                      {"modes", modes_json(reason_eval.modes)},
                      {"matcher", reason_eval.matcher.to_json()}};
  j["baseline"] = {{"override", baseline.override_patch}, {"override_id", baseline.override_id}};
  return j;
}

RunConfig parse_config(const Json& j, const std::string& base_dir) {
  Problems p;
  RunConfig c;
  p.check_keys(j, "", {"backend", "stranger_backend", "judge_backend", "suites", "repetitions",
                       "parallelism", "perturbations", "out", "seed", "sampling", "model_label",
                       "questionnaire", "letters", "underwater", "social", "reason_eval",
                       "baseline"});
  if (!j.is_object()) p.raise();

  if (!j.contains("backend")) {
    p.add("missing required key 'backend'");
  } else {
    p.guard("backend", [&] { c.backend = BackendSpec::from_json(j.at("backend")); });
  }
  if (j.contains("stranger_backend")) {
    p.guard("stranger_backend", [&] { c.stranger_backend = BackendSpec::from_json(j.at("stranger_backend")); });
  }
  if (j.contains("judge_backend")) {
    p.guard("judge_backend", [&] { c.judge_backend = BackendSpec::from_json(j.at("judge_backend")); });
  }

  if (!j.contains("suites")) {
    p.add("missing required key 'suites'");
  } else {
    const Json& s = j.at("suites");
    const Json list = s.is_string() ? Json::array({s}) : s;
    if (!list.is_array() || list.empty()) p.add("'suites' must be a non-empty list");
    for (const auto& name : list) {
      p.guard("suites", [&] {
        const Suite x = suite_from_string(name.get<std::string>());
        if (!c.has_suite(x)) c.suites.push_back(x);
      });
    }
  }

  p.guard("repetitions", [&] { c.repetitions = j.value("repetitions", 10); });
  if (c.repetitions < 1) p.add("repetitions must be >= 1, got " + std::to_string(c.repetitions));
  p.guard("parallelism", [&] { c.parallelism = j.value("parallelism", 4); });
  if (c.parallelism < 1) p.add("parallelism must be >= 1, got " + std::to_string(c.parallelism));
  p.guard("seed", [&] { c.seed = j.value("seed", std::uint64_t{0}); });
  p.guard("out", [&] { c.out = resolve(base_dir, j.value("out", std::string())); });
  p.guard("model_label", [&] { c.model_label = j.value("model_label", std::string()); });

  if (j.contains("perturbations")) {
    c.perturbations.clear();
    const Json& ps = j.at("perturbations");
    if (!ps.is_array() || ps.empty()) p.add("'perturbations' must be a non-empty list");
    for (const auto& x : ps) {
      p.guard("perturbations", [&] { c.perturbations.push_back(scale::PerturbationSpec::from_json(x)); });
    }
    std::vector<std::string> labels;
    for (const auto& x : c.perturbations) {
      if (std::find(labels.begin(), labels.end(), x.label()) != labels.end()) {
        p.add("duplicate perturbation '" + x.label() + "'");
      }
      labels.push_back(x.label());
    }
  }

  if (j.contains("sampling")) {
    const Json& s = j.at("sampling");
    p.check_keys(s, "sampling", {"temperature", "top_p", "max_tokens"});
    p.guard("sampling", [&] {
      c.sampling.temperature = s.value("temperature", c.sampling.temperature);
      c.sampling.top_p = s.value("top_p", c.sampling.top_p);
      c.sampling.max_tokens = s.value("max_tokens", c.sampling.max_tokens);
      c.sampling.validate();
    });
  }

  if (j.contains("questionnaire")) {
    const Json& q = j.at("questionnaire");
    p.check_keys(q, "questionnaire", {"item_bank", "lexicon", "sd_estimator", "allow_partial"});
    p.guard("questionnaire", [&] {
      c.questionnaire.item_bank = resolve(base_dir, q.value("item_bank", std::string()));
      c.questionnaire.lexicon = resolve(base_dir, q.value("lexicon", std::string()));
      c.questionnaire.allow_partial = q.value("allow_partial", false);
      const auto est = q.value("sd_estimator", std::string("item_scores"));
      if (est == "item_scores") {
        c.questionnaire.estimator = scale::SdEstimator::ItemScores;
      } else if (est == "repetition_means") {
        c.questionnaire.estimator = scale::SdEstimator::RepetitionMeans;
      } else {
        throw ConfigError("sd_estimator must be item_scores or repetition_means");
      }
    });
  }
  if (j.contains("letters")) {
    const Json& l = j.at("letters");
    p.check_keys(l, "letters", {"word_list", "repeats"});
    p.guard("letters", [&] {
      c.letters.word_list = resolve(base_dir, l.value("word_list", std::string()));
      c.letters.repeats = l.value("repeats", 10);
    });
    if (c.letters.repeats < 1) p.add("letters.repeats must be >= 1");
  }
  if (j.contains("underwater")) {
    const Json& u = j.at("underwater");
    p.check_keys(u, "underwater", {"path_table", "sessions"});
    p.guard("underwater", [&] {
      c.underwater.path_table = resolve(base_dir, u.value("path_table", std::string()));
      c.underwater.sessions = u.value("sessions", 0);
    });
    if (c.underwater.sessions < 0) p.add("underwater.sessions must be >= 0");
  }
  if (j.contains("social")) {
    const Json& s = j.at("social");
    p.check_keys(s, "social", {"personas", "sessions", "count_mode", "partner_keywords"});
    p.guard("social", [&] {
      c.social.personas = resolve(base_dir, s.value("personas", std::string()));
      c.social.sessions = s.value("sessions", 0);
      c.social.count_mode = social::count_mode_from_string(s.value("count_mode", std::string("heuristic")));
      c.social.partner_keywords = s.value("partner_keywords", std::vector<std::string>{});
    });
    if (c.social.sessions < 0) p.add("social.sessions must be >= 0");
  }
  if (j.contains("reason_eval")) {
    const Json& r = j.at("reason_eval");
    p.check_keys(r, "reason_eval", {"tasks", "format", "benchmark", "modes", "marker", "rel_tol"});
    p.guard("reason_eval", [&] {
      c.reason_eval.tasks = resolve(base_dir, r.value("tasks", std::string()));
      c.reason_eval.format = reasoning::task_format_from_string(r.value("format", std::string("native")));
      c.reason_eval.benchmark = r.value("benchmark", std::string("custom"));
      if (r.contains("modes")) {
        c.reason_eval.modes.clear();
        for (const auto& m : r.at("modes")) {
          c.reason_eval.modes.push_back(reasoning::prompt_mode_from_string(m.get<std::string>()));
        }
        if (c.reason_eval.modes.empty()) throw ConfigError("modes must not be empty");
      }
      c.reason_eval.matcher.marker = r.value("marker", c.reason_eval.matcher.marker);
      c.reason_eval.matcher.rel_tol = r.value("rel_tol", c.reason_eval.matcher.rel_tol);
    });
  }
  if (j.contains("baseline")) {
    const Json& b = j.at("baseline");
    p.check_keys(b, "baseline", {"file", "override", "override_id"});
    p.guard("baseline", [&] {
      c.baseline.file = resolve(base_dir, b.value("file", std::string()));
      if (b.contains("override")) c.baseline.override_patch = b.at("override");
      c.baseline.override_id = b.value("override_id", std::string());
      if (!c.baseline.override_patch.is_null() && c.baseline.override_id.empty()) {
        throw ConfigError("an override needs override_id");
      }
    });
  }

  resolve_backend_paths(c.backend, base_dir);
  if (c.stranger_backend) resolve_backend_paths(*c.stranger_backend, base_dir);
  if (c.judge_backend) resolve_backend_paths(*c.judge_backend, base_dir);

  if (c.has_suite(Suite::ReasonEval) && c.reason_eval.tasks.empty()) {
    p.add("suite reason-eval needs reason_eval.tasks");
  }
  if (c.has_suite(Suite::Social) && c.social.count_mode == social::CountMode::Judge && !c.judge_backend) {
    p.add("social.count_mode judge needs judge_backend");
  }
  p.raise();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j, fs::path(path).parent_path().string());
}

}  // namespace curio
