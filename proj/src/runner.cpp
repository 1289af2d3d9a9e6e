#include "curio/runner.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "curio/errors.hpp"
#include "curio/hashing.hpp"
#include "curio/report.hpp"
#include "curio/text.hpp"

namespace curio {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "curio 0.1.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
  }
  fs::rename(tmp, p);
}

std::string jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

// Append-only checkpoint, one JSON object per line, flushed per write.
class UnitLog {
 public:
  explicit UnitLog(const fs::path& p) {
    fs::create_directories(p.parent_path());
    out_.open(p, std::ios::app | std::ios::binary);
    if (!out_) throw Error("cannot open checkpoint " + p.string());
  }
  void write(const Json& j) {
    std::lock_guard lock(mu_);
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Malformed lines (a write cut short by a crash) are skipped.
std::vector<Json> read_units(const fs::path& p) {
  std::vector<Json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error&) {
    }
  }
  return out;
}

template <class T>
std::vector<T> resume_units(const fs::path& p, bool resume) {
  std::vector<T> out;
  if (!resume) return out;
  for (const auto& j : read_units(p)) {
    try {
      out.push_back(T::from_json(j));
    } catch (const std::exception&) {
    }
  }
  return out;
}

std::string fingerprint(const Json& j) { return sha256_hex(j.dump()); }

Json items_json(const std::vector<scale::ScaleItem>& items) {
  Json j = Json::array();
  for (const auto& i : items) {
    j.push_back({{"id", i.id}, {"subdimension", scale::code(i.subdimension)}, {"statement", i.statement}});
  }
  return j;
}

Json words_json(const std::vector<letters::WordPuzzle>& words) {
  Json j = Json::array();
  for (const auto& w : words) j.push_back({{"answer", w.answer}, {"masked_positions", w.masked_positions}});
  return j;
}

Json tasks_json(const std::vector<reasoning::ReasoningTask>& tasks) {
  Json j = Json::array();
  for (const auto& t : tasks) j.push_back(t.to_json());
  return j;
}

struct Context {
  const RunConfig& cfg;
  const RunData& data;
  const RunOptions& opts;
  fs::path dir;
  BackendPtr subject;
  BackendPtr stranger;
  BackendPtr judge;

  void log(const std::string& msg) const {
    if (opts.log) opts.log(msg);
  }
  std::uint64_t seed(Suite s) const { return suite_seed(cfg.seed, s); }
};

void write_scores(const Context& ctx, Suite s, const std::string& subdir) {
  write_text(ctx.dir / subdir / "scores.json", report::suite_scores(ctx.dir.string(), s).dump(2) + "\n");
}

SuiteOutcome run_questionnaire(const Context& ctx) {
  SuiteOutcome out{Suite::Questionnaire, "complete", ""};
  write_text(ctx.dir / "questionnaire" / "items.json", items_json(ctx.data.items).dump(2) + "\n");
  std::vector<std::string> notes;
  for (const auto& p : ctx.cfg.perturbations) {
    const fs::path d = ctx.dir / layout::questionnaire_dir(p);
    write_text(d / "perturbation.json", p.to_json().dump(2) + "\n");
    UnitLog units(d / layout::kUnits);
    scale::AdministerOptions o;
    o.parallelism = ctx.cfg.parallelism;
    o.seed = ctx.seed(Suite::Questionnaire);
    o.sampling = ctx.cfg.sampling;
    o.lexicons = &ctx.data.lexicons;
    o.completed_cells = resume_units<scale::CellRecord>(d / layout::kUnits, ctx.opts.resume);
    o.on_cell = [&](const scale::CellRecord& c) { units.write(c.to_json()); };
    ctx.log("questionnaire " + p.label() + ": " + std::to_string(o.completed_cells.size()) +
            " cells reused");
    scale::ScaleRun run;
    try {
      run = scale::administer_scale(*ctx.subject, ctx.data.items, p, ctx.cfg.repetitions, o);
    } catch (const BackendUnavailable& e) {
      return {Suite::Questionnaire, "aborted", p.label() + ": " + e.what()};
    }
    std::vector<Json> cells;
    for (const auto& c : run.cells) cells.push_back(c.to_json());
    write_text(d / "transcripts.jsonl", jsonl(cells));
    write_text(d / "matrix.csv", scale::matrix_csv(run));
    Json errors = Json::array();
    for (std::size_t r = 0; r < run.rep_errors.size(); ++r) {
      if (!run.rep_errors[r].empty()) errors.push_back({{"repetition", r}, {"error", run.rep_errors[r]}});
    }
    write_text(d / "errors.json", errors.dump(2) + "\n");
    if (run.partial()) {
      out.status = "partial";
      notes.push_back(p.label() + ": " + std::to_string(run.completed_repetitions()) + "/" +
                      std::to_string(run.repetitions) + " repetitions");
    }
  }
  out.detail = text::join(notes, "; ");
  write_scores(ctx, Suite::Questionnaire, "questionnaire");
  return out;
}

SuiteOutcome run_letters(const Context& ctx) {
  const fs::path d = ctx.dir / "letters";
  write_text(d / "words.json", words_json(ctx.data.words).dump(2) + "\n");
  UnitLog units(d / layout::kUnits);
  letters::GameOptions o;
  o.repeats = ctx.cfg.letters.repeats;
  o.parallelism = ctx.cfg.parallelism;
  o.seed = ctx.seed(Suite::Letters);
  o.sampling = ctx.cfg.sampling;
  o.completed_trials = resume_units<letters::LettersTrial>(d / layout::kUnits, ctx.opts.resume);
  o.on_trial = [&](const letters::LettersTrial& t) { units.write(t.to_json()); };
  letters::LettersRun run;
  try {
    run = letters::run_letters_game(*ctx.subject, ctx.data.words, o);
  } catch (const BackendUnavailable& e) {
    return {Suite::Letters, "aborted", e.what()};
  }
  std::vector<Json> rows;
  for (const auto& t : run.trials) rows.push_back(t.to_json());
  write_text(d / "trials.jsonl", jsonl(rows));
  write_text(d / "failures.json", Json(run.failures).dump(2) + "\n");
  write_scores(ctx, Suite::Letters, "letters");
  if (!run.failures.empty()) {
    return {Suite::Letters, "partial", std::to_string(run.failures.size()) + " trials failed"};
  }
  return {Suite::Letters, "complete", ""};
}

SuiteOutcome run_underwater(const Context& ctx) {
  const fs::path d = ctx.dir / "underwater";
  write_text(d / "path_table.json", ctx.data.path_table.to_json().dump(2) + "\n");
  UnitLog units(d / layout::kUnits);
  underwater::GameOptions o;
  o.sessions = ctx.cfg.underwater_sessions();
  o.parallelism = ctx.cfg.parallelism;
  o.seed = ctx.seed(Suite::Underwater);
  o.sampling = ctx.cfg.sampling;
  o.completed_sessions = resume_units<underwater::UnderwaterSession>(d / layout::kUnits, ctx.opts.resume);
  o.on_session = [&](const underwater::UnderwaterSession& s) { units.write(s.to_json()); };
  std::vector<underwater::UnderwaterSession> sessions;
  try {
    sessions = underwater::run_underwater_game(*ctx.subject, ctx.data.path_table, o);
  } catch (const BackendUnavailable& e) {
    return {Suite::Underwater, "aborted", e.what()};
  }
  std::vector<Json> rows;
  int invalid = 0;
  for (const auto& s : sessions) {
    rows.push_back(s.to_json());
    invalid += s.valid ? 0 : 1;
  }
  write_text(d / "sessions.jsonl", jsonl(rows));
  write_scores(ctx, Suite::Underwater, "underwater");
  return {Suite::Underwater, "complete", invalid ? std::to_string(invalid) + " invalid sessions" : ""};
}

SuiteOutcome run_social(const Context& ctx) {
  const fs::path d = ctx.dir / "social";
  UnitLog units(d / layout::kUnits);
  social::GameOptions o;
  o.sessions = ctx.cfg.social_sessions();
  o.parallelism = ctx.cfg.parallelism;
  o.seed = ctx.seed(Suite::Social);
  o.sampling = ctx.cfg.sampling;
  o.personas = &ctx.data.personas;
  o.judge = ctx.judge.get();
  if (!ctx.cfg.social.partner_keywords.empty()) o.heuristic.partner_keywords = ctx.cfg.social.partner_keywords;
  o.completed_sessions = resume_units<social::DialogueTranscript>(d / layout::kUnits, ctx.opts.resume);
  o.on_session = [&](const social::DialogueTranscript& t) { units.write(t.to_json()); };
  social::SocialRun run;
  try {
    run = social::run_social_game(*ctx.subject, *ctx.stranger, o);
  } catch (const BackendUnavailable& e) {
    return {Suite::Social, "aborted", e.what()};
  }
  std::vector<Json> rows;
  for (const auto& t : run.sessions) rows.push_back(t.to_json());
  write_text(d / "sessions.jsonl", jsonl(rows));
  write_text(d / "failures.json", Json(run.failures).dump(2) + "\n");
  write_scores(ctx, Suite::Social, "social");
  if (!run.failures.empty()) {
    return {Suite::Social, "partial", std::to_string(run.failures.size()) + " sessions failed"};
  }
  return {Suite::Social, "complete", ""};
}

SuiteOutcome run_reason_eval(const Context& ctx) {
  const fs::path d = ctx.dir / "reason_eval";
  write_text(d / "tasks.jsonl", [&] {
    std::vector<Json> rows;
    for (const auto& t : ctx.data.tasks) rows.push_back(t.to_json());
    return jsonl(rows);
  }());
  int errored = 0;
  for (auto mode : ctx.cfg.reason_eval.modes) {
    const fs::path md = d / reasoning::to_string(mode);
    UnitLog units(md / layout::kUnits);
    reasoning::EvalOptions o;
    o.parallelism = ctx.cfg.parallelism;
    o.seed = ctx.seed(Suite::ReasonEval);
    o.sampling = ctx.cfg.sampling;
    o.matcher = ctx.cfg.reason_eval.matcher;
    o.completed_records = resume_units<reasoning::TaskRecord>(md / layout::kUnits, ctx.opts.resume);
    o.on_record = [&](const reasoning::TaskRecord& r) { units.write(r.to_json()); };
    reasoning::EvalResult res;
    try {
      res = reasoning::run_eval(*ctx.subject, ctx.data.tasks, mode, o);
    } catch (const BackendUnavailable& e) {
      return {Suite::ReasonEval, "aborted", std::string(reasoning::to_string(mode)) + ": " + e.what()};
    }
    std::vector<Json> rows;
    for (const auto& r : res.records) rows.push_back(r.to_json());
    write_text(md / "records.jsonl", jsonl(rows));
    errored += res.errored;
  }
  write_scores(ctx, Suite::ReasonEval, "reason_eval");
  return {Suite::ReasonEval, "complete", errored ? std::to_string(errored) + " errored tasks excluded" : ""};
}

std::string combined_cassette_hash(const std::vector<CassettePtr>& cassettes) {
  if (cassettes.empty()) return "none";
  std::vector<std::string> hashes;
  for (const auto& c : cassettes) hashes.push_back(c->content_hash());
  std::sort(hashes.begin(), hashes.end());
  return sha256_hex(text::join(hashes, "\n"));
}

}  // namespace

std::string layout::questionnaire_dir(const scale::PerturbationSpec& p) {
  return "questionnaire/" + p.label();
}

RunData load_run_data(const RunConfig& cfg) {
  RunData d;
  d.items = cfg.questionnaire.item_bank.empty() ? scale::default_item_bank()
                                                : scale::load_item_bank(cfg.questionnaire.item_bank);
  if (cfg.questionnaire.lexicon.empty()) {
    d.lexicons = scale::default_lexicons();
  } else {
    std::ifstream in(cfg.questionnaire.lexicon);
    if (!in) throw ConfigError("cannot open lexicon " + cfg.questionnaire.lexicon);
    d.lexicons = scale::parse_lexicons(Json::parse(in));
  }
  for (const auto& p : cfg.perturbations) {
    (void)scale::render_item_prompt(d.items.front(), p, d.lexicons);
  }
  d.words = cfg.letters.word_list.empty() ? letters::default_word_list()
                                          : letters::load_word_list(cfg.letters.word_list);
  d.path_table = cfg.underwater.path_table.empty() ? underwater::default_path_table()
                                                   : underwater::load_path_table(cfg.underwater.path_table);
  if (cfg.social.personas.empty()) {
    d.personas = social::default_personas();
  } else {
    std::ifstream in(cfg.social.personas);
    if (!in) throw ConfigError("cannot open persona file " + cfg.social.personas);
    d.personas = social::parse_personas(Json::parse(in));
  }
  if (!cfg.reason_eval.tasks.empty()) {
    d.tasks = reasoning::load_tasks(cfg.reason_eval.tasks, cfg.reason_eval.format);
  }
  Json lex = Json::object();
  for (const auto& [id, table] : d.lexicons) lex[id] = table;
  Json prompts = Json::object();
  for (auto m : reasoning::kPromptModes) prompts[reasoning::to_string(m)] = reasoning::prompt_checksum(m);
  d.fingerprints = {{"item_bank", fingerprint(items_json(d.items))},
                    {"lexicon", fingerprint(lex)},
                    {"words", fingerprint(words_json(d.words))},
                    {"path_table", fingerprint(d.path_table.to_json())},
                    {"personas", fingerprint(Json(d.personas))},
                    {"tasks", d.tasks.empty() ? "none" : fingerprint(tasks_json(d.tasks))},
                    {"system_prompts", prompts}};
  return d;
}

std::string protocol_hash(const RunConfig& cfg, const RunData& data) {
  return sha256_hex(Json({{"protocol", cfg.protocol_json()}, {"data", data.fingerprints}}).dump());
}

std::uint64_t suite_seed(std::uint64_t run_seed, Suite s) {
  return derive_seed(run_seed, {label_hash(to_string(s))});
}

Json SuiteOutcome::to_json() const {
  return {{"suite", to_string(suite)}, {"status", status}, {"detail", detail}};
}

bool RunResult::all_complete() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteOutcome& s) { return s.status == "complete"; });
}

RunResult run_suite(const RunConfig& cfg, const RunOptions& opts) {
  if (cfg.out.empty()) throw ConfigError("the run needs an output directory");
  if (cfg.suites.empty()) throw ConfigError("no suites selected");
  const RunData data = load_run_data(cfg);
  const std::string hash = protocol_hash(cfg, data);
  const fs::path dir = cfg.out;
  const fs::path manifest_path = dir / layout::kManifest;

  Json manifest;
  if (fs::exists(manifest_path)) {
    if (!opts.resume) {
      throw ConfigError("run directory " + dir.string() + " already holds a run; pass --resume to continue it");
    }
    std::ifstream in(manifest_path);
    manifest = Json::parse(in);
    if (manifest.value("protocol_hash", "") != hash) {
      throw ConfigError("cannot resume " + dir.string() + ": protocol hash differs from the stored run");
    }
  } else if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw ConfigError("output directory " + dir.string() + " is not empty and holds no run");
  }

  CassetteRegistry cassettes;
  Context ctx{cfg, data, opts, dir, opts.subject, opts.stranger, opts.judge};
  if (!ctx.subject) ctx.subject = make_backend(cfg.backend, cassettes);
  if (!ctx.stranger) {
    ctx.stranger = cfg.stranger_backend ? make_backend(*cfg.stranger_backend, cassettes) : ctx.subject;
  }
  if (!ctx.judge && cfg.judge_backend) ctx.judge = make_backend(*cfg.judge_backend, cassettes);
  if (cfg.has_suite(Suite::Social) && cfg.social.count_mode == social::CountMode::Judge && !ctx.judge) {
    throw ConfigError("judge counting needs a judge backend");
  }
  if (cfg.has_suite(Suite::ReasonEval) && data.tasks.empty()) {
    throw ConfigError("suite reason-eval needs a task file");
  }

  Json seeds = Json::object();
  for (Suite s : cfg.suites) seeds[to_string(s)] = suite_seed(cfg.seed, s);
  const std::string started = manifest.is_object() ? manifest.value("started_at", utc_now()) : utc_now();
  manifest = {{"tool", kToolVersion},
              {"protocol_hash", hash},
              {"model_label", cfg.label()},
              {"config", cfg.to_json()},
              {"protocol", cfg.protocol_json()},
              {"data", data.fingerprints},
              {"seed", cfg.seed},
              {"seeds", seeds},
              {"started_at", started},
              {"status", "running"}};
  write_text(manifest_path, manifest.dump(2) + "\n");

  RunResult result;
  result.dir = dir.string();
  result.protocol_hash = hash;
  for (Suite s : cfg.suites) {
    ctx.log(std::string("running ") + to_string(s));
    SuiteOutcome o;
    try {
      switch (s) {
        case Suite::Questionnaire: o = run_questionnaire(ctx); break;
        case Suite::Letters: o = run_letters(ctx); break;
        case Suite::Underwater: o = run_underwater(ctx); break;
        case Suite::Social: o = run_social(ctx); break;
        case Suite::ReasonEval: o = run_reason_eval(ctx); break;
      }
    } catch (const std::exception& e) {
      o = {s, "failed", e.what()};
    }
    ctx.log(std::string(to_string(s)) + ": " + o.status + (o.detail.empty() ? "" : " (" + o.detail + ")"));
    result.suites.push_back(o);
  }

  Json suites = Json::array();
  for (const auto& o : result.suites) suites.push_back(o.to_json());
  Json cassette_list = Json::array();
  const auto all = cassettes.all();
  for (const auto& c : all) {
    cassette_list.push_back({{"path", c->path()}, {"entries", c->size()}, {"content_hash", c->content_hash()}});
  }
  manifest["suites"] = suites;
  manifest["cassettes"] = cassette_list;
  manifest["cassette_hash"] = combined_cassette_hash(all);
  manifest["finished_at"] = utc_now();
  manifest["status"] = result.all_complete() ? "complete" : "incomplete";
  write_text(manifest_path, manifest.dump(2) + "\n");
  return result;
}

}  // namespace curio
