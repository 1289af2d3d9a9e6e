// curio: command-line front end for the curiosity evaluation suites.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "curio/baseline.hpp"
#include "curio/config.hpp"
#include "curio/errors.hpp"
#include "curio/report.hpp"
#include "curio/runner.hpp"

namespace fs = std::filesystem;
using curio::Json;

namespace {

struct Globals {
  std::string config;
  std::string backend;
  std::string cassette;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string model_label;
  std::optional<int> repetitions;
  std::optional<int> parallelism;
  bool resume = false;
  bool quiet = false;
};

void log_line(const std::string& msg) { std::cerr << "[curio] " << msg << "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw curio::ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw curio::ConfigError(path + ": " + e.what());
  }
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

// --backend takes inline JSON or a path to a JSON descriptor.
Json backend_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') return Json::parse(arg);
  Json j = read_json_file(arg);
  const std::string base = fs::absolute(arg).parent_path().string();
  if (j.contains("cassette") && j["cassette"].is_string() && fs::path(j["cassette"].get<std::string>()).is_relative()) {
    j["cassette"] = (fs::path(base) / j["cassette"].get<std::string>()).lexically_normal().string();
  }
  return j;
}

std::string default_out_dir() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  fs::path p = fs::path("runs") / (std::string("run-") + buf);
  for (int i = 2; fs::exists(p); ++i) p = fs::path("runs") / (std::string("run-") + buf + "-" + std::to_string(i));
  return absolute(p.string());
}

// Config file (if any) with the command-line overrides applied.
curio::RunConfig build_config(const Globals& g, const std::vector<std::string>& suites,
                              const std::function<void(Json&)>& extra = {}) {
  Json j = Json::object();
  std::string base_dir;
  if (!g.config.empty()) {
    j = read_json_file(g.config);
    base_dir = fs::absolute(g.config).parent_path().string();
  }
  if (!g.backend.empty()) j["backend"] = backend_arg(g.backend);
  if (!g.cassette.empty()) {
    const std::string path = absolute(g.cassette);
    if (j.contains("backend") && j["backend"].value("kind", "") != "replay") {
      j["backend"] = {{"kind", "record"}, {"cassette", path}, {"inner", j["backend"]}};
    } else if (j.contains("backend")) {
      j["backend"]["cassette"] = path;
    } else {
      j["backend"] = {{"kind", "replay"}, {"cassette", path}};
    }
  }
  if (!suites.empty()) j["suites"] = suites;
  if (g.seed) j["seed"] = *g.seed;
  if (g.repetitions) j["repetitions"] = *g.repetitions;
  if (g.parallelism) j["parallelism"] = *g.parallelism;
  if (!g.model_label.empty()) j["model_label"] = g.model_label;
  if (!g.out.empty()) {
    j["out"] = absolute(g.out);
  } else if (!j.contains("out")) {
    j["out"] = default_out_dir();
  }
  if (extra) extra(j);
  return curio::parse_config(j, base_dir);
}

int execute(const curio::RunConfig& cfg, const Globals& g) {
  curio::RunOptions opts;
  opts.resume = g.resume;
  if (!g.quiet) opts.log = log_line;
  const curio::RunResult res = curio::run_suite(cfg, opts);
  log_line("run directory: " + res.dir);
  bool reportable = true;
  for (const auto& s : res.suites) reportable = reportable && (s.status == "complete" || s.status == "partial");
  if (reportable) {
    curio::report::emit_report(res.dir, curio::report::baseline_for(cfg));
    log_line("report written to " + (fs::path(res.dir) / "report").string());
  } else {
    log_line("some suites did not finish; rerun with --resume to continue");
  }
  return res.all_complete() ? 0 : 2;
}

// Backends of a finished run rewritten to replay from the cassettes they recorded.
Json as_replay(const Json& spec) {
  const std::string kind = spec.value("kind", "");
  if (kind == "replay") return spec;
  if (kind != "record") {
    throw curio::ConfigError("backend of kind '" + kind + "' recorded no cassette; nothing to replay");
  }
  Json r = {{"kind", "replay"}, {"cassette", spec.at("cassette")}};
  if (spec.contains("id")) r["id"] = spec["id"];
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curiosity evaluation suites for chat models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--backend", g.backend, "Backend descriptor: inline JSON or a JSON file");
  app.add_option("--cassette", g.cassette, "Record to (live/scripted backend) or replay from this cassette");
  app.add_option("--seed", g.seed, "Run seed");
  app.add_option("--out", g.out, "Output directory (must be new unless --resume)");
  app.add_option("--model-label", g.model_label, "Label used in reports");
  app.add_option("--reps", g.repetitions, "Repetitions")->check(CLI::PositiveNumber);
  app.add_option("--parallelism", g.parallelism, "Concurrent units")->check(CLI::PositiveNumber);
  app.add_flag("--resume", g.resume, "Continue an interrupted run in --out");
  app.add_flag("-q,--quiet", g.quiet, "No progress lines");

  auto* run = app.add_subcommand("run", "Run the suites listed in the config");
  auto* questionnaire = app.add_subcommand("questionnaire", "Administer the curiosity questionnaire");
  std::vector<std::string> perturbations;
  questionnaire->add_option("--perturbation", perturbations,
                            "Condition as JSON, e.g. '{\"scale_order\":\"reversed\"}' (repeatable)");

  auto* game = app.add_subcommand("game", "Run a behavioral game");
  std::string game_name;
  game->add_option("name", game_name, "letters | underwater | social")
      ->required()
      ->check(CLI::IsMember({"letters", "underwater", "social"}));

  auto* reason = app.add_subcommand("reason-eval", "Evaluate reasoning prompts on a task file");
  std::string tasks, format, benchmark;
  std::vector<std::string> modes;
  reason->add_option("--tasks", tasks, "Task file (JSONL)");
  reason->add_option("--format", format, "native | detectbench | numinamath");
  reason->add_option("--benchmark", benchmark, "Benchmark label for the report");
  reason->add_option("--mode", modes, "Prompt mode (repeatable)");

  auto* report = app.add_subcommand("report", "Regenerate the report of a run directory");
  std::string report_dir, report_out, baseline_file;
  report->add_option("run_dir", report_dir, "Run directory")->required();
  report->add_option("--report-out", report_out, "Directory for report files (default <run_dir>/report)");
  report->add_option("--baseline", baseline_file, "Baseline JSON instead of the run's baseline");

  auto* replay = app.add_subcommand("replay", "Re-run a recorded run from its cassettes into --out");
  std::string replay_dir;
  replay->add_option("run_dir", replay_dir, "Recorded run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return execute(build_config(g, {}), g);
    if (questionnaire->parsed()) {
      return execute(build_config(g, {"questionnaire"},
                                  [&](Json& j) {
                                    if (perturbations.empty()) return;
                                    j["perturbations"] = Json::array();
                                    for (const auto& p : perturbations) j["perturbations"].push_back(Json::parse(p));
                                  }),
                     g);
    }
    if (game->parsed()) return execute(build_config(g, {game_name}), g);
    if (reason->parsed()) {
      return execute(build_config(g, {"reason-eval"},
                                  [&](Json& j) {
                                    Json& r = j["reason_eval"];
                                    if (r.is_null()) r = Json::object();
                                    if (!tasks.empty()) r["tasks"] = absolute(tasks);
                                    if (!format.empty()) r["format"] = format;
                                    if (!benchmark.empty()) r["benchmark"] = benchmark;
                                    if (!modes.empty()) r["modes"] = modes;
                                  }),
                     g);
    }
    if (report->parsed()) {
      const Json manifest = read_json_file((fs::path(report_dir) / curio::layout::kManifest).string());
      const curio::RunConfig cfg = curio::parse_config(manifest.at("config"), report_dir);
      const auto human =
          baseline_file.empty() ? curio::report::baseline_for(cfg) : curio::baseline::load(baseline_file);
      curio::report::emit_report(report_dir, human, report_out);
      log_line("report written to " + (report_out.empty() ? (fs::path(report_dir) / "report").string() : report_out));
      return 0;
    }
    if (replay->parsed()) {
      if (g.out.empty()) throw curio::ConfigError("replay needs --out for the new run directory");
      const Json manifest = read_json_file((fs::path(replay_dir) / curio::layout::kManifest).string());
      Json j = manifest.at("config");
      j["model_label"] = manifest.value("model_label", "");
      for (const char* key : {"backend", "stranger_backend", "judge_backend"}) {
        if (j.contains(key)) j[key] = as_replay(j[key]);
      }
      j["out"] = absolute(g.out);
      return execute(curio::parse_config(j, replay_dir), g);
    }
  } catch (const curio::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
