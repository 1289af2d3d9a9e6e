#pragma once

#include <string>
#include <vector>

#include "curio/backend.hpp"
#include "curio/baseline.hpp"
#include "curio/config.hpp"

namespace curio::report {

// Recomputes one suite's scores from the raw record files of a run
// directory. Every score object carries a "sources" list of run-relative
// files. Throws ConfigError when the suite's record files are missing.
Json suite_scores(const std::string& run_dir, Suite suite);

// Raw record files a suite needs, relative to the run directory.
std::vector<std::string> required_files(const std::string& run_dir, Suite suite);

struct CuriosityReport {
  Json data;
  std::string markdown;
  std::string csv;
};

// Pure function of the run directory's manifest and raw records plus the
// baseline. Suites listed in the manifest whose record files are missing are
// reported together in one ConfigError.
CuriosityReport build_report(const std::string& run_dir, const baseline::HumanBaseline& human);

// Writes report.md, report.csv and report.json into `out_dir` (default:
// <run_dir>/report) and returns the report.
CuriosityReport emit_report(const std::string& run_dir, const baseline::HumanBaseline& human,
                            const std::string& out_dir = "");

// Baseline named by the run's config (file and override), else the built-in one.
baseline::HumanBaseline baseline_for(const RunConfig& cfg);

// Fixed-point rendering used by every report table.
std::string fixed(double v, int decimals);

}  // namespace curio::report
