#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

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

namespace py = pybind11;
using curio::Json;

// Structured values cross the boundary as JSON text; the Python package
// wraps these with json.loads / json.dumps.

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw curio::PreconditionError("empty matrix");
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw curio::PreconditionError("ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

curio::baseline::HumanBaseline baseline_arg(const std::string& baseline_json) {
  if (baseline_json.empty()) return curio::baseline::builtin();
  return curio::baseline::HumanBaseline::from_json(Json::parse(baseline_json));
}

std::string report_json(const curio::report::CuriosityReport& r) {
  return Json({{"data", r.data}, {"markdown", r.markdown}, {"csv", r.csv}}).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "curiolab native core";

  static py::exception<curio::Error> error(m, "CurioError");
  py::register_exception<curio::ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<curio::PreconditionError>(m, "PreconditionError", error.ptr());
  py::register_exception<curio::UnparseableResponse>(m, "UnparseableResponse", error.ptr());
  py::register_exception<curio::DegenerateSamples>(m, "DegenerateSamples", error.ptr());
  py::register_exception<curio::NoQualifyingSessions>(m, "NoQualifyingSessions", error.ptr());
  py::register_exception<curio::BackendError>(m, "BackendError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "parse_likert",
      [](const std::string& reply, bool reversed) {
        curio::scale::PerturbationSpec p;
        if (reversed) p.scale_order = curio::scale::ScaleOrder::Reversed;
        return curio::scale::parse_likert(reply, p).value();
      },
      py::arg("reply"), py::arg("reversed") = false);

  m.def("parse_peek", [](const std::string& reply) {
    const auto p = curio::letters::parse_peek(reply);
    return py::make_tuple(curio::letters::to_string(p.level), p.reason);
  });

  m.def("parse_mbti_guess", &curio::social::parse_mbti_guess);

  m.def("cohens_d", [](const std::string& a, const std::string& b) {
    return curio::psy::cohens_d(curio::psy::SampleStats::from_json(Json::parse(a)),
                                curio::psy::SampleStats::from_json(Json::parse(b)));
  });

  m.def(
      "fit_single_factor_cfa",
      [](const std::vector<std::vector<double>>& corr, const std::string& estimator) {
        curio::psy::CovMatrix r{to_matrix(corr), true};
        curio::psy::FitConfig cfg;
        cfg.estimator = estimator == "ml" ? curio::psy::Estimator::Ml : curio::psy::Estimator::Uls;
        return curio::psy::fit_single_factor_cfa(r, cfg).to_json().dump();
      },
      py::arg("corr"), py::arg("estimator") = "uls");

  m.def("mcdonalds_omega", [](const std::vector<double>& loadings, const std::vector<double>& error_vars) {
    return curio::psy::mcdonalds_omega(loadings, error_vars);
  });

  m.def("sample_correlation", [](const std::vector<std::vector<double>>& data) {
    const auto r = curio::psy::sample_correlation(to_matrix(data));
    std::vector<std::vector<double>> out(r.k(), std::vector<double>(r.k()));
    for (std::size_t i = 0; i < r.k(); ++i) {
      for (std::size_t k = 0; k < r.k(); ++k) out[i][k] = r.values(i, k);
    }
    return out;
  });

  m.def("achievable_range", [](const std::string& table_json) {
    const auto t = table_json.empty() ? curio::underwater::default_path_table()
                                      : curio::underwater::PathTable::from_json(Json::parse(table_json));
    return curio::underwater::achievable_range(t);
  }, py::arg("table_json") = "");

  m.def("system_prompt", [](const std::string& mode) {
    return curio::reasoning::build_system_prompt(curio::reasoning::prompt_mode_from_string(mode));
  });
  m.def("prompt_checksum", [](const std::string& mode) {
    return curio::reasoning::prompt_checksum(curio::reasoning::prompt_mode_from_string(mode));
  });

  m.def("check_answer", [](const std::string& output, const std::string& task_json) {
    const auto task = curio::reasoning::ReasoningTask::from_json(Json::parse(task_json));
    const auto r = curio::reasoning::check(output, task);
    return Json({{"correct", r.correct}, {"no_answer", r.no_answer}, {"extracted", r.extracted}}).dump();
  });

  m.def("builtin_baseline", [] { return curio::baseline::builtin().to_json().dump(); });

  m.def(
      "parse_config",
      [](const std::string& config_json, const std::string& base_dir) {
        return curio::parse_config(Json::parse(config_json), base_dir).to_json().dump();
      },
      py::arg("config_json"), py::arg("base_dir") = "");

  m.def(
      "run_suite",
      [](const std::string& config_json, const std::string& base_dir, bool resume) {
        const auto cfg = curio::parse_config(Json::parse(config_json), base_dir);
        curio::RunOptions opts;
        opts.resume = resume;
        curio::RunResult res;
        {
          py::gil_scoped_release release;
          res = curio::run_suite(cfg, opts);
        }
        Json suites = Json::array();
        for (const auto& s : res.suites) suites.push_back(s.to_json());
        return Json({{"dir", res.dir},
                     {"protocol_hash", res.protocol_hash},
                     {"suites", suites},
                     {"all_complete", res.all_complete()}})
            .dump();
      },
      py::arg("config_json"), py::arg("base_dir") = "", py::arg("resume") = false);

  m.def(
      "build_report",
      [](const std::string& run_dir, const std::string& baseline_json) {
        return report_json(curio::report::build_report(run_dir, baseline_arg(baseline_json)));
      },
      py::arg("run_dir"), py::arg("baseline_json") = "");

  m.def(
      "emit_report",
      [](const std::string& run_dir, const std::string& baseline_json, const std::string& out_dir) {
        return report_json(curio::report::emit_report(run_dir, baseline_arg(baseline_json), out_dir));
      },
      py::arg("run_dir"), py::arg("baseline_json") = "", py::arg("out_dir") = "");
}
