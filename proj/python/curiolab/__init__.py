"""Python interface to the curio evaluation core."""

import json

from . import _core
from ._core import (
    BackendError,
    ConfigError,
    CurioError,
    DegenerateSamples,
    NoQualifyingSessions,
    PreconditionError,
    UnparseableResponse,
    achievable_range,
    mcdonalds_omega,
    parse_likert,
    parse_mbti_guess,
    parse_peek,
    prompt_checksum,
    sample_correlation,
    system_prompt,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "CurioError",
    "DegenerateSamples",
    "NoQualifyingSessions",
    "PreconditionError",
    "UnparseableResponse",
    "achievable_range",
    "builtin_baseline",
    "build_report",
    "check_answer",
    "cohens_d",
    "emit_report",
    "fit_single_factor_cfa",
    "mcdonalds_omega",
    "parse_config",
    "parse_likert",
    "parse_mbti_guess",
    "parse_peek",
    "prompt_checksum",
    "run_suite",
    "sample_correlation",
    "system_prompt",
]


def cohens_d(a, b):
    """a, b: {"n", "mean", "sd", "sd_kind": "population" | "sample"}."""
    return _core.cohens_d(json.dumps(a), json.dumps(b))


def fit_single_factor_cfa(corr, estimator="uls"):
    return json.loads(_core.fit_single_factor_cfa([list(map(float, r)) for r in corr], estimator))


def check_answer(output, task):
    return json.loads(_core.check_answer(output, json.dumps(task)))


def builtin_baseline():
    return json.loads(_core.builtin_baseline())


def parse_config(config, base_dir=""):
    return json.loads(_core.parse_config(json.dumps(config), base_dir))


def run_suite(config, base_dir="", resume=False):
    return json.loads(_core.run_suite(json.dumps(config), base_dir, resume))


def _baseline_arg(baseline):
    return "" if baseline is None else json.dumps(baseline)


def build_report(run_dir, baseline=None):
    r = json.loads(_core.build_report(str(run_dir), _baseline_arg(baseline)))
    return r


def emit_report(run_dir, baseline=None, out_dir=""):
    return json.loads(_core.emit_report(str(run_dir), _baseline_arg(baseline), str(out_dir)))
