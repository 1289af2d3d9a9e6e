import json
import os
import subprocess

import pytest

import curiolab

SCRIPT = [
    {"match": "Statement:", "reply": "5"},
    {"match": "incomplete English words", "reply": "I think it is adventure."},
    {"match": "check the correct answer", "reply": "Need, I want to know the answer."},
    {"match": "Which window do you open", "reply": "Window B"},
    {"match": "MBTI personality types", "reply": "INFP"},
    {"match": "Question:", "reply": "What is asked? The sum.\nAnswer: 42"},
    {"reply": "Nice to meet you! What do you like to do on weekends?"},
]


def test_parsers():
    assert curiolab.parse_likert("I'd say 6.") == 6
    assert curiolab.parse_likert("2", reversed=True) == 6
    with pytest.raises(curiolab.UnparseableResponse):
        curiolab.parse_likert("no idea")
    assert curiolab.parse_peek("Very need. I am lost.") == ("VeryNeed", "I am lost.")
    assert curiolab.parse_mbti_guess("maybe an entp?") == "ENTP"
    assert curiolab.parse_mbti_guess("no clue") is None


def test_statistics():
    model = {"n": 10, "mean": 6.58, "sd": 0.49, "sd_kind": "population"}
    human = {"n": 483, "mean": 5.03, "sd": 1.35, "sd_kind": "sample"}
    assert curiolab.cohens_d(model, human) == pytest.approx(1.157237373605639, abs=1e-12)
    assert curiolab.mcdonalds_omega([0.7] * 4, [0.51] * 4) == pytest.approx(7.84 / 9.88, abs=1e-12)
    lam = [0.9, 0.75, 0.6, 0.45]
    corr = [[1.0 if i == j else lam[i] * lam[j] for j in range(4)] for i in range(4)]
    fit = curiolab.fit_single_factor_cfa(corr)
    assert fit["converged"]
    assert fit["loadings"] == pytest.approx(lam, abs=1e-3)
    with pytest.raises(curiolab.PreconditionError):
        curiolab.sample_correlation([[1, 5], [2, 5], [3, 5]])
    assert curiolab.achievable_range() == (3, 24)


def test_reasoning_helpers():
    assert curiolab.system_prompt("CuriousCoQ").startswith("You are a smart and curious student.")
    assert len(curiolab.prompt_checksum("VanillaCoT")) == 64
    task = {"id": "t", "question": "q", "answer": "42", "kind": "numeric"}
    assert curiolab.check_answer("Answer: 42", task)["correct"]
    assert curiolab.check_answer("I cannot solve this", task)["no_answer"]


def test_config_errors():
    with pytest.raises(curiolab.ConfigError, match="valid suites"):
        curiolab.parse_config({"backend": {"script": [{"reply": "1"}]}, "suites": ["chess"]})
    assert curiolab.builtin_baseline()["letters_peek_rate"] == 0.378


def test_run_and_report(tmp_path):
    out = tmp_path / "run"
    cfg = {
        "backend": {"kind": "scripted", "id": "fixture", "script": SCRIPT},
        "suites": ["questionnaire", "letters"],
        "repetitions": 3,
        "letters": {"repeats": 1},
        "out": str(out),
    }
    res = curiolab.run_suite(cfg)
    assert res["all_complete"]
    rep = curiolab.emit_report(out)
    assert (out / "report" / "report.md").read_text() == rep["markdown"]
    cells = {(c["section"], c["row"], c["column"]): c["value"] for c in rep["data"]["cells"]}
    assert cells[("behavioral", "Letters peek rate", "fixture")] == "1.000"
    assert curiolab.build_report(out)["csv"] == rep["csv"]


@pytest.mark.skipif(not os.environ.get("CURIO_CLI"), reason="CLI not built")
def test_cli_record_and_replay(tmp_path):
    cli = os.environ["CURIO_CLI"]
    backend = json.dumps({"kind": "scripted", "id": "fixture", "script": SCRIPT})
    cassette = str(tmp_path / "cassette.jsonl")
    rec = tmp_path / "recorded"
    rep = tmp_path / "replayed"
    subprocess.run([cli, "-q", "--backend", backend, "--cassette", cassette, "--reps", "2",
                    "--out", str(rec), "questionnaire"], check=True)
    subprocess.run([cli, "-q", "--out", str(rep), "replay", str(rec)], check=True)
    for name in ("report.md", "report.csv", "report.json"):
        assert (rec / "report" / name).read_bytes() == (rep / "report" / name).read_bytes()
    bad = subprocess.run([cli, "--backend", backend, "--out", str(rec), "questionnaire"],
                         capture_output=True, text=True)
    assert bad.returncode == 1
    assert "--resume" in bad.stderr
