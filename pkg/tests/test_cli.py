from __future__ import annotations

import json

import pytest

from srkit.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main

from .conftest import FIXTURES, GOLDEN_QUESTION


@pytest.fixture()
def run_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SRKIT_SESSIONS_DIR", str(tmp_path / "sessions"))
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_kb_ingest(capsys):
    code = main(["kb", "ingest", "--source", str(FIXTURES / "mesh_core.tsv")])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "ingested 23 descriptors" in out


def test_review_run_and_eval(run_env, capsys):
    out_file = run_env / "session.json"
    code = main(
        [
            "review",
            "run",
            "--question",
            GOLDEN_QUESTION,
            "--config",
            str(FIXTURES / "golden.cfg"),
            "--out",
            str(out_file),
        ]
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "queries: 5" in printed
    payload = json.loads(out_file.read_text("utf-8"))
    session_id = payload["session_id"]

    code = main(
        [
            "eval",
            "--session",
            session_id,
            "--config",
            str(FIXTURES / "golden.cfg"),
            "--sentinels",
            "90000001,90000002,90000003,90000004,90000005",
            "--k",
            "10",
        ]
    )
    assert code == EXIT_OK
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["k"] == 10
    assert metrics["recall_at_k"] >= 0.8


def test_review_refine(run_env, capsys):
    main(
        [
            "review", "run",
            "--question", GOLDEN_QUESTION,
            "--config", str(FIXTURES / "golden.cfg"),
            "--out", str(run_env / "s.json"),
        ]
    )
    session_id = json.loads((run_env / "s.json").read_text())["session_id"]
    edits = run_env / "edits.json"
    edits.write_text(json.dumps([{"op": "remove_query", "rank": 1}]))
    capsys.readouterr()
    code = main(
        [
            "review", "refine",
            "--session", session_id,
            "--config", str(FIXTURES / "golden.cfg"),
            "--edits", str(edits),
        ]
    )
    assert code == EXIT_OK
    assert "rev 2" in capsys.readouterr().out


def test_config_error_exit_code(run_env, capsys):
    bad = run_env / "bad.cfg"
    bad.write_text("kb_source=/missing.tsv\n", encoding="utf-8")
    code = main(["review", "run", "--question", "x", "--config", str(bad)])
    assert code == EXIT_CONFIG


def test_stage_failure_exit_code(run_env, capsys):
    code = main(
        [
            "review", "run",
            "--question", "the of and",
            "--config", str(FIXTURES / "golden.cfg"),
        ]
    )
    assert code == EXIT_STAGE
