"""Tests for the command-line interface: exit codes, JSON output, solver
overrides, and the simulate/fmt subcommands."""

from __future__ import annotations

import json
import shutil
import stat
import subprocess

import pytest

import hhlverify.backend as backend
from hhlverify.cli import main
from hhlverify.parser import parse
from helpers import corpus_text


def _on_disk(tmp_path, name: str) -> str:
    path = tmp_path / name
    path.write_text(corpus_text(name), encoding="utf-8")
    return str(path)


def _write(tmp_path, name: str, source: str) -> str:
    path = tmp_path / name
    path.write_text(source, encoding="utf-8")
    return str(path)


def _fake_solver(tmp_path, name: str, body: str) -> str:
    path = tmp_path / name
    path.write_text("#!/bin/sh\ncat > /dev/null\n" + body + "\n")
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return str(path)


# ---------------------------------------------------------------------------
# verify --vcs-only


def test_vcs_only_json_structure(tmp_path, capsys):
    code = main(["verify", _on_disk(tmp_path, "choice_loop.hhl"), "--vcs-only", "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["schema"] == 1
    assert "summary" not in payload
    records = payload["vcs"]
    assert [r["label"] for r in records] == ["init", "maintain 1", "maintain 2", ""]
    for r in records:
        assert set(r) == {"id", "formula", "origin", "label", "spans", "solver", "result"}
        assert r["result"] is None  # unchecked
        assert r["solver"] == "z3"
        assert all(isinstance(s, list) and len(s) == 2 for s in r["spans"])
        assert set(r["origin"]) == {"kind", "path", "text"}


def test_vcs_only_human_table(tmp_path, capsys):
    code = main(["verify", _on_disk(tmp_path, "choice_loop.hhl"), "--vcs-only"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["id", "origin", "label", "solver", "formula"]
    assert "4 VCs" in out


def test_vcs_only_never_spawns_a_solver(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("solver process spawned during --vcs-only")

    monkeypatch.setattr(backend.subprocess, "run", boom)
    code = main(["verify", _on_disk(tmp_path, "sawtooth.hhl"), "--vcs-only", "--json"])
    assert code == 0
    assert len(json.loads(capsys.readouterr().out)["vcs"]) == 62


def test_solver_override_rebinds_every_condition(tmp_path, capsys):
    code = main(
        [
            "verify",
            _on_disk(tmp_path, "choice_loop.hhl"),
            "--vcs-only",
            "--json",
            "--solver",
            "wolfram",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert all(r["solver"] == "wolfram" for r in payload["vcs"])


# ---------------------------------------------------------------------------
# verify: full runs against fake solvers


def test_verify_all_proved_exit_zero(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HHL_Z3", _fake_solver(tmp_path, "unsat.sh", "echo unsat"))
    code = main(["verify", _on_disk(tmp_path, "choice_loop.hhl"), "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"] == {
        "Proved": 4,
        "Unproved": 0,
        "Timeout": 0,
        "SolverError": 0,
    }
    for r in payload["vcs"]:
        assert r["result"] == "Proved"
        assert isinstance(r["time_ms"], int)


def test_verify_unproved_exit_one_with_counterexample(tmp_path, capsys, monkeypatch):
    body = "echo sat; echo '((define-fun x () Real 0.0))'"
    monkeypatch.setenv("HHL_Z3", _fake_solver(tmp_path, "sat.sh", body))
    file = _write(tmp_path, "weak.hhl", "pre [true]; skip; post [x >= 1];")
    code = main(["verify", file])
    assert code == 1
    out = capsys.readouterr().out
    assert "1 VCs, 0 proved, 1 unproved" in out
    assert "counterexample for" in out and "x = 0" in out


def test_verify_solver_error_exit_one_with_detail(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HHL_Z3", _fake_solver(tmp_path, "bad.sh", "echo kaboom"))
    file = _write(tmp_path, "any.hhl", "pre [true]; skip; post [true];")
    code = main(["verify", file])
    assert code == 1
    out = capsys.readouterr().out
    assert "1 solver errors" in out
    assert "unexpected solver output" in out


def test_verify_human_table_header(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HHL_Z3", _fake_solver(tmp_path, "unsat.sh", "echo unsat"))
    code = main(["verify", _on_disk(tmp_path, "choice_loop.hhl")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["id", "origin", "label", "solver", "result", "ms"]
    assert "4 VCs, 4 proved" in out


def test_verify_timeout_flag_reaches_solver(tmp_path, monkeypatch):
    seen = tmp_path / "seen"
    exe = _fake_solver(tmp_path, "rec.sh", f'echo "$@" > {seen}; echo unsat')
    monkeypatch.setenv("HHL_Z3", exe)
    file = _write(tmp_path, "any.hhl", "pre [true]; skip; post [true];")
    assert main(["verify", file, "--timeout", "4500"]) == 0
    assert seen.read_text().split() == ["-in", "-T:5"]


def test_verify_unmatched_hint_warning_on_stderr(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HHL_Z3", _fake_solver(tmp_path, "unsat.sh", "echo unsat"))
    file = _write(
        tmp_path, "hinted.hhl", "pre [x >= 0]; skip; post [x >= 0] {{maintain 5: wolfram}};"
    )
    code = main(["verify", file, "--vcs-only"])
    assert code == 0
    err = capsys.readouterr().err
    assert "warning" in err and "maintain 5" in err


# ---------------------------------------------------------------------------
# error exits


def test_missing_file_exits_two(capsys):
    assert main(["verify", "/nonexistent/prog.hhl"]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_parse_error_exits_two(tmp_path, capsys):
    file = _write(tmp_path, "bad.hhl", "pre [x >= ]; skip; post [true];")
    assert main(["verify", file]) == 2
    assert "error:" in capsys.readouterr().err


def test_generation_error_exits_two(tmp_path, capsys):
    # unannotated loop: parses, but condition generation must reject it
    file = _write(
        tmp_path, "noinv.hhl", "pre [true]; {x := x + 1;}*; post [true];"
    )
    assert main(["verify", file]) == 2
    assert "error:" in capsys.readouterr().err


def test_ode_synthesis_error_exits_two(tmp_path, capsys):
    # cofactor synthesis failure is raised by the ODE layer, not condition
    # generation proper; it must still exit 2 rather than crash
    file = _write(
        tmp_path,
        "dbx.hhl",
        "pre [x > 0]; {x_dot = x + y, y_dot = 1 & t < 1}"
        " invariant [x > 0] {dbx}; post [true];",
    )
    assert main(["verify", file]) == 2
    err = capsys.readouterr().err
    assert "error:" in err and "cofactor" in err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


# ---------------------------------------------------------------------------
# simulate


def test_simulate_clean_program(tmp_path, capsys):
    code = main(["simulate", _on_disk(tmp_path, "choice_loop.hhl"), "--runs", "25"])
    assert code == 0
    out = capsys.readouterr().out
    assert "25 runs: 25 completed, 0 nonterminating, 0 unsampled, 0 postcondition violations" in out


def test_simulate_broken_program(tmp_path, capsys):
    code = main(
        ["simulate", _on_disk(tmp_path, "choice_loop_broken.hhl"), "--runs", "100", "--seed", "1"]
    )
    assert code == 1
    out = capsys.readouterr().out
    assert "postcondition violations" in out
    violation_lines = [l for l in out.splitlines() if l.startswith("violation")]
    assert 1 <= len(violation_lines) <= 10
    assert "fails at" in violation_lines[0]


def test_simulate_parse_error_exits_two(tmp_path, capsys):
    file = _write(tmp_path, "bad.hhl", "this is not a program")
    assert main(["simulate", file]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# fmt


def test_fmt_output_reparses_to_fixed_point(tmp_path, capsys):
    code = main(["fmt", _on_disk(tmp_path, "sawtooth.hhl")])
    assert code == 0
    printed = capsys.readouterr().out
    reparsed = parse(printed)
    code = main(["fmt", _write(tmp_path, "printed.hhl", printed)])
    assert code == 0
    assert capsys.readouterr().out == printed
    assert reparsed.body is not None


def test_fmt_parse_error_exits_two(tmp_path, capsys):
    file = _write(tmp_path, "bad.hhl", "pre [; post [];")
    assert main(["fmt", file]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# console script


def test_console_script_end_to_end(tmp_path):
    exe = shutil.which("hhlverify")
    assert exe, "console script not installed"
    file = _on_disk(tmp_path, "choice_loop.hhl")
    proc = subprocess.run(
        [exe, "verify", file, "--vcs-only", "--json"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["schema"] == 1 and len(payload["vcs"]) == 4
