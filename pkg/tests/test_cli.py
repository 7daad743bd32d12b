import csv

import pytest

from drawlab.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, main
from drawlab.exact import PairProbabilityMatrix


def test_draw_and_replay(tmp_path, capsys):
    path = tmp_path / "t.jsonl"
    assert main(["draw", "--instance", "wc2026", "--order", "1,2,3,4", "--seed", "5", "--transcript", str(path)]) == EXIT_OK
    first = capsys.readouterr().out
    assert first.splitlines()[0].startswith("A: mexico")
    assert main(["draw", "--instance", "wc2026", "--replay", str(path)]) == EXIT_OK
    assert capsys.readouterr().out == first


def test_seed_is_required(capsys):
    assert main(["draw"]) == EXIT_INVALID
    for cmd in (["sweep", "--out", "x"], ["uniform", "--proposals", "5"], ["deadlock"]):
        with pytest.raises(SystemExit) as err:
            main(cmd)
        assert err.value.code == EXIT_INVALID


@pytest.mark.parametrize(
    "argv",
    [
        ["draw", "--seed", "-3"],
        ["draw", "--seed", "1", "--order", "1,2"],
        ["draw", "--seed", "1", "--instance", "no-such-file.json"],
        ["enumerate"],
        ["deadlock", "--seed", "1", "--samples", "0"],
    ],
)
def test_validation_errors(argv, capsys):
    assert main(argv) == EXIT_INVALID
    assert "drawlab:" in capsys.readouterr().err


def test_enumerate_and_metrics(tmp_path, capsys):
    u, d = tmp_path / "u.csv", tmp_path / "d.csv"
    assert main(["enumerate", "--instance", "wc1990", "--out", str(u)]) == EXIT_OK
    assert main(["enumerate", "--instance", "wc1990", "--kind", "skip", "--order", "1,2", "--out", str(d)]) == EXIT_OK
    assert PairProbabilityMatrix.from_csv(u).provenance["kind"] == "ExactUniform"
    capsys.readouterr()
    deltas = tmp_path / "delta.csv"
    assert main(["metrics", "--draw", str(d), "--baseline", str(u), "--deltas", str(deltas)]) == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert rows[0]["pot_order"] == "1-2" and float(rows[0]["m2"]) > 0
    assert deltas.read_text().startswith("team_a,team_b")


def test_enumerate_refusal_is_budget_exit(capsys):
    assert main(["enumerate", "--instance", "wc2026"]) == EXIT_BUDGET


def test_uniform_budget_exit(capsys):
    assert main(["uniform", "--instance", "wc2026", "--proposals", "1000", "--seed", "1"]) == EXIT_BUDGET
    assert main(["uniform", "--instance", "wc1990", "--proposals", "2000", "--seed", "1"]) == EXIT_OK
    assert "acceptance_rate=" in capsys.readouterr().out


def test_sweep(tmp_path, capsys):
    code = main([
        "sweep", "--instance", "example3", "--draws", "500", "--uniform-accepted", "500",
        "--seed", "2", "--out", str(tmp_path), "--orders", "1-2,2-1", "--labellings", "ex-ante",
    ])
    assert code == EXIT_OK
    assert (tmp_path / "metrics.csv").read_text().count("\n") == 3


def test_sweep_budget_exit(tmp_path):
    code = main([
        "sweep", "--instance", "wc1990", "--draws", "100", "--uniform-accepted", "100000",
        "--uniform-method", "rejection", "--uniform-max-proposals", "1000",
        "--seed", "2", "--out", str(tmp_path), "--orders", "1-2", "--labellings", "ex-ante",
    ])
    assert code == EXIT_BUDGET


def test_deadlock_and_claim1(capsys):
    assert main(["deadlock", "--instance", "example3", "--samples", "1000", "--seed", "1"]) == EXIT_OK
    assert "rate=0.0000%" in capsys.readouterr().out
    assert main(["claim1", "--budget", "1000000"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "BudgetExhausted" in out and "Infeasible" in out
