import csv
import io
import subprocess
import sys

import pytest

from geotransport.cli import main
from geotransport.fileio import read_plan


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_gen_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["gen", "--n", "40", "--U", "7", "--seed", "3", "-o", str(a)]) == 0
    assert main(["gen", "--n", "40", "--U", "7", "--seed", "3", "-o", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert main(["gen", "--n", "6", "--U", "2", "--seed", "3"]) == 0
    assert capsys.readouterr().out.startswith("d 2")


def test_gen_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("EMD_SEED", "9")
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["gen", "--n", "12", "--U", "4", "-o", str(a)]) == 0
    assert main(["gen", "--n", "12", "--U", "4", "--seed", "9", "-o", str(b)]) == 0
    assert a.read_text() == b.read_text()
    monkeypatch.delenv("EMD_SEED")
    assert main(["gen", "--n", "12", "--U", "4", "-o", str(a)]) == 2


@pytest.mark.parametrize("algo", ["oracle", "exact"])
def test_solve_two_points(tmp_path, capsys, algo):
    inst = _write(tmp_path / "i.txt", "d 2\nmetric l2\nr 0 0 3\nb 3 4 3\n")
    out = tmp_path / "p.txt"
    assert main(["solve", inst, "--algo", algo, "-o", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith(f"algo={algo} n=2 cost=15.0 time_ms=")
    plan, cost = read_plan(str(out))
    assert plan.entries() == [(0, 0, 3)] and cost == 15.0


def test_wspd_round_trip_verifies(tmp_path, capsys):
    inst = tmp_path / "i.txt"
    plan = tmp_path / "p.txt"
    graph = tmp_path / "g.txt"
    assert main(["gen", "--n", "60", "--U", "5", "--seed", "1", "-o", str(inst)]) == 0
    assert main(["solve", str(inst), "--algo", "wspd", "--eps", "0.5", "-o", str(plan), "--dump-graph", str(graph)]) == 0
    assert graph.read_text().strip()
    assert main(["verify", str(inst), str(plan)]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1].startswith("ok cost=")


def test_verify_detects_tampering(tmp_path):
    inst = _write(tmp_path / "i.txt", "d 2\nmetric l2\nr 0 0 2\nb 1 0 1\nb 2 0 1\n")
    short = _write(tmp_path / "p.txt", "t 0 0 1\n")
    assert main(["verify", inst, short]) == 1
    wrong_cost = _write(tmp_path / "q.txt", "cost 99\nt 0 0 1\nt 0 1 1\n")
    assert main(["verify", inst, wrong_cost]) == 1


def test_grid_same_seed_same_file(tmp_path):
    inst = tmp_path / "i.txt"
    main(["gen", "--n", "300", "--U", "6", "--seed", "2", "-o", str(inst)])
    outs = []
    for k in range(2):
        out = tmp_path / f"p{k}.txt"
        assert main(["solve", str(inst), "--algo", "grid", "--eps", "0.5", "--seed", "11", "-o", str(out)]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]


def test_exit_codes(tmp_path, monkeypatch):
    monkeypatch.delenv("EMD_SEED", raising=False)
    bad = _write(tmp_path / "bad.txt", "d 2\nmetric l2\nr 0 zero 1\n")
    assert main(["solve", bad, "--algo", "oracle"]) == 2
    unbalanced = _write(tmp_path / "u.txt", "d 2\nmetric l2\nr 0 0 2\nb 1 1 1\n")
    assert main(["solve", unbalanced, "--algo", "oracle"]) == 2
    assert main(["solve", str(tmp_path / "missing.txt"), "--algo", "oracle"]) == 2
    assert main(["gen", "--n", "5", "--U", "1", "--seed", "0"]) == 3
    ok = _write(tmp_path / "ok.txt", "d 2\nmetric l2\nr 0 0 1\nb 1 1 1\n")
    assert main(["solve", ok, "--algo", "wspd"]) == 2
    assert main(["solve", ok, "--algo", "grid", "--eps", "0.5"]) == 2


def test_bench_csv(tmp_path):
    out = tmp_path / "b.csv"
    code = main(["bench", "--algos", "oracle,exact,wspd", "--sizes", "20,40", "--seeds", "1,2",
                 "--eps", "0.5", "--csv", str(out), "--quiet"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 12 and all(r["status"] == "ok" for r in rows)
    for r in rows:
        ratio = float(r["ratio"])
        if r["algo"] in ("oracle", "exact"):
            assert ratio == pytest.approx(1.0, rel=1e-6)
        else:
            assert 1 - 1e-9 <= ratio <= 1.5 + 1e-9


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "geotransport", "gen", "--n", "4", "--U", "3", "--seed", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("d 2")
