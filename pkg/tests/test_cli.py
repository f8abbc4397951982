import csv
import json
import math

import pytest

from vstates.cli import load_config, main, read_solution, RunConfigError, write_solution

BASE = """\
[patch]
alpha = {alpha}
n_fold = 2
gamma = {gamma}
b = {b}
eps = {eps}
mode = {mode}

[solver]
order_j = {J}
grid_m = {M}
"""


def write_config(tmp_path, extra="", alpha=0.0, gamma=0.5, b=0.5, eps=0.05, mode="corotating",
                 J=16, M=128):
    p = tmp_path / "run.ini"
    p.write_text(BASE.format(alpha=alpha, gamma=gamma, b=b, eps=eps, mode=mode, J=J, M=M) + extra)
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--svg"]) == 0
    for name in ("solution.json", "outer.csv", "inner.csv", "curves.svg"):
        assert (out / name).exists()
    rec = json.loads((out / "solution.json").read_text())
    assert rec["format"] == "vstates-solution/1" and rec["status"] == "converged"
    speed = rec["scalars"]["speed"]
    assert abs(speed - 1 / (4 * math.pi)) <= 0.05
    assert rec["metadata"]["gamma"] == 0.5 and "tool_version" in rec["metadata"]
    outer = rows(out / "outer.csv")
    assert set(outer[0]) == {"component", "copy", "x", "y"}
    assert {r["copy"] for r in outer} == {"0", "1"}
    assert "converged" in capsys.readouterr().out


def test_solve_rejects_zero_normalization(tmp_path, capsys):
    # 1 - b^2 + gamma b^2 = 0 at gamma = -3, b = 0.5
    cfg = write_config(tmp_path, gamma=-3.0)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "normalization" in err and "[patch] gamma" in err and "run.ini:4" in err


def test_solve_rejects_gamma_zero(tmp_path, capsys):
    cfg = write_config(tmp_path, gamma=0.0)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "isomorphism" in capsys.readouterr().err


def test_unknown_key_names_line(tmp_path, capsys):
    cfg = write_config(tmp_path, extra="colour = blue\n")
    assert main(["solve", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "run.ini:12: [solver] colour: unknown key" in err


def test_bad_value_type(tmp_path, capsys):
    cfg = write_config(tmp_path, J="many")
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "run.ini:10: [solver] order_j: expected int" in capsys.readouterr().err


def test_missing_required_key(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[patch]\nalpha = 0\n")
    with pytest.raises(RunConfigError, match="required"):
        load_config(p).patch()


def test_sweep_empty_list(tmp_path, capsys):
    cfg = write_config(tmp_path, extra="\n[sweep]\neps_list =\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "empty eps list" in capsys.readouterr().err


def test_sweep_order(tmp_path):
    cfg = write_config(tmp_path, extra="\n[sweep]\neps_list = 0.01, 0.02, 0.04\n")
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    table = rows(out / "sweep.csv")
    assert [float(r["eps"]) for r in table] == [0.01, 0.02, 0.04]
    assert table[0]["fitted_order"] == ""
    assert float(table[-1]["fitted_order"]) >= 0.9
    assert len(list(out.glob("solution_*.json"))) == 3


def test_regions_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, extra="\n[regions]\nj_max = 32\nb_step = 0.001\n")
    out = tmp_path / "reg"
    assert main(["regions", "--config", str(cfg), "--out", str(out)]) == 0
    table = rows(out / "regions.csv")
    assert len(table) == 999
    adm = [float(r["b"]) for r in table if r["admissible"] == "1"]
    assert min(adm) == pytest.approx(0.001) and max(adm) == pytest.approx(0.707)
    assert "admissible intervals" in capsys.readouterr().out


def test_regions_gamma_zero_note(tmp_path, capsys):
    cfg = write_config(tmp_path, gamma=0.0, extra="\n[regions]\nj_max = 8\n")
    assert main(["regions", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert "none" in capsys.readouterr().out


def test_identities_command(tmp_path, capsys):
    cfg = write_config(tmp_path, extra="\n[identities]\nb_list = 0.4\nm_max = 4\n")
    out = tmp_path / "ids"
    assert main(["identities", "--config", str(cfg), "--out", str(out)]) == 0
    table = rows(out / "identities.csv")
    assert sum(r["flagged"] == "1" for r in table) == 1
    assert "flagged" in capsys.readouterr().out


@pytest.fixture(scope="module")
def solved_file(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("verify")
    cfg = write_config(tmp)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp)]) == 0
    return tmp / "solution.json"


def test_round_trip(solved_file, tmp_path):
    sol = read_solution(solved_file)
    write_solution(sol, tmp_path / "again.json")
    back = read_solution(tmp_path / "again.json")
    assert (back.f.a == sol.f.a).all() and back.speed == sol.speed
    from vstates.solver import residual_norm

    assert abs(residual_norm(back) - sol.residual_norm) <= 1e-12


def test_verify_pass(solved_file, tmp_path, capsys):
    assert main(["verify", str(solved_file), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert text.count("[pass]") == 5 and "FAIL" not in text
    assert len(json.loads((tmp_path / "verify.json").read_text())) == 5


def test_verify_fail(solved_file, tmp_path, capsys):
    rec = json.loads(solved_file.read_text())
    rec["coefficients"]["a"][1] += 1e-3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rec))
    assert main(["verify", str(bad)]) == 2
    assert "[FAIL] round-trip residual" in capsys.readouterr().out


def test_verify_skips_stationarity_above_one(tmp_path, capsys):
    cfg = write_config(tmp_path, alpha=1.5, gamma=0.0, b=0.1, eps=0.01, J=8, M=64)
    out = tmp_path / "hi"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["verify", str(out / "solution.json")]) == 0
    assert "[skip] stationarity" in capsys.readouterr().out


def test_verify_needs_file(capsys):
    assert main(["verify"]) == 1
    assert main(["verify", "/nonexistent/solution.json"]) == 1
