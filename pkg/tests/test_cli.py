import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from h2mor import cli
from h2mor.cli import ExperimentConfig, compare_report, main, run_experiment
from h2mor.errors import SingularPencilError
from h2mor.problems import load_matrix_market

SMALL = {"name": "L10000", "kind": "EllipticFD", "params": {"grid": 12, "siso": [0, 0]}}
TINY = {"name": "tiny", "kind": "Custom", "params": {"n": 1, "seed": 2}}


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def strip_timing(outdir):
    """All artifacts as text, minus the timing columns/fields."""
    out = {}
    for f in sorted(outdir.iterdir()):
        if f.name == "config.json":
            continue
        if f.name.endswith("_convergence.csv"):
            out[f.name] = [{k: v for k, v in row.items() if k != "wall_ms"} for row in read_csv(f)]
        elif f.name == "summary.csv":
            out[f.name] = [{k: v for k, v in row.items() if k != "cpu_s"} for row in read_csv(f)]
        elif f.name.endswith("_summary.json"):
            d = json.loads(f.read_text())
            d.pop("cpu_s")
            out[f.name] = d
        elif f.name == "report.txt":
            continue  # cpu column is embedded in the aligned table
        else:
            out[f.name] = f.read_text()
    return out


def test_run_experiment_writes_artifacts(tmp_path):
    cfg = ExperimentConfig(SMALL, r=3, output_dir=str(tmp_path), transfer=True, omega=(0.1, 100, 7))
    res = run_experiment(cfg)
    assert res.ok
    names = {f.name for f in tmp_path.iterdir()}
    for m in cli.METHODS:
        assert {f"{m}_convergence.csv", f"{m}_shifts.json", f"{m}_summary.json"} <= names
    assert {"config.json", "summary.csv", "report.txt", "transfer.csv"} <= names

    rows = read_csv(tmp_path / "RIRKA_convergence.csv")
    assert list(rows[0]) == ["iter", "chi", "cum_solves", "basis_dim", "inner_iters", "wall_ms"]
    assert [int(r["cum_solves"]) for r in rows] == [6 * k for k in range(1, len(rows) + 1)]
    shifts = json.loads((tmp_path / "IRKA_shifts.json").read_text())
    assert len(shifts["final"]) == 3
    s = complex(float(shifts["final"][0][0]), float(shifts["final"][0][1]))
    assert s == res.outcomes[0].record.final_shifts[0]  # 17 digits round trip exactly
    summary = read_csv(tmp_path / "summary.csv")
    assert [r["method"] for r in summary] == list(cli.METHODS)
    assert all(r["sigma"] for r in summary)
    tr = read_csv(tmp_path / "transfer.csv")
    assert len(tr) == 7 and {"omega", "full", "IRKA", "IRKA_err"} <= set(tr[0])


def test_rerun_from_saved_config_is_deterministic(tmp_path):
    cfg = ExperimentConfig(SMALL, methods=["IRKA", "TRIRKA"], r=3, output_dir=str(tmp_path / "a"))
    run_experiment(cfg)
    again = ExperimentConfig.load(tmp_path / "a" / "config.json")
    again.output_dir = str(tmp_path / "b")
    run_experiment(again)
    assert strip_timing(tmp_path / "a") == strip_timing(tmp_path / "b")


def test_tiny_problem_all_methods(tmp_path):
    res = run_experiment(ExperimentConfig(TINY, r=1, output_dir=str(tmp_path)))
    assert res.ok
    for o in res.outcomes:
        assert o.record.status == "converged", (o.method, o.record.message)
        assert o.record.n_iters <= 2
        assert o.sigma <= 1e-20


def test_config_round_trip_and_validation(tmp_path):
    cfg = ExperimentConfig(SMALL, methods=["RIRKA"], overrides={"RIRKA": {"tol_outer": 1e-6}})
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg
    assert back.method_params("RIRKA")["tol_outer"] == 1e-6
    assert back.method_params("RIRKA")["tol_inner"] == 5e-9
    with pytest.raises(ValueError, match="schema"):
        ExperimentConfig.from_dict({**cfg.to_dict(), "schema_version": 99})
    with pytest.raises(ValueError):
        ExperimentConfig(SMALL, methods=["QR"])
    with pytest.raises(ValueError):
        ExperimentConfig(SMALL, methods=[])


def test_default_output_dir_uses_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    assert ExperimentConfig(SMALL).resolved_output_dir() == tmp_path / "L10000"


def test_compare_report_single_and_mixed():
    text, csv_text = compare_report([{"method": "IRKA", "status": "converged", "its": 4, "xi_lin": 88,
                                      "ell_fin": 11, "cpu_s": 0.5, "sigma": 1e-3}])
    lines = text.splitlines()
    assert len(lines) == 2 and lines[0].split() == list(cli._COLUMNS)
    assert len({len(l) for l in lines}) == 1  # aligned
    assert csv_text.splitlines()[1] == "IRKA,converged,4,88,11,0.5,0.001"
    text, csv_text = compare_report([
        {"method": "IRKA", "status": "itmax", "its": 300, "xi_lin": 6600, "ell_fin": 11, "cpu_s": 2.0, "sigma": None},
        {"method": "RIRKA", "status": "error", "its": 0, "xi_lin": 0, "ell_fin": 0, "cpu_s": 0.0, "sigma": None},
    ])
    assert "error" in text and "-" in text.splitlines()[2]
    assert csv_text.splitlines()[2].endswith(",")
    with pytest.raises(ValueError):
        compare_report([])


def test_method_error_is_recorded(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise SingularPencilError("forced")

    monkeypatch.setattr(cli, "irka", boom)
    res = run_experiment(ExperimentConfig(SMALL, methods=["IRKA"], r=2, output_dir=str(tmp_path)))
    assert not res.ok
    assert res.outcomes[0].record.status == "error"
    assert json.loads((tmp_path / "IRKA_summary.json").read_text())["message"] == "forced"


def test_main_reduce_and_exit_codes(tmp_path, monkeypatch, capsys):
    args = ["reduce", "--problem", "L10000", "--grid", "10", "--siso", "0", "1", "-r", "2",
            "--method", "IRKA", "--out", str(tmp_path / "ok")]
    assert main(args) == 0
    assert "IRKA" in capsys.readouterr().out
    assert main(["reduce", "--problem", "nonsense", "--out", str(tmp_path / "x")]) == 2
    assert main(["reduce", "--out", str(tmp_path / "x")]) == 2
    monkeypatch.setattr(cli, "irka", lambda *a, **k: (_ for _ in ()).throw(SingularPencilError("x")))
    assert main(args[:-1] + [str(tmp_path / "bad")]) == 1


def test_main_compare_with_config(tmp_path):
    cfg = ExperimentConfig(SMALL, methods=["IRKA", "RIRKA"], r=2, output_dir=str(tmp_path / "a"))
    cfg.save(tmp_path / "cfg.json")
    assert main(["compare", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "b")]) == 0
    assert {r["method"] for r in read_csv(tmp_path / "b" / "summary.csv")} == {"IRKA", "RIRKA"}


def test_main_generate_and_sample(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--problem", "L10648", "--grid", "4", "--out", str(out)]) == 0
    sys_ = load_matrix_market(out)
    assert (sys_.n, sys_.m, sys_.p) == (64, 2, 2)
    assert json.loads((out / "problem.json").read_text())["params"]["grid"] == 4
    csv_path = tmp_path / "h.csv"
    assert main(["sample", "--problem", str(out), "--omega", "0.1", "10", "5", "--out", str(csv_path)]) == 0
    rows = read_csv(csv_path)
    assert len(rows) == 5
    np.testing.assert_allclose([float(r["omega"]) for r in rows], np.logspace(-1, 1, 5), rtol=1e-15)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "h2mor.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "reduce" in proc.stdout and "compare" in proc.stdout
