import json
from pathlib import Path

import numpy as np
import pytest

from doublerev import io
from doublerev.cli import main
from doublerev.discretization import build_grid
from doublerev.geometry import Decomposition, make_ellipsoidal

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
D21 = Decomposition(2, 1)


def write_ini(path, text):
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return str(path)


def report(out):
    return json.loads((out / "run_report.json").read_text())


SMALL_SOLVE = """
[domain]
kind = annulus
m = 2
n = 1
R1 = 1
R2 = 2

[problem]
p = 4

[grid]
n_theta = 16
n_rho = 48
"""


class TestFieldIO:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        grid = build_grid(D21, make_ellipsoidal(D21, 2, 3, 1, 0.5), 12, 17)
        u = grid.field(rng.standard_normal(grid.shape) * 10.0 ** rng.integers(-300, 300, grid.shape))
        path = io.write_field_csv(tmp_path / "u.csv", u)
        back = io.read_field_csv(path, grid)
        assert np.array_equal(back.values, u.values)
        assert np.array_equal(back.values.view(np.uint64), u.values.view(np.uint64))

    def test_wrong_grid_rejected(self, tmp_path):
        grid = build_grid(D21, make_ellipsoidal(D21, 2, 3, 1, 0.5), 12, 17)
        path = io.write_field_csv(tmp_path / "u.csv", grid.zeros())
        with pytest.raises(ValueError):
            io.read_field_csv(path, build_grid(D21, grid.profile, 12, 18))
        with pytest.raises(ValueError):
            io.read_field_csv(path, build_grid(D21, grid.profile, 17, 12))

    def test_csv_format(self, tmp_path):
        path = io.write_rows_csv(tmp_path / "x.csv", ("a", "b", "c"), [(1, 0.1, True), {"a": 2, "b": float("nan"), "c": False}])
        raw = path.read_bytes()
        assert raw == b"a,b,c\n1,0.1,true\n2,nan,false\n"

    def test_json_non_finite_is_null(self, tmp_path):
        path = io.write_json(tmp_path / "r.json", {"b": np.inf, "a": np.float64(1.5), "c": (np.int64(3), np.True_)})
        assert path.read_text() == '{\n  "a": 1.5,\n  "b": null,\n  "c": [\n    3,\n    true\n  ]\n}\n'


class TestCommands:
    def test_eigs(self, tmp_path):
        assert main(["eigs", "--config", str(CONFIGS / "eigs.ini"), "--out", str(tmp_path)]) == 0
        res = report(tmp_path)["result"]
        assert res["mu1"] == pytest.approx(6.0, rel=1e-4)
        assert (tmp_path / "psi1.csv").is_file()

    def test_hardy(self, tmp_path):
        assert main(["hardy", "--config", str(CONFIGS / "hardy.ini"), "--out", str(tmp_path)]) == 0
        res = report(tmp_path)["result"]
        assert res["lambda1"] > 0.25
        assert res["relative_error"] < 1e-5

    def test_thin_annulus(self, tmp_path):
        assert main(["sweep-thin-annulus", "--config", str(CONFIGS / "thin_annulus.ini"), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "thin_annulus.csv").read_text().splitlines()
        assert lines[0] == ",".join(io.THIN_ANNULUS_COLUMNS) and len(lines) == 4
        assert report(tmp_path)["result"]["deviation_decreasing"] is True

    def test_solve_writes_artifacts_and_certifies(self, tmp_path):
        cfg = write_ini(tmp_path / "run.ini", SMALL_SOLVE)
        out = tmp_path / "solve"
        assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
        rep = report(out)
        assert rep["result"]["converged"] is True
        assert rep["result"]["el_residual"] <= 1e-8
        assert rep["gates"]["case"] == 1
        for name in ("solution.csv", "grid.json", "history.csv", "radial.csv"):
            assert (out / name).is_file()
        cert_out = tmp_path / "cert"
        code = main(["certify", "--config", cfg, "--out", str(cert_out), "--override", f"certify.field={out / 'solution.csv'}"])
        assert code == 0
        assert report(cert_out)["result"]["certified"] is True

    def test_deterministic_json(self, tmp_path):
        cfg = write_ini(tmp_path / "run.ini", SMALL_SOLVE)
        for name in ("a", "b"):
            assert main(["solve", "--config", cfg, "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "run_report.json").read_bytes() == (tmp_path / "b" / "run_report.json").read_bytes()
        assert (tmp_path / "a" / "solution.csv").read_bytes() == (tmp_path / "b" / "solution.csv").read_bytes()

    def test_outside_gate_flagged(self, tmp_path):
        # (2,2): the proven range ends at p = 6; p = 6.5 still runs
        text = SMALL_SOLVE.replace("m = 2\nn = 1", "m = 2\nn = 2").replace("p = 4", "p = 6.5")
        cfg = write_ini(tmp_path / "run.ini", text)
        code = main(["solve", "--config", cfg, "--out", str(tmp_path)])
        rep = report(tmp_path)
        assert rep["result"]["outside_proven_range"] is True
        assert code == (0 if rep["result"]["converged"] else 2)

    def test_not_converged_exit(self, tmp_path):
        cfg = write_ini(tmp_path / "run.ini", SMALL_SOLVE + "\n[solver]\nmax_iter = 1\n")
        assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert report(tmp_path)["result"]["converged"] is False

    def test_plots_opt_in(self, tmp_path):
        cfg = write_ini(tmp_path / "run.ini", "[domain]\nm = 2\nn = 1\n[eigs]\nn_theta = 64\n")
        assert main(["eigs", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert not (tmp_path / "a" / "psi1.png").exists()
        assert main(["eigs", "--config", cfg, "--out", str(tmp_path / "b"), "--override", "run.plot=true"]) == 0
        assert (tmp_path / "b" / "psi1.png").stat().st_size > 0


class TestConfigErrors:
    @pytest.mark.parametrize(
        "text,key",
        [
            ("[domain]\nm = 2\n", "domain.n"),
            ("[domain]\nm = two\nn = 1\n", "domain.m"),
            (SMALL_SOLVE.replace("p = 4", "p = 4\ncoefficient = banana"), "problem.coefficient"),
            (SMALL_SOLVE.replace("kind = annulus", "kind = cube"), "domain.kind"),
            (SMALL_SOLVE.replace("n_theta = 16", "n_theta = x"), "grid.n_theta"),
        ],
    )
    def test_offending_key_named(self, tmp_path, capsys, text, key):
        cfg = write_ini(tmp_path / "bad.ini", text)
        command = "eigs" if text.startswith("[domain]\nm") else "solve"
        assert main([command, "--config", cfg, "--out", str(tmp_path)]) == 1
        assert key in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["eigs", "--config", str(tmp_path / "nope.ini")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_bad_override(self, tmp_path, capsys):
        cfg = write_ini(tmp_path / "run.ini", "[domain]\nm = 2\nn = 1\n")
        assert main(["eigs", "--config", cfg, "--out", str(tmp_path), "--override", "n_theta=64"]) == 1
        assert "override" in capsys.readouterr().err

    def test_p_not_above_two(self, tmp_path, capsys):
        cfg = write_ini(tmp_path / "run.ini", SMALL_SOLVE.replace("p = 4", "p = 2"))
        assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert "problem.p" in capsys.readouterr().err
