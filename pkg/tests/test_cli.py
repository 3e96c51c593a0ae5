import json
import subprocess
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

from cperturb.cli import main, parse_exact


def run_cli(*argv, env=None):
    proc = subprocess.run(
        [sys.executable, "-m", "cperturb.cli", *argv],
        capture_output=True,
        text=True,
        env=env,
    )
    return proc


class TestParseExact:
    def test_fraction(self):
        assert parse_exact("3/8") == F(3, 8)

    def test_dyadic_decimal(self):
        assert parse_exact("0.5") == F(1, 2)
        assert parse_exact("-1.25") == F(-5, 4)

    def test_non_dyadic_rejected(self):
        with pytest.raises(ValueError):
            parse_exact("0.1")


class TestEnumerate:
    def test_float_ratio_lower_half(self, capsys):
        assert main(["enumerate", "--L", "2", "--K", "3", "--universe", "0", "2", "--target", "0", "1"]) == 0
        out = capsys.readouterr().out
        assert "ratio: 17/21" in out

    def test_float_ratio_upper_half(self, capsys):
        main(["enumerate", "--L", "2", "--K", "3", "--universe", "0", "2", "--target", "1", "2"])
        assert "ratio: 5/21" in capsys.readouterr().out

    def test_grid_ratio_lower_half(self, capsys):
        main(["enumerate", "--L", "2", "--K", "3", "--emax", "1", "--universe", "0", "2", "--target", "0", "1", "--grid"])
        assert "ratio: 5/9" in capsys.readouterr().out

    def test_grid_ratio_inner_interval(self, capsys):
        main(["enumerate", "--L", "2", "--K", "3", "--emax", "1", "--universe", "0", "2", "--target", "1/10", "9/10", "--grid"])
        assert "ratio: 1/3" in capsys.readouterr().out

    def test_refusal(self, capsys):
        assert main(["enumerate", "--L", "24", "--K", "8", "--universe", "0", "1", "--target", "0", "1"]) == 2


class TestAnalyze:
    def test_univariate_example(self, capsys):
        code = main(
            ["analyze", "--predicate", "univariate", "--degree", "1", "--p", "0.5",
             "--delta", "1", "--emax", "1", "--t", "0.5"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "L_safe   = 7" in out

    def test_json_deterministic(self, capsys):
        args = ["analyze", "--predicate", "multivariate", "--terms", "1:1,1", "--p", "1/4",
                "--delta", "1", "--emax", "1", "--json"]
        main(args)
        first = capsys.readouterr().out
        main(args)
        second = capsys.readouterr().out
        assert first == second
        assert json.loads(first)["L_safe"] == 11

    def test_rational_shows_components(self, capsys):
        main(["analyze", "--predicate", "rational", "--p", "1/2", "--delta", "1/2"])
        out = capsys.readouterr().out
        assert "(1+p)/2 = 3/4" in out
        assert out.count("step 5") == 2

    def test_algorithm_hull(self, capsys):
        main(["analyze", "--algorithm", "hull", "--n", "16", "--p", "0.5", "--delta", "1/2", "--json"])
        d = json.loads(capsys.readouterr().out)
        assert d["N_E"] == 64
        assert F(d["rho"]) == F(1, 2) / 64

    def test_not_analyzable_exit_code(self, capsys):
        # univariate budget cannot absorb p < 1/2
        code = main(["analyze", "--predicate", "univariate", "--degree", "1", "--p", "1/4",
                     "--delta", "1", "--emax", "1"])
        assert code == 2


class TestSimulate:
    def test_header_only(self, capsys):
        main(["simulate", "--predicate", "univariate", "--degree", "2", "--L", "16",
              "--K", "8", "--trials", "0", "--seed", "1", "--delta", "1"])
        out = capsys.readouterr().out.splitlines()
        assert out == ["L,K,trials,successes,empirical_p,theoretical_p_f"]

    def test_deterministic_bytes(self, capsys):
        args = ["simulate", "--predicate", "univariate", "--degree", "2", "--L", "16",
                "--K", "8", "--trials", "200", "--seed", "5", "--delta", "1"]
        main(args)
        a = capsys.readouterr().out
        main(args)
        b = capsys.readouterr().out
        assert a == b


class TestHull(object):
    def write_points(self, tmp_path, rows):
        path = tmp_path / "pts.csv"
        path.write_text("\n".join(rows) + "\n")
        return str(path)

    def test_square_one_round(self, tmp_path, capsys):
        path = self.write_points(tmp_path, ["0,0", "4,0", "4,4", "0,4"])
        assert main(["hull", "--input", path, "--delta", "1/4", "--seed", "3"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert len(d["hull"]) == 4
        assert d["stats"]["rounds"] == 1

    def test_collinear_recovers(self, tmp_path, capsys):
        rows = [f"{i},{i}" for i in range(32)]
        path = self.write_points(tmp_path, rows)
        assert main(["hull", "--input", path, "--delta", "1/2", "--seed", "9"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["stats"]["outcomes"][-1] == "success"

    def test_disc_uses_eta_two(self, tmp_path, capsys):
        path = self.write_points(tmp_path, ["0,0", "4,0", "4,4", "0,4"])
        main(["hull", "--input", path, "--shape", "disc", "--delta", "1/4", "--seed", "3"])
        d = json.loads(capsys.readouterr().out)
        assert d["eta"] == 2

    def test_iteration_cap_exit_code(self, tmp_path, capsys):
        # two points can never produce a hull: the guard fails in every round
        path = self.write_points(tmp_path, ["0,0", "1,1"])
        code = main(["hull", "--input", path, "--delta", "1/4", "--seed", "1",
                     "--max-rounds", "2"])
        assert code == 3

    def test_basic_variant(self, tmp_path, capsys):
        path = self.write_points(tmp_path, ["0,0", "4,0", "4,4", "0,4"])
        assert main(["hull", "--input", path, "--delta", "1/4", "--seed", "3", "--basic"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["stats"]["rounds"] >= 1

    def test_reject_non_dyadic_point(self, tmp_path):
        path = self.write_points(tmp_path, ["0.1,0"])
        with pytest.raises(ValueError):
            main(["hull", "--input", path, "--delta", "1/4"])


class TestSeedEnv:
    def test_cp_seed_env_default(self, tmp_path):
        import os

        path = tmp_path / "pts.csv"
        path.write_text("0,0\n4,0\n4,4\n0,4\n")
        env = dict(os.environ, CP_SEED="77")
        a = run_cli("hull", "--input", str(path), "--delta", "1/4", env=env)
        b = run_cli("hull", "--input", str(path), "--delta", "1/4", "--seed", "77")
        assert a.returncode == b.returncode == 0
        assert a.stdout == b.stdout
