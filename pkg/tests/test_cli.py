import filecmp
from pathlib import Path

import numpy as np
import pytest

from covdyn import cli, fieldio

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"


def run(args):
    return cli.main(args)


class TestExitCodes:
    def test_usage_error(self, capsys):
        assert run(["bogus", "--scenario", str(SCEN / "wave_1d.toml")]) == 2

    def test_missing_scenario_flag(self, capsys):
        assert run(["simulate"]) == 2

    def test_scenario_error(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text('[manifold]\nname = "torus"\n[initial]\nphi = ["x"]\n')
        assert run(["simulate", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "manifold.name" in capsys.readouterr().err

    def test_runtime_chart_exit(self, tmp_path, capsys):
        p = tmp_path / "exit.toml"
        p.write_text('[manifold]\nname = "half-plane"\n[body]\nN = 9\n[material]\nlagrangian = "zero"\n'
                     '[initial]\nphi = ["x", "0.5"]\nV = ["0", "-3"]\n[time]\ndt = 0.01\nsteps = 200\n')
        assert run(["simulate", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 3
        assert "ChartExitError" in capsys.readouterr().err

    def test_runtime_blow_up(self, tmp_path, capsys):
        text = (SCEN / "wave_1d.toml").read_text().replace("dt = 0.005", "dt = 0.2")
        p = tmp_path / "unstable.toml"
        p.write_text(text)
        assert run(["simulate", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 3
        assert "unstable step" in capsys.readouterr().err

    def test_degenerate_newton(self, tmp_path, capsys):
        text = (SCEN / "svk_bar.toml").read_text().replace('clamp = ["x1-"]', "")
        p = tmp_path / "free.toml"
        p.write_text(text)
        assert run(["equilibrium", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 3
        assert "degenerate linearization" in capsys.readouterr().err

    def test_eps_sweep_too_short(self, tmp_path, capsys):
        assert run(["linearize", "--scenario", str(SCEN / "wave_1d.toml"), "--out", str(tmp_path),
                    "--eps-sweep", "2"]) == 2


class TestModes:
    def test_simulate_standing_wave_period_two(self, tmp_path):
        out = tmp_path / "sim"
        assert run(["simulate", "--scenario", str(SCEN / "wave_1d.toml"), "--out", str(out)]) == 0
        header, table = fieldio.read_field(out / "motion.csv")
        assert header == ["t", "x1", "y1"]
        n = 33
        first, last = table[:n], table[-n:]
        assert last[0, 0] == pytest.approx(2.0)
        assert np.max(np.abs(last[:, 2] - first[:, 2])) < 0.02 * 0.01
        for name in ("velocity.csv", "energy.csv", "report.txt", "report.tsv", "trajectory.png",
                     "energy.png"):
            assert (out / name).exists()

    def test_equilibrium(self, tmp_path):
        out = tmp_path / "eq"
        assert run(["equilibrium", "--scenario", str(SCEN / "svk_bar.toml"), "--out", str(out)]) == 0
        text = (out / "report.txt").read_text()
        assert "residual[3]" in text
        _, table = fieldio.read_field(out / "equilibrium.csv")
        assert table[-1, 2] > 1.0

    def test_linearize_dump(self, tmp_path):
        out = tmp_path / "lin"
        assert run(["linearize", "--scenario", str(SCEN / "svk_bar.toml"), "--out", str(out),
                    "--eps-sweep", "3"]) == 0
        header, table = fieldio.read_field(out / "coefficients.csv")
        assert header[:4] == ["t", "x1", "A1_0_0", "A2_0_0_0"]
        assert header[-1] == "div_psi_0"
        assert "interior-linear-rel-error" in (out / "report.txt").read_text()
        assert (out / "linearized_vs_fd.png").exists()

    def test_geodesic(self, tmp_path):
        out = tmp_path / "geo"
        assert run(["geodesic", "--scenario", str(SCEN / "sphere_string.toml"), "--out", str(out)]) == 0
        header, _ = fieldio.read_field(out / "geodesic.csv")
        assert header == ["t", "x1", "y1", "y2", "v1", "v2"]

    def test_verify_euclidean_passes(self, tmp_path):
        out = tmp_path / "ver"
        assert run(["verify", "--scenario", str(SCEN / "wave_1d.toml"), "--out", str(out)]) == 0
        text = (out / "report.txt").read_text()
        assert text.rstrip().endswith("verify PASS")
        assert "not enforced" in text

    def test_verify_strict_fails_on_affine_scenario(self, tmp_path):
        out = tmp_path / "ver"
        assert run(["verify", "--strict", "--scenario", str(SCEN / "wave_1d.toml"),
                    "--out", str(out)]) == 1

    def test_bit_identical_reruns(self, tmp_path):
        for tag in ("a", "b"):
            assert run(["linearize", "--scenario", str(SCEN / "sphere_string.toml"), "--seed", "3",
                        "--eps-sweep", "3", "--out", str(tmp_path / tag)]) == 0
        cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        for name in cmp.common_files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_fields(self, tmp_path):
        for seed in ("1", "2"):
            run(["linearize", "--scenario", str(SCEN / "svk_bar.toml"), "--seed", seed,
                 "--eps-sweep", "3", "--out", str(tmp_path / seed)])
        assert (tmp_path / "1" / "linearized.csv").read_bytes() != \
            (tmp_path / "2" / "linearized.csv").read_bytes()
