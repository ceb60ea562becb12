"""Command-line interface: argument handling, exit codes, and output
formats for the fit, risk, tolerance, and simulate subcommands.
"""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ttol.cli import build_parser, main
from ttol.estimation import fit_narrow

DATA = os.path.join(os.path.dirname(__file__), "data")
NORMAL300 = os.path.join(DATA, "normal300.txt")
REG60 = os.path.join(DATA, "reg60.csv")
GOLDEN_FIT = os.path.join(DATA, "fit_normal300_wide.json")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestParser:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_epilog_lists_names(self, capsys):
        with pytest.raises(SystemExit):
            main(["fit", "--help"])
        out = capsys.readouterr().out
        for name in ("narrow", "wide", "ratio", "eb", "vague", "pre",
                     "lim", "bayes", "mean", "sd", "mad", "quantile",
                     "probability"):
            assert name in out

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_parser_builds(self):
        assert build_parser().prog == "ttol"


class TestFit:
    def test_two_point_narrow(self, capsys, tmp_path):
        path = tmp_path / "two.txt"
        path.write_text("0\n2\n")
        code, out, _ = run_cli(capsys, "fit", str(path), "--model", "narrow",
                               "--format", "json")
        assert code == 0
        report = json.loads(out)
        assert report["xi"] == 1.0
        assert report["sigma"] == 1.0
        assert report["m"] == "inf"

    def test_golden_wide_fit(self, capsys):
        code, out, _ = run_cli(capsys, "fit", NORMAL300, "--model", "wide",
                               "--format", "json")
        assert code == 0
        with open(GOLDEN_FIT) as fh:
            assert out == fh.read()
        report = json.loads(out)
        assert report["at_corner"] is True
        narrow = fit_narrow(np.loadtxt(NORMAL300))
        assert report["xi"] == narrow.params.xi
        assert report["sigma"] == narrow.params.sigma

    def test_text_format(self, capsys):
        code, out, _ = run_cli(capsys, "fit", NORMAL300, "--model", "narrow")
        assert code == 0
        lines = dict(line.split(": ", 1) for line in out.strip().split("\n"))
        assert lines["model"] == "narrow"
        assert lines["m"] == "inf"
        assert float(lines["sigma"]) == pytest.approx(1.01622567, rel=1e-8)

    def test_regression_fit(self, capsys):
        code, out, _ = run_cli(capsys, "fit", REG60, "--regression",
                               "--model", "narrow", "--format", "json")
        assert code == 0
        report = json.loads(out)
        assert len(report["beta"]) == 2
        assert report["beta"][0] == pytest.approx(1.0, abs=0.5)
        assert report["beta"][1] == pytest.approx(-0.5, abs=0.5)

    def test_empty_file(self, capsys, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        code, _, err = run_cli(capsys, "fit", str(path))
        assert code == 2
        assert "error: insufficient data" in err

    def test_unparseable_file(self, capsys, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1.0\nnot-a-number\n")
        code, _, err = run_cli(capsys, "fit", str(path))
        assert code == 2
        assert "could not parse" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "fit", str(tmp_path / "nope.txt"))
        assert code == 2
        assert err.startswith("error: ")


class TestRisk:
    def test_default_table(self, capsys):
        code, out, _ = run_cli(capsys, "risk")
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "a,narrow,wide,ratio,eb,vague,pre,lim"
        assert len(lines) == 1 + 101
        first = lines[1].split(",")
        assert first[:3] == ["0.0000", "0.0000", "0.5000"]

    def test_narrow_column_is_a_squared(self, capsys):
        code, out, _ = run_cli(capsys, "risk", "--rules", "narrow",
                               "--a-max", "2", "--step", "0.5")
        assert code == 0
        body = np.loadtxt(out.strip().split("\n")[1:], delimiter=",",
                          ndmin=2)
        np.testing.assert_allclose(body[:, 1], body[:, 0] ** 2, atol=1e-4)

    def test_out_file_matches_stdout(self, capsys, tmp_path):
        path = tmp_path / "risk.csv"
        code, out, _ = run_cli(capsys, "risk", "--rules", "wide,eb",
                               "--a-max", "1", "--step", "0.25",
                               "--out", str(path))
        assert code == 0
        assert out == ""
        code, out, _ = run_cli(capsys, "risk", "--rules", "wide,eb",
                               "--a-max", "1", "--step", "0.25")
        assert path.read_text() == out

    def test_estimand_scaling(self, capsys):
        # mad risks equal (1/pi)(R/12 + 1)
        code, out, _ = run_cli(capsys, "risk", "--rules", "narrow",
                               "--estimand", "mad", "--a-max", "0",
                               "--step", "1")
        assert code == 0
        value = float(out.strip().split("\n")[1].split(",")[1])
        assert value == pytest.approx(1.0 / math.pi, abs=1e-4)

    def test_bad_rule(self, capsys):
        code, _, err = run_cli(capsys, "risk", "--rules", "bogus")
        assert code == 2
        assert "unknown rule 'bogus'" in err
        assert "narrow, wide, ratio, eb, vague" in err

    def test_bad_step(self, capsys):
        code, _, err = run_cli(capsys, "risk", "--step", "0")
        assert code == 2

    def test_svg_plot(self, capsys, tmp_path):
        path = tmp_path / "risk.svg"
        code, _, _ = run_cli(capsys, "risk", "--rules", "narrow,wide",
                             "--a-max", "1", "--step", "0.5",
                             "--svg", str(path))
        assert code == 0
        head = path.read_text()[:300]
        assert "<svg" in head or "<?xml" in head


class TestTolerance:
    def _parse(self, out):
        return dict(line.split(": ", 1) for line in out.strip().split("\n"))

    def test_t_family(self, capsys):
        code, out, _ = run_cli(capsys, "tolerance", "--n", "100")
        assert code == 0
        rows = self._parse(out)
        assert rows["family"] == "t"
        assert float(rows["a_star"]) == pytest.approx(0.8399, abs=5e-4)
        assert float(rows["delta_star"]) == pytest.approx(0.6858, abs=5e-4)
        assert float(rows["m_min"]) == pytest.approx(14.5816, abs=1e-3)

    def test_mixture_family(self, capsys):
        code, out, _ = run_cli(capsys, "tolerance", "--family", "mixture")
        assert code == 0
        rows = self._parse(out)
        assert float(rows["k2"]) == 0.5
        assert float(rows["var_s_bound"]) == pytest.approx(0.3429, abs=5e-4)

    def test_quasi_t_family(self, capsys):
        code, out, _ = run_cli(capsys, "tolerance", "--family", "quasi-t",
                               "--n", "100")
        assert code == 0
        rows = self._parse(out)
        assert float(rows["kappa"]) == pytest.approx(1.8953, abs=1e-3)
        assert float(rows["gamma_bound"]) == pytest.approx(0.189528,
                                                           abs=1e-5)
        assert float(rows["kurtosis_derivative"]) == pytest.approx(1.2436,
                                                                   abs=1e-3)

    def test_flag_scoping(self, capsys):
        code, _, err = run_cli(capsys, "tolerance", "--family", "t",
                               "--k1", "1", "--k2", "1")
        assert code == 2
        code, _, err = run_cli(capsys, "tolerance", "--family", "mixture",
                               "--c", "3")
        assert code == 2
        code, _, err = run_cli(capsys, "tolerance", "--family", "mixture",
                               "--k1", "1")
        assert code == 2
        code, _, err = run_cli(capsys, "tolerance", "--n", "0")
        assert code == 2


class TestSimulate:
    def test_stdout_json_and_summary(self, capsys):
        code, out, err = run_cli(
            capsys, "simulate", "--kind", "corner", "--n", "200",
            "--replicates", "40", "--seed", "1")
        assert code == 0
        payload = json.loads(out)
        assert payload["config"]["n"] == 200
        assert err.startswith("corner: n=200 delta=0")
        assert "corner_freq=" in err and "excluded=" in err

    def test_out_file_deterministic(self, capsys, tmp_path):
        f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
        args = ("simulate", "--kind", "power", "--n", "200",
                "--replicates", "30", "--seed", "3", "--delta", "1.0")
        code1, out1, _ = run_cli(capsys, *args, "--out", str(f1))
        code2, out2, _ = run_cli(capsys, *args, "--out", str(f2))
        assert code1 == code2 == 0
        assert f1.read_bytes() == f2.read_bytes()
        assert out1 == out2
        assert out1.startswith("power: ")

    def test_m_delta_interchange(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--kind", "corner", "--n", "400",
            "--m", "10", "--replicates", "20", "--seed", "0")
        assert code == 0
        assert json.loads(out)["config"]["delta"] == pytest.approx(2.0)

    def test_m_delta_conflict(self, capsys):
        code, _, err = run_cli(
            capsys, "simulate", "--kind", "corner", "--n", "400",
            "--m", "10", "--delta", "1.0", "--replicates", "20")
        assert code == 2
        assert "disagree" in err

    def test_rules_forwarded(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--kind", "risk", "--n", "200",
            "--replicates", "20", "--rules", "narrow,eb",
            "--estimand", "mean", "--seed", "2")
        assert code == 0
        payload = json.loads(out)
        assert [r["rule"] for r in payload["per_rule"]] == ["narrow", "eb"]

    def test_bad_estimand(self, capsys):
        code, _, err = run_cli(
            capsys, "simulate", "--kind", "risk", "--n", "200",
            "--estimand", "bogus", "--replicates", "10")
        assert code == 2
        assert "unknown estimand" in err


class TestConsoleScript:
    def test_installed_entry_point(self):
        proc = subprocess.run(
            ["ttol", "tolerance", "--n", "1"], capture_output=True,
            text=True)
        assert proc.returncode == 0
        assert "m_coefficient: 1.4582" in proc.stdout

    def test_module_invocation_reports_usage(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ttol.cli", "tolerance", "--n", "4"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "m_min: 2.9163" in proc.stdout
