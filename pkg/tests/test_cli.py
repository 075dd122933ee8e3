"""End-to-end command line behavior: exit codes, deterministic output files,
the diagnostics table, and figure rendering."""

import json

import numpy as np
import pytest

from mmschro import read_solution
from mmschro.cli import main


@pytest.fixture
def problem_file(tmp_path):
    doc = {
        "version": "1",
        "spaces": [[0.5, 0.5], [0.25, 0.25, 0.5]],
        "kernel": {
            "shape": [2, 3],
            "order": "row-major",
            "data": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        },
        "marginals": [[1.0, 1.0], [1.0, 1.0, 1.0]],
    }
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def gibbs_file(tmp_path):
    doc = {
        "version": "1",
        "spaces": [[0.5, 0.5], [0.5, 0.5]],
        "gibbs": {
            "shape": [2, 2],
            "order": "row-major",
            "cost_data": [0.0, 1.0, 1.0, 0.5],
            "epsilon": 0.5,
        },
        "marginals": [[1.0, 1.0], [1.0, 1.0]],
    }
    path = tmp_path / "gibbs.json"
    path.write_text(json.dumps(doc))
    return path


class TestSolve:
    def test_writes_solution_and_exits_zero(self, problem_file, tmp_path):
        out = tmp_path / "solution.json"
        code = main(["solve", str(problem_file), "--out", str(out)])
        assert code == 0
        solution = read_solution(out)
        assert solution.residual_linf <= 1e-10
        assert solution.report["converged"] is True

    def test_stdout_when_no_out(self, problem_file, capsys):
        assert main(["solve", str(problem_file)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["version"] == "1"
        assert payload["gauge"] == "mean-zero"

    def test_output_is_byte_identical_across_runs(self, problem_file, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert main(["solve", str(problem_file), "--out", str(a)]) == 0
        assert main(["solve", str(problem_file), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    @pytest.mark.parametrize("method", ["sinkhorn", "newton", "hybrid"])
    def test_methods_agree(self, problem_file, tmp_path, method):
        out = tmp_path / f"{method}.json"
        code = main(
            ["solve", str(problem_file), "--method", method, "--out", str(out)]
        )
        assert code == 0
        assert read_solution(out).report["method_used"] == method

    def test_iteration_budget_exhaustion_exits_two(self, problem_file, tmp_path, capsys):
        out = tmp_path / "partial.json"
        code = main(
            [
                "solve",
                str(problem_file),
                "--method",
                "sinkhorn",
                "--max-iter",
                "1",
                "--tol",
                "1e-14",
                "--out",
                str(out),
            ]
        )
        assert code == 2
        assert "not converged" in capsys.readouterr().err
        # Best-effort document still written for inspection.
        assert read_solution(out).report["converged"] is False

    def test_missing_file_exits_one(self, tmp_path, capsys):
        assert main(["solve", str(tmp_path / "nope.json")]) == 1
        assert "error" in capsys.readouterr().err

    def test_schema_violation_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"version": "1"}')
        assert main(["solve", str(bad)]) == 1
        assert "error" in capsys.readouterr().err

    def test_figures_rendered(self, problem_file, tmp_path):
        figdir = tmp_path / "figs"
        out = tmp_path / "solution.json"
        code = main(
            [
                "solve",
                str(problem_file),
                "--out",
                str(out),
                "--figures",
                str(figdir),
            ]
        )
        assert code == 0
        assert (figdir / "residual_history.png").stat().st_size > 0
        assert (figdir / "dual_history.png").stat().st_size > 0
        lines = (figdir / "history.csv").read_text().strip().splitlines()
        assert lines[0] == "index,residual_linf,dual_value"
        assert len(lines) >= 3


class TestCheckJacobian:
    @pytest.mark.parametrize("at", ["solution", "zero"])
    def test_passes_on_healthy_problem(self, problem_file, capsys, at):
        code = main(["check-jacobian", str(problem_file), "--at", at])
        out = capsys.readouterr().out
        assert code == 0
        assert "kernel dim = 1 (expected 1)" in out
        assert "FAIL" not in out
        # Every diagnostic row reports PASS.
        assert out.count("PASS") >= 7


class TestStability:
    def test_report_written(self, problem_file, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "stability",
                str(problem_file),
                "--band",
                "2.0",
                "--trials",
                "3",
                "--seed",
                "11",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["trials"] == 3
        assert payload["failures"] == 0
        assert len(payload["pairs"]) == 3
        assert payload["max_ratio_l2"] <= 1.05 * payload["max_op_norm_l2"]

    def test_csv_and_figures(self, problem_file, tmp_path):
        figdir = tmp_path / "figs"
        csv_path = tmp_path / "pairs.csv"
        code = main(
            [
                "stability",
                str(problem_file),
                "--band",
                "1.5",
                "--trials",
                "2",
                "--seed",
                "3",
                "--out",
                str(tmp_path / "r.json"),
                "--csv",
                str(csv_path),
                "--figures",
                str(figdir),
            ]
        )
        assert code == 0
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("index,")
        assert "quotient_l2" in header
        assert (figdir / "quotients_vs_bounds.png").stat().st_size > 0
        assert (figdir / "quotient_histogram.png").stat().st_size > 0
        assert (figdir / "pairs.csv").exists()

    def test_infeasible_band_exits_one(self, problem_file, capsys):
        code = main(
            [
                "stability",
                str(problem_file),
                "--band",
                "0.5",
                "--trials",
                "2",
                "--seed",
                "1",
            ]
        )
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestGibbs:
    def test_materializes_kernel(self, gibbs_file, tmp_path):
        out = tmp_path / "kernel.json"
        assert main(["gibbs", str(gibbs_file), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert "gibbs" not in payload
        np.testing.assert_allclose(
            payload["kernel"]["data"],
            np.exp(-np.array([0.0, 1.0, 1.0, 0.5]) / 0.5),
            rtol=1e-15,
        )

    def test_epsilon_override(self, gibbs_file, capsys):
        assert main(["gibbs", str(gibbs_file), "--epsilon", "0.25"]) == 0
        payload = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(
            payload["kernel"]["data"],
            np.exp(-np.array([0.0, 1.0, 1.0, 0.5]) / 0.25),
            rtol=1e-15,
        )

    def test_plain_kernel_document_rejected(self, problem_file, capsys):
        assert main(["gibbs", str(problem_file)]) == 1
        assert "no gibbs record" in capsys.readouterr().err
