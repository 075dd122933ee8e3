"""Strict problem/solution document schemas and deterministic serialization."""

import json

import numpy as np
import pytest

from mmschro import (
    IoError,
    MassImbalance,
    ParseError,
    SchemaError,
    ShapeMismatch,
    SolverConfig,
    build_solution_document,
    load_problem,
    parse_problem,
    problem_to_dict,
    read_solution,
    solution_to_json,
    solve,
    write_problem,
    write_solution,
)


def sample_document(**overrides):
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
    doc.update(overrides)
    return doc


def dumps(doc):
    return json.dumps(doc)


class TestParseProblem:
    def test_accepts_valid_document(self):
        doc = parse_problem(dumps(sample_document()))
        assert doc.version == "1"
        assert doc.problem.shape == (2, 3)
        assert doc.gibbs is None
        # Row-major order: data[1] lands at index (0, 1).
        assert doc.problem.kernel.values[0, 1] == 2.0
        assert doc.problem.kernel.values[1, 0] == 4.0

    def test_malformed_json_is_parse_error(self):
        with pytest.raises(ParseError):
            parse_problem("{not json")

    def test_non_object_top_level(self):
        with pytest.raises(SchemaError):
            parse_problem("[1, 2, 3]")

    def test_unknown_top_level_field(self):
        with pytest.raises(SchemaError):
            parse_problem(dumps(sample_document(comment="hi")))

    def test_missing_version(self):
        doc = sample_document()
        del doc["version"]
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_wrong_version(self):
        with pytest.raises(SchemaError):
            parse_problem(dumps(sample_document(version="2")))

    def test_both_kernel_and_gibbs_rejected(self):
        doc = sample_document(
            gibbs={
                "shape": [2, 3],
                "order": "row-major",
                "cost_data": [0.0] * 6,
                "epsilon": 1.0,
            }
        )
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_neither_kernel_nor_gibbs_rejected(self):
        doc = sample_document()
        del doc["kernel"]
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_unknown_kernel_field(self):
        doc = sample_document()
        doc["kernel"]["layout"] = "dense"
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_column_major_rejected(self):
        doc = sample_document()
        doc["kernel"]["order"] = "column-major"
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_boolean_is_not_a_number(self):
        doc = sample_document()
        doc["kernel"]["data"][0] = True
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_boolean_is_not_an_integer(self):
        doc = sample_document()
        doc["kernel"]["shape"] = [True, 3]
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_string_weight_rejected(self):
        doc = sample_document()
        doc["spaces"][0] = ["0.5", 0.5]
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))

    def test_kernel_data_length_mismatch(self):
        doc = sample_document()
        doc["kernel"]["data"] = [1.0, 2.0, 3.0]
        with pytest.raises(ShapeMismatch):
            parse_problem(dumps(doc))

    def test_validation_errors_propagate(self):
        doc = sample_document(marginals=[[1.0, 1.0], [9.0, 9.0, 9.0]])
        with pytest.raises(MassImbalance):
            parse_problem(dumps(doc))

    def test_gibbs_document(self):
        doc = sample_document()
        del doc["kernel"]
        doc["gibbs"] = {
            "shape": [2, 3],
            "order": "row-major",
            "cost_data": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            "epsilon": 0.25,
        }
        parsed = parse_problem(dumps(doc))
        assert parsed.gibbs is not None
        assert parsed.kernel is None
        np.testing.assert_allclose(
            parsed.problem.kernel.log_values,
            -np.array(doc["gibbs"]["cost_data"]).reshape(2, 3) / 0.25,
        )

    def test_gibbs_shape_mismatch_is_schema_error(self):
        doc = sample_document()
        del doc["kernel"]
        doc["gibbs"] = {
            "shape": [2, 3],
            "order": "row-major",
            "cost_data": [0.0, 0.1],
            "epsilon": 0.25,
        }
        with pytest.raises(SchemaError):
            parse_problem(dumps(doc))


class TestProblemRoundTrip:
    def test_dict_round_trip_is_exact(self):
        original = sample_document()
        parsed = parse_problem(dumps(original))
        assert problem_to_dict(parsed) == original

    def test_file_round_trip_is_byte_identical(self, tmp_path):
        parsed = parse_problem(dumps(sample_document()))
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        write_problem(parsed, a)
        write_problem(load_problem(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_materialize_gibbs_to_kernel(self):
        doc = sample_document()
        del doc["kernel"]
        doc["gibbs"] = {
            "shape": [2, 3],
            "order": "row-major",
            "cost_data": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            "epsilon": 0.5,
        }
        parsed = parse_problem(dumps(doc))
        out = problem_to_dict(parsed, materialize=True)
        assert "gibbs" not in out
        np.testing.assert_allclose(
            out["kernel"]["data"],
            np.exp(-np.array(doc["gibbs"]["cost_data"]) / 0.5),
            rtol=1e-15,
        )

    def test_load_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(IoError):
            load_problem(tmp_path / "missing.json")


class TestSolutionDocuments:
    def test_build_and_round_trip(self, planted, tmp_path):
        problem, _ = planted
        family, report = solve(problem, config=SolverConfig(tolerance=1e-10))
        solution = build_solution_document(problem, family, report)
        assert solution.gauge == "mean-zero"
        assert solution.residual_linf <= 1e-10
        assert abs(solution.duality_gap) <= 1e-8
        assert solution.duality_gap == pytest.approx(
            solution.entropy_value - solution.dual_value, abs=1e-15
        )

        path = tmp_path / "solution.json"
        write_solution(solution, path)
        loaded = read_solution(path)
        assert loaded.potentials == solution.potentials
        assert loaded.report["iterations"] == report.iterations

    def test_serialization_is_deterministic(self, planted):
        problem, _ = planted
        family, report = solve(problem, config=SolverConfig(tolerance=1e-10))
        solution = build_solution_document(problem, family, report)
        assert solution_to_json(solution) == solution_to_json(solution)
        keys = list(json.loads(solution_to_json(solution)))
        assert keys == [
            "version",
            "gauge",
            "potentials",
            "residual_linf",
            "dual_value",
            "entropy_value",
            "duality_gap",
            "report",
        ]

    def test_read_rejects_wrong_version(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": "0"}')
        with pytest.raises(SchemaError):
            read_solution(path)
