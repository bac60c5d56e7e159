"""Tests for the dpp command-line interface."""

import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from dpp_likelihood import __version__
from dpp_likelihood.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def inputs(runner, tmp_path):
    """Example inputs written by ``dpp init``."""
    result = runner.invoke(main, ["init", "--directory", str(tmp_path)])
    assert result.exit_code == 0
    return tmp_path / "inputs"


def run_json(runner, args, exit_code=0):
    result = runner.invoke(main, args)
    assert result.exit_code == exit_code, result.output
    return json.loads(result.stdout)


class TestInit:
    """Test writing example inputs."""

    def test_files_written(self, inputs):
        """Test that data, matrices and default options exist."""
        for name in ("on_model", "eleven_pd", "accidental_zero", "symmetric_n4", "on_model_matrix"):
            assert (inputs / f"{name}.json").exists()
        options = yaml.safe_load((inputs.parent / "options" / "default.yaml").read_text())
        assert options["seed"] == 0

    def test_existing_options_kept(self, runner, inputs):
        """Test that a second run keeps edited options."""
        options_file = inputs.parent / "options" / "default.yaml"
        options_file.write_text("seed: 9\n")
        result = runner.invoke(main, ["init", "--directory", str(inputs.parent)])
        assert result.exit_code == 0
        assert options_file.read_text() == "seed: 9\n"

    def test_version(self, runner):
        """Test the version flag."""
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output


class TestCount:
    """Test the count command."""

    def test_n3(self, runner):
        """Test the n = 3 total and breakdown."""
        payload = run_json(runner, ["count", "--n", "3"])
        assert payload["total"] == 59
        assert [s["value"] for s in payload["summands"]] == [1, 2, 2, 2, 52]
        assert payload["provenance"] == "exact"

    def test_missing_degree(self, runner):
        """Test n = 5 without a supplied degree."""
        payload = run_json(runner, ["count", "--n", "5"], exit_code=2)
        assert payload["error"]["type"] == "MissingMLDegreeError"

    def test_supplied_degree(self, runner, tmp_path):
        """Test n = 5 with a degree from an options file."""
        options_file = tmp_path / "options.yaml"
        options_file.write_text(yaml.safe_dump({"ml_degrees": {5: 1000}}))
        payload = run_json(runner, ["count", "--n", "5", "--options", str(options_file)])
        assert payload["summands"][-1]["value"] == 16000
        assert payload["provenance"] == "user"

    def test_invalid_n(self, runner):
        """Test n = 0."""
        payload = run_json(runner, ["count", "--n", "0"], exit_code=2)
        assert "error" in payload


class TestEvaluation:
    """Test the minors and likelihood commands."""

    def test_minors(self, runner, inputs):
        """Test the principal minors of the on-model matrix."""
        payload = run_json(runner, ["minors", "--matrix", str(inputs / "on_model_matrix.json")])
        np.testing.assert_allclose(payload["minors_graded"], [1, 8, 22, 18, 151, 135, 360, 2412])
        assert payload["minors"]["13"] == pytest.approx(135)
        assert payload["partition_function"] == pytest.approx(3107)

    def test_likelihood(self, runner, inputs):
        """Test the value and gradient at the on-model matrix."""
        payload = run_json(
            runner,
            [
                "likelihood",
                "--matrix", str(inputs / "on_model_matrix.json"),
                "--data", str(inputs / "on_model.json"),
            ],
        )
        u = np.array([1, 8, 22, 18, 151, 135, 360, 2412], dtype=float)
        expected = float(np.sum(u * np.log(u)) - u.sum() * np.log(u.sum()))
        assert payload["value"] == pytest.approx(expected, rel=1e-10)
        assert payload["implicit_value"] == pytest.approx(expected, rel=1e-10)
        assert len(payload["gradient"]) == 6
        assert payload["residual"] < 1e-9 * u.sum()

    def test_size_mismatch(self, runner, inputs):
        """Test a matrix and data of different sizes."""
        payload = run_json(
            runner,
            [
                "likelihood",
                "--matrix", str(inputs / "on_model_matrix.json"),
                "--data", str(inputs / "symmetric_n4.json"),
            ],
            exit_code=2,
        )
        assert payload["error"]["type"] == "InvalidInputError"


class TestDecouple:
    """Test the decouple command."""

    def test_singletons(self, runner, inputs):
        """Test the diagonal critical point."""
        payload = run_json(
            runner,
            ["decouple", "--data", str(inputs / "on_model.json"), "--partition", "1|2|3"],
        )
        assert payload["partition"] == "1|2|3"
        (point,) = payload["points"]
        np.testing.assert_allclose(
            np.diag(point["theta"]), [2706 / 401, 2945 / 162, 2925 / 182]
        )
        assert payload["runs"] == []

    def test_invalid_partition(self, runner, inputs):
        """Test a partition that does not cover the ground set."""
        payload = run_json(
            runner,
            ["decouple", "--data", str(inputs / "on_model.json"), "--partition", "1|4"],
            exit_code=2,
        )
        assert payload["error"]["type"] == "InvalidInputError"


class TestVerify:
    """Test the verify command."""

    def test_accidental_zero_matrix(self, runner, inputs):
        """Test a critical matrix with a vanishing entry."""
        payload = run_json(
            runner,
            [
                "verify",
                "--matrix", str(inputs / "accidental_zero_matrix.json"),
                "--data", str(inputs / "accidental_zero.json"),
            ],
        )
        assert payload["passed"]
        (report,) = payload["points"]
        assert report["residual"] < 1e-9
        assert report["is_positive_definite"]
        assert report["accidental_zero"]
        assert report["hyperdet_ok"]
        assert report["screen"]["zero_coordinates"] == []

    def test_failing_matrix(self, runner, inputs):
        """Test that a non-critical matrix exits with code 4."""
        payload = run_json(
            runner,
            [
                "verify",
                "--matrix", str(inputs / "on_model_matrix.json"),
                "--data", str(inputs / "eleven_pd.json"),
            ],
            exit_code=4,
        )
        assert not payload["passed"]
        assert not payload["points"][0]["residual_ok"]

    def test_needs_one_source(self, runner, inputs):
        """Test that --matrix or --points is required."""
        payload = run_json(
            runner, ["verify", "--data", str(inputs / "on_model.json")], exit_code=2
        )
        assert payload["error"]["type"] == "InvalidInputError"

    def test_matrix_needs_data(self, runner, inputs):
        """Test --matrix without --data."""
        run_json(
            runner, ["verify", "--matrix", str(inputs / "on_model_matrix.json")], exit_code=2
        )


class TestSolve:
    """Test the solve command."""

    def test_solve_and_verify(self, runner, inputs, tmp_path):
        """Test that a written census verifies."""
        census_file = tmp_path / "census.json"
        csv_file = tmp_path / "points.csv"
        payload = run_json(
            runner,
            [
                "solve",
                "--data", str(inputs / "on_model.json"),
                "--seed", "0",
                "--out", str(census_file),
                "--csv", str(csv_file),
            ],
        )
        assert payload["summary"]["total"] == 13
        assert payload["summary"]["complete"]
        assert census_file.exists()
        assert len(csv_file.read_text().strip().splitlines()) == 14

        verified = run_json(runner, ["verify", "--points", str(census_file)])
        assert verified["passed"]
        assert len(verified["points"]) == 13
        assert verified["certification"]["overlaps"] == []

    @pytest.mark.slow
    def test_fixed_seed_output(self, runner, inputs):
        """Test that two runs with one seed print identical output."""
        args = ["solve", "--data", str(inputs / "on_model.json"), "--seed", "0"]
        first = runner.invoke(main, args)
        second = runner.invoke(main, args)
        assert first.exit_code == second.exit_code == 0
        assert first.stdout == second.stdout
        payload = json.loads(first.stdout)
        assert payload["summary"]["total"] == 13
        assert payload["summary"]["positive_definite"] == 5

    def test_stall_exit_code(self, runner, inputs, tmp_path):
        """Test that an incomplete run still emits the census."""
        options_file = tmp_path / "options.yaml"
        options_file.write_text("max_loops: 1\n")
        payload = run_json(
            runner,
            [
                "solve",
                "--data", str(inputs / "on_model.json"),
                "--options", str(options_file),
            ],
            exit_code=3,
        )
        assert not payload["summary"]["complete"]
        assert payload["runs"][0]["stop_reason"] == "max_loops"

    def test_unknown_option(self, runner, inputs, tmp_path):
        """Test a misspelled options key."""
        options_file = tmp_path / "options.yaml"
        options_file.write_text("max_loop: 1\n")
        payload = run_json(
            runner,
            ["solve", "--data", str(inputs / "on_model.json"), "--options", str(options_file)],
            exit_code=2,
        )
        assert payload["error"]["type"] == "InvalidInputError"
