"""
Command-line interface for the DPP likelihood toolkit.

Results are printed to stdout as JSON; tables and log records go to stderr.
"""

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .census import BlockMonodromySolver, census_frame, solve_census
from .certification import distinctness_check
from .classifier import classify, mark_global_maxima
from .combinatorics import SetPartition
from .config_loader import (
    CensusLoader,
    DataLoader,
    MatrixLoader,
    OptionsLoader,
    create_example_data,
    create_example_matrices,
)
from .decoupling import assemble_decouplings, count_critical_points
from .exceptions import DPPError, InvalidInputError, StallWithoutTargetError, VerificationError
from .hyperdet import critical_rank_matrix, hyperdet, support_and_singularity_screen
from .likelihood import gradient_vector, loglike_implicit, loglike_parametric, principal_minors
from .models import (
    Component,
    CriticalPoint,
    DataVector,
    MinorVector,
    RunConfig,
    SymMatrix,
    encode_array,
    encode_scalar,
)
from .reparam import grad_system

# Load environment variables
load_dotenv()

console = Console(stderr=True)
logger = logging.getLogger(__name__)

HYPERDET_TOL = 1e-8


def emit(payload: Dict[str, Any]) -> None:
    """Write one JSON document to stdout."""
    click.echo(json.dumps(payload, indent=2))


def handle_errors(command):
    """Turn toolkit errors into error JSON and the matching exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except DPPError as e:
            emit({"error": {"type": type(e).__name__, "message": str(e)}})
            sys.exit(e.exit_code)
        except (ValidationError, FileNotFoundError) as e:
            emit({"error": {"type": type(e).__name__, "message": str(e)}})
            sys.exit(2)
        except Exception as e:
            logger.error(f"Command failed: {e}", exc_info=True)
            emit({"error": {"type": type(e).__name__, "message": str(e)}})
            sys.exit(1)

    return wrapper


def solver_options(command):
    """Flags shared by every command that may run the numerical solver."""
    options = [
        click.option("--seed", type=int, default=None, help="Seed for all random draws"),
        click.option("--workers", type=int, default=None, help="Worker threads for path tracking"),
        click.option(
            "--dedup-tol", type=float, default=None, help="Relative deduplication tolerance"
        ),
        click.option(
            "--residual-tol", type=float, default=None, help="Newton convergence tolerance"
        ),
        click.option(
            "--options",
            "options_path",
            type=click.Path(exists=True, dir_okay=False),
            default=None,
            help="Options file (JSON or YAML) with solver settings and ml_degrees",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def build_config(command: str, options_path: Optional[str], **values) -> RunConfig:
    """Merge defaults, environment, options file and CLI flags into a RunConfig."""
    overrides, ml_degrees = OptionsLoader.load_from_file(options_path) if options_path else ({}, {})
    flags = {
        key: values.pop(key, None) for key in ("seed", "workers", "dedup_tol", "residual_tol")
    }
    settings = OptionsLoader.build_settings(overrides, flags)
    try:
        return RunConfig(command=command, settings=settings, ml_degrees=ml_degrees, **values)
    except ValidationError as e:
        raise InvalidInputError(f"Invalid arguments: {e.errors()[0]['msg']}") from e


def print_points(points: List[CriticalPoint], title: str) -> None:
    table = Table(title=title)
    table.add_column("Origin", style="cyan")
    table.add_column("Value", justify="right")
    table.add_column("Real")
    table.add_column("PD")
    table.add_column("Kind")
    table.add_column("Residual", justify="right")
    for p in points:
        table.add_row(
            str(p.origin),
            f"{p.value:.8f}" if p.value is not None else "-",
            "yes" if p.is_real else "no",
            "yes" if p.is_positive_definite else "no",
            p.kind.value if p.kind else "-",
            f"{p.residual:.1e}",
        )
    console.print(table)


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    help="Log level for messages on stderr",
)
def main(log_level):
    """
    DPP Likelihood Toolkit

    Critical points of the log-likelihood of determinantal point processes.
    """
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@main.command()
@click.option(
    "--data",
    "data_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Data vector file",
)
@click.option(
    "--component",
    type=click.Choice([c.value for c in Component]),
    default=Component.MAIN.value,
    help="main: one point per sign orbit of the main component; all: every decoupling",
)
@solver_options
@click.option("--out", "out_path", type=click.Path(), help="Write the census JSON to this file")
@click.option("--csv", "csv_path", type=click.Path(), help="Export the point table to CSV")
@handle_errors
def solve(data_path, component, options_path, out_path, csv_path, **flags):
    """
    Solve and classify the critical points of the log-likelihood.

    Exits with code 3 when the solver stalls below a known ML degree; the
    census is still written.
    """
    config = build_config(
        "solve", options_path, data_path=data_path, component=component,
        out_path=out_path, csv_path=csv_path, **flags,
    )
    u = DataLoader.load_from_file(config.data_path)
    table = OptionsLoader.build_table(config.ml_degrees)
    result = solve_census(u, config.component, config.settings, table)

    payload = CensusLoader.to_dict(result)
    if config.out_path:
        CensusLoader.save_to_file(result, config.out_path)
    if config.csv_path:
        census_frame(result.points).to_csv(config.csv_path, index=False)
        logger.info(f"Point table exported to {config.csv_path}")
    print_points(result.points, f"Critical points (n={u.n}, component={config.component.value})")
    emit(payload)

    if not result.complete:
        missed = [run for run in result.runs if not run.complete]
        run = missed[0]
        error = StallWithoutTargetError(
            f"Block {run.block}: found {run.solutions_found} of {run.target} solutions",
            found=run.solutions_found,
            expected=run.target,
        )
        console.print(f"[yellow]{error}[/yellow]")
        sys.exit(error.exit_code)


@main.command()
@click.option("--n", "n", type=int, required=True, help="Ground-set size")
@click.option(
    "--options",
    "options_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Options file supplying extra ml_degrees",
)
@handle_errors
def count(n, options_path):
    """
    Count parametric critical points as a sum over set partitions.
    """
    config = build_config("count", options_path, n=n)
    breakdown = count_critical_points(n, OptionsLoader.build_table(config.ml_degrees))

    table = Table(title=f"Critical points for n={n}")
    table.add_column("Partition", style="cyan")
    table.add_column("Factors")
    table.add_column("Summand", justify="right", style="green")
    for s in breakdown.summands:
        table.add_row(s.partition, " x ".join(str(f) for f in s.factors), str(s.value))
    table.add_row("[bold]total[/bold]", "", f"[bold]{breakdown.total}[/bold]")
    console.print(table)
    emit(breakdown.model_dump(mode="json"))


@main.command()
@click.option(
    "--matrix",
    "matrix_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Symmetric matrix file",
)
@handle_errors
def minors(matrix_path):
    """
    Principal minors of a symmetric matrix in graded order.
    """
    theta = MatrixLoader.load_from_file(matrix_path)
    p = principal_minors(theta)
    emit(
        {
            "n": theta.n,
            "minors_graded": encode_array(p.graded()),
            "minors": p.to_subset_dict(),
            "partition_function": encode_scalar(np.sum(p.values)),
        }
    )


@main.command()
@click.option(
    "--matrix",
    "matrix_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Symmetric matrix file",
)
@click.option(
    "--data",
    "data_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Data vector file",
)
@handle_errors
def likelihood(matrix_path, data_path):
    """
    Evaluate the log-likelihood and its gradient at a matrix.
    """
    theta = MatrixLoader.load_from_file(matrix_path)
    u = DataLoader.load_from_file(data_path)
    if theta.n != u.n:
        raise InvalidInputError(f"Matrix is {theta.n}x{theta.n} but data has n={u.n}")
    value = loglike_parametric(theta, u)
    grad = gradient_vector(theta.entries, u.values)
    emit(
        {
            "n": u.n,
            "value": encode_scalar(value),
            "implicit_value": encode_scalar(loglike_implicit(principal_minors(theta), u)),
            "gradient": encode_array(grad),
            "residual": float(np.max(np.abs(grad))),
        }
    )


@main.command()
@click.option(
    "--data",
    "data_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Data vector file",
)
@click.option("--partition", required=True, help="Block structure such as 12|3")
@solver_options
@handle_errors
def decouple(data_path, partition, options_path, **flags):
    """
    Critical points that are direct sums over the blocks of a partition.

    Blocks with three or more elements are solved by monodromy.
    """
    config = build_config(
        "decouple", options_path, data_path=data_path, partition=partition, **flags
    )
    u = DataLoader.load_from_file(config.data_path)
    split = SetPartition.parse(config.partition)
    solver = BlockMonodromySolver(config.settings, OptionsLoader.build_table(config.ml_degrees))
    points = assemble_decouplings(u, split, solver)
    points = mark_global_maxima([classify(p, u, config.settings) for p in points])
    print_points(points, f"Decouplings along {split}")
    emit(
        {
            "n": u.n,
            "partition": str(split),
            "points": [CensusLoader.point_to_dict(p) for p in points],
            "runs": [run.model_dump(mode="json") for run in solver.runs],
        }
    )


def _verify_point(point: CriticalPoint, u: DataVector, config: RunConfig) -> Dict[str, Any]:
    """Residual and flags at one point, plus the implicit checks when n = 3."""
    checked = classify(point, u, config.settings)
    threshold = config.settings.gradient_tol * (1.0 + abs(u.total))
    report: Dict[str, Any] = {
        "origin": str(checked.origin),
        "residual": checked.residual,
        "residual_ok": checked.residual <= threshold,
        "value": checked.value,
        "is_real": checked.is_real,
        "is_positive_definite": checked.is_positive_definite,
        "kind": checked.kind.value if checked.kind else None,
        "accidental_zero": checked.accidental_zero,
    }
    passed = report["residual_ok"]
    if u.n == 3:
        p: MinorVector = principal_minors(checked.theta)
        scale = float(np.max(np.abs(p.values))) ** 4
        det = hyperdet(p)
        rank = critical_rank_matrix(p, u)
        screen = support_and_singularity_screen(p)
        report["hyperdet"] = encode_scalar(det)
        report["hyperdet_ok"] = bool(abs(det) <= HYPERDET_TOL * scale)
        report["rank"] = rank.rank
        report["rank_ratio"] = rank.ratio
        report["singular_values"] = rank.singular_values
        report["screen"] = screen.model_dump()
        passed = passed and report["hyperdet_ok"]
    report["passed"] = bool(passed)
    return report


@main.command()
@click.option(
    "--data",
    "data_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Data vector file (required with --matrix)",
)
@click.option(
    "--matrix",
    "matrix_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Candidate critical matrix",
)
@click.option(
    "--points",
    "points_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Census file written by solve --out",
)
@click.option(
    "--options",
    "options_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Options file with tolerances",
)
@handle_errors
def verify(data_path, matrix_path, points_path, options_path):
    """
    Verify candidate critical points.

    Checks the gradient residual at every point; for n = 3 also the
    hyperdeterminant and the criticality rank of the minor vector. A census
    file additionally gets a convergence-ball distinctness check. Exits with
    code 4 when a point fails.
    """
    if (matrix_path is None) == (points_path is None):
        raise InvalidInputError("Give exactly one of --matrix or --points")
    config = build_config(
        "verify", options_path, data_path=data_path, matrix_path=matrix_path,
        points_path=points_path,
    )
    if config.points_path:
        u, points = CensusLoader.load_from_file(config.points_path)
    else:
        if config.data_path is None:
            raise InvalidInputError("--matrix needs --data")
        u = DataLoader.load_from_file(config.data_path)
        theta = MatrixLoader.load_from_file(config.matrix_path)
        if theta.n != u.n:
            raise InvalidInputError(f"Matrix is {theta.n}x{theta.n} but data has n={u.n}")
        points = [CriticalPoint(theta=theta, origin=SetPartition.trivial(u.n), residual=0.0)]

    reports = [_verify_point(p, u, config) for p in points]
    payload: Dict[str, Any] = {"n": u.n, "points": reports}
    if config.points_path and points:
        system = grad_system(u, coordinates="theta")
        certification = distinctness_check(
            [system.system.from_matrix(p.theta.entries) for p in points],
            system,
            residual_gate=config.settings.certification_residual_gate * (1.0 + abs(u.total)),
            seed=config.settings.seed,
        )
        payload["certification"] = {
            "certified": certification.certified_count,
            "overlaps": certification.overlaps,
            "all_distinct": certification.all_distinct,
        }
    failed = [k for k, r in enumerate(reports) if not r["passed"]]
    payload["passed"] = not failed
    emit(payload)
    if failed:
        error = VerificationError(f"Points {failed} failed verification")
        console.print(f"[red]{error}[/red]")
        sys.exit(error.exit_code)


@main.command()
@click.option(
    "--directory",
    type=click.Path(file_okay=False),
    default="data",
    help="Where to write the example inputs",
)
def init(directory):
    """
    Write the example data vectors, matrices and default options.
    """
    root = Path(directory)
    for name, u in create_example_data().items():
        DataLoader.save_to_file(u, root / "inputs" / f"{name}.json")
    for name, theta in create_example_matrices().items():
        MatrixLoader.save_to_file(theta, root / "inputs" / f"{name}.json")
    console.print(f"[green]✓[/green] Wrote example inputs to {root / 'inputs'}")

    options_path = root / "options" / "default.yaml"
    if not options_path.exists():
        OptionsLoader.save_to_file(OptionsLoader.build_settings(), options_path)
        console.print(f"[green]✓[/green] Created {options_path}")
    else:
        console.print(f"[yellow]⚠[/yellow]  {options_path} already exists, skipping")


if __name__ == "__main__":
    main()
