"""
Loaders for data vectors, matrices, solver options and census files.

Data and matrices are JSON; options may be JSON or YAML. Complex scalars are
written as ``[re, im]`` pairs.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import yaml
from pydantic import ValidationError

from .combinatorics import SetPartition
from .exceptions import InvalidInputError
from .models import (
    CensusResult,
    CriticalPoint,
    DataVector,
    MLDegreeTable,
    SymMatrix,
    encode_array,
)
from .settings import SolverSettings

logger = logging.getLogger(__name__)


def _read(file_path: Union[str, Path], allow_yaml: bool = False) -> Any:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    with open(file_path, "r") as f:
        try:
            if allow_yaml and file_path.suffix in [".yaml", ".yml"]:
                return yaml.safe_load(f)
            if file_path.suffix == ".json":
                return json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise InvalidInputError(f"Cannot parse {file_path}: {e}") from e
    raise InvalidInputError(f"Unsupported file format: {file_path.suffix}")


def _write_json(data: Dict, file_path: Union[str, Path], indent: int = 2) -> None:
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w") as f:
        json.dump(data, f, indent=indent)
        f.write("\n")


def _invalid(what: str, error: ValidationError) -> InvalidInputError:
    first = error.errors()[0]
    return InvalidInputError(f"Invalid {what}: {first['msg']}")


class DataLoader:
    """Load and save data vectors."""

    @staticmethod
    def load_from_file(file_path: Union[str, Path]) -> DataVector:
        """
        Load a data vector from a JSON file.

        The file holds ``{"n": 3, "u": {"": 1, "1": 8, ...}}`` with subset keys
        as sorted digit strings, or ``{"n": 3, "u_graded": [...]}``.

        Raises:
            FileNotFoundError: If file doesn't exist
            InvalidInputError: If the data is malformed
        """
        logger.debug(f"Loading data vector from {file_path}")
        return DataLoader.load_from_dict(_read(file_path))

    @staticmethod
    def load_from_dict(data: Dict) -> DataVector:
        if not isinstance(data, dict) or "n" not in data:
            raise InvalidInputError("Data file needs an 'n' field")
        n = data["n"]
        try:
            if "u_graded" in data:
                return DataVector.from_graded(n, data["u_graded"])
            if "u" in data and isinstance(data["u"], dict):
                return DataVector.from_subset_dict(n, data["u"])
        except ValidationError as e:
            raise _invalid("data vector", e) from e
        raise InvalidInputError("Data file needs a 'u' object or a 'u_graded' list")

    @staticmethod
    def to_dict(u: DataVector) -> Dict:
        return {"n": u.n, "u_graded": encode_array(u.graded())}

    @staticmethod
    def save_to_file(u: DataVector, file_path: Union[str, Path]) -> None:
        _write_json(DataLoader.to_dict(u), file_path)


class MatrixLoader:
    """Load and save symmetric matrices as ``{"n": 3, "entries": [[...], ...]}``."""

    @staticmethod
    def load_from_file(file_path: Union[str, Path]) -> SymMatrix:
        logger.debug(f"Loading matrix from {file_path}")
        return MatrixLoader.load_from_dict(_read(file_path))

    @staticmethod
    def load_from_dict(data: Dict) -> SymMatrix:
        """
        Build a matrix, validating shape and symmetry (tolerance 1e-12).

        Raises:
            InvalidInputError: If the matrix is malformed or not symmetric
        """
        if not isinstance(data, dict) or "entries" not in data:
            raise InvalidInputError("Matrix file needs an 'entries' field")
        try:
            matrix = SymMatrix(entries=data["entries"])
        except ValidationError as e:
            raise _invalid("matrix", e) from e
        if "n" in data and data["n"] != matrix.n:
            raise InvalidInputError(f"Declared n={data['n']} but matrix is {matrix.n}x{matrix.n}")
        return matrix

    @staticmethod
    def to_dict(theta: SymMatrix) -> Dict:
        return {"n": theta.n, "entries": encode_array(theta.entries)}

    @staticmethod
    def save_to_file(theta: SymMatrix, file_path: Union[str, Path]) -> None:
        _write_json(MatrixLoader.to_dict(theta), file_path)


class OptionsLoader:
    """Solver options files: settings fields plus an optional ``ml_degrees`` map."""

    @staticmethod
    def load_from_file(file_path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[int, int]]:
        """
        Load options from JSON or YAML.

        Returns:
            Settings overrides and ML degree overrides
        """
        logger.debug(f"Loading options from {file_path}")
        data = _read(file_path, allow_yaml=True) or {}
        return OptionsLoader.load_from_dict(data)

    @staticmethod
    def load_from_dict(data: Dict) -> Tuple[Dict[str, Any], Dict[int, int]]:
        if not isinstance(data, dict):
            raise InvalidInputError("Options must be a mapping")
        data = dict(data)
        ml_degrees = {int(k): int(v) for k, v in (data.pop("ml_degrees", None) or {}).items()}
        unknown = set(data) - set(SolverSettings.model_fields)
        if unknown:
            raise InvalidInputError(f"Unknown options: {sorted(unknown)}")
        return data, ml_degrees

    @staticmethod
    def build_settings(*overrides: Dict[str, Any]) -> SolverSettings:
        """Merge override layers (later wins) on top of environment defaults."""
        merged: Dict[str, Any] = {}
        for layer in overrides:
            merged.update({k: v for k, v in layer.items() if v is not None})
        try:
            return SolverSettings(**merged)
        except ValidationError as e:
            raise _invalid("options", e) from e

    @staticmethod
    def build_table(ml_degrees: Dict[int, int]) -> MLDegreeTable:
        return MLDegreeTable.default().with_overrides(ml_degrees)

    @staticmethod
    def save_to_file(settings: SolverSettings, file_path: Union[str, Path]) -> None:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        data = settings.model_dump()
        with open(file_path, "w") as f:
            if file_path.suffix in [".yaml", ".yml"]:
                yaml.dump(data, f, default_flow_style=False, sort_keys=False)
            else:
                json.dump(data, f, indent=2)


class CensusLoader:
    """Census files written by ``dpp solve`` and read back by ``dpp verify --points``."""

    @staticmethod
    def point_to_dict(point: CriticalPoint) -> Dict:
        data = point.model_dump(mode="json")
        data["theta"] = encode_array(point.theta.entries)
        data["chart"] = (
            {"diag": encode_array(point.chart.diag), "off": encode_array(point.chart.off)}
            if point.chart is not None
            else None
        )
        return data

    @staticmethod
    def to_dict(result: CensusResult) -> Dict:
        return {
            "n": result.n,
            "u_graded": encode_array(result.data.graded()),
            "component": result.component.value,
            "seed": result.seed,
            "points": [CensusLoader.point_to_dict(p) for p in result.points],
            "summary": result.summary,
            "runs": [run.model_dump(mode="json") for run in result.runs],
        }

    @staticmethod
    def save_to_file(result: CensusResult, file_path: Union[str, Path]) -> None:
        _write_json(CensusLoader.to_dict(result), file_path)
        logger.info(f"Census written to {file_path}")

    @staticmethod
    def load_from_file(file_path: Union[str, Path]) -> Tuple[DataVector, List[CriticalPoint]]:
        return CensusLoader.load_from_dict(_read(file_path))

    @staticmethod
    def load_from_dict(data: Dict) -> Tuple[DataVector, List[CriticalPoint]]:
        """
        Read the data vector and the points of a census.

        Raises:
            InvalidInputError: If the census is malformed
        """
        if not isinstance(data, dict) or "points" not in data:
            raise InvalidInputError("Census file needs a 'points' list")
        u = DataLoader.load_from_dict(data)
        points = []
        for k, raw in enumerate(data["points"]):
            try:
                fields = dict(raw)
                fields["theta"] = SymMatrix(entries=raw["theta"])
                chart = raw.get("chart")
                fields["chart"] = (
                    {"n": u.n, "diag": chart["diag"], "off": chart["off"]} if chart else None
                )
                fields.setdefault("origin", str(SetPartition.trivial(u.n)))
                points.append(CriticalPoint(**fields))
            except (KeyError, TypeError) as e:
                raise InvalidInputError(f"Census point {k} is malformed: {e}") from e
            except ValidationError as e:
                raise _invalid(f"census point {k}", e) from e
        return u, points


def create_example_data() -> Dict[str, DataVector]:
    """
    Data vectors for the worked instances.

    Returns:
        Dictionary of data vectors keyed by file stem
    """
    return {
        # Minors of a positive definite matrix, so its orbit is the global maximum
        "on_model": DataVector.from_graded(3, [1, 8, 22, 18, 151, 135, 360, 2412]),
        # Eleven positive definite critical points, two complex
        "eleven_pd": DataVector.from_graded(3, [1, 5, 5, 5, 5, 5, 5, 1]),
        # A main-component point with a vanishing off-diagonal entry
        "accidental_zero": DataVector.from_graded(3, [2, 1, 3, 7, 9, 10, 19, 22]),
        "symmetric_n4": DataVector.from_graded(4, [1] + [12] * 14 + [1]),
    }


def create_example_matrices() -> Dict[str, SymMatrix]:
    """
    Reference matrices for ``dpp minors``, ``dpp likelihood`` and ``dpp verify``.

    Returns:
        Dictionary of matrices keyed by file stem
    """
    return {
        "on_model_matrix": SymMatrix(entries=[[8, 5, 3], [5, 22, 6], [3, 6, 18]]),
        "accidental_zero_matrix": SymMatrix(entries=[[2, 0, 2], [0, 4, 3], [2, 3, 7]]),
    }
