import csv
import logging
import math
from typing import Any, Iterable, List, Sequence

import numpy as np
from scipy.integrate import simpson

from utils.errors import GridMismatchError, NonFiniteInputError

logger = logging.getLogger(__name__)


def even_steps(steps: int, minimum: int) -> int:
    """Validate a step count and round it up to an even number"""
    steps = int(steps)
    if steps < minimum:
        raise ValueError(f"steps must be >= {minimum}, got {steps}")
    if steps % 2:
        logger.debug(f"Rounding odd step count {steps} up to {steps + 1}")
        steps += 1
    return steps


def simpson_integral(values: np.ndarray, grid: np.ndarray, axis: int = 0) -> np.ndarray:
    """Composite Simpson quadrature on a uniform grid with an even number of intervals"""
    n_intervals = values.shape[axis] - 1
    if n_intervals < 2 or n_intervals % 2:
        raise GridMismatchError(f"Simpson quadrature needs an even number of intervals, got {n_intervals}")
    if len(grid) != values.shape[axis]:
        raise GridMismatchError("grid and samples have different lengths")
    return simpson(values, x=grid, axis=axis)


def require_finite(*arrays: Any, name: str = "input") -> None:
    """Raise NonFiniteInputError when any entry is NaN or infinite"""
    for array in arrays:
        if not np.all(np.isfinite(np.asarray(array, dtype=float))):
            raise NonFiniteInputError(f"{name} contains non-finite entries")


def numerical_rank(matrix: np.ndarray, tol: float) -> int:
    """Rank by singular values relative to the largest one"""
    if matrix.size == 0:
        return 0
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular[0] == 0.0:
        return 0
    return int(np.sum(singular > tol * singular[0]))


def to_jsonable(value: Any) -> Any:
    """Convert numpy values and nested containers into JSON-ready objects"""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write rows with a header line"""
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])


def format_cell(cell: Any) -> Any:
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    return cell


def parse_float_list(text: str) -> List[float]:
    """Parse a comma separated list of floats"""
    return [float(item) for item in text.split(',') if item.strip()]
