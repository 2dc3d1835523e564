import logging
from typing import Sequence, Tuple

import numpy as np
import sympy as sp

from config.settings import MAX_BRACKET_DEPTH, TOL_SV
from model.fields import lambdify_array, lie_bracket_exprs
from model.system import VectorFieldSystem
from utils.errors import BracketDepthError
from utils.helpers import numerical_rank, require_finite

logger = logging.getLogger(__name__)


def hormander_rank(system: VectorFieldSystem, x: Sequence[float], depth: int,
                   include_drift: bool = False) -> Tuple[int, int]:
    """Rank at x of the span of sigma_1..sigma_m and their brackets up to `depth` letters.

    With include_drift, sigma0 enters as a bracket letter but never on its own.
    Returns (rank, number of non-zero fields in the span).
    """
    if not 1 <= depth <= MAX_BRACKET_DEPTH:
        raise BracketDepthError(f"bracket depth must lie in 1..{MAX_BRACKET_DEPTH}, got {depth}")
    x = np.asarray(x, dtype=float)
    require_finite(x, name='x')

    diffusion = [f.exprs for f in system.fields[1:]]
    letters = list(diffusion) + ([system.fields[0].exprs] if include_drift else [])
    span = [v for v in diffusion if not _is_zero(v)]
    level = span
    for _ in range(depth - 1):
        level = [b for b in (lie_bracket_exprs(u, v, system.symbols) for u in letters for v in level)
                 if not _is_zero(b)]
        span.extend(level)
    if not span:
        return 0, 0

    flat = [component for v in span for component in v]
    values = lambdify_array(flat, system.symbols, (len(span), system.d))(x)
    rank = numerical_rank(values, TOL_SV)
    logger.debug(f"Hormander rank at {x.tolist()} (depth {depth}, drift={include_drift}): {rank} from {len(span)} fields")
    return rank, len(span)


def _is_zero(v: Tuple[sp.Expr, ...]) -> bool:
    return all(sp.expand(component) == 0 for component in v)
