import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from utils.errors import FitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExponentFit:
    c1_hat: float
    c2_hat: float
    residual: float
    beta: float

    def curve(self, eps: float) -> float:
        """Fitted g(eps) = -c1 + c2 eps + beta eps^2"""
        return -self.c1_hat + self.c2_hat * eps + self.beta * eps ** 2


def scaled_log_density(eps: np.ndarray, log_density: np.ndarray, l: int) -> np.ndarray:
    """g(eps) = eps^2 log f + l eps^2 log eps"""
    return eps ** 2 * log_density + l * eps ** 2 * np.log(eps)


def fit_exponents(rows: Sequence[Tuple[float, float]], l: int) -> ExponentFit:
    """Least squares of g(eps) against -c1 + c2 eps + beta eps^2"""
    if len(rows) < 3:
        raise FitError(f"need at least 3 (eps, log f) rows, got {len(rows)}")
    eps, log_density = (np.asarray(column, dtype=float) for column in zip(*rows))
    g = scaled_log_density(eps, log_density, l)
    design = np.stack([np.ones_like(eps), eps, eps ** 2], axis=1)
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("design is rank deficient: the eps values must be distinct (at least 3)")
    coef, *_ = np.linalg.lstsq(design, g, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - g) ** 2)))
    logger.debug(f"Exponent fit: c1={-coef[0]:.6g}, c2={coef[1]:.6g}, rms={residual:.3e}")
    return ExponentFit(c1_hat=float(-coef[0]), c2_hat=float(coef[1]), residual=residual, beta=float(coef[2]))
