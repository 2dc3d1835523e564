import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from bvp.models import MinimizerSet, MultistartConfig, TargetSpec
from bvp.multistart import enumerate_minimizers
from bvp.shooting import solve_bvp
from config.settings import BRANCH_SWITCH_FACTOR, FD_GRADIENT_STEP
from model.system import VectorFieldSystem
from utils.errors import BranchSwitchError, NoAdmissibleControlError

logger = logging.getLogger(__name__)

MULTIPLIER = 'multiplier'
FINITE_DIFFERENCE = 'finite_difference'


def lambda_at(system: VectorFieldSystem, a: Sequence[float], T: float,
              multistart: Optional[MultistartConfig] = None) -> Tuple[float, MinimizerSet]:
    """Minimal energy Lambda(a) over controls reaching the target set"""
    target = TargetSpec.create(system, a, T)
    minimizer_set = enumerate_minimizers(system, target, multistart)
    return minimizer_set.energy, minimizer_set


def lambda_gradient(system: VectorFieldSystem, a: Sequence[float], T: float, method: str = MULTIPLIER,
                    minimizer_set: Optional[MinimizerSet] = None,
                    multistart: Optional[MultistartConfig] = None,
                    delta: Optional[float] = None) -> np.ndarray:
    """Lambda'(a) from the terminal covector, or by central differences of Lambda"""
    config = multistart or MultistartConfig()
    if minimizer_set is None:
        _, minimizer_set = lambda_at(system, a, T, config)
    q = minimizer_set.minimizers[0].q_T.copy()
    if method == MULTIPLIER:
        return q
    if method != FINITE_DIFFERENCE:
        raise ValueError(f"unknown gradient method {method!r}")

    a = np.asarray(a, dtype=float)
    delta = delta or FD_GRADIENT_STEP * (1.0 + float(np.linalg.norm(a)))
    energy = minimizer_set.energy
    warm = [s.p0 for s in minimizer_set.solutions]
    threshold = branch_switch_threshold(delta, q)
    gradient = np.zeros(system.l)
    for j in range(system.l):
        shifted = []
        for sign in (1.0, -1.0):
            point = a.copy()
            point[j] += sign * delta
            value = _warm_energy(system, point, T, warm, config)
            if abs(value - energy) > threshold:
                raise BranchSwitchError(
                    f"energy jumps from {energy:.10g} to {value:.10g} at a{'+' if sign > 0 else '-'}delta*e_{j}: "
                    f"the neighbouring solve landed on another branch")
            shifted.append(value)
        gradient[j] = (shifted[0] - shifted[1]) / (2 * delta)
    return gradient


def branch_switch_threshold(delta: float, q: np.ndarray) -> float:
    """Largest energy change over one difference step that still counts as the same branch.

    The gradient norm is floored at 1 so a vanishing multiplier (target at the
    start point) does not make every nonzero energy a jump.
    """
    return BRANCH_SWITCH_FACTOR * delta * max(float(np.linalg.norm(q)), 1.0)


def _warm_energy(system, point, T, warm, config: MultistartConfig) -> float:
    target = TargetSpec.create(system, point, T)
    solutions = solve_bvp(system, target, warm, config.steps, config.jobs)
    if solutions:
        return solutions[0].energy
    logger.debug(f"Warm start failed at {point.tolist()}, falling back to a full multistart")
    try:
        return enumerate_minimizers(system, target, config).energy
    except NoAdmissibleControlError as e:
        raise BranchSwitchError(f"no solution near a={point.tolist()}: {e}") from e
