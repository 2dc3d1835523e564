import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config.settings import DEFAULT_EULER_STEPS, DEFAULT_SEED
from model.system import VectorFieldSystem
from montecarlo.simulate import SimulationResult, simulate

logger = logging.getLogger(__name__)


def exit_rows(simulation: SimulationResult, radii: Sequence[float], c1: Optional[float] = None) -> List[Dict[str, Any]]:
    """Exit fraction P[sup |X| >= R] per radius and the rate -eps^2 log P"""
    eps, n = simulation.epsilon, simulation.n_paths
    rows = []
    for radius in radii:
        exits = int(np.sum(simulation.max_norms >= radius))
        fraction = exits / n
        if exits:
            rate = -eps ** 2 * math.log(fraction)
            bound = False
        else:
            # No exits: the rate is at least the value at one exit
            rate = eps ** 2 * math.log(n)
            bound = True
        rows.append({
            'epsilon': eps,
            'radius': float(radius),
            'exit_fraction': fraction,
            'exit_fraction_text': f'< 1/{n}' if bound else f'{fraction:.6g}',
            'scaled_log_probability': -rate if not bound else None,
            'rate_estimate': rate,
            'rate_is_lower_bound': bound,
            'exceeds_c1': None if c1 is None else bool(rate > c1),
        })
    return rows


def localization_scan(system: VectorFieldSystem, epsilons: Sequence[float], radii: Sequence[float],
                       n_paths: int, c1: Optional[float] = None, a: Optional[Sequence[float]] = None,
                       T: float = 1.0, euler_steps: int = DEFAULT_EULER_STEPS, seed: int = DEFAULT_SEED,
                       jobs: Optional[int] = None) -> List[Dict[str, Any]]:
    """Empirical exit probabilities of balls of radius R, compared with c1 when given"""
    if a is not None:
        floor = float(np.linalg.norm(system.start_limit) + np.linalg.norm(np.atleast_1d(a)))
        small = [R for R in radii if R <= floor]
        if small:
            logger.warning(f"radii {small} do not exceed |x0| + |a| = {floor:.4g}; the minimizer itself exits")
    table = []
    for index, eps in enumerate(epsilons):
        simulation = simulate(system, eps, n_paths, euler_steps, seed, T=T, stream=index, jobs=jobs)
        table.extend(exit_rows(simulation, radii, c1))
    return table
