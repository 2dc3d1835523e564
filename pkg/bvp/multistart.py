import logging
from typing import Optional

import numpy as np
from scipy.stats import qmc

from bvp.models import MinimizerSet, MultistartConfig, TargetSpec
from bvp.shooting import solve_with_stats
from model.system import VectorFieldSystem
from utils.errors import NoAdmissibleControlError

logger = logging.getLogger(__name__)


def generate_guesses(system: VectorFieldSystem, target: TargetSpec, config: MultistartConfig) -> np.ndarray:
    """Zero covector, scrambled Sobol points in a box, then scaled normal draws"""
    d = system.d
    # Covector scale follows the mean velocity needed to reach the target
    scale = max(1.0, target.distance_from_start(system) / target.T)
    half_width = config.box_factor * scale
    parts = [np.zeros((1, d))]
    if config.n_sobol > 0:
        sobol = qmc.Sobol(d=d, scramble=True, seed=config.seed).random(config.n_sobol)
        parts.append(qmc.scale(sobol, -half_width * np.ones(d), half_width * np.ones(d)))
    if config.n_normal > 0:
        rng = np.random.default_rng(config.seed)
        parts.append(scale * rng.standard_normal((config.n_normal, d)))
    if config.extra_guesses is not None:
        parts.append(np.atleast_2d(np.asarray(config.extra_guesses, dtype=float)))
    return np.concatenate(parts, axis=0)


def enumerate_minimizers(system: VectorFieldSystem, target: TargetSpec,
                         multistart: Optional[MultistartConfig] = None) -> MinimizerSet:
    """All distinct shooting solutions and the energy-minimal ones among them"""
    config = multistart or MultistartConfig()
    guesses = generate_guesses(system, target, config)
    logger.info(f"Shooting {system.name} towards a={target.a.tolist()} with {len(guesses)} starts")
    solutions, stats = solve_with_stats(system, target, guesses, config.steps, config.jobs)
    if not solutions:
        raise NoAdmissibleControlError(
            f"no admissible control found for a={target.a.tolist()}, T={target.T}: "
            f"0 of {stats['starts']} starts converged (target set empty or guesses insufficient)")

    lowest = solutions[0].energy
    cutoff = lowest + config.tol_energy_tie * (1.0 + abs(lowest))
    minimizers = [s for s in solutions if s.energy <= cutoff]
    continuum = len(minimizers) > config.continuum_threshold
    degenerate = (system.drift_free and target.distance_from_start(system) == 0.0
                  and lowest <= config.tol_energy_tie)
    if continuum:
        logger.warning(f"{len(minimizers)} distinct minimizers with energy {lowest:.6g}: "
                       f"looks like a continuous family")
    if degenerate:
        logger.warning("Target equals the projected start: the zero control is the minimizer")
    logger.info(f"Found {len(solutions)} solutions, {len(minimizers)} minimizers, energy {lowest:.10g}")
    return MinimizerSet(target=target, solutions=solutions, minimizers=minimizers, continuum_flag=continuum,
                        multistart_stats=stats, degenerate_zero_control=degenerate)
