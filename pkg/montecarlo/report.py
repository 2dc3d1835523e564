import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from config.settings import (DEFAULT_EPSILONS, DEFAULT_EULER_STEPS, DEFAULT_PATHS, DEFAULT_SEED,
                             MAX_CENSORED_FRACTION, MIN_PATHS, STDERR_WARN_FRACTION)
from model.system import VectorFieldSystem
from montecarlo.density import SILVERMAN, estimate_log_density
from montecarlo.fit import ExponentFit, fit_exponents, scaled_log_density
from montecarlo.localization import exit_rows
from montecarlo.simulate import simulate
from utils.errors import FitError, ModelConfigError, TargetUnreachedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class McConfig:
    a: Tuple[float, ...]
    epsilons: Tuple[float, ...] = tuple(DEFAULT_EPSILONS)
    n_paths: int = DEFAULT_PATHS
    euler_steps: int = DEFAULT_EULER_STEPS
    seed: int = DEFAULT_SEED
    bandwidth: Union[str, float] = SILVERMAN
    radii: Tuple[float, ...] = ()
    T: float = 1.0

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ModelConfigError(f"epsilons must be positive and strictly decreasing, got {list(self.epsilons)}")
        if self.n_paths < MIN_PATHS:
            raise ModelConfigError(f"n_paths must be at least {MIN_PATHS}, got {self.n_paths}")
        if self.seed < 0:
            raise ModelConfigError("seed must be non-negative")

    def to_dict(self) -> Dict[str, Any]:
        return {'a': list(self.a), 'epsilons': list(self.epsilons), 'n_paths': self.n_paths,
                'euler_steps': self.euler_steps, 'seed': self.seed, 'bandwidth': self.bandwidth,
                'radii': list(self.radii), 'T': self.T}


@dataclass(frozen=True, eq=False)
class McReport:
    rows: List[Dict[str, Any]]
    fit: Optional[ExponentFit]
    reference: Optional[Dict[str, float]]
    localization: List[Dict[str, Any]]
    valid: bool
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'rows': self.rows,
            'fit': None if self.fit is None else {'c1_hat': self.fit.c1_hat, 'c2_hat': self.fit.c2_hat,
                                                  'beta': self.fit.beta, 'residual': self.fit.residual},
            'reference': self.reference,
            'localization': self.localization,
            'valid': self.valid,
            'warnings': self.warnings,
        }

    def plot_rows(self, l: int) -> List[Tuple[float, float, Optional[float]]]:
        """(eps, g(eps), fitted curve) for rows with a density estimate"""
        out = []
        for row in self.rows:
            if row['log_density'] is None:
                continue
            eps = row['epsilon']
            g = float(scaled_log_density(np.array(eps), np.array(row['log_density']), l))
            out.append((eps, g, None if self.fit is None else self.fit.curve(eps)))
        return out


def run_mc_validation(system: VectorFieldSystem, config: McConfig,
                      reference: Optional[Dict[str, float]] = None, jobs: Optional[int] = None) -> McReport:
    """Density ladder, exponent fit and localization table for one target"""
    warnings: List[str] = []
    valid = True
    rows, localization = [], []
    for index, eps in enumerate(config.epsilons):
        simulation = simulate(system, eps, config.n_paths, config.euler_steps, config.seed,
                              T=config.T, stream=index, jobs=jobs)
        if simulation.censored_fraction > MAX_CENSORED_FRACTION:
            valid = False
            warnings.append(f"censoring fraction {simulation.censored_fraction:.2e} at eps={eps} "
                            f"exceeds {MAX_CENSORED_FRACTION:g}; run invalid")
        row = {'epsilon': float(eps), 'log_density': None, 'stderr': None, 'bandwidth': None,
               'n_used': int(simulation.samples.shape[0]), 'n_censored': simulation.censored, 'exit_fractions': {}}
        try:
            estimate = estimate_log_density(simulation.samples, config.a, config.bandwidth, seed=config.seed + index)
            row.update(log_density=estimate.log_density, stderr=estimate.stderr, bandwidth=estimate.bandwidth)
        except TargetUnreachedError as e:
            warnings.append(f"eps={eps}: {e}")
        exits = exit_rows(simulation, config.radii, None if reference is None else reference.get('c1'))
        row['exit_fractions'] = {str(r['radius']): r['exit_fraction'] for r in exits}
        localization.extend(exits)
        rows.append(row)
        logger.info(f"eps={eps}: log f = {row['log_density']}, stderr = {row['stderr']}")

    fit = None
    usable = [(r['epsilon'], r['log_density']) for r in rows if r['log_density'] is not None]
    try:
        fit = fit_exponents(usable, system.l)
    except FitError as e:
        valid = False
        warnings.append(f"exponent fit unavailable: {e}")

    if fit is not None:
        span = abs(fit.c2_hat) * (max(config.epsilons) - min(config.epsilons))
        noise = max(r['epsilon'] ** 2 * r['stderr'] for r in rows if r['stderr'] is not None)
        if noise > STDERR_WARN_FRACTION * span:
            warnings.append(f"bootstrap noise {noise:.3e} exceeds {STDERR_WARN_FRACTION:.0%} of the "
                            f"fitted c2*eps span {span:.3e}")
        logger.info(f"Fitted c1={fit.c1_hat:.6g}, c2={fit.c2_hat:.6g} (rms {fit.residual:.2e})")
    for message in warnings:
        logger.warning(message)
    return McReport(rows=rows, fit=fit, reference=reference, localization=localization, valid=valid,
                    warnings=warnings)
