"""Forward shooting in the initial covector p0 with damped Newton steps.

The residual of a start p0 is (Pi_l x(T) - a, p_{l+1..d}(T)): l target
mismatches followed by d - l transversality violations.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import (MIN_STEPS, MULTISTART_CHUNK, NEWTON_COARSE_TOL, NEWTON_COARSEN, NEWTON_MAX_HALVINGS,
                             NEWTON_MAX_ITER, NEWTON_POLISH_ITER, NEWTON_STALL_LIMIT, NEWTON_STALL_RATIO,
                             NEWTON_STEP_CAP, TOL_BVP, TOL_DEDUP)
from bvp.models import Minimizer, TargetSpec
from hamiltonian.core import CotangentPoint
from hamiltonian.flow import PhasePath, build_path, energy_invariant, flow, integrate_batch, seed_matrix
from model.system import VectorFieldSystem
from utils.errors import AccuracyError, DivergedFlowError
from utils.helpers import even_steps, require_finite
from utils.parallel import chunked, map_ordered

logger = logging.getLogger(__name__)


def shoot_residual(system: VectorFieldSystem, target: TargetSpec, p0: Sequence[float],
                   steps: int) -> Tuple[np.ndarray, Optional[PhasePath]]:
    """Boundary mismatch of the forward trajectory from (x0, p0); a diverged start yields inf and no path"""
    p0 = np.asarray(p0, dtype=float)
    require_finite(p0, name='p0')
    start = CotangentPoint(x=system.start_limit, p=p0)
    try:
        path = flow(system, start, target.T, 'forward', steps, check_conservation=False)
    except DivergedFlowError as e:
        logger.debug(f"Start {p0} discarded: {e}")
        return np.full(system.d, np.inf), None
    return _residual(system, target, path.x[-1], path.p[-1]), path


def backward_shoot_residual(system: VectorFieldSystem, target: TargetSpec, z_T: Sequence[float],
                            q_T: Sequence[float], steps: int) -> Tuple[np.ndarray, Optional[PhasePath]]:
    """Mismatch x(0) - x0 of the backward trajectory from x_T = (a, z_T), p_T = (q_T, 0)"""
    d, l = system.d, system.l
    x_T = np.concatenate([target.a, np.asarray(z_T, dtype=float).reshape(d - l)])
    p_T = np.concatenate([np.asarray(q_T, dtype=float).reshape(l), np.zeros(d - l)])
    try:
        path = flow(system, CotangentPoint(x=x_T, p=p_T), target.T, 'backward', steps, check_conservation=False)
    except DivergedFlowError:
        return np.full(d, np.inf), None
    return path.x[0] - system.start_limit, path


def _residual(system, target, x_T, p_T):
    l = system.l
    return np.concatenate([x_T[..., :l] - target.a, p_T[..., l:]], axis=-1)


def _shoot_batch(system: VectorFieldSystem, target: TargetSpec, P: np.ndarray, steps: int,
                 with_jacobian: bool = True) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Residuals (n, d) and, when asked, their Jacobians in p0 (n, d, d) for a batch of starts"""
    d, l, n = system.d, system.l, P.shape[0]
    z0 = np.concatenate([np.broadcast_to(system.start_limit, (n, d)), P], axis=1)
    tangent = np.broadcast_to(seed_matrix(d, 'p'), (n, 2 * d, d)) if with_jacobian else None
    batch = integrate_batch(system, z0, target.T, steps, tangent=tangent)
    residual = _residual(system, target, batch.end[:, :d], batch.end[:, d:])
    residual[~batch.alive] = np.inf
    jacobian = None
    if with_jacobian:
        jacobian = np.concatenate([batch.tangent[:, :l, :], batch.tangent[:, d + l:, :]], axis=1)
        jacobian[~batch.alive] = np.nan
    return residual, jacobian


def newton_batch(system: VectorFieldSystem, target: TargetSpec, P0: np.ndarray,
                 steps: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Damped Newton on a batch of starts.

    Iterates on a grid coarsened by NEWTON_COARSEN down to NEWTON_COARSE_TOL,
    then polishes the survivors on the full grid. Returns final covectors, a
    converged mask and iteration counts.
    """
    P = np.array(P0, dtype=float)
    n = P.shape[0]
    coarse = even_steps(max(steps // NEWTON_COARSEN, 4 * MIN_STEPS), MIN_STEPS)
    iterations = np.zeros(n, dtype=int)
    if coarse < steps:
        near = _newton_stage(system, target, P, coarse, NEWTON_COARSE_TOL, NEWTON_MAX_ITER, iterations)
        rows = np.flatnonzero(near)
        converged = np.zeros(n, dtype=bool)
        if rows.size:
            polished = P[rows]
            converged[rows] = _newton_stage(system, target, polished, steps, TOL_BVP, NEWTON_POLISH_ITER,
                                            iterations, rows)
            P[rows] = polished
    else:
        converged = _newton_stage(system, target, P, steps, TOL_BVP, NEWTON_MAX_ITER, iterations)
    logger.debug(f"Newton batch: {int(converged.sum())}/{n} converged (coarse grid {coarse}, full {steps})")
    return P, converged, iterations


def _newton_stage(system: VectorFieldSystem, target: TargetSpec, P: np.ndarray, steps: int, tol: float,
                  max_iter: int, iterations: np.ndarray, index: Optional[np.ndarray] = None) -> np.ndarray:
    """Newton iterations updating P in place; returns the mask of rows within tol.

    Only unconverged rows are integrated. Trial points are checked with the
    residual alone and the variational flow runs once per iteration. Steps use
    the pseudo-inverse so rank-deficient Jacobians (rotational families) still
    make progress. Rows that diverge, fail the line search or stall are retired.
    """
    index = np.arange(P.shape[0]) if index is None else index
    R, _ = _shoot_batch(system, target, P, steps, with_jacobian=False)
    norms = np.max(np.abs(R), axis=1)
    failed = ~np.isfinite(norms)
    stalls = np.zeros(P.shape[0], dtype=int)

    with np.errstate(all='ignore'):
        for _ in range(max_iter):
            active = np.flatnonzero((norms > tol) & ~failed)
            if active.size == 0:
                break
            _, J = _shoot_batch(system, target, P[active], steps)
            step = -np.einsum('nij,nj->ni', np.linalg.pinv(J), R[active])
            cap = NEWTON_STEP_CAP * (1.0 + np.linalg.norm(P[active], axis=1))
            step *= np.minimum(1.0, cap / np.maximum(np.linalg.norm(step, axis=1), 1e-300))[:, None]
            current = np.linalg.norm(R[active], axis=1)
            alpha = np.ones(active.size)
            pending = np.isfinite(step).all(axis=1)
            failed[active[~pending]] = True

            for _ in range(NEWTON_MAX_HALVINGS + 1):
                rows = np.flatnonzero(pending)
                if rows.size == 0:
                    break
                trial = P[active[rows]] + alpha[rows, None] * step[rows]
                R_trial, _ = _shoot_batch(system, target, trial, steps, with_jacobian=False)
                trial_norm = np.linalg.norm(R_trial, axis=1)
                good = np.isfinite(trial_norm) & (
                    (trial_norm < (1.0 - 1e-4 * alpha[rows]) * current[rows])
                    | (np.max(np.abs(R_trial), axis=1) <= tol))
                accepted = active[rows[good]]
                P[accepted], R[accepted] = trial[good], R_trial[good]
                pending[rows[good]] = False
                alpha[rows[~good]] *= 0.5

            failed[active[pending]] = True
            iterations[index[active]] += 1
            new_norms = np.max(np.abs(R[active]), axis=1)
            slow = new_norms > NEWTON_STALL_RATIO * norms[active]
            stalls[active] = np.where(slow, stalls[active] + 1, 0)
            norms[active] = new_norms
            failed |= stalls >= NEWTON_STALL_LIMIT

    return norms <= tol


def solve_bvp(system: VectorFieldSystem, target: TargetSpec, guesses: Sequence[Sequence[float]],
              steps: int, jobs: Optional[int] = None) -> List[Minimizer]:
    """Newton from every guess; converged solutions deduplicated and sorted by energy then p0"""
    solutions, _ = solve_with_stats(system, target, guesses, steps, jobs)
    return solutions


def solve_with_stats(system: VectorFieldSystem, target: TargetSpec, guesses: Sequence[Sequence[float]],
                     steps: int, jobs: Optional[int] = None) -> Tuple[List[Minimizer], Dict[str, int]]:
    guesses = np.atleast_2d(np.asarray(guesses, dtype=float))
    if guesses.shape[0] == 0:
        raise ValueError("solve_bvp needs at least one guess")
    if guesses.shape[1] != system.d:
        raise ValueError(f"guesses must have {system.d} entries each")
    steps = even_steps(steps, MIN_STEPS)

    # Chunk size is fixed so results do not depend on the worker count
    chunks = chunked(np.arange(guesses.shape[0]), MULTISTART_CHUNK)
    results = map_ordered(lambda idx: newton_batch(system, target, guesses[idx], steps), chunks, jobs)
    P = np.concatenate([r[0] for r in results])
    converged = np.concatenate([r[1] for r in results])
    iterations = np.concatenate([r[2] for r in results])

    stats = {'starts': int(guesses.shape[0]), 'converged': int(converged.sum()),
             'diverged': int((~converged).sum()), 'duplicates': 0}
    if not converged.any():
        logger.info(f"No shooting start converged out of {guesses.shape[0]}")
        return [], stats

    candidates = _build_candidates(system, target, P[converged], iterations[converged], steps)
    candidates.sort(key=lambda c: (c.energy, tuple(c.p0)))
    # Close covectors, or covectors generating the same control, are one solution; keep the smallest
    unique: List[Minimizer] = []
    for candidate in candidates:
        match = next((k for k, kept in enumerate(unique) if _same_solution(candidate, kept)), None)
        if match is None:
            unique.append(candidate)
        elif np.linalg.norm(candidate.p0) < np.linalg.norm(unique[match].p0):
            unique[match] = candidate
    stats['duplicates'] = len(candidates) - len(unique)
    stats['converged'] = len(candidates)
    stats['diverged'] = stats['starts'] - len(candidates)
    logger.debug(f"Shooting stats: {stats}")
    return unique, stats


def _build_candidates(system, target, P, iterations, steps) -> List[Minimizer]:
    """Full paths, energies and refined residuals for converged covectors"""
    d, l, n = system.d, system.l, P.shape[0]
    z0 = np.concatenate([np.broadcast_to(system.start_limit, (n, d)), P], axis=1)
    batch = integrate_batch(system, z0, target.T, steps, keep_path=True)
    refined = integrate_batch(system, z0, target.T, 2 * steps)
    refined_residual = np.max(np.abs(_residual(system, target, refined.end[:, :d], refined.end[:, d:])), axis=1)

    candidates = []
    for k in range(n):
        if not batch.alive[k]:
            continue
        try:
            path = build_path(system, batch.trajectory[k], target.T)
        except AccuracyError as e:
            logger.warning(f"Discarding solution p0={P[k]}: {e}")
            continue
        residual = float(np.max(np.abs(_residual(system, target, path.x[-1], path.p[-1]))))
        if refined_residual[k] > 10 * TOL_BVP:
            logger.warning(f"Solution p0={P[k]} has residual {refined_residual[k]:.2e} at doubled steps")
        candidates.append(Minimizer(
            p0=P[k].copy(),
            z_T=path.x[-1, l:].copy(),
            q_T=path.p[-1, :l].copy(),
            path=path,
            energy=path.energy_direct,
            residual=residual,
            diagnostics={
                'newton_iterations': int(iterations[k]),
                'energy_invariant': energy_invariant(path),
                'conservation_error': path.conservation_error,
                'residual_doubled_steps': float(refined_residual[k]),
            },
        ))
    return candidates


def _same_solution(first: Minimizer, second: Minimizer) -> bool:
    if np.linalg.norm(first.p0 - second.p0) < TOL_DEDUP * (1.0 + np.linalg.norm(first.p0)):
        return True
    scale = 1.0 + float(np.max(np.abs(second.path.hdot)))
    return float(np.max(np.abs(first.path.hdot - second.path.hdot))) <= TOL_DEDUP * scale
