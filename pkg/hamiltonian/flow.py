import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from config.settings import MIN_STEPS, OVERFLOW_GUARD, TOL_CONSERVE
from hamiltonian.core import CotangentPoint, controls_batch, hamiltonian_batch, rhs_and_jacobian_batch, rhs_batch
from model.system import VectorFieldSystem
from utils.errors import AccuracyError, DivergedFlowError
from utils.helpers import even_steps, simpson_integral, write_csv

logger = logging.getLogger(__name__)

FORWARD = 'forward'
BACKWARD = 'backward'


@dataclass(frozen=True, eq=False)
class PhasePath:
    """A discretized Hamiltonian trajectory on a uniform grid from 0 to T"""
    T: float
    grid: np.ndarray
    x: np.ndarray
    p: np.ndarray
    hdot: np.ndarray
    drift_pairing: np.ndarray
    energy_direct: float
    hamiltonian_value: float
    conservation_error: float

    @property
    def steps(self) -> int:
        return len(self.grid) - 1

    @property
    def states(self) -> List[CotangentPoint]:
        return [CotangentPoint(x=xk, p=pk) for xk, pk in zip(self.x, self.p)]

    @property
    def initial(self) -> CotangentPoint:
        return CotangentPoint(x=self.x[0], p=self.p[0])

    @property
    def terminal(self) -> CotangentPoint:
        return CotangentPoint(x=self.x[-1], p=self.p[-1])


@dataclass(frozen=True, eq=False)
class FlowBatch:
    end: np.ndarray
    tangent: Optional[np.ndarray]
    alive: np.ndarray
    trajectory: Optional[np.ndarray]


def integrate_batch(system: VectorFieldSystem, z0: np.ndarray, T: float, steps: int,
                    backward: bool = False, tangent: Optional[np.ndarray] = None,
                    keep_path: bool = False) -> FlowBatch:
    """RK4 for the Hamiltonian flow of a batch of phase points (n, 2d).

    With `tangent` (n, 2d, k) the variational equations are carried along.
    Rows leaving the overflow guard are frozen at NaN and flagged dead.
    Stored trajectories are returned in increasing time order.
    """
    dt = (-T if backward else T) / steps
    z = np.array(z0, dtype=float)
    y = None if tangent is None else np.array(tangent, dtype=float)
    alive = np.ones(z.shape[0], dtype=bool)
    path = [z.copy()] if keep_path else None

    with np.errstate(all='ignore'):
        for _ in range(steps):
            if y is None:
                z = _rk4_step(system, z, dt)
            else:
                z, y = _rk4_variational_step(system, z, y, dt)
            bad = ~np.all(np.isfinite(z), axis=-1) | (np.max(np.abs(z), axis=-1) > OVERFLOW_GUARD)
            if y is not None:
                bad |= ~np.all(np.isfinite(y), axis=(-1, -2))
            if bad.any():
                alive &= ~bad
                z[bad] = np.nan
                if y is not None:
                    y[bad] = np.nan
            if keep_path:
                path.append(z.copy())

    trajectory = None
    if keep_path:
        trajectory = np.stack(path, axis=1)
        if backward:
            trajectory = trajectory[:, ::-1, :]
    return FlowBatch(end=z, tangent=y, alive=alive, trajectory=trajectory)


def _rk4_step(system, z, dt):
    k1 = rhs_batch(system, z)
    k2 = rhs_batch(system, z + 0.5 * dt * k1)
    k3 = rhs_batch(system, z + 0.5 * dt * k2)
    k4 = rhs_batch(system, z + dt * k3)
    return z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_variational_step(system, z, y, dt):
    def derivative(zs, ys):
        rhs, jacobian = rhs_and_jacobian_batch(system, zs)
        return rhs, jacobian @ ys

    k1z, k1y = derivative(z, y)
    k2z, k2y = derivative(z + 0.5 * dt * k1z, y + 0.5 * dt * k1y)
    k3z, k3y = derivative(z + 0.5 * dt * k2z, y + 0.5 * dt * k2y)
    k4z, k4y = derivative(z + dt * k3z, y + dt * k3y)
    return (z + dt / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z),
            y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y))


def flow(system: VectorFieldSystem, endpoint: CotangentPoint, T: float, direction: str = FORWARD,
         steps: int = 512, check_conservation: bool = True) -> PhasePath:
    """Integrate the Hamiltonian flow from one endpoint of [0, T] to the other"""
    steps = even_steps(steps, MIN_STEPS)
    backward = _is_backward(direction)
    batch = integrate_batch(system, endpoint.as_array()[None, :], T, steps, backward=backward, keep_path=True)
    if not batch.alive[0]:
        raise DivergedFlowError(f"{direction} flow over T={T} left the overflow guard {OVERFLOW_GUARD:g}")
    return build_path(system, batch.trajectory[0], T, reference=-1 if backward else 0,
                      check_conservation=check_conservation)


def build_path(system: VectorFieldSystem, trajectory: np.ndarray, T: float, reference: int = 0,
               check_conservation: bool = True) -> PhasePath:
    """PhasePath from a stored trajectory (N+1, 2d); `reference` picks the node defining C"""
    d = system.d
    grid = np.linspace(0.0, T, trajectory.shape[0])
    hdot = controls_batch(system, trajectory)
    energies = hamiltonian_batch(system, trajectory)
    pairing = np.einsum('kd,kd->k', system.sigma0(trajectory[:, :d]), trajectory[:, d:])
    value = float(energies[reference])
    error = float(np.max(np.abs(energies - value)))
    if check_conservation:
        _audit_conservation(error, value)
    return PhasePath(
        T=float(T), grid=grid, x=trajectory[:, :d].copy(), p=trajectory[:, d:].copy(), hdot=hdot,
        drift_pairing=pairing,
        energy_direct=float(0.5 * simpson_integral(np.sum(hdot ** 2, axis=-1), grid)),
        hamiltonian_value=value, conservation_error=error,
    )


def _audit_conservation(error: float, value: float) -> None:
    tol = TOL_CONSERVE * (1.0 + abs(value))
    if error > 100 * tol:
        raise AccuracyError(f"Hamiltonian drifted by {error:.3e} (tolerance {tol:.1e}); increase steps")
    if error > tol:
        logger.warning(f"Hamiltonian drift {error:.3e} exceeds tolerance {tol:.1e}")


def flow_jacobian(system: VectorFieldSystem, endpoint: CotangentPoint, T: float, direction: str = FORWARD,
                  steps: int = 512, seed_block: Union[str, np.ndarray] = 'p') -> np.ndarray:
    """Sensitivity (2d x k) of the far endpoint to the seeded perturbations of the near one"""
    steps = even_steps(steps, MIN_STEPS)
    seed = seed_matrix(system.d, seed_block)
    batch = integrate_batch(system, endpoint.as_array()[None, :], T, steps,
                            backward=_is_backward(direction), tangent=seed[None, :, :])
    if not batch.alive[0]:
        raise DivergedFlowError(f"variational {direction} flow over T={T} diverged")
    return batch.tangent[0]


def seed_matrix(d: int, seed_block: Union[str, np.ndarray]) -> np.ndarray:
    eye = np.eye(2 * d)
    if isinstance(seed_block, str):
        blocks = {'x': eye[:, :d], 'p': eye[:, d:], 'all': eye}
        if seed_block not in blocks:
            raise ValueError(f"unknown seed block {seed_block!r}; use x, p, all or a matrix")
        return blocks[seed_block]
    seed = np.asarray(seed_block, dtype=float)
    if seed.ndim != 2 or seed.shape[0] != 2 * d:
        raise ValueError(f"seed matrix must have {2 * d} rows")
    return seed


def energy_direct(path: PhasePath) -> float:
    """1/2 of the integral of |hdot|^2"""
    return float(0.5 * simpson_integral(np.sum(path.hdot ** 2, axis=-1), path.grid))


def energy_invariant(path: PhasePath) -> float:
    """T*C minus the integral of <sigma0(x), p>, since 1/2 |hdot|^2 = H - <p, sigma0>"""
    return float(path.T * path.hamiltonian_value - simpson_integral(path.drift_pairing, path.grid))


def path_to_csv(path: PhasePath, filename: str) -> None:
    d, m = path.x.shape[1], path.hdot.shape[1]
    header = (['t'] + [f'x{k + 1}' for k in range(d)] + [f'p{k + 1}' for k in range(d)]
              + [f'hdot{k + 1}' for k in range(m)])
    rows = (np.concatenate([[t], xk, pk, hk]) for t, xk, pk, hk in zip(path.grid, path.x, path.p, path.hdot))
    write_csv(filename, header, rows)


def _is_backward(direction: str) -> bool:
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be {FORWARD!r} or {BACKWARD!r}, got {direction!r}")
    return direction == BACKWARD

