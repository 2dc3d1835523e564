"""Discretized second variation of the energy on the constraint tangent space.

Controls are piecewise constant on `grid_size` intervals. The Lagrangian
1/2 |hdot|^2 - <q_T, Pi_l x_T(u) - a> is differentiated by finite differences
of the endpoint map, projected onto ker D(Pi_l x_T) and normalized by the
discrete H-norm, so an unperturbed energy gives eigenvalue 1.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from bvp.models import Minimizer
from config.settings import HESSIAN_FD_STEP, HESSIAN_GRID, HESSIAN_SUBSTEPS
from model.system import VectorFieldSystem
from utils.errors import HessianOracleError
from utils.helpers import numerical_rank

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HessianOracleResult:
    min_eig: float
    direction: np.ndarray
    eigenvalues: np.ndarray
    constraint_rank: int


def interval_controls(minimizer: Minimizer, grid_size: int) -> np.ndarray:
    """Average of hdot over each of grid_size equal intervals, shape (grid_size, m)"""
    path = minimizer.path
    integral = cumulative_simpson(path.hdot, x=path.grid, axis=0, initial=0.0)
    nodes = np.linspace(0.0, path.T, grid_size + 1)
    sampled = np.stack([np.interp(nodes, path.grid, integral[:, i]) for i in range(integral.shape[1])], axis=1)
    return np.diff(sampled, axis=0) / (path.T / grid_size)


def endpoint_map(system: VectorFieldSystem, controls: np.ndarray, T: float, substeps: int) -> np.ndarray:
    """x_T for a batch of piecewise-constant controls (B, grid, m), RK4 within each interval"""
    batch, grid, _ = controls.shape
    dt = T / (grid * substeps)
    x = np.broadcast_to(system.start_limit, (batch, system.d)).copy()

    def velocity(state, u):
        fields = system.fields_at(state)
        return fields[:, 0, :] + np.einsum('bi,bid->bd', u, fields[:, 1:, :])

    for j in range(grid):
        u = controls[:, j, :]
        for _ in range(substeps):
            k1 = velocity(x, u)
            k2 = velocity(x + 0.5 * dt * k1, u)
            k3 = velocity(x + 0.5 * dt * k2, u)
            k4 = velocity(x + dt * k3, u)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def hessian_oracle(system: VectorFieldSystem, minimizer: Minimizer, grid_size: int = HESSIAN_GRID,
                   substeps: int = HESSIAN_SUBSTEPS, fd_step: float = HESSIAN_FD_STEP) -> HessianOracleResult:
    if grid_size < 16:
        raise ValueError(f"grid_size must be >= 16, got {grid_size}")
    T, l, m = minimizer.path.T, system.l, system.m
    dt = T / grid_size
    base = interval_controls(minimizer, grid_size).ravel()
    n = base.size
    h = fd_step * max(1.0, float(np.max(np.abs(base))))
    q = minimizer.q_T

    def projected(flat: np.ndarray) -> np.ndarray:
        return endpoint_map(system, flat.reshape(-1, grid_size, m), T, substeps)[:, :l]

    # Step 1: constraint Jacobian and diagonal second differences
    shifts = h * np.eye(n)
    centre = projected(base[None, :])[0]
    plus, minus = projected(base + shifts), projected(base - shifts)
    constraint = ((plus - minus) / (2 * h)).T
    hessian = np.diag((plus @ q - 2 * centre @ q + minus @ q) / h ** 2)

    # Step 2: mixed second differences of <q, Pi_l x_T>
    rows, cols = np.triu_indices(n, 1)
    if rows.size:
        pairs = []
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            shifted = np.broadcast_to(base, (rows.size, n)).copy()
            shifted[np.arange(rows.size), rows] += si * h
            shifted[np.arange(rows.size), cols] += sj * h
            pairs.append(projected(shifted) @ q)
        mixed = (pairs[0] - pairs[1] - pairs[2] + pairs[3]) / (4 * h ** 2)
        hessian[rows, cols] = mixed
        hessian[cols, rows] = mixed

    # Step 3: restrict to the tangent space of the constraint
    rank = numerical_rank(constraint, 1e-8)
    if rank < l:
        raise HessianOracleError(f"constraint Jacobian has rank {rank} < l={l}; the endpoint map is degenerate here")
    _, _, vt = np.linalg.svd(constraint)
    basis = vt[rank:].T
    lagrangian = np.eye(n) - hessian / dt
    eigenvalues, vectors = np.linalg.eigh(basis.T @ lagrangian @ basis)

    direction = (basis @ vectors[:, 0]).reshape(grid_size, m)
    if direction.flat[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    logger.debug(f"Hessian oracle on {n} control coordinates: min eigenvalue {eigenvalues[0]:.6g}")
    return HessianOracleResult(min_eig=float(eigenvalues[0]), direction=direction,
                               eigenvalues=eigenvalues, constraint_rank=rank)
