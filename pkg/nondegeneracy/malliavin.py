"""Deterministic Malliavin covariance C(h) and the ellipticity shortcut."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from bvp.models import Minimizer
from config.settings import TOL_SV, TOL_SYMMETRY
from hamiltonian.core import controls_batch, rhs_batch
from hamiltonian.flow import PhasePath
from model.system import VectorFieldSystem
from utils.errors import AsymmetricMatrixError, DivergedFlowError
from utils.helpers import numerical_rank, simpson_integral

logger = logging.getLogger(__name__)


def linearized_drift(system: VectorFieldSystem, z: np.ndarray) -> np.ndarray:
    """D sigma0(x) + sum_i D sigma_i(x) hdot_i, the linearization of the controlled ODE"""
    jacs = system.jacobians_at(z[..., :system.d])
    hdot = controls_batch(system, z)
    return jacs[..., 0, :, :] + np.einsum('...i,...ijk->...jk', hdot, jacs[..., 1:, :, :])


def tangent_flow_backward(system: VectorFieldSystem, terminals: np.ndarray, T: float,
                          steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """Phi_{T<-t} at every grid node for a batch of terminal phase points (n, 2d).

    Re-integrates the Hamiltonian flow from T down to 0 together with
    d/dt Psi = -Psi A(t), Psi(T) = I. Returns (Psi (n, N+1, d, d), x (n, N+1, d))
    in increasing time order.
    """
    d = system.d
    n = terminals.shape[0]
    dt = -T / steps
    z = np.array(terminals, dtype=float)
    psi = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    psis, states = [psi.copy()], [z[:, :d].copy()]

    def derivative(zs, ps):
        return rhs_batch(system, zs), -ps @ linearized_drift(system, zs)

    for _ in range(steps):
        k1z, k1p = derivative(z, psi)
        k2z, k2p = derivative(z + 0.5 * dt * k1z, psi + 0.5 * dt * k1p)
        k3z, k3p = derivative(z + 0.5 * dt * k2z, psi + 0.5 * dt * k2p)
        k4z, k4p = derivative(z + dt * k3z, psi + dt * k3p)
        z = z + dt / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        psi = psi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        psis.append(psi.copy())
        states.append(z[:, :d].copy())

    psis = np.stack(psis[::-1], axis=1)
    states = np.stack(states[::-1], axis=1)
    if not (np.all(np.isfinite(psis)) and np.all(np.isfinite(states))):
        raise DivergedFlowError("tangent flow along the minimizer diverged")
    return psis, states


def malliavin_batch(system: VectorFieldSystem, minimizers: Sequence[Minimizer],
                    steps: Optional[int] = None) -> np.ndarray:
    """C(h) for several minimizers sharing a horizon, shape (n, d, d)"""
    T = minimizers[0].path.T
    steps = steps or minimizers[0].path.steps
    terminals = np.stack([np.concatenate([m.path.x[-1], m.path.p[-1]]) for m in minimizers])
    psis, states = tangent_flow_backward(system, terminals, T, steps)
    sig = system.fields_at(states)[..., 1:, :]
    diffusion = np.einsum('nkid,nkie->nkde', sig, sig)
    integrand = psis @ diffusion @ np.swapaxes(psis, -1, -2)
    grid = np.linspace(0.0, T, steps + 1)
    covariance = simpson_integral(integrand, grid, axis=1)
    return 0.5 * (covariance + np.swapaxes(covariance, -1, -2))


def malliavin_covariance(system: VectorFieldSystem, minimizer: Minimizer, steps: Optional[int] = None) -> np.ndarray:
    return malliavin_batch(system, [minimizer], steps)[0]


def check_invertibility(C: np.ndarray, scale: Optional[float] = None, tol: float = TOL_SV) -> Tuple[bool, float]:
    """SVD test sigma_min > tol * scale, scale defaulting to sigma_max"""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if np.max(np.abs(C - C.T)) > TOL_SYMMETRY * max(1.0, np.max(np.abs(C))):
        raise AsymmetricMatrixError("covariance matrix is not symmetric")
    singular = np.linalg.svd(C, compute_uv=False)
    smallest = float(singular[-1])
    reference = float(singular[0]) if scale is None else float(scale)
    return bool(reference > 0.0 and smallest > tol * reference), smallest


def ellipticity_witness(system: VectorFieldSystem, path: PhasePath) -> Optional[float]:
    """First grid time where sigma_1..sigma_m span R^d, or None"""
    if system.m < system.d:
        return None
    sig = system.fields_at(path.x)[:, 1:, :]
    for t, block in zip(path.grid, sig):
        if numerical_rank(block, TOL_SV) == system.d:
            return float(t)
    return None
