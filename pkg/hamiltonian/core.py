"""H(x, p) = <p, sigma0(x)> + 1/2 sum_i <p, sigma_i(x)>^2 and its derivatives.

Internal functions work on phase arrays z = (x, p) shaped (..., 2d).
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from model.system import VectorFieldSystem
from utils.helpers import require_finite

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CotangentPoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x', np.asarray(self.x, dtype=float))
        object.__setattr__(self, 'p', np.asarray(self.p, dtype=float))
        require_finite(self.x, self.p, name='cotangent point')

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @classmethod
    def from_array(cls, z: np.ndarray) -> 'CotangentPoint':
        d = len(z) // 2
        return cls(x=z[:d], p=z[d:])


def eval_hamiltonian(system: VectorFieldSystem, q: CotangentPoint) -> float:
    return float(hamiltonian_batch(system, q.as_array()))


def hamiltonian_rhs(system: VectorFieldSystem, q: CotangentPoint) -> np.ndarray:
    """(dH/dp, -dH/dx) at a cotangent point"""
    return rhs_batch(system, q.as_array())


def hamiltonian_batch(system: VectorFieldSystem, z: np.ndarray) -> np.ndarray:
    d = system.d
    x, p = z[..., :d], z[..., d:]
    fields = system.fields_at(x)
    drift = np.einsum('...d,...d->...', fields[..., 0, :], p)
    controls = np.einsum('...id,...d->...i', fields[..., 1:, :], p)
    return drift + 0.5 * np.sum(controls ** 2, axis=-1)


def controls_batch(system: VectorFieldSystem, z: np.ndarray) -> np.ndarray:
    """hdot_i = <sigma_i(x), p>, shape (..., m)"""
    d = system.d
    return np.einsum('...id,...d->...i', system.fields_at(z[..., :d])[..., 1:, :], z[..., d:])


def rhs_batch(system: VectorFieldSystem, z: np.ndarray) -> np.ndarray:
    d = system.d
    x, p = z[..., :d], z[..., d:]
    fields = system.fields_at(x)
    jacs = system.jacobians_at(x)
    sig, jsig = fields[..., 1:, :], jacs[..., 1:, :, :]
    u = np.einsum('...id,...d->...i', sig, p)
    dh_dp = fields[..., 0, :] + np.einsum('...i,...id->...d', u, sig)
    jtp = np.einsum('...ikj,...k->...ij', jsig, p)
    dh_dx = np.einsum('...kj,...k->...j', jacs[..., 0, :, :], p) + np.einsum('...i,...ij->...j', u, jtp)
    return np.concatenate([dh_dp, -dh_dx], axis=-1)


def rhs_jacobian_batch(system: VectorFieldSystem, z: np.ndarray) -> np.ndarray:
    """Derivative of rhs_batch with respect to z, shape (..., 2d, 2d)"""
    return rhs_and_jacobian_batch(system, z)[1]


def rhs_and_jacobian_batch(system: VectorFieldSystem, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """rhs_batch and rhs_jacobian_batch from a single evaluation of the fields"""
    d = system.d
    x, p = z[..., :d], z[..., d:]
    fields = system.fields_at(x)
    jacs = system.jacobians_at(x)
    sig, j0, jsig = fields[..., 1:, :], jacs[..., 0, :, :], jacs[..., 1:, :, :]
    u = np.einsum('...id,...d->...i', sig, p)
    jtp = np.einsum('...ikj,...k->...ij', jsig, p)
    dh_dp = fields[..., 0, :] + np.einsum('...i,...id->...d', u, sig)
    dh_dx = np.einsum('...kj,...k->...j', j0, p) + np.einsum('...i,...ij->...j', u, jtp)

    xdot_x = j0 + np.einsum('...id,...ij->...dj', sig, jtp) + np.einsum('...i,...idj->...dj', u, jsig)
    xdot_p = np.einsum('...id,...ie->...de', sig, sig)
    hx_x = np.einsum('...ij,...il->...jl', jtp, jtp)
    hx_p = (np.swapaxes(j0, -1, -2) + np.einsum('...ij,...il->...jl', jtp, sig)
            + np.einsum('...i,...ilj->...jl', u, jsig))

    hess = system.hessians_at(x)
    if hess is not None:
        hx_x = hx_x + np.einsum('...k,...klj->...jl', p, hess[..., 0, :, :, :])
        hx_x = hx_x + np.einsum('...i,...k,...iklj->...jl', u, p, hess[..., 1:, :, :, :])

    top = np.concatenate([xdot_x, xdot_p], axis=-1)
    bottom = np.concatenate([-hx_x, -hx_p], axis=-1)
    return np.concatenate([dh_dp, -dh_dx], axis=-1), np.concatenate([top, bottom], axis=-2)
