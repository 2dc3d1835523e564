import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from bvp.models import Minimizer
from hamiltonian.flow import integrate_batch
from model.system import VectorFieldSystem
from utils.errors import DivergedFlowError

logger = logging.getLogger(__name__)


def focal_seed(d: int, l: int) -> np.ndarray:
    """Columns perturbing the free terminal coordinates z, then the covector slots q"""
    eye = np.eye(2 * d)
    return np.concatenate([eye[:, l:d], eye[:, d:d + l]], axis=1)


def nonfocality_batch(system: VectorFieldSystem, minimizers: Sequence[Minimizer],
                      steps: Optional[int] = None) -> np.ndarray:
    """d x d blocks of the backward-projected flow derivative, shape (n, d, d)"""
    d, l = system.d, system.l
    T = minimizers[0].path.T
    steps = steps or minimizers[0].path.steps
    terminals = np.stack([np.concatenate([m.path.x[-1], m.path.p[-1]]) for m in minimizers])
    seed = np.broadcast_to(focal_seed(d, l), (len(minimizers), 2 * d, d))
    batch = integrate_batch(system, terminals, T, steps, backward=True, tangent=seed)
    if not batch.alive.all():
        raise DivergedFlowError("backward variational flow from the terminal covector diverged")
    return batch.tangent[:, :d, :]


def nonfocality_matrix(system: VectorFieldSystem, minimizer: Minimizer,
                       steps: Optional[int] = None) -> Tuple[np.ndarray, float]:
    M = nonfocality_batch(system, [minimizer], steps)[0]
    return M, float(np.linalg.det(M))


def hadamard_ratio(M: np.ndarray) -> float:
    """|det M| over the product of row norms; lies in [0, 1]"""
    norms = np.prod(np.linalg.norm(M, axis=1))
    if norms == 0.0:
        return 0.0
    return float(abs(np.linalg.det(M)) / norms)
