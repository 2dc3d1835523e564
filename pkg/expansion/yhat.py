import logging
from typing import Optional

import numpy as np

from bvp.models import Minimizer
from model.system import VectorFieldSystem
from utils.errors import GridMismatchError

logger = logging.getLogger(__name__)


def yhat_terminal(system: VectorFieldSystem, minimizer: Minimizer, steps: Optional[int] = None) -> np.ndarray:
    """Pi_l of the first-order response X_hat_T to the eps-perturbation of drift and start.

    dX_hat = (D sigma0(phi) + sum_i D sigma_i(phi) hdot_i) X_hat dt + d_eps b(0, phi) dt,
    X_hat_0 = x_hat_0, integrated by RK4 with stride two on the minimizer's grid so
    odd nodes serve as midpoints.
    """
    path = minimizer.path
    if steps is not None and steps != path.steps:
        raise GridMismatchError(f"requested {steps} steps but the minimizer path has {path.steps}")
    if path.steps % 2:
        raise GridMismatchError("the minimizer grid needs an even number of intervals")

    jacs = system.jacobians_at(path.x)
    coefficient = jacs[:, 0] + np.einsum('ki,kijl->kjl', path.hdot, jacs[:, 1:])
    source = system.drift_eps_deriv(path.x)

    def slope(k, X):
        return coefficient[k] @ X + source[k]

    X = np.array(system.start_deriv, dtype=float)
    for k in range(0, path.steps, 2):
        h = path.grid[k + 2] - path.grid[k]
        k1 = slope(k, X)
        k2 = slope(k + 1, X + 0.5 * h * k1)
        k3 = slope(k + 1, X + 0.5 * h * k2)
        k4 = slope(k + 2, X + h * k3)
        X = X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return X[:system.l]
