import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from model.fields import VectorField, permute_field, zero_field
from utils.errors import FieldIndexError, ModelConfigError
from utils.helpers import require_finite

logger = logging.getLogger(__name__)

DriftFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VectorFieldSystem:
    """An epsilon-family of SDEs dX = b(eps, X) dt + eps sum_i sigma_i(X) dW_i.

    State coordinates are internal: the projected block occupies the first
    l entries. `coordinate_order[k]` is the original index of internal
    coordinate k.
    """
    name: str
    d: int
    m: int
    l: int
    fields: Tuple[VectorField, ...]
    drift_eps: VectorField
    drift_family: DriftFn
    x0: np.ndarray
    x0_hat: np.ndarray
    symbols: Tuple[sp.Symbol, ...]
    coordinate_order: Tuple[int, ...]
    params: Dict[str, float] = field(default_factory=dict)
    start_family: Optional[Callable[[float], np.ndarray]] = None

    # Field accessors

    def sigma(self, i: int) -> VectorField:
        return self.fields[i]

    def sigma0(self, x: np.ndarray) -> np.ndarray:
        return self.fields[0].value(x)

    def drift(self, eps: float, x: np.ndarray) -> np.ndarray:
        return self.drift_family(eps, x)

    def drift_eps_deriv(self, x: np.ndarray) -> np.ndarray:
        return self.drift_eps.value(x)

    def start(self, eps: float) -> np.ndarray:
        if self.start_family is not None:
            return self.start_family(eps)
        return self.x0 + eps * self.x0_hat

    @property
    def start_limit(self) -> np.ndarray:
        return self.x0

    @property
    def start_deriv(self) -> np.ndarray:
        return self.x0_hat

    @property
    def drift_free(self) -> bool:
        return self.fields[0].is_zero

    @property
    def curved(self) -> bool:
        return any(f.hessian is not None for f in self.fields)

    # Batched evaluation, shapes (..., m+1, d), (..., m+1, d, d), (..., m+1, d, d, d)

    def fields_at(self, x: np.ndarray) -> np.ndarray:
        return np.stack([f.value(x) for f in self.fields], axis=-2)

    def jacobians_at(self, x: np.ndarray) -> np.ndarray:
        return np.stack([f.jacobian(x) for f in self.fields], axis=-3)

    def hessians_at(self, x: np.ndarray) -> Optional[np.ndarray]:
        if not self.curved:
            return None
        shape = np.shape(x)[:-1] + (self.d, self.d, self.d)
        return np.stack([f.hessian(x) if f.hessian is not None else np.zeros(shape)
                         for f in self.fields], axis=-4)

    def short_time_scaled(self) -> 'VectorFieldSystem':
        """Brownian rescaling t -> eps^2 t on the unit horizon: drift eps^2 b, fixed start"""
        zero = zero_field(self.symbols)
        sigma0 = self.fields[0].value
        return replace(
            self,
            name=f'{self.name}[short-time]',
            fields=(zero,) + tuple(self.fields[1:]),
            drift_eps=zero,
            drift_family=lambda eps, x: eps ** 2 * sigma0(x),
            x0_hat=np.zeros(self.d),
            start_family=None,
        )


def eval_field(system: VectorFieldSystem, i: int, x) -> np.ndarray:
    """Value of field i at x (index 0 is the drift limit sigma0)"""
    _check_index(system, i)
    x = np.asarray(x, dtype=float)
    require_finite(x, name='x')
    return system.fields[i].value(x)


def eval_jacobian(system: VectorFieldSystem, i: int, x) -> np.ndarray:
    """Jacobian of field i at x"""
    _check_index(system, i)
    x = np.asarray(x, dtype=float)
    require_finite(x, name='x')
    return system.fields[i].jacobian(x)


def _check_index(system: VectorFieldSystem, i: int) -> None:
    if not 0 <= i <= system.m:
        raise FieldIndexError(f"field index {i} outside 0..{system.m}")


def projection_order(mask: Sequence[int]) -> Tuple[int, ...]:
    """Masked coordinates first, then the rest, each in original order"""
    mask = [int(bool(v)) for v in mask]
    return tuple([k for k, v in enumerate(mask) if v] + [k for k, v in enumerate(mask) if not v])


def assemble_system(name: str, fields: Sequence[VectorField], drift_eps: VectorField,
                    drift_family: DriftFn, x0: Sequence[float], x0_hat: Sequence[float],
                    symbols: Sequence[sp.Symbol], mask: Sequence[int],
                    params: Optional[Dict[str, float]] = None) -> VectorFieldSystem:
    """Build a system from fields in original coordinates and a projection mask"""
    d = len(symbols)
    if len(mask) != d:
        raise ModelConfigError(f"projection mask has length {len(mask)}, expected {d}")
    l = int(sum(bool(v) for v in mask))
    if not 1 <= l <= d:
        raise ModelConfigError(f"projection dimension l={l} must satisfy 1 <= l <= d={d}")
    for f in list(fields) + [drift_eps]:
        if f.dim != d:
            raise ModelConfigError(f"field has {f.dim} components, expected {d}")

    order = projection_order(mask)
    inverse = np.argsort(order)
    x0 = np.asarray(x0, dtype=float)
    x0_hat = np.asarray(x0_hat, dtype=float)
    if x0.shape != (d,) or x0_hat.shape != (d,):
        raise ModelConfigError(f"start vectors must have length {d}")

    def permuted_drift(eps, u):
        u = np.asarray(u, dtype=float)
        return drift_family(eps, u[..., inverse])[..., list(order)]

    system = VectorFieldSystem(
        name=name,
        d=d,
        m=len(fields) - 1,
        l=l,
        fields=tuple(permute_field(f, order, symbols) for f in fields),
        drift_eps=permute_field(drift_eps, order, symbols),
        drift_family=permuted_drift,
        x0=x0[list(order)],
        x0_hat=x0_hat[list(order)],
        symbols=tuple(symbols),
        coordinate_order=order,
        params=dict(params or {}),
    )
    logger.debug(f"Assembled system {name}: d={d}, m={system.m}, l={l}, order={order}")
    return system
