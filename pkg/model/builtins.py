"""Builtin models with hand-coded fields and analytic Jacobians."""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
import sympy as sp

from model.fields import VectorField, make_symbols, zero_field
from model.system import VectorFieldSystem, assemble_system
from utils.errors import ModelConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuiltinModel:
    name: str
    defaults: Dict[str, float]
    builder: Callable[..., VectorFieldSystem] = field(repr=False)

    def build(self, params: Dict[str, object]) -> VectorFieldSystem:
        unknown = set(params) - set(self.defaults) - {'projection'}
        if unknown:
            raise ModelConfigError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        resolved = dict(self.defaults)
        projection = params.get('projection')
        for key, value in params.items():
            if key != 'projection':
                try:
                    resolved[key] = float(value)
                except (TypeError, ValueError):
                    raise ModelConfigError(f"parameter {key} must be a number, got {value!r}")
        return self.builder(resolved, projection)


def _constant(vector: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    vector = np.asarray(vector, dtype=float)
    return lambda x: np.broadcast_to(vector, np.shape(x)[:-1] + vector.shape).copy()


def _constant_jacobian(matrix: Sequence[Sequence[float]]) -> Callable[[np.ndarray], np.ndarray]:
    matrix = np.asarray(matrix, dtype=float)
    return lambda x: np.broadcast_to(matrix, np.shape(x)[:-1] + matrix.shape).copy()


def _build_ou1d(p: Dict[str, float], projection) -> VectorFieldSystem:
    alpha, beta, gamma = p['alpha'], p['beta'], p['gamma']
    symbols = make_symbols(1)
    (y,) = symbols
    sigma0 = VectorField(
        exprs=(sp.Float(beta) * y,),
        value=lambda x: beta * np.asarray(x, dtype=float),
        jacobian=_constant_jacobian([[beta]]),
    )
    sigma1 = VectorField(exprs=(sp.Float(gamma),), value=_constant([gamma]), jacobian=_constant_jacobian([[0.0]]))
    drift_eps = VectorField(exprs=(sp.Float(alpha),), value=_constant([alpha]), jacobian=_constant_jacobian([[0.0]]))
    return assemble_system(
        'ou1d', [sigma0, sigma1], drift_eps,
        lambda eps, x: alpha * eps + beta * np.asarray(x, dtype=float),
        [0.0], [p['yhat0']], symbols, _mask_from(projection, 'y', [1]), p,
    )


def _build_langevin(p: Dict[str, float], projection) -> VectorFieldSystem:
    symbols = make_symbols(2)
    y, z = symbols

    def sigma0_value(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], np.zeros_like(x[..., 1])], axis=-1)

    sigma0 = VectorField(exprs=(z, sp.Integer(0)), value=sigma0_value, jacobian=_constant_jacobian([[0, 1], [0, 0]]))
    sigma1 = VectorField(exprs=(sp.Integer(0), sp.Integer(1)), value=_constant([0, 1]),
                         jacobian=_constant_jacobian([[0, 0], [0, 0]]))
    return assemble_system(
        'langevin', [sigma0, sigma1], zero_field(symbols),
        lambda eps, x: sigma0_value(x),
        [0.0, 0.0], [p['yhat0'], p['zhat0']], symbols, _mask_from(projection, 'yz', [1, 0]), p,
    )


def _build_flatmetric(p: Dict[str, float], projection) -> VectorFieldSystem:
    theta = p['theta']
    if not 0.0 <= theta <= 1.0:
        raise ModelConfigError(f"theta must lie in [0, 1], got {theta}")
    symbols = make_symbols(2)
    y, z = symbols

    def sigma2_value(x):
        x = np.asarray(x, dtype=float)
        return np.stack([theta * x[..., 1], np.ones_like(x[..., 1])], axis=-1)

    sigma1 = VectorField(exprs=(sp.Integer(1), sp.Integer(0)), value=_constant([1, 0]),
                         jacobian=_constant_jacobian([[0, 0], [0, 0]]))
    sigma2 = VectorField(exprs=(sp.Float(theta) * z, sp.Integer(1)), value=sigma2_value,
                         jacobian=_constant_jacobian([[0, theta], [0, 0]]))
    zero = zero_field(symbols)
    return assemble_system(
        'flatmetric', [zero, sigma1, sigma2], zero,
        lambda eps, x: np.zeros(np.shape(x)),
        [0.0, 0.0], [0.0, 0.0], symbols, _mask_from(projection, 'yz', [1, 0]), p,
    )


def _build_heisenberg(p: Dict[str, float], projection) -> VectorFieldSystem:
    symbols = make_symbols(3)
    x_, y_, z_ = symbols

    def sigma1_value(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x[..., 0]), np.zeros_like(x[..., 0]), -0.5 * x[..., 1]], axis=-1)

    def sigma2_value(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.zeros_like(x[..., 0]), np.ones_like(x[..., 0]), 0.5 * x[..., 0]], axis=-1)

    half = sp.Rational(1, 2)
    sigma1 = VectorField(exprs=(sp.Integer(1), sp.Integer(0), -half * y_), value=sigma1_value,
                         jacobian=_constant_jacobian([[0, 0, 0], [0, 0, 0], [0, -0.5, 0]]))
    sigma2 = VectorField(exprs=(sp.Integer(0), sp.Integer(1), half * x_), value=sigma2_value,
                         jacobian=_constant_jacobian([[0, 0, 0], [0, 0, 0], [0.5, 0, 0]]))
    zero = zero_field(symbols)
    return assemble_system(
        'heisenberg', [zero, sigma1, sigma2], zero,
        lambda eps, x: np.zeros(np.shape(x)),
        [0.0, 0.0, 0.0], [p['xhat0'], p['yhat0'], p['zhat0']], symbols,
        _mask_from(projection, 'xyz', [1, 1, 1]), p,
    )


def _mask_from(projection, letters: str, default: List[int]) -> List[int]:
    """Projection given as coordinate letters ('xz') or as a 0/1 mask"""
    if projection is None:
        return default
    if isinstance(projection, str):
        unknown = set(projection) - set(letters)
        if unknown or not projection:
            raise ModelConfigError(f"projection {projection!r} must use the coordinates {letters!r}")
        return [1 if letter in projection else 0 for letter in letters]
    mask = [int(v) for v in projection]
    if len(mask) != len(letters) or set(mask) - {0, 1}:
        raise ModelConfigError(f"projection mask must be {len(letters)} entries of 0/1, got {projection!r}")
    return mask


BUILTINS: Dict[str, BuiltinModel] = {
    'ou1d': BuiltinModel('ou1d', {'alpha': 0.0, 'beta': 0.0, 'gamma': 1.0, 'yhat0': 0.0}, _build_ou1d),
    'langevin': BuiltinModel('langevin', {'yhat0': 0.0, 'zhat0': 0.0}, _build_langevin),
    'flatmetric': BuiltinModel('flatmetric', {'theta': 0.0}, _build_flatmetric),
    'heisenberg': BuiltinModel('heisenberg', {'xhat0': 0.0, 'yhat0': 0.0, 'zhat0': 0.0}, _build_heisenberg),
}


def build_builtin(name: str, params: Dict[str, object] = None) -> VectorFieldSystem:
    if name not in BUILTINS:
        raise ModelConfigError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}")
    logger.debug(f"Building builtin {name} with {params}")
    return BUILTINS[name].build(dict(params or {}))
