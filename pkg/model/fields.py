"""Vector fields on R^d with exact derivatives.

A field keeps its sympy components (used for Lie brackets and documents) next
to vectorized numpy callables for its value, Jacobian and second derivatives.
All callables accept arrays shaped (..., d).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VectorField:
    exprs: Tuple[sp.Expr, ...]
    value: ArrayFn
    jacobian: ArrayFn
    # hess[..., k, i, j] = d^2 V_k / dx_i dx_j; None for affine fields
    hessian: Optional[ArrayFn] = None

    @property
    def dim(self) -> int:
        return len(self.exprs)

    @property
    def is_zero(self) -> bool:
        return all(sp.simplify(expr) == 0 for expr in self.exprs)


def make_symbols(d: int) -> Tuple[sp.Symbol, ...]:
    return tuple(sp.symbols(f'x1:{d + 1}', real=True))


def lambdify_array(exprs: Sequence[sp.Expr], args: Sequence[sp.Symbol], shape: Tuple[int, ...],
                   leading: int = 0) -> Callable[..., np.ndarray]:
    """Vectorized evaluation of a flat list of expressions reshaped to `shape`.

    The returned function takes `leading` scalar arguments followed by the
    state array (..., d).
    """
    flat = [sp.sympify(expr) for expr in exprs]
    func = sp.lambdify(tuple(args), flat, modules='numpy')

    def evaluate(*call_args) -> np.ndarray:
        scalars, x = call_args[:leading], np.asarray(call_args[leading], dtype=float)
        columns = [x[..., k] for k in range(x.shape[-1])]
        raw = func(*scalars, *columns)
        out = np.empty(x.shape[:-1] + (len(flat),))
        for j, component in enumerate(raw):
            out[..., j] = component
        return out.reshape(x.shape[:-1] + shape)

    return evaluate


def polynomial_field(exprs: Sequence[sp.Expr], symbols: Sequence[sp.Symbol]) -> VectorField:
    """Build a field whose derivatives come from exact symbolic differentiation"""
    d = len(symbols)
    exprs = tuple(sp.expand(sp.sympify(expr)) for expr in exprs)
    jac = sp.Matrix(exprs).jacobian(symbols)
    second = [sp.diff(expr, xi, xj) for expr in exprs for xi in symbols for xj in symbols]
    curved = any(term != 0 for term in second)
    return VectorField(
        exprs=exprs,
        value=lambdify_array(exprs, symbols, (d,)),
        jacobian=lambdify_array(list(jac), symbols, (d, d)),
        hessian=lambdify_array(second, symbols, (d, d, d)) if curved else None,
    )


def zero_field(symbols: Sequence[sp.Symbol]) -> VectorField:
    d = len(symbols)
    return VectorField(
        exprs=tuple(sp.Integer(0) for _ in range(d)),
        value=lambda x: np.zeros(np.shape(x)[:-1] + (d,)),
        jacobian=lambda x: np.zeros(np.shape(x)[:-1] + (d, d)),
    )


def permute_field(field: VectorField, order: Sequence[int], symbols: Sequence[sp.Symbol]) -> VectorField:
    """Express a field in coordinates u with u_k = x_{order[k]}"""
    order = list(order)
    if order == list(range(len(order))):
        return field
    inverse = np.argsort(order)

    def to_original(u):
        u = np.asarray(u, dtype=float)
        return u[..., inverse]

    def value(u):
        return field.value(to_original(u))[..., order]

    def jacobian(u):
        return field.jacobian(to_original(u))[..., order, :][..., :, order]

    hessian = None
    if field.hessian is not None:
        def hessian(u):
            return field.hessian(to_original(u))[..., order, :, :][..., :, order, :][..., :, :, order]

    substitution = {symbols[order[k]]: sp.Dummy(f'u{k}') for k in range(len(order))}
    renamed = {dummy: symbols[k] for k, dummy in enumerate(substitution.values())}
    exprs = tuple(field.exprs[order[k]].xreplace(substitution).xreplace(renamed) for k in range(len(order)))
    return VectorField(exprs=exprs, value=value, jacobian=jacobian, hessian=hessian)


def lie_bracket_exprs(u: Sequence[sp.Expr], v: Sequence[sp.Expr], symbols: Sequence[sp.Symbol]) -> Tuple[sp.Expr, ...]:
    """[U, V] = DV U - DU V"""
    u_vec, v_vec = sp.Matrix(u), sp.Matrix(v)
    bracket = v_vec.jacobian(symbols) * u_vec - u_vec.jacobian(symbols) * v_vec
    return tuple(sp.expand(entry) for entry in bracket)
