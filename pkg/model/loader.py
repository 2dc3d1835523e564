import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Union

import sympy as sp

from model.builtins import build_builtin
from model.fields import lambdify_array, make_symbols, polynomial_field
from model.system import VectorFieldSystem, assemble_system
from utils.errors import ModelConfigError

logger = logging.getLogger(__name__)

EPS = sp.Symbol('eps', real=True)


def read_document(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a JSON or TOML model document, chosen by suffix"""
    path = Path(path)
    try:
        if path.suffix.lower() == '.toml':
            with open(path, 'rb') as handle:
                return tomllib.load(handle)
        with open(path, 'r') as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        logger.error(f"Error reading model document {path}: {e}")
        raise ModelConfigError(f"cannot read model document {path}: {e}") from e


def load_system(config: Union[str, Path, Mapping[str, Any]]) -> VectorFieldSystem:
    """Build a VectorFieldSystem from a document, a path to one, or 'builtin:<name>'"""
    if isinstance(config, (str, Path)):
        text = str(config)
        if text.startswith('builtin:'):
            return build_builtin(text.split(':', 1)[1])
        config = read_document(config)
    if not isinstance(config, Mapping):
        raise ModelConfigError("model document must be a mapping")

    if 'builtin' in config:
        params = dict(config.get('params') or {})
        for key, value in config.items():
            if key not in ('builtin', 'params', 'projection_mask'):
                params[key] = value
        if 'projection_mask' in config:
            params['projection'] = config['projection_mask']
        return build_builtin(str(config['builtin']), params)
    return _load_polynomial(config)


def _load_polynomial(doc: Mapping[str, Any]) -> VectorFieldSystem:
    try:
        dims = doc['dims']
        d, m, l = int(dims['d']), int(dims['m']), int(dims['l'])
        tables = doc['fields']
    except (KeyError, TypeError, ValueError) as e:
        raise ModelConfigError(f"malformed polynomial document: missing or invalid {e}") from e
    if d < 1 or m < 1:
        raise ModelConfigError(f"dimensions must be positive, got d={d}, m={m}")
    if not 1 <= l <= d:
        raise ModelConfigError(f"projection dimension l={l} must satisfy 1 <= l <= d={d}")
    if not isinstance(tables, Sequence) or len(tables) != m + 1:
        raise ModelConfigError(f"expected {m + 1} field tables (drift plus {m} diffusion fields)")

    mask = list(doc.get('projection_mask', [1] * l + [0] * (d - l)))
    if len(mask) != d or sum(bool(v) for v in mask) != l:
        raise ModelConfigError(f"projection_mask {mask} does not select l={l} of d={d} coordinates")

    symbols = make_symbols(d)
    drift_by_power = _table_exprs(tables[0], symbols, allow_eps=True)
    sigma0 = polynomial_field(drift_by_power.get(0, _zeros(d)), symbols)
    diffusion = [polynomial_field(_table_exprs(table, symbols)[0], symbols) for table in tables[1:]]

    explicit = _table_exprs(doc.get('drift_eps', []), symbols)[0]
    first_order = drift_by_power.get(1, _zeros(d))
    drift_eps = polynomial_field([a + b for a, b in zip(first_order, explicit)], symbols)

    family = [sp.Integer(0)] * d
    for power, exprs in drift_by_power.items():
        family = [acc + EPS ** power * expr for acc, expr in zip(family, exprs)]
    family = [acc + EPS * expr for acc, expr in zip(family, explicit)]
    drift_family = lambdify_array(family, (EPS,) + symbols, (d,), leading=1)

    start = doc.get('start', {}) or {}
    x0 = _vector(start.get('x0', [0.0] * d), d, 'start.x0')
    x0_hat = _vector(start.get('x0_hat', [0.0] * d), d, 'start.x0_hat')

    system = assemble_system(str(doc.get('name', 'polynomial')), [sigma0] + diffusion, drift_eps,
                             drift_family, x0, x0_hat, symbols, mask)
    logger.info(f"Loaded polynomial model {system.name} (d={d}, m={m}, l={l})")
    return system


def _zeros(d: int) -> List[sp.Expr]:
    return [sp.Integer(0)] * d


def _table_exprs(table: Any, symbols: Tuple[sp.Symbol, ...], allow_eps: bool = False) -> Dict[int, List[sp.Expr]]:
    """Sum the monomials of a table into component expressions, grouped by eps power"""
    d = len(symbols)
    grouped: Dict[int, List[sp.Expr]] = {0: _zeros(d)}
    if not isinstance(table, Sequence):
        raise ModelConfigError("a polynomial table must be a list of monomials")
    for term in table:
        try:
            component = int(term.get('component', 0))
            exponents = [int(e) for e in term['exponents']]
            coefficient = sp.Float(float(term['coefficient']))
            power = int(term.get('eps', 0))
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise ModelConfigError(f"malformed monomial {term!r}: {e}") from e
        if len(exponents) != d:
            raise ModelConfigError(f"monomial {term!r} has {len(exponents)} exponents, expected {d}")
        if not 0 <= component < d:
            raise ModelConfigError(f"monomial component {component} outside 0..{d - 1}")
        if min(exponents) < 0 or power < 0:
            raise ModelConfigError(f"negative exponent in {term!r}")
        if power and not allow_eps:
            raise ModelConfigError("only the drift table may depend on eps")
        monomial = coefficient * sp.Mul(*[s ** e for s, e in zip(symbols, exponents)])
        exprs = grouped.setdefault(power, _zeros(d))
        exprs[component] = exprs[component] + monomial
    return grouped


def _vector(values: Any, d: int, name: str) -> List[float]:
    try:
        vector = [float(v) for v in values]
    except (TypeError, ValueError) as e:
        raise ModelConfigError(f"{name} must be a list of numbers") from e
    if len(vector) != d:
        raise ModelConfigError(f"{name} has length {len(vector)}, expected {d}")
    return vector
