from typing import List, Optional, Sequence, Tuple

import numpy as np


def validate_target(target_str: str, l: int) -> Tuple[bool, Optional[np.ndarray], str]:
    """Validate a comma separated target against the projection dimension"""
    try:
        values = np.array([float(item) for item in target_str.split(',') if item.strip()])
    except ValueError:
        return False, None, "Invalid target format (expected comma separated numbers)"
    if values.size != l:
        return False, None, f"Target has {values.size} entries but the model projects onto l={l}"
    if not np.all(np.isfinite(values)):
        return False, None, "Target entries must be finite"
    return True, values, "Valid"


def validate_param(param_str: str) -> Tuple[bool, Optional[Tuple[str, str]], str]:
    """Validate a key=value model parameter"""
    if '=' not in param_str:
        return False, None, f"Parameter {param_str!r} must look like key=value"
    key, value = (part.strip() for part in param_str.split('=', 1))
    if not key or not value:
        return False, None, f"Parameter {param_str!r} has an empty key or value"
    return True, (key, value), "Valid"


def validate_horizon(horizon: float) -> Tuple[bool, Optional[float], str]:
    """Validate the horizon T"""
    if not np.isfinite(horizon) or horizon <= 0:
        return False, None, "Horizon must be a positive number"
    return True, float(horizon), "Valid"


def validate_epsilons(eps_str: str) -> Tuple[bool, Optional[List[float]], str]:
    """Validate a strictly decreasing list of positive noise levels"""
    try:
        values = [float(item) for item in eps_str.split(',') if item.strip()]
    except ValueError:
        return False, None, "Invalid epsilon list format"
    if not values or min(values) <= 0:
        return False, None, "Epsilons must be positive"
    if any(b >= a for a, b in zip(values, values[1:])):
        return False, None, "Epsilons must be strictly decreasing"
    return True, values, "Valid"


def validate_model_sources(sources: Optional[Sequence[str]]) -> Tuple[bool, Optional[str], str]:
    """Exactly one --model source is allowed"""
    if not sources:
        return False, None, "A --model source is required (path or builtin:<name>)"
    if len(set(sources)) > 1:
        return False, None, f"Conflicting --model sources: {', '.join(sources)}"
    return True, sources[0], "Valid"
