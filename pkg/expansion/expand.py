import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from bvp.models import MultistartConfig
from config.settings import HORMANDER_DIAG_DEPTH, TOL_GRADIENT_AGREEMENT
from expansion.energy import FINITE_DIFFERENCE, MULTIPLIER, lambda_at, lambda_gradient
from expansion.yhat import yhat_terminal
from model.system import VectorFieldSystem
from nondegeneracy.hormander import hormander_rank
from nondegeneracy.report import ND_HOLDS, SINGULAR_MALLIAVIN, UNDECIDED, NdReport, assemble_nd_report
from utils.errors import BranchSwitchError, DegenerateTargetError
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)

SMALL_NOISE = 'small_noise'
SHORT_TIME = 'short_time'


@dataclass(frozen=True)
class ExpansionOptions:
    multistart: MultistartConfig = field(default_factory=MultistartConfig)
    strict_nd: bool = False
    hessian: bool = False
    check_gradient: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {'multistart': self.multistart.to_dict(), 'strict_nd': self.strict_nd,
                'hessian': self.hessian, 'check_gradient': self.check_gradient}


@dataclass(frozen=True, eq=False)
class ExpansionResult:
    c1: float
    c2: float
    l: int
    lambda_grad: np.ndarray
    per_minimizer: List[Dict[str, Any]]
    nd_report: NdReport
    mode: str
    certified: bool
    distance: Optional[float] = None
    template: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'c1': self.c1, 'c2': self.c2, 'l': self.l, 'lambda_grad': self.lambda_grad,
            'per_minimizer': self.per_minimizer, 'nd_report': self.nd_report.to_dict(),
            'mode': self.mode, 'certified': self.certified, 'distance': self.distance,
            'template': self.template, 'warnings': self.warnings, 'diagnostics': self.diagnostics,
        }


def expand(system: VectorFieldSystem, a: Sequence[float], T: float,
           options: Optional[ExpansionOptions] = None) -> ExpansionResult:
    """c1 = Lambda(a), c2 = max over minimizers of Lambda'(a) . Y_hat_T, with the ND verdict"""
    options = options or ExpansionOptions()
    config = options.multistart
    c1, minimizer_set = lambda_at(system, a, T, config)
    nd_report = assemble_nd_report(system, minimizer_set, hessian=options.hessian, jobs=config.jobs)

    if minimizer_set.degenerate_zero_control and nd_report.verdict == SINGULAR_MALLIAVIN:
        smallest = nd_report.records[0].smallest_singular_value
        raise DegenerateTargetError(
            f"target equals the projected start and the Malliavin covariance C(0) of the zero control is "
            f"singular (smallest singular value {smallest:.3e}); no density expansion at this point")

    warnings: List[str] = []
    diagnostics: Dict[str, Any] = {'multistart_stats': minimizer_set.multistart_stats}
    gradient = lambda_gradient(system, a, T, MULTIPLIER, minimizer_set=minimizer_set)
    if options.check_gradient:
        _cross_check_gradient(system, a, T, minimizer_set, config, gradient, warnings, diagnostics)

    # Step 1: per-minimizer first-order responses
    minimizers = minimizer_set.minimizers
    responses = map_ordered(lambda m: yhat_terminal(system, m), minimizers, config.jobs)
    per_minimizer = [{'energy': m.energy, 'yhat_T': y, 'c2_contribution': float(gradient @ y)}
                     for m, y in zip(minimizers, responses)]
    c2 = max(entry['c2_contribution'] for entry in per_minimizer)

    # Step 2: certification
    certified = nd_report.verdict == ND_HOLDS
    if nd_report.verdict == UNDECIDED and not options.strict_nd:
        certified = True
        warnings.append("non-focality ratio within the undecided band; accepted because strict ND is off")
    if not certified:
        warnings.append(f"ND verdict {nd_report.verdict}: exponents reported but not certified")
    rank, _ = hormander_rank(system, system.start_limit, HORMANDER_DIAG_DEPTH, include_drift=True)
    diagnostics['hormander_rank_with_drift'] = rank
    if rank < system.d:
        warnings.append(f"bracket span at the start has rank {rank} < d={system.d}")

    for message in warnings:
        logger.warning(message)
    logger.info(f"Expansion for {system.name} at a={np.atleast_1d(a).tolist()}: c1={c1:.10g}, c2={c2:.10g}, "
                f"verdict {nd_report.verdict}")
    return ExpansionResult(c1=c1, c2=c2, l=system.l, lambda_grad=gradient, per_minimizer=per_minimizer,
                           nd_report=nd_report, mode=SMALL_NOISE, certified=certified,
                           warnings=warnings, diagnostics=diagnostics)


def _cross_check_gradient(system, a, T, minimizer_set, config, gradient, warnings, diagnostics) -> None:
    try:
        fd = lambda_gradient(system, a, T, FINITE_DIFFERENCE, minimizer_set=minimizer_set, multistart=config)
    except BranchSwitchError as e:
        if len(minimizer_set.minimizers) > 1:
            warnings.append(f"Lambda may not be smooth at a: {e}")
            diagnostics['gradient_check'] = 'branch_switch'
            return
        raise
    gap = float(np.max(np.abs(fd - gradient)))
    agreed = gap <= TOL_GRADIENT_AGREEMENT * (1.0 + float(np.linalg.norm(gradient)))
    diagnostics.update({'lambda_grad_fd': fd, 'gradient_gap': gap,
                        'gradient_check': 'agree' if agreed else 'disagree'})
    if not agreed:
        warnings.append(f"multiplier and finite-difference gradients differ by {gap:.3e}")


def short_time(system: VectorFieldSystem, a: Sequence[float],
               options: Optional[ExpansionOptions] = None) -> ExpansionResult:
    """Short-time asymptotics f(t, a) ~ const t^{-l/2} exp(-d^2 / 2t) via Brownian rescaling on [0, 1]"""
    scaled = system.short_time_scaled()
    result = expand(scaled, a, 1.0, options)
    distance = math.sqrt(2.0 * result.c1)
    rank, _ = hormander_rank(system, system.start_limit, HORMANDER_DIAG_DEPTH, include_drift=False)
    warnings = list(result.warnings)
    if rank < system.d:
        warnings.append(f"strong bracket condition fails at the start (rank {rank} < d={system.d})")
    template = f"f(t,a) ~ const * t^(-{system.l}/2) * exp(-{distance ** 2:.12g} / (2t))"
    return replace(result, c2=0.0, mode=SHORT_TIME, distance=distance, template=template, warnings=warnings,
                   diagnostics={**result.diagnostics, 'hormander_rank_strong': rank})


def predicted_log_density(result: ExpansionResult, epsilons: Sequence[float]) -> List[Tuple[float, float]]:
    """(eps, -c1/eps^2 + c2/eps - l log eps); the log c0 constant is omitted"""
    return [(float(eps), -result.c1 / eps ** 2 + result.c2 / eps - result.l * math.log(eps)) for eps in epsilons]
