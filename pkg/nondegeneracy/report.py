import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from bvp.models import MinimizerSet
from config.settings import HESSIAN_GRID, TOL_FOCAL, TOL_SV, UNDECIDED_BAND
from model.system import VectorFieldSystem
from nondegeneracy.focality import hadamard_ratio, nonfocality_batch
from nondegeneracy.hessian_oracle import hessian_oracle
from nondegeneracy.malliavin import check_invertibility, ellipticity_witness, malliavin_batch
from utils.parallel import chunked, map_ordered

logger = logging.getLogger(__name__)

ND_HOLDS = 'ND_HOLDS'
FOCAL = 'FOCAL'
SINGULAR_MALLIAVIN = 'SINGULAR_MALLIAVIN'
CONTINUUM = 'CONTINUUM'
UNDECIDED = 'UNDECIDED'

RECORD_CHUNK = 16


@dataclass(frozen=True, eq=False)
class MinimizerRecord:
    malliavin: np.ndarray
    smallest_singular_value: float
    invertible: bool
    nonfocality_matrix: np.ndarray
    nonfocality_det: float
    hadamard_ratio: float
    focal_status: str
    ellipticity_time: Optional[float] = None
    hessian_min_eig: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'malliavin': self.malliavin,
            'smallest_singular_value': self.smallest_singular_value,
            'invertible': self.invertible,
            'nonfocality_matrix': self.nonfocality_matrix,
            'nonfocality_det': self.nonfocality_det,
            'hadamard_ratio': self.hadamard_ratio,
            'focal_status': self.focal_status,
            'ellipticity_time': self.ellipticity_time,
            'hessian_min_eig': self.hessian_min_eig,
        }


@dataclass(frozen=True, eq=False)
class NdReport:
    minimizer_count: int
    continuum_flag: bool
    records: List[MinimizerRecord]
    verdict: str
    thresholds: Dict[str, float] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == ND_HOLDS

    def to_dict(self) -> Dict[str, Any]:
        return {
            'minimizer_count': self.minimizer_count,
            'continuum_flag': self.continuum_flag,
            'records': [r.to_dict() for r in self.records],
            'verdict': self.verdict,
            'thresholds': self.thresholds,
        }


def focal_status(ratio: float, tol_focal: float = TOL_FOCAL) -> str:
    """FOCAL below tol_focal, UNDECIDED within the band above it, else ND_HOLDS"""
    if ratio < tol_focal:
        return FOCAL
    if ratio < UNDECIDED_BAND * tol_focal:
        return UNDECIDED
    return ND_HOLDS


def assemble_nd_report(system: VectorFieldSystem, minimizer_set: MinimizerSet, hessian: bool = False,
                       steps: Optional[int] = None, grid_size: int = HESSIAN_GRID,
                       jobs: Optional[int] = None) -> NdReport:
    """Malliavin, focality and optional Hessian checks for every minimizer, then the verdict"""
    minimizers = minimizer_set.minimizers

    def check_chunk(chunk):
        covariances = malliavin_batch(system, chunk, steps)
        matrices = nonfocality_batch(system, chunk, steps)
        records = []
        for minimizer, C, M in zip(chunk, covariances, matrices):
            invertible, smallest = check_invertibility(C)
            ratio = hadamard_ratio(M)
            oracle = hessian_oracle(system, minimizer, grid_size) if hessian else None
            records.append(MinimizerRecord(
                malliavin=C, smallest_singular_value=smallest, invertible=invertible,
                nonfocality_matrix=M, nonfocality_det=float(np.linalg.det(M)), hadamard_ratio=ratio,
                focal_status=focal_status(ratio), ellipticity_time=ellipticity_witness(system, minimizer.path),
                hessian_min_eig=oracle.min_eig if oracle else None,
            ))
        return records

    records = [r for chunk in map_ordered(check_chunk, chunked(minimizers, RECORD_CHUNK), jobs) for r in chunk]

    if minimizer_set.continuum_flag:
        verdict = CONTINUUM
    elif any(not r.invertible for r in records):
        verdict = SINGULAR_MALLIAVIN
    elif any(r.focal_status == FOCAL for r in records):
        verdict = FOCAL
    elif any(r.focal_status == UNDECIDED for r in records):
        verdict = UNDECIDED
        logger.warning("Non-focality ratio lies within the undecided band above the threshold")
    else:
        verdict = ND_HOLDS
    logger.info(f"ND verdict for {system.name}: {verdict} ({len(records)} minimizers)")
    return NdReport(
        minimizer_count=len(minimizers), continuum_flag=minimizer_set.continuum_flag, records=records,
        verdict=verdict,
        thresholds={'tol_sv': TOL_SV, 'tol_focal': TOL_FOCAL, 'undecided_band': UNDECIDED_BAND},
    )
