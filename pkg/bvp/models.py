from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config.settings import (CONTINUUM_THRESHOLD, DEFAULT_SEED, DEFAULT_STEPS, MULTISTART_BOX_FACTOR,
                             MULTISTART_NORMAL, MULTISTART_SOBOL, TOL_ENERGY_TIE)
from hamiltonian.flow import PhasePath
from model.system import VectorFieldSystem
from utils.errors import ModelConfigError
from utils.helpers import require_finite


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """Projected target a in R^l at horizon T"""
    a: np.ndarray
    T: float

    @classmethod
    def create(cls, system: VectorFieldSystem, a: Sequence[float], T: float) -> 'TargetSpec':
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.shape != (system.l,):
            raise ModelConfigError(f"target has {a.size} entries but the model projects onto l={system.l}")
        if not T > 0:
            raise ModelConfigError(f"horizon must be positive, got {T}")
        require_finite(a, name='target')
        return cls(a=a, T=float(T))

    def distance_from_start(self, system: VectorFieldSystem) -> float:
        return float(np.linalg.norm(self.a - system.start_limit[:system.l]))


@dataclass(frozen=True, eq=False)
class Minimizer:
    p0: np.ndarray
    z_T: np.ndarray
    q_T: np.ndarray
    path: PhasePath
    energy: float
    residual: float
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, index: int) -> Dict[str, Any]:
        return {
            'p0': self.p0,
            'terminal': {'z_T': self.z_T, 'q_T': self.q_T},
            'energy': self.energy,
            'residual': self.residual,
            'path_ref': f'minimizer-{index}',
            'grid_points': len(self.path.grid),
            'diagnostics': self.diagnostics,
        }


@dataclass(frozen=True, eq=False)
class MinimizerSet:
    target: TargetSpec
    solutions: List[Minimizer]
    minimizers: List[Minimizer]
    continuum_flag: bool
    multistart_stats: Dict[str, int]
    degenerate_zero_control: bool = False

    @property
    def energy(self) -> float:
        return self.minimizers[0].energy

    def to_dict(self) -> Dict[str, Any]:
        return {
            'target': {'a': self.target.a, 'T': self.target.T},
            'solutions': [s.to_dict(k) for k, s in enumerate(self.solutions)],
            'minimizer_indices': [self.solutions.index(m) for m in self.minimizers],
            'energy': self.energy if self.minimizers else None,
            'continuum_flag': self.continuum_flag,
            'degenerate_zero_control': self.degenerate_zero_control,
            'multistart_stats': self.multistart_stats,
        }


@dataclass(frozen=True)
class MultistartConfig:
    n_sobol: int = MULTISTART_SOBOL
    n_normal: int = MULTISTART_NORMAL
    seed: int = DEFAULT_SEED
    box_factor: float = MULTISTART_BOX_FACTOR
    steps: int = DEFAULT_STEPS
    tol_energy_tie: float = TOL_ENERGY_TIE
    continuum_threshold: int = CONTINUUM_THRESHOLD
    extra_guesses: Optional[Sequence[Sequence[float]]] = None
    jobs: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_sobol': self.n_sobol, 'n_normal': self.n_normal, 'seed': self.seed,
            'box_factor': self.box_factor, 'steps': self.steps,
            'tol_energy_tie': self.tol_energy_tie, 'continuum_threshold': self.continuum_threshold,
        }
