import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from config.settings import BOOTSTRAP_RESAMPLES, KDE_REACH, MIN_PATHS
from utils.errors import TargetUnreachedError

logger = logging.getLogger(__name__)

SILVERMAN = 'silverman'


@dataclass(frozen=True)
class DensityEstimate:
    log_density: float
    stderr: float
    bandwidth: np.ndarray
    n_used: int


def silverman_bandwidth(samples: np.ndarray) -> np.ndarray:
    """Normal-reference rule per coordinate with a robust spread min(std, IQR/1.34)"""
    n, l = samples.shape
    std = np.std(samples, axis=0)
    q75, q25 = np.percentile(samples, [75, 25], axis=0)
    iqr = (q75 - q25) / 1.34
    spread = np.where(iqr > 0, np.minimum(std, iqr), std)
    return spread * (4.0 / ((l + 2) * n)) ** (1.0 / (l + 4))


def estimate_log_density(samples: np.ndarray, a, bandwidth: Union[str, float] = SILVERMAN,
                         n_boot: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> DensityEstimate:
    """Product-Gaussian KDE of the samples evaluated at the single point a"""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, l = samples.shape
    if n < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} samples, got {n}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    h = silverman_bandwidth(samples) if bandwidth == SILVERMAN else np.full(l, float(bandwidth))
    if np.any(h <= 0):
        raise ValueError(f"bandwidth must be positive, got {h}")

    scaled = (a - samples) / h
    if np.min(np.linalg.norm(scaled, axis=1)) > KDE_REACH:
        nearest = float(np.min(np.linalg.norm(samples - a, axis=1)))
        raise TargetUnreachedError(f"target unreached: nearest sample lies {nearest:.4g} from a "
                                   f"({KDE_REACH:g} bandwidths needed)", nearest)
    weights = -0.5 * np.sum(scaled ** 2, axis=1) - np.sum(np.log(h)) - 0.5 * l * np.log(2 * np.pi)
    log_density = float(logsumexp(weights) - np.log(n))

    rng = np.random.default_rng(seed)
    replicates = []
    for _ in range(n_boot):
        counts = np.bincount(rng.integers(0, n, n), minlength=n)
        replicates.append(logsumexp(weights, b=counts) - np.log(n))
    replicates = np.asarray(replicates)
    replicates = replicates[np.isfinite(replicates)]
    stderr = float(np.std(replicates, ddof=1)) if replicates.size > 1 else float('inf')
    return DensityEstimate(log_density=log_density, stderr=stderr, bandwidth=h, n_used=n)
