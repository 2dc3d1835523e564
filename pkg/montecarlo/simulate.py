"""Euler-Maruyama simulation of dX = b(eps, X) dt + eps sum_i sigma_i(X) dW_i (Ito)."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import MC_BLOCK_SIZE, MC_STREAM_BLOCK, OVERFLOW_GUARD
from model.system import VectorFieldSystem
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    samples: np.ndarray
    max_norms: np.ndarray
    censored: int
    n_paths: int
    epsilon: float

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.n_paths


def block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of MC_STREAM_BLOCK paths, keyed by (seed, stream, block)"""
    key = np.array([seed, (stream << 32) | block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(system: VectorFieldSystem, eps: float, n_paths: int, euler_steps: int, seed: int,
             T: float = 1.0, stream: int = 0, jobs: Optional[int] = None,
             block_size: int = MC_BLOCK_SIZE) -> SimulationResult:
    """Projected endpoints Pi_l X_T and running max norms of n_paths Euler paths.

    Path k draws its noise from stream block k // MC_STREAM_BLOCK. Work blocks
    are whole multiples of that, so neither block_size nor the worker count
    changes any path.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    work = max(1, -(-block_size // MC_STREAM_BLOCK)) * MC_STREAM_BLOCK
    blocks = [(start, min(work, n_paths - start)) for start in range(0, n_paths, work)]
    parts = map_ordered(lambda b: _simulate_block(system, eps, b[0], b[1], euler_steps, seed, T, stream),
                        blocks, jobs)
    endpoints = np.concatenate([p[0] for p in parts])
    max_norms = np.concatenate([p[1] for p in parts])
    ok = np.all(np.isfinite(endpoints), axis=1)
    censored = int(np.sum(~ok))
    if censored:
        logger.warning(f"{censored} of {n_paths} paths blew up at eps={eps} and were censored")
    return SimulationResult(samples=endpoints[ok, :system.l], max_norms=max_norms, censored=censored,
                            n_paths=n_paths, epsilon=float(eps))


def _simulate_block(system, eps, start, count, euler_steps, seed, T, stream):
    first = start // MC_STREAM_BLOCK
    streams = [(block_generator(seed, stream, first + j), min(MC_STREAM_BLOCK, count - j * MC_STREAM_BLOCK))
               for j in range(-(-count // MC_STREAM_BLOCK))]
    dt = T / euler_steps
    x = np.broadcast_to(system.start(eps), (count, system.d)).copy()
    running = np.linalg.norm(x, axis=1)
    with np.errstate(all='ignore'):
        for _ in range(euler_steps):
            noise = np.concatenate([rng.standard_normal((size, system.m)) for rng, size in streams]) * np.sqrt(dt)
            diffusion = system.fields_at(x)[:, 1:, :]
            x = x + system.drift(eps, x) * dt + eps * np.einsum('nid,ni->nd', diffusion, noise)
            norms = np.linalg.norm(x, axis=1)
            blown = ~np.isfinite(norms) | (norms > OVERFLOW_GUARD)
            if blown.any():
                x[blown] = np.nan
                norms[blown] = np.inf
            running = np.fmax(running, norms)
    return x, running
