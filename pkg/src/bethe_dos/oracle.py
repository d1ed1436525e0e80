"""Monte Carlo estimates of the averaged root Green function on the Bethe lattice.

Finite balls are stored level by level in breadth-first order: level ``l`` of a
ball of radius ``R`` around the root holds ``(q+1) q**(l-1)`` vertices, and the
children of vertex ``j`` on level ``l >= 1`` are ``j*q .. j*q+q-1`` on level
``l+1``.  The resolvent at a vertex follows from its forward subtrees,

    Gamma_v = 1 / (lam * omega_v - z - sum_children Gamma_c),

with free boundary ``Gamma = 1 / (lam * omega - z)`` at the leaves.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .stieltjes import Law, UniformLaw

POOL_SIZE = 4096


def _check_z(z: complex) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise ValueError(f"need Im z > 0, got {z}")
    return z


def level_sizes(q: int, radius: int) -> List[int]:
    return [1] + [(q + 1) * q ** (l - 1) for l in range(1, radius + 1)]


def _fold(levels: Sequence[np.ndarray], q: int, lam: float, z: complex,
          trace: Optional[list] = None) -> np.ndarray:
    """Run the recursion from the deepest level up; ``levels[0]`` is the top.

    Arrays may carry a leading sample axis; the vertex axis is last.  The top
    level's children are grouped by ``levels[1].shape[-1] // levels[0].shape[-1]``.
    """
    gamma = 1.0 / (lam * levels[-1] - z)
    if trace is not None:
        trace.append(gamma)
    for omega in reversed(levels[:-1]):
        width = gamma.shape[-1] // omega.shape[-1]
        child_sum = gamma.reshape(gamma.shape[:-1] + (omega.shape[-1], width)).sum(axis=-1)
        gamma = 1.0 / (lam * omega - z - child_sum)
        if trace is not None:
            trace.append(gamma)
    return gamma


def subtree_green(q: int, lam: float, z: complex, depth: int, rng: np.random.Generator,
                  law: Law = UniformLaw(1.0), size=None, trace: Optional[list] = None):
    """Diagonal resolvent at the top of a ``q``-ary subtree with ``depth`` levels.

    ``depth = 1`` is a single leaf.  ``size`` draws that many independent subtrees.
    """
    z = _check_z(z)
    if depth < 1:
        raise ValueError("a subtree needs at least one level")
    lead = () if size is None else (int(size),)
    levels = [law.sample(rng, lead + (q**l,)) for l in range(depth)]
    g = _fold(levels, q, lam, z, trace)[..., 0]
    return complex(g) if size is None else g


def root_green_frozen(q: int, lam: float, z: complex, omega_levels: Sequence[np.ndarray],
                      trace: Optional[list] = None):
    """Root resolvent of a finite ball for a fixed potential, given level by level."""
    z = _check_z(z)
    g = _fold([np.asarray(o, dtype=float) for o in omega_levels], q, lam, z, trace)[..., 0]
    return g


def root_green_sample(q: int, lam: float, z: complex, depth: int, rng: np.random.Generator,
                      law: Law = UniformLaw(1.0), size=None, trace: Optional[list] = None):
    """Root resolvent of a random ball of radius ``depth`` (``q+1`` subtrees of ``depth`` levels)."""
    z = _check_z(z)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    lead = () if size is None else (int(size),)
    levels = [law.sample(rng, lead + (n,)) for n in level_sizes(q, depth)]
    g = root_green_frozen(q, lam, z, levels, trace)
    return complex(g) if size is None else g


def ball_adjacency(q: int, radius: int) -> np.ndarray:
    """Adjacency matrix of the ball in the breadth-first level order used above."""
    sizes = level_sizes(q, radius)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    A = np.zeros((n, n))
    for l in range(radius):
        width = q + 1 if l == 0 else q
        for j in range(sizes[l]):
            p = offsets[l] + j
            for c in range(width):
                ch = offsets[l + 1] + j * width + c
                A[p, ch] = A[ch, p] = 1.0
    return A


def dense_green_oracle(radius: int, q: int, lam: float, z: complex,
                       omega_levels: Sequence[np.ndarray]) -> complex:
    """``(0,0)`` entry of ``(A_ball + lam diag(omega) - z)^{-1}`` by a dense solve."""
    z = complex(z)
    if z.imag == 0:
        raise ValueError("need Im z != 0")
    if radius > 3 or q > 2:
        raise ValueError("dense oracle is limited to radius <= 3 and q <= 2")
    omega = np.concatenate([np.atleast_1d(np.asarray(o, dtype=float)) for o in omega_levels])
    A = ball_adjacency(q, radius)
    if omega.shape[0] != A.shape[0]:
        raise ValueError(f"expected {A.shape[0]} potential values, got {omega.shape[0]}")
    H = A + lam * np.diag(omega) - z * np.eye(A.shape[0])
    e0 = np.zeros(A.shape[0], dtype=complex)
    e0[0] = 1.0
    return complex(np.linalg.solve(H, e0)[0])


# --- Monte Carlo -----------------------------------------------------------------

@dataclass(frozen=True)
class MCConfig:
    q: int
    lam: float
    z: complex
    depth: int = 20
    samples: int = 100_000
    seed: int = 42
    law: Law = field(default_factory=lambda: UniformLaw(1.0))
    pool_size: int = POOL_SIZE
    workers: int = 1
    stderr_ceiling: Optional[float] = None

    def __post_init__(self) -> None:
        _check_z(self.z)
        if self.q < 1 or self.depth < 1 or self.samples < 2:
            raise ValueError("need q >= 1, depth >= 1, samples >= 2")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class MCEstimate:
    mean: complex
    stderr: float
    samples_used: int
    depth_pair_gap: float
    depth: int = 0
    seed: int = 0
    flagged: bool = False

    def to_json(self) -> dict:
        return {
            "mean": [self.mean.real, self.mean.imag],
            "stderr": self.stderr,
            "samples": self.samples_used,
            "depth": self.depth,
            "gap": self.depth_pair_gap,
            "seed": self.seed,
            "flagged": self.flagged,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MCEstimate":
        return cls(
            mean=complex(obj["mean"][0], obj["mean"][1]), stderr=float(obj["stderr"]),
            samples_used=int(obj["samples"]), depth_pair_gap=float(obj["gap"]),
            depth=int(obj["depth"]), seed=int(obj["seed"]), flagged=bool(obj.get("flagged", False)),
        )


def _stream(seed: int, batch: int, level: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, batch, level); independent of worker layout."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(batch, level))
    return np.random.Generator(np.random.Philox(ss))


def _pool_batch(cfg: MCConfig, batch: int, size: int, depth: int) -> np.ndarray:
    """Population recursion for one batch of ``size`` root samples.

    Each level keeps a pool of ``size`` subtree values; a vertex takes its
    children from the pool of the level below through a random permutation, so
    every pool entry is used a fixed number of times and the children of one
    vertex are distinct.  Level ``l``'s draws depend only on ``(seed, batch, l)``,
    hence two depths share the disorder on their common levels.
    """
    z, lam, q = complex(cfg.z), cfg.lam, cfg.q
    idx = np.arange(size)
    gamma = None
    for level in range(depth, -1, -1):
        rng = _stream(cfg.seed, batch, level)
        omega = cfg.law.sample(rng, size)
        perm = rng.permutation(size)
        if gamma is None:
            gamma = 1.0 / (lam * omega - z)
            continue
        width = q + 1 if level == 0 else q
        if width > size:
            raise ValueError("pool smaller than the branching number")
        child = perm[(idx[:, None] * width + np.arange(width)[None, :]) % size]
        gamma = 1.0 / (lam * omega - z - gamma[child].sum(axis=1))
    return gamma


def _batches(cfg: MCConfig) -> List[int]:
    full, rest = divmod(cfg.samples, cfg.pool_size)
    sizes = [cfg.pool_size] * full
    if rest:
        sizes.append(max(rest, cfg.q + 1))
    return sizes


def mc_samples(cfg: MCConfig, depth: Optional[int] = None) -> np.ndarray:
    """All root samples, concatenated in batch order."""
    depth = cfg.depth if depth is None else depth
    sizes = _batches(cfg)

    def run(b):
        return _pool_batch(cfg, b, sizes[b], depth)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts)[: max(cfg.samples, 0) or None]


def _mean(x: np.ndarray) -> complex:
    # fixed-order pairwise summation (numpy's) over a fixed-order array
    return complex(np.sum(x) / x.shape[0])


def mc_average(cfg: MCConfig) -> MCEstimate:
    """Sample mean and standard error of ``G(0,0; z)``; the gap to depth ``R-2`` is reported too."""
    x = mc_samples(cfg)
    n = x.shape[0]
    se = max(float(np.std(x.real, ddof=1)), float(np.std(x.imag, ddof=1))) / math.sqrt(n)
    mean = _mean(x)
    if cfg.depth >= 2:
        gap = abs(mean - _mean(mc_samples(cfg, cfg.depth - 2)))
    else:
        gap = float("nan")
    flagged = cfg.stderr_ceiling is not None and se > cfg.stderr_ceiling
    return MCEstimate(mean, se, n, float(gap), cfg.depth, cfg.seed, flagged)


def dumps_estimate(est: MCEstimate) -> str:
    return json.dumps(est.to_json(), sort_keys=True)
