"""Adversarial sampler on the L1 unit sphere and the slab-probability estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import shard_map

__all__ = [
    "MAX_ATTEMPTS",
    "L1SphereSample",
    "SlabEstimate",
    "facet_scale",
    "l1_sphere_sampler",
    "l1_sphere_batch",
    "slab_probability",
    "wilson_half_width",
]

MAX_ATTEMPTS = 10_000
_SHARDS = 16
_BLOCK = 20_000


def facet_scale(d: int) -> float:
    """c_d = sqrt(1 / (4 ln(4d))), natural log."""
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")
    return math.sqrt(1.0 / (4.0 * math.log(4.0 * d)))


@dataclass(frozen=True)
class L1SphereSample:
    sigma: np.ndarray
    n: np.ndarray
    c_d: float
    v: np.ndarray
    attempts: int


def _candidates(sigma: np.ndarray, n: np.ndarray, c: float) -> np.ndarray:
    # (1/d)(sigma + c (I - sigma sigma^T / d) n), row-wise
    d = sigma.shape[-1]
    proj = np.sum(sigma * n, axis=-1, keepdims=True) / d
    return (sigma + c * (n - sigma * proj)) / d


def _on_facet(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.all(sigma * v >= 0.0, axis=-1)


def l1_sphere_sampler(d: int, seed=None, *, max_attempts: int = MAX_ATTEMPTS) -> L1SphereSample:
    """One accepted draw; rejection loop capped at ``max_attempts``."""
    c = facet_scale(d)
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_attempts + 1):
        sigma = rng.choice([-1.0, 1.0], size=d)
        n = rng.standard_normal(d)
        v = _candidates(sigma, n, c)
        if _on_facet(sigma, v):
            return L1SphereSample(sigma, n, c, v, attempt)
    raise RuntimeError(f"no draw landed on its facet within {max_attempts} attempts")


def l1_sphere_batch(d: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    """``count`` accepted points as rows, their sign patterns, and the acceptance rate."""
    c = facet_scale(d)
    out_v = np.empty((count, d))
    out_s = np.empty((count, d))
    filled = 0
    proposed = accepted = 0
    while filled < count:
        m = min(_BLOCK, max(16, 2 * (count - filled)))
        sigma = rng.choice([-1.0, 1.0], size=(m, d))
        v = _candidates(sigma, rng.standard_normal((m, d)), c)
        ok = _on_facet(sigma, v)
        proposed += m
        accepted += int(ok.sum())
        take = min(int(ok.sum()), count - filled)
        out_v[filled : filled + take] = v[ok][:take]
        out_s[filled : filled + take] = sigma[ok][:take]
        filled += take
        if filled == 0 and proposed >= MAX_ATTEMPTS:
            raise RuntimeError(f"no draw landed on its facet within {proposed} attempts")
    return out_v, out_s, accepted / proposed


def wilson_half_width(hits: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Center and half-width of the Wilson score interval."""
    if total <= 0:
        raise ValueError("total must be positive")
    p = hits / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return center, half


@dataclass(frozen=True)
class SlabEstimate:
    estimate: float
    half_width: float  # 95% Wilson interval
    hits: int
    samples: int
    acceptance_rate: float

    @property
    def interval(self) -> tuple[float, float]:
        c, h = wilson_half_width(self.hits, self.samples)
        return max(0.0, c - h), min(1.0, c + h)


def slab_probability(w, eps: float, d: int | None = None, samples: int = 100_000, seed=0) -> SlabEstimate:
    """Monte-Carlo estimate of Pr(<w, v> in [1 - eps, 1]) under the L1 sphere sampler.

    Work is split into a fixed number of shards with seeds spawned from ``seed``,
    so the result does not depend on the thread count.
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    d = w.size if d is None else d
    if w.size != d:
        raise ValueError(f"w has {w.size} entries, expected {d}")
    if samples < 1000:
        raise ValueError("at least 1000 samples are required")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    children = np.random.SeedSequence(seed).spawn(_SHARDS)
    sizes = [samples // _SHARDS + (1 if i < samples % _SHARDS else 0) for i in range(_SHARDS)]

    def run(job):
        child, size = job
        rng = np.random.default_rng(child)
        hits = 0
        rates = []
        left = size
        while left > 0:
            m = min(left, _BLOCK)
            v, _, rate = l1_sphere_batch(d, m, rng)
            dots = v @ w
            hits += int(np.count_nonzero((dots >= 1.0 - eps) & (dots <= 1.0)))
            rates.append(rate)
            left -= m
        return hits, float(np.mean(rates))

    results = shard_map(run, zip(children, sizes))
    hits = sum(h for h, _ in results)
    rate = float(np.mean([r for _, r in results]))
    _, half = wilson_half_width(hits, samples)
    return SlabEstimate(hits / samples, half, hits, samples, rate)
