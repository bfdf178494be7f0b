import math

import numpy as np
import pytest

from reluforge import _parallel
from reluforge.sampling import (
    facet_scale,
    l1_sphere_batch,
    l1_sphere_sampler,
    slab_probability,
    wilson_half_width,
)


def test_facet_scale_uses_natural_log():
    assert facet_scale(100) == pytest.approx(math.sqrt(1 / (4 * math.log(400))))
    with pytest.raises(ValueError):
        facet_scale(1)


@pytest.mark.parametrize("d", [2, 3, 10, 100])
def test_single_draws_on_facet(d):
    for seed in range(50):
        s = l1_sphere_sampler(d, seed)
        assert abs(np.abs(s.v).sum() - 1.0) <= 1e-9
        assert np.all(s.sigma * s.v >= 0)
        assert s.attempts >= 1
        assert s.c_d == facet_scale(d)


def test_single_draw_is_seeded():
    a = l1_sphere_sampler(20, 7)
    b = l1_sphere_sampler(20, 7)
    np.testing.assert_array_equal(a.v, b.v)


def test_candidate_formula_by_hand():
    # rebuild the first accepted draw from its sigma and Gaussian vector
    s = l1_sphere_sampler(5, 3)
    d = 5
    P = np.eye(d) - np.outer(s.sigma, s.sigma) / d
    np.testing.assert_allclose(s.v, (s.sigma + s.c_d * P @ s.n) / d, rtol=1e-13, atol=1e-15)


def test_rejection_cap():
    with pytest.raises(RuntimeError):
        # with max_attempts=0 the loop cannot succeed
        l1_sphere_sampler(10, 0, max_attempts=0)


def test_batch_acceptance_and_norms():
    v, sigma, rate = l1_sphere_batch(100, 10_000, np.random.default_rng(0))
    assert rate >= 0.5
    assert v.shape == (10_000, 100)
    np.testing.assert_allclose(np.abs(v).sum(axis=1), 1.0, atol=1e-9)
    assert np.all(sigma * v >= 0)


def test_facet_hyperplane_identity():
    v, sigma, _ = l1_sphere_batch(30, 5000, np.random.default_rng(1))
    dots = np.sum(sigma * v, axis=1)
    se = dots.std(ddof=1) / math.sqrt(dots.size)
    assert abs(dots.mean() - 1.0) <= 3 * se + 1e-12


def test_sign_pattern_uniform():
    _, sigma, _ = l1_sphere_batch(4, 20_000, np.random.default_rng(2))
    frac = (sigma > 0).mean(axis=0)
    assert np.all(np.abs(frac - 0.5) <= 3 * math.sqrt(0.25 / 20_000))


@pytest.mark.parametrize("hits, total", [(0, 100), (50, 100), (100, 100), (3, 1000)])
def test_wilson_interval(hits, total):
    c, h = wilson_half_width(hits, total)
    z = 1.959963984540054
    p = hits / total
    # closed form of the score interval: roots of (p - q)^2 = z^2 q (1 - q) / n
    A = 1 + z * z / total
    B = -(2 * p + z * z / total)
    C = p * p
    disc = math.sqrt(max(B * B - 4 * A * C, 0.0))
    lo, hi = (-B - disc) / (2 * A), (-B + disc) / (2 * A)
    assert c - h == pytest.approx(lo, abs=1e-12)
    assert c + h == pytest.approx(hi, abs=1e-12)


def test_slab_zero_weight():
    est = slab_probability(np.zeros(50), 0.1, samples=2000)
    assert est.estimate == 0.0 and est.hits == 0


def test_slab_validation():
    with pytest.raises(ValueError):
        slab_probability(np.ones(5), 0.1, samples=999)
    with pytest.raises(ValueError):
        slab_probability(np.ones(5), 1.5)
    with pytest.raises(ValueError):
        slab_probability(np.ones(5), 0.1, d=6)


def test_slab_against_direct_loop():
    # independent estimate from single draws and a plain Python loop
    d, eps = 10, 0.2
    w = d * np.eye(d)[0]
    hits = 0
    N = 4000
    for seed in range(N):
        s = l1_sphere_sampler(d, seed)
        hits += 1 - eps <= w @ s.v <= 1
    direct = hits / N
    est = slab_probability(w, eps, samples=100_000, seed=0)
    se = math.sqrt(direct * (1 - direct) / N)
    assert abs(est.estimate - direct) <= 4 * se + est.half_width


def test_slab_thread_count_independent(monkeypatch):
    w = 20 * np.eye(20)[0]
    monkeypatch.setenv("RELUFORGE_THREADS", "1")
    one = slab_probability(w, 0.05, samples=20_000, seed=3)
    monkeypatch.setenv("RELUFORGE_THREADS", "4")
    four = slab_probability(w, 0.05, samples=20_000, seed=3)
    assert one == four


def test_thread_env_validation(monkeypatch):
    monkeypatch.setenv("RELUFORGE_THREADS", "zero")
    with pytest.raises(ValueError):
        _parallel.max_workers()
    monkeypatch.setenv("RELUFORGE_THREADS", "0")
    with pytest.raises(ValueError):
        _parallel.max_workers()


def test_slab_interval_contains_estimate():
    est = slab_probability(30 * np.eye(30)[0], 0.05, samples=20_000, seed=1)
    lo, hi = est.interval
    assert lo <= est.estimate <= hi
    assert est.samples == 20_000
