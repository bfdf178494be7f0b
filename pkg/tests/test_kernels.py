import os
import subprocess
import sys

import numpy as np
import pytest

from reluforge import kernels
from reluforge._dp_py import interval_costs

needs_cython = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled extension not built")


def _moments(rng, G):
    t = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, G - 1)]))
    vals = rng.normal(size=(G, 3))
    cells = np.diff(t)
    # moments of a piecewise-constant function on the cells
    c0 = vals[:, 0] * cells
    c1 = vals[:, 0] * (t[1:] ** 2 - t[:-1] ** 2) / 2
    c2 = vals[:, 0] ** 2 * cells
    cum = lambda c: np.concatenate([[0.0], np.cumsum(c)])  # noqa: E731
    return cum(c0), cum(c1), cum(c2), t


def test_backend_is_one_of_the_known_names():
    assert kernels.BACKEND in kernels.BACKENDS
    assert kernels.segmented_dp is kernels.BACKENDS[kernels.BACKEND]
    assert kernels.simplify_nodes is kernels.SIMPLIFIERS[kernels.BACKEND]


@pytest.mark.parametrize("G, n", [(1, 1), (5, 3), (30, 4), (64, 10)])
def test_python_dp_matches_bruteforce_recursion(rng, G, n):
    P0, P1, P2, t = _moments(rng, G)
    D, A = kernels.BACKENDS["python"](P0, P1, P2, t, n)
    ref = np.full((n + 1, G + 1), np.inf)
    ref[0, 0] = 0.0
    for j in range(1, G + 1):
        for r in range(1, n + 1):
            ref[r, j] = min(ref[r - 1, p] + interval_costs(P0, P1, P2, t, j)[p] for p in range(j))
    np.testing.assert_allclose(D, ref, rtol=1e-12, atol=1e-14)
    assert A[1, G] == 0


@needs_cython
@pytest.mark.parametrize("G, n", [(1, 1), (7, 7), (40, 5), (200, 12)])
def test_dp_backends_agree(rng, G, n):
    P0, P1, P2, t = _moments(rng, G)
    Dp, Ap = kernels.BACKENDS["python"](P0, P1, P2, t, n)
    Dc, Ac = kernels.BACKENDS["cython"](P0, P1, P2, t, n)
    np.testing.assert_allclose(Dc, Dp, rtol=1e-12, atol=1e-15)
    finite = np.isfinite(Dp)
    np.testing.assert_array_equal(np.asarray(Ac)[finite], np.asarray(Ap)[finite])


def _check_simplified(t, v, keep, tol):
    assert keep[0] == 0 and keep[-1] == t.size - 1
    assert np.all(np.diff(keep) > 0)
    chord = np.interp(t, t[keep], v[keep])
    assert np.max(np.abs(chord - v)) <= tol * (1 + 1e-9)


@pytest.mark.parametrize("backend", sorted(kernels.SIMPLIFIERS))
def test_simplify_keeps_kinks_and_drops_collinear_nodes(backend):
    simplify = kernels.SIMPLIFIERS[backend]
    t = np.linspace(0, 1, 101)
    v = np.abs(t - 0.3) + 2 * np.maximum(t - 0.71, 0)
    keep = simplify(t, v, 1e-12)
    assert t[keep].tolist() == pytest.approx([0.0, 0.3, 0.71, 1.0])
    _check_simplified(t, v, keep, 1e-12)


@pytest.mark.parametrize("backend", sorted(kernels.SIMPLIFIERS))
@pytest.mark.parametrize("tol", [0.0, 1e-6, 1e-2])
def test_simplify_error_bound_on_random_walks(rng, backend, tol):
    t = np.cumsum(rng.uniform(0.01, 1, 500))
    v = np.cumsum(rng.normal(size=500))
    keep = kernels.SIMPLIFIERS[backend](t, v, tol)
    _check_simplified(t, v, keep, tol)


@pytest.mark.parametrize("backend", sorted(kernels.SIMPLIFIERS))
def test_simplify_tiny_inputs(backend):
    simplify = kernels.SIMPLIFIERS[backend]
    assert simplify(np.array([0.0]), np.array([1.0]), 0.0).tolist() == [0]
    assert simplify(np.array([0.0, 1.0]), np.array([1.0, 2.0]), 0.0).tolist() == [0, 1]


@needs_cython
def test_simplify_backends_agree(rng):
    t = np.cumsum(rng.uniform(0.01, 1, 5000))
    v = np.cumsum(rng.normal(size=5000)) * (rng.uniform(size=5000) < 0.2)
    for tol in (0.0, 1e-9, 0.5):
        a = kernels.SIMPLIFIERS["python"](t, v, tol)
        b = kernels.SIMPLIFIERS["cython"](t, v, tol)
        np.testing.assert_array_equal(np.asarray(a), np.asarray(b))


@pytest.mark.parametrize("value, expected", [("1", "python"), ("true", "python"), ("", None)])
def test_env_var_forces_pure_python(value, expected):
    env = dict(os.environ, RELUFORGE_PURE_PYTHON=value)
    out = subprocess.run(
        [sys.executable, "-c", "from reluforge import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    ).stdout.strip()
    assert out == (expected or kernels.BACKEND)
