"""Exact line restrictions of ReLU networks, region counting, and the DP oracle
for optimal n-piece linear fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .network import Network
from .quadrature import fixed_panels, integrate

__all__ = [
    "LineRestriction",
    "PiecewiseLinear1D",
    "OracleResult",
    "restrict_to_line",
    "segment_count",
    "region_bound",
    "region_bound_capped",
    "l2_error",
    "optimal_pwl_oracle",
]

ROOT_TIE = 0.0
NODE_MERGE_TOL = 1e-13


@dataclass(frozen=True)
class LineRestriction:
    """The line t -> u + t v for t in [a, b]."""

    u: np.ndarray
    v: np.ndarray
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=np.float64))
        v = np.atleast_1d(np.asarray(self.v, dtype=np.float64))
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be vectors of the same length")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, got norm {np.linalg.norm(v)!r}")
        if not self.b > self.a:
            raise ValueError("line range must satisfy a < b")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def through(cls, p, q) -> "LineRestriction":
        """Segment from p to q, parameterized by arc length."""
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        q = np.atleast_1d(np.asarray(q, dtype=np.float64))
        length = float(np.linalg.norm(q - p))
        if length == 0.0:
            raise ValueError("p and q coincide")
        return cls(p, (q - p) / length, 0.0, length)

    def points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.u + t[..., None] * self.v


@dataclass(frozen=True)
class PiecewiseLinear1D:
    """Piecewise-linear function on [a, b].

    Segment k covers [starts[k], starts[k+1]] and equals
    ``offsets[k] + slopes[k] * (t - starts[k])``; the value is anchored at the
    left end of each segment to keep steep pieces accurate.
    """

    domain: tuple[float, float]
    breakpoints: np.ndarray
    slopes: np.ndarray
    offsets: np.ndarray
    continuous: bool = True

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        sl = np.asarray(self.slopes, dtype=np.float64)
        off = np.asarray(self.offsets, dtype=np.float64)
        a, b = map(float, self.domain)
        if sl.shape != off.shape or sl.shape != (bp.size + 1,):
            raise ValueError("need exactly one slope and offset per segment")
        if bp.size and (np.any(np.diff(bp) <= 0) or bp[0] <= a or bp[-1] >= b):
            raise ValueError("breakpoints must be strictly increasing and interior")
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "offsets", off)

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[self.domain[0]], self.breakpoints])

    @property
    def ends(self) -> np.ndarray:
        return np.concatenate([self.breakpoints, [self.domain[1]]])

    @property
    def intercepts(self) -> np.ndarray:
        return self.offsets - self.slopes * self.starts

    @property
    def n_segments(self) -> int:
        return self.slopes.size

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.breakpoints, t, side="right")
        return self.offsets[k] + self.slopes[k] * (t - self.starts[k])

    def jumps(self) -> np.ndarray:
        """Right-limit minus left-limit at each breakpoint."""
        left = self.offsets[:-1] + self.slopes[:-1] * (self.breakpoints - self.starts[:-1])
        return self.offsets[1:] - left


def _from_nodes(t: np.ndarray, vals: np.ndarray) -> PiecewiseLinear1D:
    """Continuous PWL through (t, vals) with collinear nodes merged.

    Merging tests values, not slopes: on very short, very steep segments the
    slopes themselves carry large rounding error.
    """
    tol = NODE_MERGE_TOL * max(1.0, float(np.abs(vals).max()))
    idx = kernels.simplify_nodes(np.ascontiguousarray(t), np.ascontiguousarray(vals), tol)
    nt = t[idx]
    nv = vals[idx]
    return PiecewiseLinear1D(
        (float(t[0]), float(t[-1])), nt[1:-1], np.diff(nv) / np.diff(nt), nv[:-1], True
    )


def _split_at_roots(t: np.ndarray, pre: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Insert the sign-change roots of every column of ``pre`` into the node set.

    A root rarely falls on a float, and forcing the neuron to zero at the
    rounded location would misstate a steep neuron over the whole neighbouring
    segment. Instead each root is bracketed by its adjacent floats and every
    value is interpolated at the node actually used, so any error stays inside
    a one-ulp interval.
    """
    lo, hi = pre[:-1], pre[1:]
    seg, col = np.nonzero(((lo < 0) & (hi > 0)) | ((lo > 0) & (hi < 0)))
    if seg.size == 0:
        return t, pre
    theta = lo[seg, col] / (lo[seg, col] - hi[seg, col])
    inner = (theta > ROOT_TIE) & (theta < 1.0 - ROOT_TIE)
    seg, theta = seg[inner], theta[inner]
    if seg.size == 0:
        return t, pre
    t0, t1 = t[seg], t[seg + 1]
    root = t0 + theta * (t1 - t0)
    cand_t = np.concatenate([np.nextafter(root, -np.inf), root, np.nextafter(root, np.inf)])
    cand_s = np.tile(seg, 3)
    ok = (cand_t > t[cand_s]) & (cand_t < t[cand_s + 1])
    cand_t, cand_s = cand_t[ok], cand_s[ok]
    w = (cand_t - t[cand_s]) / (t[cand_s + 1] - t[cand_s])
    cand_v = pre[cand_s] + w[:, None] * (pre[cand_s + 1] - pre[cand_s])
    all_t = np.concatenate([t, cand_t])
    all_v = np.concatenate([pre, cand_v])
    order = np.argsort(all_t, kind="stable")
    all_t, all_v = all_t[order], all_v[order]
    keep = np.concatenate([[True], np.diff(all_t) > 0])
    return all_t[keep], all_v[keep]


def restrict_to_line(net: Network, line: LineRestriction) -> PiecewiseLinear1D:
    """Exact restriction t -> net(u + t v) of a scalar-output network.

    Every neuron is piecewise linear in t on a common node set; each ReLU layer
    adds the analytic zero crossings of its pre-activations as new nodes.
    """
    if net.input_dim != line.u.size:
        raise ValueError(f"line lives in R^{line.u.size}, network expects {net.input_dim} inputs")
    if net.output_dim != 1:
        raise ValueError("line restriction needs a scalar-output network")
    t = np.array([line.a, line.b])
    h = line.points(t)
    for layer in net.layers:
        pre = h @ layer.weight.T + layer.bias
        if layer.relu:
            t, pre = _split_at_roots(t, pre)
            h = np.maximum(pre, 0.0)
        else:
            h = pre
    return _from_nodes(t, h[:, 0])


def segment_count(pwl: PiecewiseLinear1D) -> int:
    return pwl.n_segments


def region_bound(m: int, l: int) -> int:
    """(2m)^l as an exact integer."""
    if m < 1 or l < 1:
        raise ValueError("need m >= 1 and l >= 1")
    return (2 * m) ** l


def region_bound_capped(m: int, l: int, cap: int = 2**63 - 1) -> tuple[int, bool]:
    """(2m)^l saturated at ``cap``; the flag reports saturation."""
    if m < 1 or l < 1:
        raise ValueError("need m >= 1 and l >= 1")
    if l * math.log2(2 * m) > cap.bit_length() + 1:
        return cap, True
    value = (2 * m) ** l
    return (cap, True) if value > cap else (value, False)


def l2_error(pwl: PiecewiseLinear1D, f, interval=None, *, rtol: float = 1e-10, normalized: bool = False) -> float:
    """Integral of (f - pwl)^2 over ``interval`` (default: the whole domain).

    Lebesgue measure by default; ``normalized=True`` divides by the interval
    length, i.e. the mean under the uniform density.
    """
    a, b = pwl.domain if interval is None else map(float, interval)
    if a < pwl.domain[0] or b > pwl.domain[1] or not b > a:
        raise ValueError(f"interval [{a}, {b}] is not inside the domain {pwl.domain}")
    edges = np.concatenate([[a], pwl.breakpoints[(pwl.breakpoints > a) & (pwl.breakpoints < b)], [b]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = int(np.searchsorted(pwl.breakpoints, 0.5 * (lo + hi), side="right"))
        s, o, st = pwl.slopes[k], pwl.offsets[k], pwl.starts[k]
        total += integrate(lambda x: (np.asarray(f(x)) - (o + s * (x - st))) ** 2, lo, hi, rtol=rtol, atol=1e-300)
    return total / (b - a) if normalized else total


@dataclass(frozen=True)
class OracleResult:
    error: float
    breakpoints: np.ndarray
    fit: PiecewiseLinear1D
    pieces: int
    grid_resolution: int
    backend: str


def _grid_moments(f, edges: np.ndarray):
    c0 = fixed_panels(f, edges)
    c1 = fixed_panels(lambda x: x * f(x), edges)
    c2 = fixed_panels(lambda x: np.asarray(f(x)) ** 2, edges)
    z = np.zeros(1)
    return (np.concatenate([z, np.cumsum(c0)]), np.concatenate([z, np.cumsum(c1)]), np.concatenate([z, np.cumsum(c2)]))


def _continuous_fit(f, knots: np.ndarray) -> PiecewiseLinear1D:
    """L2-optimal continuous PWL with the given knots (hat-function least squares)."""
    K = knots.size
    h = np.diff(knots)
    gram = np.zeros((K, K))
    rhs = np.zeros(K)
    for k in range(K - 1):
        gram[k, k] += h[k] / 3
        gram[k + 1, k + 1] += h[k] / 3
        gram[k, k + 1] += h[k] / 6
        gram[k + 1, k] += h[k] / 6
        lo, hi = knots[k], knots[k + 1]
        rhs[k] += integrate(lambda x: f(x) * (hi - x) / h[k], lo, hi)
        rhs[k + 1] += integrate(lambda x: f(x) * (x - lo) / h[k], lo, hi)
    coef = np.linalg.solve(gram, rhs)
    return PiecewiseLinear1D((knots[0], knots[-1]), knots[1:-1], np.diff(coef) / h, coef[:-1], True)


def optimal_pwl_oracle(
    f,
    n: int,
    grid_resolution: int,
    *,
    domain: tuple[float, float] = (0.0, 1.0),
    continuous: bool = False,
    backend: str | None = None,
) -> OracleResult:
    """Best fit by at most n linear pieces with knots on a uniform grid.

    Each piece is the L2-optimal line on its interval (pieces may jump at
    knots). The result is an upper bound on the infimum over all n-piece
    fits. Refining the grid (G -> 2G) can only lower it. With
    ``continuous=True`` the optimal partition is refitted by a continuous
    PWL and the error of that fit is reported.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > grid_resolution:
        raise ValueError(f"n = {n} exceeds the grid resolution {grid_resolution}")
    if grid_resolution < 10 * n:
        raise ValueError(f"grid resolution must be at least 10 n = {10 * n}")
    a, b = map(float, domain)
    if not b > a:
        raise ValueError("empty domain")
    name = kernels.BACKEND if backend is None else backend
    if name not in kernels.BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(kernels.BACKENDS)}")

    edges = np.linspace(a, b, grid_resolution + 1)
    P0, P1, P2 = _grid_moments(f, edges)
    D, A = kernels.BACKENDS[name](P0, P1, P2, edges, n)

    # at most n pieces; ties keep the smaller piece count
    r = int(np.argmin(D[1:, -1])) + 1
    error = float(D[r, -1])
    cuts = [grid_resolution]
    j = grid_resolution
    for rr in range(r, 0, -1):
        j = int(A[rr, j])
        cuts.append(j)
    idx = np.asarray(cuts[::-1])
    knots = edges[idx]

    if continuous:
        fit = _continuous_fit(f, knots)
        error = l2_error(fit, f)
    else:
        p, q = idx[:-1], idx[1:]
        ell = knots[1:] - knots[:-1]
        s0 = P0[q] - P0[p]
        mid = 0.5 * (knots[1:] + knots[:-1])
        s1c = (P1[q] - P1[p]) - mid * s0
        slopes = 12.0 * s1c / ell**3
        offsets = s0 / ell - 0.5 * slopes * ell
        fit = PiecewiseLinear1D((a, b), knots[1:-1], slopes, offsets, False)
    return OracleResult(error, knots[1:-1], fit, r, grid_resolution, name)
