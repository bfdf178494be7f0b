"""Explicit ReLU constructions: triangle waves, bit extraction, multiplication,
exact adders, the ball indicator and exact L1-radial networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import Layer, Network, affine_pre, parallel, propagate_pad, stack

__all__ = [
    "DEFAULT_MAX_BITS",
    "MultiplierPlan",
    "RadialPWL",
    "triangle_wave",
    "soft_threshold",
    "bit_extractor",
    "plan_multiplier",
    "build_multiplier",
    "multiplier",
    "square",
    "affine_adder",
    "ball_indicator",
    "ball_knots",
    "l1_radial",
    "multiplier_width_bound",
    "multiplier_depth_bound",
]

DEFAULT_MAX_BITS = 48
_EPS = 2.0**-52


def _phi() -> Network:
    return Network.from_arrays([[[2.0], [4.0]], [[1.0, -1.0]]], [[0.0, -2.0], [0.0]])


def triangle_wave(i: int) -> Network:
    """phi^i with phi(x) = [2x]+ - [4x-2]+; depth i+1, width 2."""
    if int(i) != i or i < 1:
        raise ValueError(f"triangle wave order must be a positive integer, got {i}")
    net = _phi()
    for _ in range(int(i) - 1):
        net = stack(net, _phi())
    return net


def soft_threshold(delta: float) -> Network:
    """Ramp from 0 at 0.5 - delta to 1 at 0.5 + delta, as a difference of two ReLUs."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    g = 1.0 / (2.0 * delta)
    c = -1.0 / (4.0 * delta)
    return Network.from_arrays([[[g], [g]], [[1.0, -1.0]]], [[c + 0.5, c - 0.5], [0.0]])


def bit_extractor(i: int, delta: float) -> Network:
    """i-th binary digit of x in [0,1) away from the switch points j / 2^i; depth i+2, width 2."""
    wave = affine_pre(triangle_wave(i), [[1.0]], [-(2.0 ** (-i - 1))])
    return stack(wave, soft_threshold(delta))


def multiplier_width_bound(M: float, eps: float) -> int:
    return 4 * math.ceil(math.log2(M / eps)) + 13


def multiplier_depth_bound(M: float, eps: float) -> int:
    return math.ceil(2 * math.log2(M / eps)) + 9


@dataclass(frozen=True)
class MultiplierPlan:
    """Parameters of a multiplier network and the inputs it is not accurate on.

    x is mapped to x'' = 1/3 + s x / M; k bits of x'' are extracted, y is
    mapped to y'' = (y + M) / (2M), and the output is
    (M/s)(sum_i 2^-i b_i + c)(2M y'' - M) with c = 2^-(k+1) - 1/3.
    """

    M: float
    eps: float
    k: int
    delta: float
    guaranteed: bool = True

    @property
    def s(self) -> float:
        return 1.0 / 3.0 - 2.0 ** (-self.k - 2)

    @property
    def c(self) -> float:
        return 2.0 ** (-self.k - 1) - 1.0 / 3.0

    @property
    def truncation_error(self) -> float:
        """Sup error outside the bad set, from truncating x'' to k bits."""
        return self.M * self.M / self.s * 2.0 ** (-self.k - 1)

    @property
    def bad_set_error(self) -> float:
        """Bound on |net - xy| anywhere in [-M, M]^2, bad set included."""
        # with fractional bits b_i in [0, 1] each product neuron stays in [0, 2^-i b_i y''],
        # so |net| <= (M^2/s)(S + |c|) with S < 1
        return self.M * self.M * (1.0 + (1.0 + abs(self.c)) / self.s)

    def guard(self, i: int) -> float:
        return 64.0 * _EPS * 2.0**i

    @property
    def bad_measure(self) -> float:
        """Upper bound on the fraction of x in [-M, M] that falls in the bad set."""
        return min(1.0, sum(2.0 * (self.delta + self.guard(i)) for i in range(1, self.k + 1)) / (2.0 * self.s))

    def mapped(self, x) -> np.ndarray:
        return 1.0 / 3.0 + self.s * np.asarray(x, dtype=np.float64) / self.M

    def bad_mask(self, x) -> np.ndarray:
        """True where some bit extractor sits inside its delta band (plus a rounding guard)."""
        xm = self.mapped(x)
        bad = np.zeros(np.shape(xm), dtype=bool)
        for i in range(1, self.k + 1):
            f = xm * 2.0**i
            bad |= np.abs(f - np.round(f)) < self.delta + self.guard(i)
        return bad


def plan_multiplier(
    M: float,
    eps: float,
    *,
    delta: float | None = None,
    bits: int | None = None,
    max_bits: int = DEFAULT_MAX_BITS,
) -> MultiplierPlan:
    if not (M > 0 and eps > 0 and math.isfinite(M) and math.isfinite(eps)):
        raise ValueError(f"need M > 0 and eps > 0, got M={M}, eps={eps}")
    if eps >= M:
        raise ValueError(f"eps must be below M (got eps={eps}, M={M})")
    if bits is None:
        k = math.ceil(2.0 * math.log2(8.0 * M / eps))
    else:
        if int(bits) != bits or bits < 1:
            raise ValueError(f"bits must be a positive integer, got {bits}")
        k = int(bits)
    if k > max_bits:
        raise ValueError(f"{k} bits needed, above the cap of {max_bits}; raise max_bits or eps")
    if delta is None:
        # eps / (8 2^k M), raised to a float64 floor: saturated thresholds carry
        # rounding of order ulp(1/delta), which the output weights scale by ~M^2
        floor = 16.0 * M * M * k * _EPS / eps
        target = max(eps / (8.0 * 2.0**k * M), floor)
        delta = 2.0 ** math.ceil(math.log2(target))
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta > 2.0**-4:
        raise ValueError(f"delta={delta} is too wide for bit extraction; eps is too large for M")
    plan = MultiplierPlan(float(M), float(eps), k, float(delta), bits is None)
    if plan.bad_measure > 0.25:
        raise ValueError(
            f"{k} bits are beyond float64 resolution (bad set would cover up to "
            f"{plan.bad_measure:.0%} of inputs); use a larger eps"
        )
    if plan.guaranteed and plan.truncation_error > eps / 2:
        raise ValueError(f"eps={eps} is too large relative to M={M} for the bit budget")
    return plan


def _multiplier_from_plan(plan: MultiplierPlan) -> Network:
    M, k, s, c = plan.M, plan.k, plan.s, plan.c
    depth = k + 2
    parts = []
    for i in range(1, k + 1):
        ext = affine_pre(bit_extractor(i, plan.delta), [[s / M, 0.0]], [1.0 / 3.0])
        parts.append(propagate_pad(ext, depth, nonnegative=True))
    y_net = Network.from_arrays([[[0.0, 0.5 / M]], [[1.0]]], [[0.5], [0.0]])
    parts.append(propagate_pad(y_net, depth, nonnegative=True))
    body = parallel(parts)

    # head: k product neurons, S = sum 2^-i b_i, [y'']+, and the constant [1]+
    pw = 2.0 ** -np.arange(1, k + 1)
    hidden_w = np.zeros((k + 3, k + 1))
    hidden_b = np.zeros(k + 3)
    hidden_w[:k, :k] = np.eye(k)
    hidden_w[:k, k] = pw
    hidden_b[:k] = -1.0
    hidden_w[k, :k] = pw
    hidden_w[k + 1, k] = 1.0
    hidden_b[k + 2] = 1.0
    scale = M * M / s
    out_w = np.concatenate([2.0 * scale * np.ones(k), [-scale, 2.0 * scale * c, -scale * c]])
    head = Network((Layer(hidden_w, hidden_b, True), Layer(out_w[None, :], np.zeros(1), False)))
    return stack(body, head)


def build_multiplier(M: float, eps: float, **kwargs) -> tuple[Network, MultiplierPlan]:
    plan = plan_multiplier(M, eps, **kwargs)
    net = _multiplier_from_plan(plan)
    assert net.width == 2 * plan.k + 1 and net.depth == plan.k + 3
    if plan.guaranteed:
        assert net.width <= multiplier_width_bound(M, eps), (net.width, M, eps)
        assert net.depth <= multiplier_depth_bound(M, eps), (net.depth, M, eps)
    return net, plan


def multiplier(M: float, eps: float, **kwargs) -> Network:
    """Two-input network approximating x*y on [-M, M]^2 within eps off the bad set.

    Keyword arguments (``delta``, ``bits``, ``max_bits``) go to ``plan_multiplier``.
    Passing ``bits`` overrides the bit count and drops the eps guarantee.
    """
    return build_multiplier(M, eps, **kwargs)[0]


def square(M: float, eps: float, **kwargs) -> Network:
    """x -> x*x on [-M, M], by feeding x to both multiplier ports."""
    return affine_pre(multiplier(M, eps, **kwargs), [[1.0], [1.0]])


def affine_adder(alpha: float, beta: float) -> Network:
    """Exact alpha*x + beta*y with one hidden layer of four neurons."""
    return Network.from_arrays(
        [[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [[alpha, -alpha, beta, -beta]]],
        [np.zeros(4), [0.0]],
    )


def ball_knots(d: int, delta: float) -> np.ndarray:
    """Uniform knots on [-2, 2] for interpolating min(x^2, 4) per coordinate."""
    w = max(2, math.floor(8 * d / delta))
    return np.linspace(-2.0, 2.0, w)


def ball_indicator(d: int, delta: float, shell_eps: float, *, inside: bool = False) -> Network:
    """Three-layer approximation of the indicator of ||x||_2 > 1.

    Layer 1 interpolates min(x_i^2, 4) per coordinate on uniform knots; layer 2
    applies the ramp [z+1/2]+ - [z-1/2]+ to (sum - 1)/shell_eps. The output is
    about 1 outside the unit ball; ``inside=True`` flips it to the usual
    inside indicator.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not 0 < delta:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 2 * delta < shell_eps < 1:
        raise ValueError(f"need 2*delta < shell_eps < 1, got delta={delta}, shell_eps={shell_eps}")
    d = int(d)
    t = ball_knots(d, delta)
    w = t.size
    slopes = t[:-1] + t[1:]  # chord slopes of x^2 between knots
    beta = np.diff(np.concatenate([[0.0], slopes, [0.0]]))
    W1 = np.kron(np.eye(d), np.ones((w, 1)))
    b1 = -np.tile(t, d)
    c_mu = 1.0 / shell_eps
    row = c_mu * np.tile(beta, d)
    base = c_mu * (4.0 * d - 1.0)  # each coordinate's interpolant starts at 4
    sign = -1.0 if inside else 1.0
    W2 = np.vstack([sign * row, sign * row])
    b2 = np.array([sign * base + 0.5, sign * base - 0.5])
    net = Network.from_arrays([W1, W2, [[1.0, -1.0]]], [b1, b2, [0.0]])
    assert net.depth == 3 and net.width <= max(8 * d * d / delta, 2)
    return net


@dataclass(frozen=True)
class RadialPWL:
    """f(z) = c + a z + sum_j beta_j [z - t_j]+ for z >= 0."""

    c: float = 0.0
    a: float = 0.0
    knots: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jumps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.knots, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.jumps, dtype=np.float64))
        if t.shape != b.shape:
            raise ValueError("one slope jump per knot is required")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise ValueError("knots must be nonnegative and strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(b)) and math.isfinite(self.a) and math.isfinite(self.c)):
            raise ValueError("RadialPWL parameters must be finite")
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "jumps", b)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return self.c + self.a * z + np.maximum(z[..., None] - self.knots, 0.0) @ self.jumps


def l1_radial(f: RadialPWL, d: int) -> Network:
    """Exact 3-layer network for x -> f(||x||_1); first hidden width 2d."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    d = int(d)
    eye = np.eye(d)
    W1 = np.vstack([eye, -eye])
    m = f.knots.size
    rows = m + 1 + (1 if f.c != 0.0 else 0)
    W2 = np.zeros((rows, 2 * d))
    W2[: m + 1] = 1.0
    b2 = np.zeros(rows)
    b2[:m] = -f.knots
    out = list(f.jumps) + [f.a]
    if f.c != 0.0:
        b2[-1] = 1.0
        out.append(f.c)
    return Network.from_arrays([W1, W2, [out]], [np.zeros(2 * d), b2, [0.0]])
