"""Shifted Legendre polynomials, Fourier-Legendre coefficients and the
piecewise-linear approximation lower bounds built on them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .quadrature import gauss_legendre_rule, integrate

__all__ = [
    "MAX_DEGREE",
    "STRONG_CONVEXITY_CONSTANT",
    "BoundUnderflowWarning",
    "ShiftedLegendre",
    "LegendreReport",
    "legendre_monomial",
    "shifted_legendre",
    "fl_coefficient",
    "fl_coefficients",
    "l2_norm_sq",
    "linear_fit_error",
    "linear_fit_error_from_moments",
    "legendre_report",
    "quad_lower_bound",
    "strongly_convex_lower_bound",
    "a2_lower_bound",
    "c2_lower_bound",
    "partition_power_bound",
    "min_width_for_error",
    "circuit_size_estimate",
]

MAX_DEGREE = 30
STRONG_CONVEXITY_CONSTANT = 5 / 4096


class BoundUnderflowWarning(RuntimeWarning):
    """A lower bound fell below the float64 range and was reported as 0."""


@lru_cache(maxsize=None)
def legendre_monomial(i: int) -> tuple[Fraction, ...]:
    """Exact ascending monomial coefficients of P_i from Rodrigues' formula."""
    if not 0 <= i <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {i}")
    # (x^2 - 1)^i = sum_k C(i,k) (-1)^(i-k) x^(2k); differentiate i times
    coef = [Fraction(0)] * (i + 1)
    for k in range(i + 1):
        power = 2 * k
        if power < i:
            continue
        c = comb(i, k) * (-1) ** (i - k) * factorial(power) // factorial(power - i)
        coef[power - i] += Fraction(c)
    scale = Fraction(1, 2**i * factorial(i))
    return tuple(c * scale for c in coef)


@dataclass(frozen=True)
class ShiftedLegendre:
    """P_i rescaled to [a, a + length]."""

    degree: int
    a: float
    length: float

    @property
    def reference_coefficients(self) -> np.ndarray:
        return np.array([float(c) for c in legendre_monomial(self.degree)])

    @property
    def coefficients(self) -> np.ndarray:
        """Ascending monomial coefficients in the shifted variable (exact, rounded once)."""
        a = Fraction(self.a)
        ell = Fraction(self.length)
        # x = (2/ell) t - (2a/ell + 1)
        slope = 2 / ell
        offset = -(2 * a / ell + 1)
        out = [Fraction(0)] * (self.degree + 1)
        for k, c in enumerate(legendre_monomial(self.degree)):
            if c == 0:
                continue
            for j in range(k + 1):
                out[j] += c * comb(k, j) * slope**j * offset ** (k - j)
        return np.array([float(c) for c in out])

    def to_reference(self, t):
        return (2.0 / self.length) * (np.asarray(t, dtype=np.float64) - self.a) - 1.0

    def __call__(self, t):
        # Clenshaw in the Legendre basis; the monomial form loses ~1e-10 at degree 20
        basis = np.zeros(self.degree + 1)
        basis[-1] = 1.0
        return np.polynomial.legendre.legval(self.to_reference(t), basis)


def shifted_legendre(i: int, a: float, length: float) -> ShiftedLegendre:
    if not 0 <= i <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {i}")
    if not length > 0:
        raise ValueError(f"interval length must be positive, got {length}")
    return ShiftedLegendre(i, float(a), float(length))


def _as_polynomial(f):
    if isinstance(f, np.polynomial.Polynomial):
        return f.convert(kind=np.polynomial.Polynomial)
    return None


def _exact_poly_integral(poly: np.polynomial.Polynomial, p: ShiftedLegendre) -> float:
    deg = p.degree + poly.degree()
    nodes, weights = gauss_legendre_rule(max(1, deg // 2 + 1))
    t = p.a + 0.5 * p.length * (nodes + 1.0)
    return 0.5 * p.length * float(weights @ (p(t) * poly(t)))


def fl_coefficient(f, i: int, a: float, length: float, *, rtol: float = 1e-10) -> float:
    """Fourier-Legendre coefficient (2i+1)/length * integral of P~_i f over [a, a+length].

    ``f`` is a vectorized callable, or a ``numpy.polynomial.Polynomial`` which
    takes an exact Gauss rule instead of adaptive quadrature.
    """
    p = shifted_legendre(i, a, length)
    poly = _as_polynomial(f)
    if poly is not None:
        integral = _exact_poly_integral(poly, p)
    else:
        integral = integrate(lambda t: p(t) * f(t), p.a, p.a + p.length, rtol=rtol)
    return (2 * i + 1) / p.length * integral


def fl_coefficients(f, K: int, a: float, length: float, *, rtol: float = 1e-10) -> np.ndarray:
    return np.array([fl_coefficient(f, i, a, length, rtol=rtol) for i in range(K + 1)])


def l2_norm_sq(f, a: float, length: float, *, rtol: float = 1e-10) -> float:
    poly = _as_polynomial(f)
    if poly is not None:
        sq = poly * poly
        anti = sq.integ()
        return float(anti(a + length) - anti(a))
    return integrate(lambda t: np.asarray(f(t)) ** 2, a, a + length, rtol=rtol)


def linear_fit_error(f, a: float, length: float, *, rtol: float = 1e-10) -> float:
    """Squared L2 error of the best linear fit on [a, a+length], in Parseval form."""
    a0 = fl_coefficient(f, 0, a, length, rtol=rtol)
    a1 = fl_coefficient(f, 1, a, length, rtol=rtol)
    err = l2_norm_sq(f, a, length, rtol=rtol) - length * (a0 * a0 + a1 * a1 / 3.0)
    return max(err, 0.0)


def linear_fit_error_from_moments(s0, s1c, s2, length):
    """Same quantity from raw moments, vectorized.

    s0 = int f, s1c = int (t - midpoint) f, s2 = int f^2 over an interval of
    the given length. Then a0 = s0/length and a1 = 6 s1c / length^2.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    length = np.asarray(length, dtype=np.float64)
    return np.maximum(s2 - s0 * s0 / length - 12.0 * np.asarray(s1c) ** 2 / length**3, 0.0)


@dataclass(frozen=True)
class LegendreReport:
    interval: tuple[float, float]
    coefficients: np.ndarray
    norm_sq: float
    linear_fit_error: float
    tail_estimate: float  # Parseval residual after the last coefficient

    def parseval_residuals(self) -> np.ndarray:
        """Residual ||f||^2 - length * sum_{i<=K} a_i^2/(2i+1) for every K."""
        length = self.interval[1] - self.interval[0]
        i = np.arange(len(self.coefficients))
        partial = np.cumsum(self.coefficients**2 / (2 * i + 1)) * length
        return self.norm_sq - partial


def legendre_report(f, a: float, length: float, K: int = 20, *, rtol: float = 1e-12) -> LegendreReport:
    if K < 1:
        raise ValueError("need at least the linear coefficients (K >= 1)")
    coef = fl_coefficients(f, K, a, length, rtol=rtol)
    norm_sq = l2_norm_sq(f, a, length, rtol=rtol)
    i = np.arange(K + 1)
    tail = norm_sq - length * float(np.sum(coef**2 / (2 * i + 1)))
    lin = max(norm_sq - length * (coef[0] ** 2 + coef[1] ** 2 / 3.0), 0.0)
    return LegendreReport((a, a + length), coef, norm_sq, lin, tail)


# --- closed-form bounds -------------------------------------------------------------


def quad_lower_bound(p2: float, n: int) -> float:
    """Error floor for any n-piece fit of a quadratic with leading coefficient p2 on [0,1]."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return p2 * p2 / (180.0 * n**4)


def strongly_convex_lower_bound(lam: float, n: int) -> float:
    if lam < 0 or n < 1:
        raise ValueError("need lam >= 0 and n >= 1")
    return STRONG_CONVEXITY_CONSTANT * lam * lam / n**4


def a2_lower_bound(lam: float, length: float) -> float:
    """Floor on the second Fourier-Legendre coefficient of a lam-strongly convex f."""
    return 5.0 * lam * length * length / 64.0


def c2_lower_bound(lam: float, sigma_lam: float, m: int, l: int) -> float:
    """Error floor for a depth-l, width-m ReLU network; sigma_lam is caller supplied.

    Computed in log space; a result below the float64 range is returned as 0.0
    with a BoundUnderflowWarning.
    """
    if lam < 0 or not 0.0 <= sigma_lam <= 1.0 or m < 1 or l < 1:
        raise ValueError("need lam >= 0, sigma_lam in [0, 1], m >= 1, l >= 1")
    if lam == 0 or sigma_lam == 0:
        return 0.0
    log_val = (
        math.log(STRONG_CONVEXITY_CONSTANT)
        + 2 * math.log(lam)
        + 5 * math.log(sigma_lam)
        - 4 * l * math.log(2 * m)
    )
    value = math.exp(log_val) if log_val > -745 else 0.0
    if value == 0.0:
        warnings.warn(
            f"bound underflows float64 (log value {log_val:.1f}); reporting 0",
            BoundUnderflowWarning,
            stacklevel=2,
        )
    return value


def partition_power_bound(lengths, p: float = 5.0) -> float:
    """Sum of lengths**p for a partition of [0,1]; checks it is at least n^(1-p)."""
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.size == 0 or np.any(lengths <= 0):
        raise ValueError("lengths must be positive")
    if abs(lengths.sum() - 1.0) > 1e-9:
        raise ValueError(f"lengths must sum to 1, got {lengths.sum()!r}")
    total = float(np.sum(lengths**p))
    floor = float(lengths.size) ** (1.0 - p)
    assert total >= floor * (1 - 1e-12), (total, floor)
    return total


def min_width_for_error(lam: float, sigma_lam: float, l: int, eps: float) -> float:
    """Smallest width m at depth l not ruled out by the C^2 error floor for target eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = STRONG_CONVEXITY_CONSTANT * lam * lam * sigma_lam**5
    if c <= eps:
        return 1.0
    return max(1.0, 0.5 * (c / eps) ** (1.0 / (4 * l)))


def circuit_size_estimate(t: int, M: float, eps: float) -> float:
    """t log2(1/eps) + t^2 log2(M): the compiled-circuit size scale, constant omitted."""
    return t * math.log2(1.0 / eps) + t * t * math.log2(max(M, 2.0))
