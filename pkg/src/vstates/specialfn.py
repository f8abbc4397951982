"""Gamma-family helpers, the Gauss hypergeometric series and the spectral
coefficients Theta_j, Lambda_j(b) of the gSQG linearization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

B_MAX = 0.97
_ALPHA_ONE_STEP = 1e-6


class SpecialFunctionError(ValueError):
    """Raised on pole inputs, domain violations or series non-convergence."""


@dataclass(frozen=True)
class AlphaKind:
    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha < 2.0):
            raise SpecialFunctionError(f"alpha must lie in [0, 2), got {self.alpha}")

    @property
    def tag(self) -> str:
        if self.alpha == 0.0:
            return "zero"
        if self.alpha < 1.0:
            return "sub-critical"
        if self.alpha == 1.0:
            return "critical"
        return "super-critical"


def gamma_fn(x: float) -> float:
    """Euler Gamma. Backed by the C library routine (reflection included)."""
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise SpecialFunctionError(f"Gamma has a pole at {x}")
    return math.gamma(x)


def _gamma_ratio(p: float, q: float) -> float:
    # Gamma(p)/Gamma(q) for positive p, q without overflow
    return math.exp(math.lgamma(p) - math.lgamma(q))


def pochhammer(x: float, j: int) -> float:
    if j < 0:
        raise SpecialFunctionError("pochhammer needs j >= 0")
    out = 1.0
    for k in range(j):
        out *= x + k
    return out


def gauss_2f1(a: float, b: float, c: float, z: float, max_terms: int = 500_000) -> float:
    """Power series of 2F1(a, b; c; z) for 0 <= z < 1."""
    if c <= 0 and c == math.floor(c):
        raise SpecialFunctionError(f"2F1 undefined for c = {c}")
    if not (0.0 <= z < 1.0):
        raise SpecialFunctionError(f"2F1 series needs 0 <= z < 1, got {z}")
    if z == 0.0:
        return 1.0
    total = 1.0
    term = 1.0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        # only stop once the terms are shrinking geometrically
        ratio = abs((a + k + 1) * (b + k + 1) / ((c + k + 1) * (k + 2.0)) * z)
        if ratio < 1.0 and abs(term) < 1e-16 * abs(total) * (1.0 - ratio):
            return total
    raise SpecialFunctionError(
        f"2F1({a}, {b}; {c}; {z}) not converged after {max_terms} terms, last term {term:.3e}"
    )


def c_alpha(alpha: float) -> float:
    """Kernel constant C_alpha = Gamma(alpha/2) / (2^(1-alpha) Gamma(1 - alpha/2))."""
    if not (0.0 < alpha < 2.0):
        raise SpecialFunctionError(f"C_alpha needs 0 < alpha < 2, got {alpha}")
    return gamma_fn(alpha / 2) / (2.0 ** (1.0 - alpha) * gamma_fn(1.0 - alpha / 2))


def _theta_direct(alpha: float, j: int) -> float:
    pre = 2.0 ** (alpha - 1.0) * gamma_fn(1.0 - alpha) / gamma_fn(1.0 - alpha / 2) ** 2
    head = _gamma_ratio(1.0 + alpha / 2, 2.0 - alpha / 2)
    tail = _gamma_ratio(j + alpha / 2, 1.0 + j - alpha / 2)
    return pre * (head - tail)


def theta_coeff(alpha: float, j: int) -> float:
    """Self-interaction coefficient Theta_j; alpha = 1 is the two-sided limit."""
    if not (0.0 < alpha < 2.0):
        raise SpecialFunctionError(f"Theta_j needs 0 < alpha < 2, got {alpha}")
    if j < 1:
        raise SpecialFunctionError("Theta_j needs j >= 1")
    if j == 1:
        return 0.0
    if abs(alpha - 1.0) < 0.5 * _ALPHA_ONE_STEP:
        lo = _theta_direct(1.0 - _ALPHA_ONE_STEP, j)
        hi = _theta_direct(1.0 + _ALPHA_ONE_STEP, j)
        return 0.5 * (lo + hi)
    return _theta_direct(alpha, j)


def lambda_coeff(alpha: float, b: float, j: int) -> float:
    """Cross-interaction coefficient Lambda_j(b) through the 2F1 series."""
    if not (0.0 < alpha < 2.0):
        raise SpecialFunctionError(f"Lambda_j needs 0 < alpha < 2, got {alpha}")
    if not (0.0 < b < 1.0):
        raise SpecialFunctionError(f"Lambda_j needs 0 < b < 1, got {b}")
    if b > B_MAX:
        raise SpecialFunctionError(f"b = {b} exceeds the supported bound {B_MAX}")
    if j < 1:
        raise SpecialFunctionError("Lambda_j needs j >= 1")
    h = alpha / 2
    poch = 1.0
    for k in range(j):
        poch *= (h + k) / (k + 1.0)
    return c_alpha(alpha) * poch * b ** (j - 1) * gauss_2f1(h, j + h, j + 1.0, b * b)


def _hankel_pq(n: int, z: np.ndarray, terms: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Large-argument P, Q series so that J_n(z) ~ sqrt(2/(pi z)) (P cos chi - Q sin chi)."""
    mu = 4.0 * n * n
    z = np.asarray(z, dtype=float)
    p = np.ones_like(z)
    q = np.zeros_like(z)
    ak = np.ones_like(z)
    for k in range(1, 2 * terms):
        ak = ak * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            p = p + sign * ak
        else:
            q = q + sign * ak
    return p, q


def bessel_jn_asymptotic(n: int, z: float | np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    p, q = _hankel_pq(n, z)
    chi = z - n * np.pi / 2 - np.pi / 4
    return np.sqrt(2.0 / (np.pi * z)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_jn(n: int, z: float | np.ndarray) -> np.ndarray:
    """J_n: library series/recurrence for moderate z, Hankel form beyond."""
    z = np.asarray(z, dtype=float)
    switch = 25.0 + n * n
    small = special.jv(n, np.minimum(z, switch))
    large = bessel_jn_asymptotic(n, np.maximum(z, switch))
    return np.where(z <= switch, small, large)


def lambda_bessel_oracle(alpha: float, b: float, j: int, tail_tol: float = 1e-9) -> float:
    """Lambda_j(b) = (1/b) int_0^inf J_j(bt) J_j(t) t^(alpha-1) dt by quadrature.

    The head [0, T] is integrated panel by panel; the tail uses the Hankel
    expansion of both Bessel factors, which turns it into Fourier integrals of
    slowly varying amplitudes at frequencies 1 - b and 1 + b.
    """
    if not (0.0 < alpha < 2.0 and 0.0 < b < 1.0 and j >= 1):
        raise SpecialFunctionError("oracle needs 0 < alpha < 2, 0 < b < 1, j >= 1")
    T = (40.0 + 4.0 * j * j) / b

    def head(t: float) -> float:
        return t ** (alpha - 1.0) * special.jv(j, b * t) * special.jv(j, t)

    edges = np.linspace(0.0, T, int(np.ceil(T / 4.0)) + 1)
    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings on panels where the integrand is ~1e-17
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(head, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
            total += val

    phase = np.exp(-1j * (j * np.pi + np.pi / 2))

    def amplitude(t: float, which: str) -> complex:
        pb, qb = _hankel_pq(j, np.array([b * t]))
        p1, q1 = _hankel_pq(j, np.array([t]))
        u = complex(pb[0], qb[0])
        v = complex(p1[0], q1[0])
        base = t ** (alpha - 2.0) / (np.pi * np.sqrt(b))
        if which == "sum":
            return base * u * v * phase
        return base * np.conj(u) * v

    tail = 0.0
    for which, omega in (("sum", 1.0 + b), ("diff", 1.0 - b)):
        re, _ = integrate.quad(lambda t: amplitude(t, which).real, T, np.inf,
                               weight="cos", wvar=omega, limlst=200)
        im, _ = integrate.quad(lambda t: amplitude(t, which).imag, T, np.inf,
                               weight="sin", wvar=omega, limlst=200)
        tail += re - im

    # size of the first omitted Hankel term, integrated over one decay scale
    mu = 4.0 * j * j
    last = 1.0
    for k in range(1, 24):
        last *= abs(mu - (2 * k - 1) ** 2) / (k * 8.0 * b * T)
    bound = last * T ** (alpha - 1.0) * 2.0 / ((1.0 - b) * np.pi * np.sqrt(b))
    if bound > tail_tol:
        raise SpecialFunctionError(f"Bessel tail not converged: bound {bound:.2e}")
    return (total + tail) / b
