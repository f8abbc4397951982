"""Periodic quadrature on uniform grids.

Smooth periodic integrands use the trapezoid rule. The singular factor
(4 sin^2(y/2))^(-alpha/2), or log(1/(4 sin^2(y/2))) when alpha = 0, is applied
through its Fourier coefficients (product quadrature) so that the diagonal of
a boundary integral never has to be sampled pointwise.
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.special import roots_jacobi, roots_legendre

FloatArray = NDArray[np.float64]

CACHE_ENV = "VSTATES_CACHE_DIR"


class QuadratureError(RuntimeError):
    """Raised when a quadrature misses its accuracy target or budget."""


@dataclass(frozen=True)
class PeriodicGrid:
    size: int

    def __post_init__(self) -> None:
        if self.size < 4 or self.size % 2:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.size}")

    @property
    def nodes(self) -> FloatArray:
        return 2.0 * np.pi * np.arange(self.size) / self.size


@dataclass(frozen=True)
class SingularWeights:
    """Fourier-side weights w_m of the singular factor, numpy FFT ordering.

    For alpha >= 1 the mean w_0 is a Hadamard finite part (analytic
    continuation in alpha; the log-regularized value at alpha = 1). Only
    cofactors vanishing on the diagonal give regularization-free results
    there, which is the case for every boundary integral in this package.
    """

    alpha: float
    M: int
    weights: FloatArray

    def kernel_row(self) -> FloatArray:
        # W[k, l] = row[(k - l) mod M] is the product-quadrature matrix
        return np.fft.ifft(self.weights).real

    def matrix(self) -> FloatArray:
        row = self.kernel_row()
        idx = (np.arange(self.M)[:, None] - np.arange(self.M)[None, :]) % self.M
        return row[idx]


def mean_integral(values: Sequence[float] | FloatArray) -> float:
    return float(np.mean(np.asarray(values, dtype=float)))


def _mode_index(M: int) -> NDArray[np.int64]:
    return np.abs(np.fft.fftfreq(M, d=1.0 / M)).astype(np.int64)


def log_fourier_weights(M: int) -> SingularWeights:
    """Exact weights of log(1/(4 sin^2(y/2))): 1/|m| and 0 for m = 0."""
    PeriodicGrid(M)
    m = _mode_index(M).astype(float)
    w = np.zeros(M)
    w[m > 0] = 1.0 / m[m > 0]
    return SingularWeights(alpha=0.0, M=M, weights=w)


_GL = roots_legendre(24)


def _legendre_panels(func: Callable[[FloatArray], FloatArray], lo: float, hi: float,
                     panels: int) -> float:
    x, w = _GL
    edges = np.linspace(lo, hi, panels + 1)
    a = edges[:-1, None]
    h = (edges[1:] - edges[:-1])[:, None]
    pts = a + 0.5 * h * (x[None, :] + 1.0)
    return float(np.sum(0.5 * h * w[None, :] * func(pts)))


def _jacobi_head(func: Callable[[FloatArray], FloatArray], h: float, power: float,
                 n: int) -> float:
    # int_0^h y^power func(y) dy with func smooth
    x, w = roots_jacobi(n, 0.0, power)
    y = 0.5 * h * (x + 1.0)
    return float(np.sum(w * func(y)) * (0.5 * h) ** (power + 1.0))


def _sinc_log(y: FloatArray) -> FloatArray:
    # log(y / (2 sin(y/2))), accurate for small y
    return -np.log(np.sinc(y / (2.0 * np.pi)))


def _relative_weights(alpha: float, M: int, n: int) -> FloatArray:
    """(1/pi) int_0^pi (cos(m y) - 1)(2 sin(y/2))^(-alpha) dy for m = 0..M/2."""
    out = np.zeros(M // 2 + 1)
    for m in range(1, M // 2 + 1):
        panels = m + 8
        h = np.pi / panels

        def smooth(y: FloatArray, m: int = m) -> FloatArray:
            # (cos(my) - 1)/y^2 times (y / (2 sin(y/2)))^alpha
            return -2.0 * np.sinc(m * y / (2.0 * np.pi)) ** 2 * (m * m / 4.0) * np.exp(
                alpha * _sinc_log(y))

        def full(y: FloatArray, m: int = m) -> FloatArray:
            return (np.cos(m * y) - 1.0) * (2.0 * np.sin(y / 2.0)) ** (-alpha)

        head = _jacobi_head(smooth, h, 2.0 - alpha, n)
        body = _legendre_panels(full, h, np.pi, panels - 1)
        out[m] = (head + body) / np.pi
    return out


def _finite_part_mean(alpha: float, n: int) -> float:
    """Hadamard finite part of (1/pi) int_0^pi (2 sin(y/2))^(-alpha) dy."""
    panels = 8
    h = np.pi / panels

    def smooth(y: FloatArray) -> FloatArray:
        return np.expm1(alpha * _sinc_log(y)) / (y * y)

    def full(y: FloatArray) -> FloatArray:
        return (2.0 * np.sin(y / 2.0)) ** (-alpha) - y ** (-alpha)

    regular = _jacobi_head(smooth, h, 2.0 - alpha, n) + _legendre_panels(full, h, np.pi, panels - 1)
    if alpha == 1.0:
        power = math.log(math.pi)
    else:
        power = math.pi ** (1.0 - alpha) / (1.0 - alpha)
    return (regular + power) / np.pi


def _compute_weights(alpha: float, M: int) -> FloatArray:
    results = []
    for n in (24, 36):
        rel = _relative_weights(alpha, M, n)
        w0 = _finite_part_mean(alpha, n)
        results.append(rel + w0)
        results[-1][0] = w0
    gap = float(np.max(np.abs(results[0] - results[1])))
    if gap > 1e-11 * max(1.0, float(np.max(np.abs(results[1])))):
        raise QuadratureError(f"singular weights not converged: gap {gap:.2e}")
    half = results[1]
    m = _mode_index(M)
    return half[m]


_CACHE: dict[tuple[float, int], FloatArray] = {}
_LOCK = threading.Lock()


def _disk_path(key: tuple[float, int]) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    tag = hashlib.sha1(repr(key).encode()).hexdigest()[:16]
    return Path(root) / f"weights_{tag}.npy"


def singular_fourier_weights(alpha: float, M: int) -> SingularWeights:
    """Weights w_m of (4 sin^2(y/2))^(-alpha/2), cached per (alpha, M)."""
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"singular weights need 0 < alpha < 2, got {alpha}")
    PeriodicGrid(M)
    key = (round(float(alpha), 12), int(M))
    with _LOCK:
        cached = _CACHE.get(key)
    if cached is None:
        path = _disk_path(key)
        if path is not None and path.exists():
            cached = np.load(path)
        else:
            cached = _compute_weights(key[0], M)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(f".{os.getpid()}.tmp.npy")
                np.save(tmp, cached)
                os.replace(tmp, path)
        with _LOCK:
            _CACHE.setdefault(key, cached)
    return SingularWeights(alpha=float(alpha), M=M, weights=cached.copy())


def convolve_singular(weights: SingularWeights, values: Sequence[float] | FloatArray) -> FloatArray:
    """x -> mean over y of K(x - y) g(y), K the singular factor of the weights."""
    g = np.asarray(values, dtype=float)
    if g.shape != (weights.M,):
        raise ValueError(f"expected {weights.M} samples, got {g.shape}")
    return np.fft.ifft(np.fft.fft(g) * weights.weights).real


def product_quadrature(weights: SingularWeights, cofactor: FloatArray) -> FloatArray:
    """Row k: mean over y_l of K(x_k - y_l) cofactor[k, l]."""
    return np.einsum("kl,kl->k", weights.matrix(), cofactor)


def adaptive_oracle(integrand: Callable[[float], float], singular_at: float | None = None,
                    tol: float = 1e-10, max_intervals: int = 20_000) -> float:
    """Mean over [0, 2 pi) by recursive bisection.

    With a singular point y0 the circle is cut open at y0 and each half is
    graded toward it through y = y0 + pi u^3, which flattens |y - y0|^(-beta)
    singularities with beta < 1.
    """
    x, w = roots_legendre(15)

    def rule(f: Callable[[float], float], a: float, b: float) -> float:
        pts = a + 0.5 * (b - a) * (x + 1.0)
        return 0.5 * (b - a) * sum(wi * f(p) for wi, p in zip(w, pts))

    budget = [max_intervals]

    def refine(f: Callable[[float], float], a: float, b: float, whole: float, eps: float,
               depth: int) -> float:
        mid = 0.5 * (a + b)
        left = rule(f, a, mid)
        right = rule(f, mid, b)
        if abs(left + right - whole) <= eps or depth > 60:
            return left + right
        budget[0] -= 2
        if budget[0] < 0:
            raise QuadratureError("adaptive oracle exceeded its interval budget")
        return (refine(f, a, mid, left, 0.5 * eps, depth + 1)
                + refine(f, mid, b, right, 0.5 * eps, depth + 1))

    def integrate(f: Callable[[float], float], a: float, b: float, eps: float) -> float:
        return refine(f, a, b, rule(f, a, b), eps, 0)

    if singular_at is None:
        total = integrate(integrand, 0.0, 2.0 * np.pi, tol)
    else:
        y0 = float(singular_at)

        def up(u: float) -> float:
            return integrand(y0 + np.pi * u ** 3) * 3.0 * np.pi * u * u

        def down(u: float) -> float:
            return integrand(y0 - np.pi * u ** 3) * 3.0 * np.pi * u * u

        total = integrate(up, 0.0, 1.0, 0.5 * tol) + integrate(down, 0.0, 1.0, 0.5 * tol)
    return total / (2.0 * np.pi)
