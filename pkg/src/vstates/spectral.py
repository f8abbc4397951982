"""Linear theory at eps = 0: point-vortex speeds, the 2x2 mode blocks of the
linearized residual, their determinants, and the exact block inverse used
as a Newton preconditioner."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .contour import FourierPair, SineResidual
from .specialfn import B_MAX, c_alpha, lambda_coeff, theta_coeff

FloatArray = NDArray[np.float64]

DET_THRESHOLD = 1e-10
LINK_TOL = 1e-9


class SingularBlockError(ArithmeticError):
    pass


class LinkViolation(ValueError):
    pass


def omega_star(alpha: float, N: int, d: float) -> float:
    """Angular velocity of N unit point vortices on a circle of radius d."""
    total = 0.0
    for n in range(1, N):
        th = 2.0 * math.pi * n / N
        A = (-1.0 + math.cos(th)) ** 2 + math.sin(th) ** 2
        if alpha == 0.0:
            total += (1.0 - math.cos(th)) / (2.0 * math.pi * d * d * A)
        else:
            total += (alpha * c_alpha(alpha) * (1.0 - math.cos(th))
                      / (2.0 * math.pi * A ** (1.0 + alpha / 2) * d ** (2.0 + alpha)))
    return total


def w_star(alpha: float, d: float) -> float:
    """Translation speed of a +1/-1 point-vortex pair at separation 2d."""
    if alpha == 0.0:
        return 1.0 / (4.0 * math.pi * d)
    return alpha * c_alpha(alpha) / (2.0 * math.pi * (2.0 * d) ** (1.0 + alpha))


def speed_star(alpha: float, mode: str, N: int, d: float) -> float:
    return w_star(alpha, d) if mode == "travelling" else omega_star(alpha, N, d)


@dataclass(frozen=True)
class SpectralBlock:
    j: int
    entries: FloatArray
    scale: float

    @property
    def det(self) -> float:
        m = self.entries
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def scaled(self) -> FloatArray:
        return self.scale * self.entries


@lru_cache(maxsize=4096)
def _block_entries(alpha: float, gamma: float, b: float, j: int) -> tuple[float, float, float, float]:
    if alpha == 0.0:
        return (j - 1 + (gamma - 1) * j * b * b, (1 - gamma) * b ** (j + 1),
                -b ** (j - 1), (gamma - 1) * (j - 1) + j)
    th = theta_coeff(alpha, j)
    l1 = lambda_coeff(alpha, b, 1)
    lj = l1 if j == 1 else lambda_coeff(alpha, b, j)
    return (th + (gamma - 1) * b * b * l1, (1 - gamma) * b * b * lj,
            -lj, (gamma - 1) * b ** (-alpha) * th + l1)


def m_block(alpha: float, gamma: float, b: float, j: int) -> SpectralBlock:
    if not (0.0 < b < 1.0) or j < 1:
        raise ValueError("m_block needs 0 < b < 1 and j >= 1")
    e = np.array(_block_entries(float(alpha), float(gamma), float(b), int(j))).reshape(2, 2)
    return SpectralBlock(j=j, entries=e, scale=0.5 if alpha == 0.0 else float(j))


def det_polynomial(gamma: float, b: float, j: int) -> float:
    """Closed-form determinant of the alpha = 0 block."""
    k = 1 + (gamma - 1) * b * b
    return (gamma * k * j * j + ((1 - gamma) * k - gamma) * j
            + gamma - 1 + (1 - gamma) * b ** (2 * j))


def det_profile(alpha: float, gamma: float, b: float, j_max: int) -> FloatArray:
    if j_max < 2:
        raise ValueError("j_max must be >= 2")
    return np.array([m_block(alpha, gamma, b, j).det for j in range(2, j_max + 1)])


def region_conditions(alpha: float, gamma: float, b: float) -> bool:
    """Sufficient conditions for invertibility of all blocks (alpha > 0)."""
    th2 = theta_coeff(alpha, 2)
    l1 = lambda_coeff(alpha, b, 1)
    s = (1 - gamma) * b ** (-alpha)
    return (th2 / 2 >= b * b * l1 and s * th2 / 4 >= l1
            and s * th2 * th2 / 8 >= 3 * b * b * l1 * l1)


def proven_interval_alpha0(gamma: float, b: float) -> bool:
    """Where the alpha = 0 determinant bound holds for every j >= 2 (gamma != 0)."""
    if 0.0 < gamma < 1.0:
        return b < math.sqrt(0.5)
    return gamma >= 1.0


@dataclass(frozen=True)
class RegionTable:
    """admissible: nonsingular and inside the proven region; nonsingular: dets only."""

    alpha: float
    gamma: float
    b: FloatArray
    min_det: FloatArray
    admissible: NDArray[np.bool_]
    note: str = ""
    nonsingular: NDArray[np.bool_] | None = None

    def intervals(self) -> list[tuple[float, float]]:
        out: list[tuple[float, float]] = []
        start = None
        for k, ok in enumerate(self.admissible):
            if ok and start is None:
                start = k
            if start is not None and (not ok or k == len(self.admissible) - 1):
                stop = k if ok else k - 1
                out.append((float(self.b[start]), float(self.b[stop])))
                start = None
        return out


def region_table(alpha: float, gamma: float, j_max: int, b_grid: FloatArray) -> RegionTable:
    b_grid = np.asarray(b_grid, dtype=float)
    if b_grid.size > 1 and np.max(np.diff(b_grid)) > 1e-3 + 1e-15:
        raise ValueError("b grid resolution must be <= 1e-3")
    supported = (b_grid <= B_MAX) | (alpha == 0.0)
    mins = np.array([np.min(np.abs(det_profile(alpha, gamma, b, j_max))) if ok else np.nan
                     for b, ok in zip(b_grid, supported)])
    nonsingular = np.where(supported, mins > DET_THRESHOLD, False)
    note = "" if supported.all() else f"alpha > 0: b above {B_MAX} is outside the supported range"
    if alpha == 0.0 and gamma == 0.0:
        ok = np.zeros_like(nonsingular)
        note = "gamma = 0 at alpha = 0: the inverse does not map into X_b"
    elif alpha == 0.0 and gamma < 0.0:
        # no explicit interval; only countably many b are excluded
        ok = nonsingular.copy()
    elif alpha == 0.0:
        ok = nonsingular & np.array([proven_interval_alpha0(gamma, b) for b in b_grid])
    else:
        ok = nonsingular & np.array([bool(s) and region_conditions(alpha, gamma, b)
                                     for b, s in zip(b_grid, supported)])
    return RegionTable(alpha, gamma, b_grid, mins, ok, note, nonsingular)


def invertible_b_scan(alpha: float, gamma: float, j_max: int,
                      b_grid: FloatArray) -> list[tuple[float, float]]:
    return region_table(alpha, gamma, j_max, b_grid).intervals()


def linearized_apply(alpha: float, gamma: float, b: float, h: FourierPair) -> SineResidual:
    c = np.zeros(h.order)
    d = np.zeros(h.order)
    for j in range(1, h.order + 1):
        m = m_block(alpha, gamma, b, j).scaled
        c[j - 1], d[j - 1] = m @ np.array([h.a[j - 1], h.b[j - 1]])
    return SineResidual(c, d)


def block_precondition(alpha: float, gamma: float, b: float, r: SineResidual) -> FourierPair:
    """Exact inverse of linearized_apply on Y_b."""
    link = (1 - gamma) * b * b
    if abs(r.c[0] - link * r.d[0]) > LINK_TOL * max(1.0, abs(r.c[0]), abs(r.d[0])):
        raise LinkViolation(f"residual violates the first-mode link by {r.c[0] - link * r.d[0]:.3e}")
    s = 0.5 if alpha == 0.0 else lambda_coeff(alpha, b, 1)
    a = np.zeros(r.order)
    bb = np.zeros(r.order)
    k = r.d[0] / ((1 - link) * s)
    a[0], bb[0] = link * k, k
    for j in range(2, r.order + 1):
        blk = m_block(alpha, gamma, b, j)
        if abs(blk.det) <= DET_THRESHOLD:
            raise SingularBlockError(f"block j = {j} is singular (det = {blk.det:.3e})")
        a[j - 1], bb[j - 1] = np.linalg.solve(blk.scaled, [r.c[j - 1], r.d[j - 1]])
    return FourierPair(a, bb)
