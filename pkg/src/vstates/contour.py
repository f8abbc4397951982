"""Contour-dynamics residuals of the co-rotating and travelling patch problems.

Component 0 is centred at the origin; the configuration rotates about (d, 0)
(co-rotating) or is paired with its mirror image about x1 = d (travelling).
Interface i has polar radius eps * R_i(x) with

    R_1 = 1 + delta f_1,   R_2 = b + delta f_2,   delta = eps |eps|^alpha.

The residual is the frame-corrected normal velocity (u + frame) . n divided by
kappa eps^3 R_i(x), where kappa is the patch amplitude. With this scaling the
residual stays O(1) as eps -> 0 and is affine in the speed.

Interactions between the two interfaces of the same component are written
relative to the circular base state, so that the O(1) part that integrates
to zero is removed analytically and the O(delta) remainder is formed without
cancellation. This is what makes evaluations at eps ~ 1e-5 usable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .quadrature import PeriodicGrid, log_fourier_weights, singular_fourier_weights
from .specialfn import B_MAX, c_alpha

FloatArray = NDArray[np.float64]

MODES = ("corotating", "travelling")
CLEARANCE = 1e-3


class ConfigError(ValueError):
    """A patch configuration violates one of its invariants."""


class GeometryError(ValueError):
    """Perturbed interfaces are not admissible (radius sign, nesting, overlap)."""


@dataclass(frozen=True)
class PatchConfig:
    alpha: float
    gamma: float
    b: float
    eps: float
    d: float = 1.0
    n_fold: int = 2
    mode: str = "corotating"

    def __post_init__(self) -> None:
        for name in ("alpha", "gamma", "b", "eps", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not (0.0 <= self.alpha < 2.0):
            raise ConfigError(f"alpha must lie in [0, 2), got {self.alpha}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "corotating" and (int(self.n_fold) != self.n_fold or self.n_fold < 2):
            raise ConfigError(f"n_fold must be an integer >= 2, got {self.n_fold}")
        if not (0.0 < self.b < 1.0):
            raise ConfigError(f"b must lie in (0, 1), got {self.b}")
        if self.b > B_MAX:
            raise ConfigError(f"b = {self.b} exceeds the supported bound {B_MAX}")
        if self.d <= 0.0:
            raise ConfigError(f"d must be positive, got {self.d}")
        if abs(self.normalization) < 1e-12:
            raise ConfigError("normalization 1 - b^2 + gamma b^2 vanishes")

    @property
    def normalization(self) -> float:
        return 1.0 - self.b ** 2 + self.gamma * self.b ** 2

    @property
    def delta(self) -> float:
        return self.eps * abs(self.eps) ** self.alpha

    @property
    def link(self) -> float:
        # the X_b / Y_b first-mode ratio (1 - gamma) b^2
        return (1.0 - self.gamma) * self.b ** 2

    def copies(self) -> list[tuple[float, float]]:
        """(rotation angle about (d, 0), sign) of every other component."""
        if self.mode == "travelling":
            return [(math.pi, -1.0)]
        N = int(self.n_fold)
        return [(2.0 * math.pi * n / N, 1.0) for n in range(1, N)]

    def with_eps(self, eps: float) -> "PatchConfig":
        return PatchConfig(self.alpha, self.gamma, self.b, eps, self.d, self.n_fold, self.mode)


@dataclass(frozen=True)
class FourierPair:
    """Cosine coefficients a_1..a_J of f_1 and b_1..b_J of f_2."""

    a: FloatArray
    b: FloatArray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        if a.shape != b.shape or a.size == 0:
            raise ValueError("a and b must be non-empty and of equal length")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("Fourier coefficients must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def order(self) -> int:
        return self.a.size

    @classmethod
    def zeros(cls, J: int) -> "FourierPair":
        return cls(np.zeros(J), np.zeros(J))

    def link_defect(self, link: float) -> float:
        return float(self.a[0] - link * self.b[0])


@dataclass(frozen=True)
class SineResidual:
    """Sine coefficients c_1..c_J (interface 1) and d_1..d_J (interface 2)."""

    c: FloatArray
    d: FloatArray
    discarded: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "c", np.array(self.c, dtype=float).reshape(-1))
        object.__setattr__(self, "d", np.array(self.d, dtype=float).reshape(-1))

    @property
    def order(self) -> int:
        return self.c.size

    def link_defect(self, link: float) -> float:
        return float(self.c[0] - link * self.d[0])


def _series(coef: FloatArray, x: FloatArray) -> tuple[FloatArray, FloatArray]:
    j = np.arange(1, coef.size + 1)
    arg = np.outer(x, j)
    return np.cos(arg) @ coef, -(np.sin(arg) * j) @ coef


def radius_profiles(cfg: PatchConfig, f: FourierPair,
                    grid: PeriodicGrid) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """R_1, R_2 and their x-derivatives on the grid nodes."""
    x = grid.nodes
    f1, p1 = _series(f.a, x)
    f2, p2 = _series(f.b, x)
    dl = cfg.delta
    R1, R2 = 1.0 + dl * f1, cfg.b + dl * f2
    if R2.min() <= 0.0 or R1.min() <= 0.0:
        raise GeometryError("perturbed radius is not positive")
    if np.any(R2 >= R1):
        raise GeometryError("inner interface crosses the outer interface")
    return R1, R2, dl * p1, dl * p2


@dataclass
class ContourEvaluator:
    """Grid-level tables for one configuration; residual evaluation is pure."""

    cfg: PatchConfig
    M: int
    _tables: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        grid = PeriodicGrid(self.M)
        cfg = self.cfg
        x = grid.nodes
        t = self._tables
        t["x"] = x
        dxy = x[:, None] - x[None, :]
        half = np.sin(0.5 * dxy)
        t["sn"], t["cs"] = np.sin(dxy), np.cos(dxy)
        t["s2"] = 4.0 * half * half
        inv = np.zeros_like(half)
        off = ~np.eye(self.M, dtype=bool)
        inv[off] = 0.5 / half[off]
        t["inv2h"] = inv
        b = cfg.b
        d0 = (1.0 - b) ** 2 + b * t["s2"]
        t["d0"] = d0
        if cfg.alpha > 0.0:
            t["self_w"] = singular_fourier_weights(cfg.alpha, self.M).matrix()
            t["cross_k"] = d0 ** (-0.5 * cfg.alpha)
            t["C"] = c_alpha(cfg.alpha)
        else:
            t["self_w"] = log_fourier_weights(self.M).matrix()
            t["cross_k"] = -np.log(d0)
            t["C"] = 1.0
        copies = []
        for theta, sign in cfg.copies():
            rot = complex(math.cos(theta), math.sin(theta))
            dist0 = cfg.d * (rot - 1.0)
            copies.append({
                "rot": rot, "sign": sign, "dist0": dist0, "A": abs(dist0) ** 2,
                "sn": np.sin(dxy - theta), "cs": np.cos(dxy - theta),
            })
        t["copies"] = copies
        t["eix"] = np.exp(1j * x)

    # ------------------------------------------------------------------ terms
    def _near(self, i: int, j: int, fv: list, fp: list, rho: tuple) -> FloatArray:
        """(1/delta) mean_y K(D_ij) [bracket_ij] with the base state removed."""
        t = self._tables
        alpha, dl = self.cfg.alpha, self.cfg.delta
        ri, rj = rho[i], rho[j]
        fx, fy = fv[i][:, None], fv[j][None, :]
        px, py = fp[i][:, None], fp[j][None, :]
        sn, cs = t["sn"], t["cs"]
        diff = fx - fy
        if i == j:
            ratio = diff * t["inv2h"]
            np.fill_diagonal(ratio, fp[i])
            u = dl * ratio ** 2 / ri ** 2 + (fx + fy + dl * fx * fy) / ri
        else:
            e = 2.0 * (ri - rj) * diff + dl * diff ** 2 + t["s2"] * (ri * fy + rj * fx + dl * fx * fy)
            u = e / t["d0"]
        q = (ri * fy + rj * fx + dl * (fx * fy + px * py)) * sn \
            + (ri * py - rj * px + dl * (fx * py - px * fy)) * cs
        if alpha > 0.0:
            if dl == 0.0:
                s, s1 = 1.0, -0.5 * alpha * u
            else:
                lg = np.log1p(dl * u)
                s, s1 = np.exp(-0.5 * alpha * lg), np.expm1(-0.5 * alpha * lg) / dl
            cof = ri * rj * s1 * sn + s * q
            if i == j:
                return ri ** (-alpha) * np.einsum("kl,kl->k", t["self_w"], cof)
            return np.mean(t["cross_k"] * cof, axis=1)
        l1 = u if dl == 0.0 else np.log1p(dl * u) / dl
        smooth = l1 * (ri * rj * sn + dl * q)
        if i == j:
            sing = np.einsum("kl,kl->k", t["self_w"], q)
            return 0.5 * (sing - 2.0 * math.log(ri) * np.mean(q, axis=1) - np.mean(smooth, axis=1))
        return 0.5 * np.mean(t["cross_k"] * q - smooth, axis=1)

    def _far(self, i: int, j: int, R: list, Rp: list, copy: dict) -> FloatArray:
        """mean_y [K(|dist|) - K(|dist0|)] [bracket] for one copy."""
        t = self._tables
        cfg = self.cfg
        eps, alpha = cfg.eps, cfg.alpha
        zx = (R[i] * t["eix"])[:, None]
        zy = (copy["rot"] * R[j] * t["eix"])[None, :]
        v = zx - zy
        A = copy["A"]
        rel = (2.0 * eps * (np.conj(copy["dist0"]) * v).real + eps * eps * (v.real ** 2 + v.imag ** 2)) / A
        if alpha > 0.0:
            kd = A ** (-0.5 * alpha) * np.expm1(-0.5 * alpha * np.log1p(rel))
        else:
            kd = -0.5 * np.log1p(rel)
        Rx, Ry = R[i][:, None], R[j][None, :]
        Px, Py = Rp[i][:, None], Rp[j][None, :]
        br = (Rx * Ry + Px * Py) * copy["sn"] + (Rx * Py - Px * Ry) * copy["cs"]
        return np.mean(kd * br, axis=1)

    def parts(self, f: FourierPair) -> tuple[FloatArray, FloatArray, dict]:
        """Residual at zero speed, its speed slope (both shape (2, M)) and diagnostics."""
        cfg = self.cfg
        if cfg.eps == 0.0:
            raise GeometryError("the eps = 0 limit is served by the linear theory")
        t = self._tables
        x = t["x"]
        grid = PeriodicGrid(self.M)
        R1, R2, P1, P2 = radius_profiles(cfg, f, grid)
        f1, q1 = _series(f.a, x)
        f2, q2 = _series(f.b, x)
        fv, fp, rho = [f1, f2], [q1, q2], (1.0, cfg.b)
        R, Rp = [R1, R2], [P1, P2]
        weights = (1.0, cfg.gamma - 1.0)
        C = t["C"]
        # each component sits inside a disk of radius |eps| max R1 about its centre
        sep = min(math.sqrt(c["A"]) for c in t["copies"])
        clearance = sep - 2.0 * abs(cfg.eps) * float(R1.max())
        if clearance < CLEARANCE * cfg.d:
            raise GeometryError(f"components closer than {CLEARANCE}*d (clearance {clearance:.3e})")
        base = np.zeros((2, self.M))
        for i in range(2):
            acc = np.zeros(self.M)
            for j in range(2):
                acc += weights[j] * self._near(i, j, fv, fp, rho)
            base[i] = C * acc / R[i]
            far = np.zeros(self.M)
            for copy in t["copies"]:
                for j in range(2):
                    far += copy["sign"] * weights[j] * self._far(i, j, R, Rp, copy)
            base[i] += C * far / (R[i] * cfg.eps)
        P = math.pi * cfg.normalization
        slope = np.zeros((2, self.M))
        for i in range(2):
            if cfg.mode == "corotating":
                slope[i] = P * (cfg.eps * Rp[i] - cfg.d * Rp[i] * np.cos(x) / R[i] + cfg.d * np.sin(x))
            else:
                slope[i] = -P * (np.sin(x) - Rp[i] * np.cos(x) / R[i])
        return base, slope, {"clearance": clearance}

    def residual(self, f: FourierPair, speed: float) -> FloatArray:
        base, slope, _ = self.parts(f)
        return base + speed * slope


@lru_cache(maxsize=16)
def evaluator(cfg: PatchConfig, M: int) -> ContourEvaluator:
    return ContourEvaluator(cfg, M)


def corotating_residual(cfg: PatchConfig, f: FourierPair, Omega: float,
                        grid: PeriodicGrid) -> tuple[FloatArray, FloatArray]:
    if cfg.mode != "corotating":
        raise ConfigError("corotating_residual needs mode = corotating")
    g = evaluator(cfg, grid.size).residual(f, Omega)
    return g[0], g[1]


def travelling_residual(cfg: PatchConfig, f: FourierPair, W: float,
                        grid: PeriodicGrid) -> tuple[FloatArray, FloatArray]:
    if cfg.mode != "travelling":
        raise ConfigError("travelling_residual needs mode = travelling")
    g = evaluator(cfg, grid.size).residual(f, W)
    return g[0], g[1]


def sine_project(values: FloatArray, J: int) -> tuple[FloatArray, float]:
    """Sine coefficients 2 mean(g sin(jx)), j = 1..J, and the RMS of what is left."""
    g = np.asarray(values, dtype=float)
    M = g.size
    if not (0 < J < M // 2):
        raise ValueError(f"need 0 < J < M/2, got J = {J}, M = {M}")
    x = PeriodicGrid(M).nodes
    basis = np.sin(np.outer(x, np.arange(1, J + 1)))
    coef = 2.0 * (g @ basis) / M
    rest = g - basis @ coef
    return coef, float(np.sqrt(np.mean(rest ** 2)))


def project_residual(g: FloatArray, J: int) -> SineResidual:
    c, ec = sine_project(g[0], J)
    d, ed = sine_project(g[1], J)
    return SineResidual(c, d, discarded=math.hypot(ec, ed))


def circulation(cfg: PatchConfig, f: FourierPair) -> tuple[float, ...]:
    """Integral of the scalar over each component, by the polar area formula."""
    M = max(64, 4 * f.order + 4)
    grid = PeriodicGrid(M + M % 2)
    R1, R2, _, _ = radius_profiles(cfg, f, grid)
    value = float(np.mean(R1 ** 2 + (cfg.gamma - 1.0) * R2 ** 2) / cfg.normalization)
    return tuple(sign * value for sign in [1.0] + [s for _, s in cfg.copies()])


def boundary_curves(cfg: PatchConfig, f: FourierPair, M: int) -> dict[str, list[FloatArray]]:
    """Sampled interfaces of every component in the lab frame, shape (M, 2) each."""
    grid = PeriodicGrid(M)
    x = grid.nodes
    R1, R2, _, _ = radius_profiles(cfg, f, grid)
    centre = complex(cfg.d, 0.0)
    out: dict[str, list[FloatArray]] = {"outer": [], "inner": []}
    for name, R in (("outer", R1), ("inner", R2)):
        z0 = cfg.eps * R * np.exp(1j * x)
        images = [z0] + [rot_image(z0, theta, centre) for theta, _ in cfg.copies()]
        out[name] = [np.column_stack([z.real, z.imag]) for z in images]
    return out


def rot_image(z: NDArray[np.complex128], theta: float, centre: complex) -> NDArray[np.complex128]:
    return centre + np.exp(1j * theta) * (z - centre)
