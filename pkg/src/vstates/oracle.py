"""Independent checks: the log/Poisson-kernel identity suite, FD-vs-block
linearization comparison, and a Biot-Savart area-quadrature velocity that
tests stationarity without touching the contour formulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import roots_legendre

from .contour import FourierPair, PatchConfig
from .quadrature import adaptive_oracle, mean_integral
from .solver import Solution, SolveOptions, assemble_system
from .spectral import m_block, speed_star
from .specialfn import c_alpha, lambda_coeff

FloatArray = NDArray[np.float64]


# ------------------------------------------------------------ identity suite
@dataclass(frozen=True)
class IdentityEntry:
    identity: str
    b: float | None
    m: int
    value: float
    closed_form: float
    error: float
    flagged: bool = False
    note: str = ""


def identity_suite(b_list: list[float], m_max: int, M: int = 1024) -> list[IdentityEntry]:
    """Mean-value integrals of the log and Poisson kernels against cos(m y)."""
    out: list[IdentityEntry] = []
    y = 2.0 * np.pi * np.arange(M) / M
    for m in range(m_max + 1):
        val = adaptive_oracle(lambda t, m=m: math.cos(m * t) * math.log(1.0 / math.sin(t / 2) ** 2),
                              singular_at=0.0, tol=1e-13)
        ref = 2.0 * math.log(2.0) if m == 0 else 1.0 / m
        out.append(IdentityEntry("log-sine", None, m, val, ref, abs(val - ref)))
    for b in b_list:
        D = (1.0 - b) ** 2 + 4.0 * b * np.sin(y / 2) ** 2
        for m in range(m_max + 1):
            val = mean_integral(np.cos(m * y) * np.log(1.0 / D))
            if m == 0:
                stated = 2.0 * math.log(2.0 * b)
                out.append(IdentityEntry(
                    "log-annulus", b, 0, val, stated, abs(val - stated), flagged=True,
                    note="closed form 2 log(2b) does not hold; the mean is 0 for 0 < b < 1"))
            else:
                ref = b ** m / m
                out.append(IdentityEntry("log-annulus", b, m, val, ref, abs(val - ref)))
        for m in range(m_max + 1):
            val = mean_integral(np.cos(m * y) / D)
            ref = b ** m / (1.0 - b * b)
            out.append(IdentityEntry("poisson", b, m, val, ref, abs(val - ref)))
    return out


# ------------------------------------------------------------ jacobian check
@dataclass(frozen=True)
class JacobianReport:
    mode_errors: dict[int, float]
    coupling: float
    eps: float


def jacobian_check(alpha: float, gamma: float, b: float, N: int = 2, d: float = 1.0,
                   j_max: int = 8, eps: float = 1e-5, M: int = 128,
                   mode: str = "corotating") -> JacobianReport:
    """Relative error of the FD Jacobian at f = 0 against scale_j M_j, per mode."""
    cfg = PatchConfig(alpha, gamma, b, eps, d, N, mode)
    opts = SolveOptions(J=j_max, M=M, fd_step=1e-7)
    _, jac = assemble_system(cfg, FourierPair.zeros(j_max), opts)
    J = j_max
    link = cfg.link
    expected = np.zeros_like(jac)
    s = 0.5 if alpha == 0.0 else lambda_coeff(alpha, b, 1)
    expected[0, 0] = s * (1.0 - link)
    errors = {1: abs(jac[0, 0] - expected[0, 0]) / abs(expected[0, 0])}
    for j in range(2, J + 1):
        rows = [j - 1, J + j - 2]
        blk = m_block(alpha, gamma, b, j).scaled
        expected[np.ix_(rows, rows)] = blk
        got = jac[np.ix_(rows, rows)]
        errors[j] = float(np.max(np.abs(got - blk)) / np.max(np.abs(blk)))
    mask = expected == 0.0
    mask[0, 0] = False
    for j in range(2, J + 1):
        rows = [j - 1, J + j - 2]
        mask[np.ix_(rows, rows)] = False
    coupling = float(np.max(np.abs(jac[mask])) / np.max(np.abs(expected))) if mask.any() else 0.0
    return JacobianReport(errors, coupling, eps)


# ------------------------------------------------------------ Biot-Savart
def _kernel_scale(alpha: float) -> float:
    return 1.0 if alpha == 0.0 else alpha * c_alpha(alpha)


def _primitive(alpha: float, r: FloatArray) -> FloatArray:
    # int_0^r (rho^2 |grad K|/rho) d rho, without the 1/(2 pi) factor
    r = np.maximum(r, 0.0)
    if alpha == 0.0:
        return r
    return r ** (1.0 - alpha) / (1.0 - alpha)


@dataclass(frozen=True)
class _Region:
    """Star-shaped region c + rot * eps * R(t) e^{it}, with its scalar weight."""

    centre: complex
    rot: complex
    eps: float
    base: float
    delta: float
    coef: FloatArray
    weight: float

    def radius(self, t: FloatArray) -> tuple[FloatArray, FloatArray]:
        # modes below 1e-17 of the base radius cannot move a root; drop them
        keep = np.nonzero(np.abs(self.delta * self.coef) > 1e-17 * self.base)[0]
        n = int(keep[-1]) + 1 if keep.size else 0
        t = np.asarray(t, dtype=float)
        if n == 0:
            return np.full(t.shape, self.base), np.zeros(t.shape)
        j = np.arange(1, n + 1)
        powers = np.cumprod(np.broadcast_to(np.exp(1j * t)[..., None], t.shape + (n,)), axis=-1)
        R = self.base + self.delta * (powers.real @ self.coef[:n])
        Rp = -self.delta * (powers.imag @ (j * self.coef[:n]))
        return R, Rp

    def point(self, t: FloatArray) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        R, Rp = self.radius(t)
        e = np.exp(1j * t)
        z = self.centre + self.rot * self.eps * R * e
        dz = self.rot * self.eps * (Rp + 1j * R) * e
        return z, dz


def _regions(cfg: PatchConfig, f: FourierPair) -> list[list[_Region]]:
    """Per component: outer disk (weight 1) and inner disk (weight gamma - 1)."""
    comps = [(0j, 1.0 + 0j, 1.0)]
    centre = complex(cfg.d, 0.0)
    for theta, sign in cfg.copies():
        rot = complex(math.cos(theta), math.sin(theta))
        comps.append((centre + rot * (0j - centre), rot, sign))
    out = []
    for c, rot, sign in comps:
        out.append([
            _Region(c, rot, cfg.eps, 1.0, cfg.delta, f.a, sign),
            _Region(c, rot, cfg.eps, cfg.b, cfg.delta, f.b, sign * (cfg.gamma - 1.0)),
        ])
    return out


_GL_R = roots_legendre(40)


def _polar_velocity(alpha: float, reg: _Region, p: complex, nt: int = 256) -> complex:
    """Velocity at p from a region away from p, by polar quadrature about its centre."""
    t = 2.0 * np.pi * np.arange(nt) / nt
    R, _ = reg.radius(t)
    x, w = _GL_R
    rmax = abs(reg.eps) * R
    r = 0.5 * rmax[:, None] * (x[None, :] + 1.0)
    jac = 0.5 * rmax[:, None] * w[None, :] * r
    sgn = 1.0 if reg.eps > 0 else -1.0
    y = reg.centre + reg.rot * sgn * r * np.exp(1j * t)[:, None]
    q = p - y
    dist = np.abs(q)
    g = _kernel_scale(alpha) / (2.0 * np.pi) * dist ** (-alpha - 2.0)
    vel = g * (-q.imag + 1j * q.real)
    return complex(np.sum(vel * jac) * (2.0 * np.pi / nt))


def _chords(alpha: float, reg: _Region, p: complex, phi: FloatArray,
            tgrid: FloatArray, zgrid: NDArray[np.complex128]) -> FloatArray:
    """Primitive of the radial kernel along each ray, over the ray's chord in reg.

    tgrid is sorted in [0, 2 pi) and should contain the tangency parameters,
    which separate the two roots of a grazing ray."""
    e = np.exp(1j * phi)
    G = ((zgrid[None, :] - p) * np.conj(e)[:, None]).imag
    nxt = np.roll(G, -1, axis=1)
    rows, cols = np.nonzero(np.signbit(G) != np.signbit(nxt))
    out = np.zeros(phi.size)
    if rows.size == 0:
        return out
    width = np.diff(np.append(tgrid, tgrid[0] + 2.0 * np.pi))
    lo_t = tgrid[cols]
    hi_t = lo_t + width[cols]
    g_lo = G[rows, cols]
    g0, g1 = g_lo, nxt[rows, cols]
    t = lo_t + width[cols] * g0 / (g0 - g1)
    ee = e[rows]
    # Newton on Im(conj(e)(z(t) - p)), kept inside the bracket by bisection
    for _ in range(40):
        z, dz = reg.point(t)
        val = ((z - p) * np.conj(ee)).imag
        der = (dz * np.conj(ee)).imag
        left = np.signbit(val) == np.signbit(g_lo)
        lo_t = np.where(left, t, lo_t)
        g_lo = np.where(left, val, g_lo)
        hi_t = np.where(left, hi_t, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = t - val / der
        bad = ~np.isfinite(cand) | (cand <= lo_t) | (cand >= hi_t)
        new = np.where(bad, 0.5 * (lo_t + hi_t), cand)
        done = np.max(np.abs(new - t)) < 1e-15
        t = new
        if done:
            break
    z, _ = reg.point(t)
    rho = ((z - p) * np.conj(ee)).real
    hi = np.full(phi.size, -np.inf)
    lo = np.full(phi.size, np.inf)
    np.maximum.at(hi, rows, rho)
    np.minimum.at(lo, rows, rho)
    hit = hi > 0.0
    out[hit] = _primitive(alpha, hi[hit]) - _primitive(alpha, np.maximum(lo[hit], 0.0))
    return out


def _boundary_chords(alpha: float, reg: _Region, t0: float, phi: FloatArray,
                     n_t: int) -> FloatArray:
    """_chords for p = z(t0) on the boundary of reg.

    The root of Im(conj(e)(z(t) - p)) at t0 is divided out, so rays close to
    the tangent at p, whose far root sits next to t0, are still bracketed."""
    p = complex(reg.point(np.array([t0]))[0][0])
    _, dz0 = reg.point(np.array([t0]))
    e = np.exp(1j * phi)
    h = 2.0 * np.pi / n_t
    x = np.concatenate([[0.0], h * (np.arange(n_t) + 0.5), [2.0 * np.pi]])

    def quotient(xx: FloatArray, ee: NDArray[np.complex128]) -> FloatArray:
        z, _ = reg.point(t0 + xx)
        return ((z - p) * np.conj(ee)).imag / np.sin(0.5 * xx)

    slope = (dz0[0] * np.conj(e)).imag
    H = np.empty((phi.size, x.size))
    H[:, 1:-1] = quotient(x[None, 1:-1], e[:, None])
    H[:, 0] = 2.0 * slope
    H[:, -1] = -2.0 * slope
    rows, cols = np.nonzero(np.signbit(H[:, :-1]) != np.signbit(H[:, 1:]))
    out = np.zeros(phi.size)
    if rows.size == 0:
        return out
    lo_x, hi_x = x[cols], x[cols + 1]
    f_lo = H[rows, cols]
    ee = e[rows]
    # bisection: the quotient is smooth but Newton may wander toward t0
    for _ in range(55):
        mid = 0.5 * (lo_x + hi_x)
        f_mid = quotient(mid, ee)
        left = np.signbit(f_mid) == np.signbit(f_lo)
        lo_x = np.where(left, mid, lo_x)
        f_lo = np.where(left, f_mid, f_lo)
        hi_x = np.where(left, hi_x, mid)
    z, _ = reg.point(t0 + 0.5 * (lo_x + hi_x))
    rho = ((z - p) * np.conj(ee)).real
    far = np.full(phi.size, 0.0)
    np.maximum.at(far, rows, rho)
    out[:] = _primitive(alpha, far)
    return out


def _tanh_sinh(func, a: float, b: float, tol: float = 1e-11, max_level: int = 9) -> complex:
    prev = None
    for level in range(3, max_level + 1):
        h = 2.0 ** (-level)
        k = np.arange(-int(3.2 / h), int(3.2 / h) + 1) * h
        u = 0.5 * np.pi * np.sinh(k)
        x = np.tanh(u)
        w = 0.5 * np.pi * np.cosh(k) / np.cosh(u) ** 2 * h
        # 1 +- x computed without cancellation
        one_plus = 2.0 / (1.0 + np.exp(-2.0 * u))
        phi = a + 0.5 * (b - a) * one_plus
        keep = (phi > a) & (phi < b)
        val = 0.5 * (b - a) * np.sum(w[keep] * func(phi[keep]))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return val
        prev = val
    return prev


def _breakpoints(reg: _Region, p: complex, tgrid: FloatArray,
                 zgrid: NDArray[np.complex128]) -> list[tuple[float, float]]:
    """Rays from p that graze reg, as (direction angle, tangency parameter)."""
    w = zgrid - p
    # tangency: Im(conj(z - p) z') changes sign
    _, dz = reg.point(tgrid)
    s = (np.conj(w) * dz).imag
    idx = np.nonzero(np.signbit(s) != np.signbit(np.roll(s, -1)))[0]
    out = []
    h = tgrid[1] - tgrid[0]
    for i in idx:
        t = tgrid[i] + h * s[i] / (s[i] - s[(i + 1) % s.size])
        for _ in range(30):
            z, dz1 = reg.point(np.array([t]))
            z2, dz2 = reg.point(np.array([t + 1e-6]))
            f0 = (np.conj(z - p) * dz1).imag[0]
            f1 = (np.conj(z2 - p) * dz2).imag[0]
            if f1 == f0:
                break
            step = f0 * 1e-6 / (f1 - f0)
            t -= step
            if abs(step) < 1e-15:
                break
        z, _ = reg.point(np.array([t]))
        out.append((float(np.angle(z[0] - p)), float(np.mod(t, 2.0 * np.pi))))
    return out


def _ray_velocity(alpha: float, reg: _Region, p: complex, n_t: int = 256,
                  on_boundary_t: float | None = None) -> complex:
    """Velocity at p from reg by integrating along rays emanating from p."""
    tgrid = 2.0 * np.pi * np.arange(n_t) / n_t
    zgrid, _ = reg.point(tgrid)
    pre = _kernel_scale(alpha) / (2.0 * np.pi)

    def integrand(phi: FloatArray) -> NDArray[np.complex128]:
        if on_boundary_t is None:
            ch = _chords(alpha, reg, p, phi, tgrid, zgrid)
        else:
            ch = _boundary_chords(alpha, reg, on_boundary_t, phi, n_t)
        # (sin phi, -cos phi) as a complex number
        return pre * ch * (np.sin(phi) - 1j * np.cos(phi))

    if on_boundary_t is not None:
        _, dz = reg.point(np.array([on_boundary_t]))
        phi_t = float(np.angle(dz[0]))
        cuts = [phi_t, phi_t + np.pi]
    else:
        tangents = _breakpoints(reg, p, tgrid, zgrid)
        cuts = [c for c, _ in tangents]
        if tangents:
            tgrid = np.union1d(tgrid, [t for _, t in tangents])
            zgrid, _ = reg.point(tgrid)
    if not cuts:
        n = 512
        phi = 2.0 * np.pi * np.arange(n) / n
        return complex(np.sum(integrand(phi)) * 2.0 * np.pi / n)
    cuts = sorted(np.mod(cuts, 2.0 * np.pi))
    edges = cuts + [cuts[0] + 2.0 * np.pi]
    total = 0j
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a > 1e-14:
            total += _tanh_sinh(integrand, a, b)
    return total


def _velocity(cfg: PatchConfig, f: FourierPair, p: complex,
              own: tuple[int, int, float] | None = None) -> complex:
    """Lab-frame velocity at p. own = (component, interface, t) if p sits on a boundary."""
    alpha = cfg.alpha
    kappa = 1.0 / (math.pi * cfg.normalization * cfg.eps ** 2)
    total = 0j
    for n, comp in enumerate(_regions(cfg, f)):
        near = abs(p - comp[0].centre) < 3.0 * abs(cfg.eps)
        for i, reg in enumerate(comp):
            if near:
                t = own[2] if own is not None and own[0] == n and own[1] == i else None
                v = _ray_velocity(alpha, reg, p, on_boundary_t=t)
            else:
                v = _polar_velocity(alpha, reg, p)
            total += reg.weight * v
    return kappa * total


def component_velocity(cfg: PatchConfig, f: FourierPair, component: int,
                       point: tuple[float, float]) -> FloatArray:
    """Velocity induced at point by one component alone."""
    _check_alpha(cfg.alpha)
    p = complex(point[0], point[1])
    comp = _regions(cfg, f)[component]
    near = abs(p - comp[0].centre) < 3.0 * abs(cfg.eps)
    v = sum(reg.weight * (_ray_velocity(cfg.alpha, reg, p) if near
                          else _polar_velocity(cfg.alpha, reg, p)) for reg in comp)
    v *= 1.0 / (math.pi * cfg.normalization * cfg.eps ** 2)
    return np.array([v.real, v.imag])


def _check_alpha(alpha: float) -> None:
    if not (0.0 <= alpha < 1.0):
        raise ValueError("the area-quadrature oracle is restricted to 0 <= alpha < 1")


def biot_savart_velocity(sol: Solution, point: tuple[float, float]) -> FloatArray:
    _check_alpha(sol.config.alpha)
    v = _velocity(sol.config, sol.f, complex(point[0], point[1]))
    return np.array([v.real, v.imag])


@dataclass(frozen=True)
class VelocitySample:
    point: FloatArray
    velocity: FloatArray
    normal: FloatArray

    def __post_init__(self) -> None:
        if abs(float(np.hypot(*self.normal)) - 1.0) > 1e-12:
            raise ValueError("normal must have unit length")


@dataclass(frozen=True)
class StationarityReport:
    max_defect: float
    rms_defect: float
    per_interface: dict[str, float]
    samples: tuple[VelocitySample, ...]


def _lab_samples(sol: Solution, sample_count: int):
    cfg = sol.config
    _check_alpha(cfg.alpha)
    regs = _regions(cfg, sol.f)[0]
    t = 2.0 * np.pi * (np.arange(sample_count) + 0.5) / sample_count
    out = []
    for i in range(2):
        z, dz = regs[i].point(t)
        u = np.array([_velocity(cfg, sol.f, complex(z[k]), own=(0, i, float(t[k])))
                      for k in range(sample_count)])
        out.append((z, dz / np.abs(dz), u))
    return out


def _report(cfg: PatchConfig, speed: float, lab) -> StationarityReport:
    samples: list[VelocitySample] = []
    per: dict[str, float] = {}
    worst, sq, count = 0.0, 0.0, 0
    for name, (z, tau, u) in zip(("outer", "inner"), lab):
        if cfg.mode == "corotating":
            X = z - cfg.d
            u = u + speed * (X.imag - 1j * X.real)
        else:
            u = u - 1j * speed
        nrm = -1j * tau
        normal = (np.conj(nrm) * u).real
        tangent = (np.conj(tau) * u).real
        rel = np.abs(normal) / float(np.sqrt(np.mean(tangent ** 2)))
        per[name] = float(rel.max())
        worst = max(worst, per[name])
        sq += float(np.sum(rel ** 2))
        count += rel.size
        samples.extend(VelocitySample(np.array([zk.real, zk.imag]), np.array([uk.real, uk.imag]),
                                      np.array([nk.real, nk.imag]))
                       for zk, uk, nk in zip(z, u, nrm))
    return StationarityReport(worst, math.sqrt(sq / count), per, tuple(samples))


def stationarity_residual(sol: Solution, sample_count: int = 64,
                          speed: float | None = None) -> StationarityReport:
    """Normal defect of the frame-corrected velocity on both interfaces of component 0,
    normalized by the RMS tangential speed of the same interface."""
    return stationarity_scan(sol, [sol.speed if speed is None else speed], sample_count)[0]


def stationarity_scan(sol: Solution, speeds: list[float],
                      sample_count: int = 64) -> list[StationarityReport]:
    """stationarity_residual for several frame speeds, sharing one velocity evaluation."""
    lab = _lab_samples(sol, sample_count)
    return [_report(sol.config, float(s), lab) for s in speeds]


def point_vortex_velocity(cfg: PatchConfig, point: tuple[float, float]) -> FloatArray:
    """Velocity of unit point vortices at the component centres."""
    p = complex(*point)
    total = 0j
    for comp in _regions(cfg, FourierPair.zeros(1)):
        q = p - comp[0].centre
        sign = comp[0].weight
        g = _kernel_scale(cfg.alpha) / (2.0 * np.pi) * abs(q) ** (-cfg.alpha - 2.0)
        total += sign * g * complex(-q.imag, q.real)
    return np.array([total.real, total.imag])


def speed_reference(cfg: PatchConfig) -> float:
    return speed_star(cfg.alpha, cfg.mode, int(cfg.n_fold), cfg.d)
