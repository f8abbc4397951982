"""Speed selection and Newton iteration on the linked Fourier coefficients.

Unknowns are the reduced coordinates (b_1, a_2..a_J, b_2..b_J); a_1 follows
from the first-mode link a_1 = (1 - gamma) b^2 b_1. The speed is eliminated
exactly because the residual is affine in it, which leaves the square system
(d_1, c_2..c_J, d_2..d_J) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .contour import (
    ConfigError,
    ContourEvaluator,
    FourierPair,
    PatchConfig,
    SineResidual,
    circulation,
    evaluator,
    project_residual,
)
from .spectral import (
    DET_THRESHOLD,
    block_precondition,
    det_profile,
    speed_star,
)

FloatArray = NDArray[np.float64]

EPS_GUARD = 0.2
DAMPING_HALVINGS = 6


class SolverError(RuntimeError):
    pass


class DegenerateSlope(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    J: int = 32
    M: int = 256
    tol: float = 1e-9
    max_iter: int = 20
    continuation_steps: int = 1
    fd_step: float = 1e-7
    allow_large_eps: bool = False

    def __post_init__(self) -> None:
        if not (0 < self.J < self.M // 2):
            raise ConfigError(f"need 0 < J < M/2, got J = {self.J}, M = {self.M}")
        if self.M % 2:
            raise ConfigError("M must be even")
        if self.tol <= 0.0:
            raise ConfigError("tol must be positive")
        if not (1e-8 <= self.fd_step <= 1e-5):
            raise ConfigError("fd_step must lie in [1e-8, 1e-5]")
        if self.max_iter < 0 or self.continuation_steps < 1:
            raise ConfigError("max_iter >= 0 and continuation_steps >= 1 required")


@dataclass(frozen=True)
class Solution:
    config: PatchConfig
    f: FourierPair
    speed: float
    speed_star: float
    residual_norm: float
    newton_iters: int
    converged: bool
    options: SolveOptions
    history: tuple[float, ...] = ()
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------- coordinates
def to_reduced(f: FourierPair) -> FloatArray:
    return np.concatenate([[f.b[0]], f.a[1:], f.b[1:]])


def from_reduced(u: FloatArray, link: float) -> FourierPair:
    J = (u.size + 1) // 2
    a = np.concatenate([[link * u[0]], u[1:J]])
    b = np.concatenate([[u[0]], u[J:]])
    return FourierPair(a, b)


def reduced_equations(r: SineResidual) -> FloatArray:
    return np.concatenate([[r.d[0]], r.c[1:], r.d[1:]])


def _first_mode(g: FloatArray) -> FloatArray:
    x = 2.0 * np.pi * np.arange(g.shape[-1]) / g.shape[-1]
    return 2.0 * np.mean(g * np.sin(x), axis=-1)


def _select(cfg: PatchConfig, base: FloatArray, slope: FloatArray) -> float:
    c0, d0 = _first_mode(base)
    cs, ds = _first_mode(slope)
    den = cs - cfg.link * ds
    if abs(den) < 1e-14 * max(1.0, abs(cs), abs(ds)):
        raise DegenerateSlope(f"speed coefficient vanishes: c-slope {cs:.3e}, d-slope {ds:.3e}")
    return float(-(c0 - cfg.link * d0) / den)


def speed_select(cfg: PatchConfig, f: FourierPair, M: int = 256) -> float:
    """Speed making the first sine modes satisfy c_1 = (1 - gamma) b^2 d_1."""
    ev = evaluator(cfg, M)
    base = ev.residual(f, 0.0)
    slope = ev.residual(f, 1.0) - base
    return _select(cfg, base, slope)


def _evaluate(ev: ContourEvaluator, u: FloatArray, J: int) -> tuple[FloatArray, float, SineResidual, dict]:
    cfg = ev.cfg
    f = from_reduced(u, cfg.link)
    base, slope, diag = ev.parts(f)
    speed = _select(cfg, base, slope)
    r = project_residual(base + speed * slope, J)
    return reduced_equations(r), speed, r, diag


def assemble_system(cfg: PatchConfig, f: FourierPair,
                    opts: SolveOptions) -> tuple[FloatArray, FloatArray]:
    """Reduced residual and its forward-difference Jacobian."""
    ev = evaluator(cfg, opts.M)
    u = to_reduced(f)
    F, _, _, _ = _evaluate(ev, u, opts.J)
    jac = np.empty((F.size, u.size))
    for k in range(u.size):
        h = opts.fd_step * max(1.0, abs(u[k]))
        up = u.copy()
        up[k] += h
        jac[:, k] = (_evaluate(ev, up, opts.J)[0] - F) / h
    return F, jac


def _precondition_step(cfg: PatchConfig, F: FloatArray, J: int) -> FloatArray:
    r = SineResidual(np.concatenate([[cfg.link * F[0]], F[1:J]]),
                     np.concatenate([[F[0]], F[J:]]))
    return -to_reduced(block_precondition(cfg.alpha, cfg.gamma, cfg.b, r))


def check_admissible(cfg: PatchConfig, opts: SolveOptions) -> None:
    if cfg.alpha == 0.0 and cfg.gamma == 0.0:
        raise ConfigError("gamma = 0 is not admissible at alpha = 0: the linearization "
                          "is not an isomorphism onto the linked spaces")
    dets = det_profile(cfg.alpha, cfg.gamma, cfg.b, max(2, opts.J))
    if np.min(np.abs(dets)) <= DET_THRESHOLD:
        j = int(np.argmin(np.abs(dets))) + 2
        raise ConfigError(f"mode block j = {j} is singular at b = {cfg.b}")
    if not opts.allow_large_eps and abs(cfg.eps) > EPS_GUARD * cfg.d * min(1.0, cfg.b):
        raise ConfigError(f"|eps| = {abs(cfg.eps)} exceeds 0.2*d*min(1, b); "
                          "set allow_large_eps to override")


def newton_solve(cfg: PatchConfig, init: FourierPair | None = None,
                 opts: SolveOptions = SolveOptions()) -> Solution:
    """Damped Newton from init (default: the point-vortex seed f = 0)."""
    check_admissible(cfg, opts)
    star = speed_star(cfg.alpha, cfg.mode, int(cfg.n_fold), cfg.d)
    if init is None:
        init = FourierPair.zeros(opts.J)
    if init.order != opts.J:
        raise ConfigError(f"initial guess has order {init.order}, options say {opts.J}")
    init = FourierPair(np.concatenate([[cfg.link * init.b[0]], init.a[1:]]), init.b)
    if cfg.eps == 0.0:
        return Solution(cfg, init, star, star, 0.0, 0, True, opts, (0.0,),
                        {"circulation": circulation(cfg, init)})

    ev = evaluator(cfg, opts.M)
    u = to_reduced(init)
    F, speed, proj, diag = _evaluate(ev, u, opts.J)
    r = float(np.max(np.abs(F)))
    history = [r]
    jac = None
    iters = 0
    kinds: list[str] = []
    while r > opts.tol and iters < opts.max_iter:
        accepted = False
        if jac is None:
            trial = u + _precondition_step(cfg, F, opts.J)
            out = _evaluate(ev, trial, opts.J)
            r_new = float(np.max(np.abs(out[0])))
            if r_new <= 0.25 * r:
                accepted, kind = True, "block"
        else:
            try:
                trial = u - np.linalg.solve(jac, F)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian(str(exc)) from exc
            out = _evaluate(ev, trial, opts.J)
            r_new = float(np.max(np.abs(out[0])))
            if r_new <= 0.25 * r:
                accepted, kind = True, "chord"
        if not accepted:
            F, jac = assemble_system(cfg, from_reduced(u, cfg.link), opts)
            try:
                step = -np.linalg.solve(jac, F)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian(str(exc)) from exc
            lam = 1.0
            for _ in range(DAMPING_HALVINGS + 1):
                trial = u + lam * step
                try:
                    out = _evaluate(ev, trial, opts.J)
                    r_new = float(np.max(np.abs(out[0])))
                except ValueError:
                    r_new = math.inf
                if r_new < r:
                    break
                lam *= 0.5
            kind = "newton" if lam == 1.0 else f"newton(damped {lam:g})"
            if not r_new < r:
                break
        u = trial
        F, speed, proj, diag = out
        r = r_new
        history.append(r)
        kinds.append(kind)
        iters += 1

    f = from_reduced(u, cfg.link)
    converged = r <= opts.tol
    fresh = _evaluate(ContourEvaluator(cfg, opts.M), u, opts.J)
    tail = [history[k + 1] / history[k] ** 2 for k in range(len(history) - 1)
            if history[k] < 1e-4 and history[k + 1] > 0.0]
    diagnostics = {
        "discarded_energy": proj.discarded,
        "clearance": diag["clearance"],
        "circulation": circulation(cfg, f),
        "link_defect_residual": proj.link_defect(cfg.link),
        "fresh_residual_norm": float(np.max(np.abs(fresh[0]))),
        "quadratic_constant": max(tail) if tail else None,
        "steps": kinds,
    }
    return Solution(cfg, f, speed, star, r, iters, converged, opts, tuple(history), diagnostics)


def residual_norm(sol: Solution) -> float:
    """Reduced residual sup-norm recomputed on a fresh grid."""
    ev = ContourEvaluator(sol.config, sol.options.M)
    return float(np.max(np.abs(_evaluate(ev, to_reduced(sol.f), sol.options.J)[0])))


@dataclass(frozen=True)
class ContinuationResult:
    path: tuple[Solution, ...]
    failed_eps: float | None = None
    reason: str = ""

    @property
    def complete(self) -> bool:
        return self.failed_eps is None


def continuation(cfg: PatchConfig, eps_values: list[float],
                 opts: SolveOptions = SolveOptions()) -> ContinuationResult:
    """Solve along eps_values, each step seeded by the previous solution."""
    if not eps_values:
        raise ConfigError("empty eps list")
    path: list[Solution] = []
    seed = FourierPair.zeros(opts.J)
    prev_eps = 0.0
    for eps in eps_values:
        step_cfg = cfg.with_eps(float(eps))
        try:
            sol = newton_solve(step_cfg, _rescale(seed, cfg.alpha, prev_eps, eps), opts)
        except (SolverError, ValueError) as exc:
            return ContinuationResult(tuple(path), float(eps), str(exc))
        if not sol.converged:
            return ContinuationResult(tuple(path) + (sol,), float(eps), "newton did not converge")
        path.append(sol)
        seed, prev_eps = sol.f, eps
    return ContinuationResult(tuple(path))


def _rescale(f: FourierPair, alpha: float, old: float, new: float) -> FourierPair:
    # f grows roughly linearly in eps along the branch; first-order predictor
    if old == 0.0:
        return f
    s = new / old
    return FourierPair(f.a * s, f.b * s)


def fitted_order(eps: FloatArray, defect: FloatArray) -> float:
    """Least-squares slope of log|defect| against log|eps|."""
    x = np.log(np.abs(np.asarray(eps, dtype=float)))
    y = np.log(np.abs(np.asarray(defect, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def solve_options_from(**kw) -> SolveOptions:
    return replace(SolveOptions(), **kw)
