"""Command-line entry point: vstates solve|sweep|regions|verify|identities.

Exit codes: 0 ok, 1 configuration error, 2 non-convergence or failed
verification, 3 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import re
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .contour import ConfigError, FourierPair, GeometryError, PatchConfig, boundary_curves
from .solver import (
    Solution,
    SolveOptions,
    SolverError,
    continuation,
    fitted_order,
    newton_solve,
    residual_norm,
)
from .spectral import region_table

log = logging.getLogger("vstates")

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_INTERNAL = 0, 1, 2, 3
FORMAT = "vstates-solution/1"

# section -> key -> (converter, default); None default means required where used
_SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "patch": {"alpha": (float, None), "n_fold": (int, 2), "gamma": (float, None),
              "b": (float, None), "d": (float, 1.0), "eps": (float, None),
              "mode": (str, "corotating")},
    "solver": {"order_j": (int, 32), "grid_m": (int, 256), "tol": (float, 1e-9),
               "max_iter": (int, 20), "fd_step": (float, 1e-7)},
    "output": {"out_dir": (str, "vstates_out")},
    "sweep": {"eps_list": (str, None)},
    "regions": {"j_max": (int, 64), "b_min": (float, 0.001), "b_max": (float, 0.999),
                "b_step": (float, 0.001)},
    "identities": {"b_list": (str, "0.3, 0.5, 0.7"), "m_max": (int, 8)},
}


def _tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class RunConfigError(ConfigError):
    pass


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]]
    path: Path | None = None
    lines: dict[tuple[str, str], int] = field(default_factory=dict)

    def where(self, section: str, key: str) -> str:
        line = self.lines.get((section, key))
        loc = f"{self.path}:{line}" if self.path and line else str(self.path or "<config>")
        return f"{loc}: [{section}] {key}"

    def get(self, section: str, key: str) -> object:
        val = self.values[section][key]
        if val is None:
            raise RunConfigError(f"{self.where(section, key)}: required key is missing")
        return val

    def patch(self, eps: float | None = None) -> PatchConfig:
        keys = ("alpha", "gamma", "b", "d", "eps", "n_fold", "mode")
        vals = {k: (eps if k == "eps" and eps is not None else self.get("patch", k)) for k in keys}
        try:
            return PatchConfig(**vals)
        except ConfigError as exc:
            raise RunConfigError(f"{self.where('patch', _blame(str(exc), keys))}: {exc}") from exc

    def options(self) -> SolveOptions:
        s = self.values["solver"]
        try:
            return SolveOptions(J=s["order_j"], M=s["grid_m"], tol=s["tol"],
                                max_iter=s["max_iter"], fd_step=s["fd_step"])
        except ConfigError as exc:
            key = _blame(str(exc), ("order_j", "grid_m", "tol", "max_iter", "fd_step"),
                         {"J": "order_j", "M": "grid_m"})
            raise RunConfigError(f"{self.where('solver', key)}: {exc}") from exc

    def eps_list(self) -> list[float]:
        raw = self.values["sweep"]["eps_list"]
        if raw is None or not str(raw).strip():
            raise RunConfigError(f"{self.where('sweep', 'eps_list')}: empty eps list")
        try:
            return [float(x) for x in re.split(r"[,\s]+", str(raw).strip()) if x]
        except ValueError as exc:
            raise RunConfigError(f"{self.where('sweep', 'eps_list')}: {exc}") from exc


def _blame(message: str, keys: tuple[str, ...], alias: dict[str, str] | None = None) -> str:
    """Best guess at which key a validation message is about."""
    for k in keys:
        if re.search(rf"\b{re.escape(k)}\b", message):
            return k
    for short, k in (alias or {}).items():
        if re.search(rf"\b{short}\b", message):
            return k
    if "1 - b^2" in message or "normalization" in message:
        return "gamma"
    return keys[0]


def load_config(path: str | Path | None) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    lines: dict[tuple[str, str], int] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise RunConfigError(f"{p}: cannot read config ({exc.strerror})") from exc
        try:
            parser.read_string(text, source=str(p))
        except configparser.Error as exc:
            raise RunConfigError(f"{p}: {exc}") from exc
        section = None
        for n, line in enumerate(text.splitlines(), start=1):
            m = re.match(r"\s*\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                continue
            m = re.match(r"\s*([A-Za-z_][\w]*)\s*[=:]", line)
            if m and section:
                lines[(section, m.group(1).lower())] = n
    cfg = RunConfig({}, Path(path) if path else None, lines)
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise RunConfigError(f"{cfg.path}: unknown section [{sec}]")
        for key in parser[sec]:
            if key not in _SCHEMA[sec]:
                raise RunConfigError(f"{cfg.where(sec, key)}: unknown key")
    for sec, keys in _SCHEMA.items():
        cfg.values[sec] = {}
        for key, (conv, default) in keys.items():
            if parser.has_option(sec, key):
                raw = parser.get(sec, key).strip()
                try:
                    val = conv(raw)
                except ValueError:
                    raise RunConfigError(
                        f"{cfg.where(sec, key)}: expected {conv.__name__}, got {raw!r}") from None
                if isinstance(val, float) and not math.isfinite(val):
                    raise RunConfigError(f"{cfg.where(sec, key)}: value must be finite")
            else:
                val = default
            cfg.values[sec][key] = val
    return cfg


# ------------------------------------------------------------ serialization
def _jsonable(obj: object) -> object:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def solution_record(sol: Solution, run: RunConfig | None = None) -> dict:
    cfg, opts = sol.config, sol.options
    meta = {"alpha": cfg.alpha, "n_fold": cfg.n_fold, "gamma": cfg.gamma, "b": cfg.b,
            "d": cfg.d, "eps": cfg.eps, "mode": cfg.mode, "order_j": opts.J,
            "grid_m": opts.M, "tol": opts.tol, "max_iter": opts.max_iter,
            "fd_step": opts.fd_step,
            "out_dir": run.values["output"]["out_dir"] if run else None,
            "tool_version": _tool_version(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    return {
        "format": FORMAT,
        "status": "converged" if sol.converged else "failed",
        "metadata": meta,
        "coefficients": {"a": [float(x) for x in sol.f.a], "b": [float(x) for x in sol.f.b]},
        "scalars": {"speed": float(sol.speed), "speed_star": float(sol.speed_star),
                    "residual_norm": float(sol.residual_norm), "iters": int(sol.newton_iters)},
        "history": [float(h) for h in sol.history],
        "diagnostics": _jsonable(sol.diagnostics),
    }


def write_solution(sol: Solution, path: Path, run: RunConfig | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    # json writes floats with repr, which round-trips exactly
    path.write_text(json.dumps(solution_record(sol, run), indent=2) + "\n")


def read_solution(path: str | Path) -> Solution:
    try:
        rec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RunConfigError(f"{path}: unreadable solution file ({exc})") from exc
    if rec.get("format") != FORMAT:
        raise RunConfigError(f"{path}: not a {FORMAT} record")
    m, s = rec["metadata"], rec["scalars"]
    cfg = PatchConfig(m["alpha"], m["gamma"], m["b"], m["eps"], m["d"], m["n_fold"], m["mode"])
    opts = SolveOptions(J=m["order_j"], M=m["grid_m"], tol=m["tol"], max_iter=m["max_iter"],
                        fd_step=m["fd_step"])
    f = FourierPair(np.array(rec["coefficients"]["a"], dtype=float),
                    np.array(rec["coefficients"]["b"], dtype=float))
    return Solution(cfg, f, float(s["speed"]), float(s["speed_star"]), float(s["residual_norm"]),
                    int(s["iters"]), rec["status"] == "converged", opts,
                    tuple(rec.get("history", ())), rec.get("diagnostics", {}))


def write_curves(sol: Solution, out: Path, svg: bool, M: int = 256) -> list[Path]:
    curves = boundary_curves(sol.config, sol.f, M)
    written = []
    for name, comps in curves.items():
        p = out / f"{name}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "copy", "x", "y"])
            for k, xy in enumerate(comps):
                for x, y in xy:
                    w.writerow([name, k, repr(float(x)), repr(float(y))])
        written.append(p)
    if svg:
        written.append(_write_svg(curves, out / "curves.svg"))
    return written


def _write_svg(curves: dict[str, list[np.ndarray]], path: Path) -> Path:
    pts = np.vstack([xy for comps in curves.values() for xy in comps])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo))
    lo, hi = lo - pad, hi + pad
    w, h = hi - lo
    body = []
    for comps in curves.values():
        for xy in comps:
            # flip y so the picture has the usual orientation
            s = " ".join(f"{x - lo[0]:.6g},{hi[1] - y:.6g}" for x, y in xy)
            body.append(f'<polygon points="{s}" fill="none" stroke="black" '
                        f'stroke-width="{0.002 * max(w, h):.3g}"/>')
    path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.6g} {h:.6g}">\n'
                    + "\n".join(body) + "\n</svg>\n")
    return path


# ------------------------------------------------------------ commands
def _out_dir(run: RunConfig, override: str | None) -> Path:
    out = Path(override or str(run.values["output"]["out_dir"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(run: RunConfig, out_override: str | None = None, svg: bool = False) -> int:
    cfg, opts = run.patch(), run.options()
    out = _out_dir(run, out_override)
    try:
        sol = newton_solve(cfg, opts=opts)
    except ConfigError as exc:
        raise RunConfigError(f"{run.where('patch', 'gamma')}: {exc}") from exc
    write_solution(sol, out / "solution.json", run)
    write_curves(sol, out, svg)
    tag = "converged" if sol.converged else "NOT converged"
    print(f"{tag}: speed = {float(sol.speed)!r}  speed* = {float(sol.speed_star)!r}  "
          f"residual = {sol.residual_norm:.3e}  iters = {sol.newton_iters}")
    return EXIT_OK if sol.converged else EXIT_NOCONV


def cmd_sweep(run: RunConfig, out_override: str | None = None, svg: bool = False) -> int:
    eps_values = run.eps_list()
    cfg, opts = run.patch(eps=eps_values[0]), run.options()
    out = _out_dir(run, out_override)
    try:
        res = continuation(cfg, eps_values, opts)
    except ConfigError as exc:
        raise RunConfigError(f"{run.where('sweep', 'eps_list')}: {exc}") from exc
    rows = []
    converged = [s for s in res.path if s.converged]
    for k, sol in enumerate(converged):
        write_solution(sol, out / f"solution_{k:02d}.json", run)
        err = abs(sol.speed - sol.speed_star)
        order = ""
        if k >= 1:
            eps = np.array([s.config.eps for s in converged[:k + 1]])
            errs = np.array([abs(s.speed - s.speed_star) for s in converged[:k + 1]])
            if np.all(errs > 0):
                order = repr(float(fitted_order(eps, errs)))
        rows.append([repr(float(sol.config.eps)), repr(float(sol.speed)), repr(float(err)), order])
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "speed", "abs_speed_error", "fitted_order"])
        w.writerows(rows)
    if converged:
        write_curves(converged[-1], out, svg)
    for r in rows:
        print("  ".join(r))
    if not res.complete:
        print(f"sweep stopped at eps = {res.failed_eps}: {res.reason}", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def cmd_regions(run: RunConfig, out_override: str | None = None, svg: bool = False) -> int:
    alpha, gamma = float(run.get("patch", "alpha")), float(run.get("patch", "gamma"))
    r = run.values["regions"]
    if not (0.0 <= alpha < 2.0):
        raise RunConfigError(f"{run.where('patch', 'alpha')}: need 0 <= alpha < 2")
    if not (0.0 < r["b_min"] <= r["b_max"] < 1.0):
        raise RunConfigError(f"{run.where('regions', 'b_min')}: need 0 < b_min <= b_max < 1")
    if not (0.0 < r["b_step"] <= 1e-3):
        raise RunConfigError(f"{run.where('regions', 'b_step')}: need 0 < b_step <= 1e-3")
    if r["j_max"] < 2:
        raise RunConfigError(f"{run.where('regions', 'j_max')}: need j_max >= 2")
    n = int(round((r["b_max"] - r["b_min"]) / r["b_step"])) + 1
    grid = np.linspace(r["b_min"], r["b_max"], n)
    table = region_table(alpha, gamma, r["j_max"], grid)
    out = _out_dir(run, out_override)
    with (out / "regions.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "min_det", "admissible", "nonsingular"])
        for b, m, ok, ns in zip(table.b, table.min_det, table.admissible, table.nonsingular):
            w.writerow([repr(float(b)), repr(float(m)), int(bool(ok)), int(bool(ns))])
    if table.note:
        print(table.note)
    print("admissible intervals:", table.intervals() or "none")
    return EXIT_OK


def cmd_identities(run: RunConfig, out_override: str | None = None, svg: bool = False) -> int:
    from .oracle import identity_suite

    raw = str(run.values["identities"]["b_list"])
    try:
        b_list = [float(x) for x in re.split(r"[,\s]+", raw.strip()) if x]
    except ValueError as exc:
        raise RunConfigError(f"{run.where('identities', 'b_list')}: {exc}") from exc
    if not b_list or any(not (0.0 < b < 1.0) for b in b_list):
        raise RunConfigError(f"{run.where('identities', 'b_list')}: values must lie in (0, 1)")
    entries = identity_suite(b_list, int(run.values["identities"]["m_max"]))
    out = _out_dir(run, out_override)
    with (out / "identities.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["identity", "b", "m", "value", "closed_form", "error", "flagged"])
        for e in entries:
            w.writerow([e.identity, "" if e.b is None else e.b, e.m, repr(e.value),
                        repr(e.closed_form), repr(e.error), int(e.flagged)])
    worst = max(e.error for e in entries if not e.flagged)
    print(f"{len(entries)} entries, max error (unflagged) {worst:.3e}")
    for e in entries:
        if e.flagged:
            print(f"flagged: {e.identity} b={e.b} m={e.m}: value {e.value:.3e} "
                  f"vs stated {e.closed_form:.6f} ({e.note})")
    return EXIT_OK if worst <= 1e-10 else EXIT_NOCONV


@dataclass
class Check:
    name: str
    passed: bool | None
    detail: str


def verify_solution(sol: Solution, stationarity_samples: int = 64) -> list[Check]:
    from .oracle import identity_suite, jacobian_check, stationarity_residual

    cfg = sol.config
    checks: list[Check] = []
    fresh = residual_norm(sol)
    checks.append(Check("round-trip residual", abs(fresh - sol.residual_norm) <= 1e-12,
                        f"recorded {sol.residual_norm:.6e}, recomputed {fresh:.6e}"))
    checks.append(Check("converged", sol.converged and fresh <= sol.options.tol,
                        f"residual {fresh:.3e} vs tol {sol.options.tol:.1e}"))
    ids = identity_suite([cfg.b], 8)
    worst = max(e.error for e in ids if not e.flagged)
    checks.append(Check("identity suite", worst <= 1e-10, f"max error {worst:.3e}"))
    jac = jacobian_check(cfg.alpha, cfg.gamma, cfg.b, int(cfg.n_fold), cfg.d, mode=cfg.mode)
    jworst = max(jac.mode_errors.values())
    checks.append(Check("linearization", jworst <= 1e-3 and jac.coupling <= 1e-3,
                        f"max block error {jworst:.3e}, coupling {jac.coupling:.3e}"))
    if cfg.alpha < 1.0 and cfg.eps != 0.0:
        rep = stationarity_residual(sol, stationarity_samples)
        checks.append(Check("stationarity", rep.max_defect < 1e-4,
                            f"max normalized defect {rep.max_defect:.3e}"))
    else:
        checks.append(Check("stationarity", None, "skipped: area oracle needs 0 <= alpha < 1"))
    return checks


def cmd_verify(run: RunConfig | None, solution_path: str, out_override: str | None = None) -> int:
    sol = read_solution(solution_path)
    checks = verify_solution(sol)
    for c in checks:
        mark = "skip" if c.passed is None else ("pass" if c.passed else "FAIL")
        print(f"[{mark}] {c.name}: {c.detail}")
    if out_override or run is not None:
        out = Path(out_override) if out_override else _out_dir(run, None)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(
            json.dumps(_jsonable([asdict(c) for c in checks]), indent=2) + "\n")
    return EXIT_NOCONV if any(c.passed is False for c in checks) else EXIT_OK


# ------------------------------------------------------------ entry point
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vstates", description="Doubly connected gSQG V-states.")
    p.add_argument("command", choices=["solve", "sweep", "regions", "verify", "identities"])
    p.add_argument("solution", nargs="?", help="solution file (verify only)")
    p.add_argument("--config", help="INI file with [patch], [solver], [output] sections")
    p.add_argument("--svg", action="store_true", help="also write curves.svg")
    p.add_argument("--out", help="output directory (overrides [output] out_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            if not args.solution:
                raise RunConfigError("verify needs a solution file")
            run = load_config(args.config) if args.config else None
            return cmd_verify(run, args.solution, args.out)
        run = load_config(args.config)
        handler = {"solve": cmd_solve, "sweep": cmd_sweep, "regions": cmd_regions,
                   "identities": cmd_identities}[args.command]
        return handler(run, args.out, args.svg)
    except (RunConfigError, ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
