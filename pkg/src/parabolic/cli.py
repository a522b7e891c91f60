"""Command-line front end.

    parabolic threshold  --potential U.json --theta-minus 0 --theta-plus pi
    parabolic gap-curve  --potential U.json --theta-minus 0 --theta-plus pi --alpha-range 0.2:1.6:15
    parabolic portrait   --potential U.json --alpha 0.5 --alpha 1
    parabolic trajectory --potential U.json --theta-minus 0 --theta-plus pi [--alpha A]
    parabolic bolza      --potential U.json --alpha A --start 1,0.3 --end 1,2.8 --T 2 [--obstacle 0.1 ...]
    parabolic periodic   --potential U.json --alpha A --T 6.28 --k 1
    parabolic report     --potential U.json --theta-minus 0 --theta-plus pi

Angles are radians; expressions such as ``pi/2`` or ``-3*pi/4`` are accepted,
degree input is rejected.  Exit status: 0 ok, 2 invalid input, 3 numerical
failure, 4 sentinel result (no threshold in range).
"""
from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import platform
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .manifolds import ManifoldError, _seed
from .phase_plane import (
    DEFAULT_CONFIG,
    Event,
    IntegrationError,
    classify_equilibria,
    integrate,
    planar_rhs,
)
from .potential import PotentialError, TrigPolynomial, check_class_U, find_central_configurations
from .threshold import (
    ThresholdError,
    find_alpha_bar_general,
    gap_value,
    lemma22_bounds,
    winding_number,
)
from .trajectory import TrajectoryError, check_parabolic_definition, constrained_minimizer
from .variational import (
    DiscretePath,
    VariationalError,
    collision_trend,
    minimize_periodic,
    obstacle_ladder,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_SENTINEL = 0, 2, 3, 4
NUMERICAL_ERRORS = (IntegrationError, ManifoldError, ThresholdError, TrajectoryError, VariationalError)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# deterministic output


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with every float printed to 17 significant digits and sorted keys."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(obj, path: Path) -> None:
    path.write_text(to_json(obj) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(float(v)) if not isinstance(v, str) else v for v in row) + "\n")


# ---------------------------------------------------------------------------
# input parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    raise InputError("unsupported expression")


def parse_angle(text: str) -> float:
    """Radians from a number or an arithmetic expression in ``pi``; degrees are rejected."""
    t = text.strip().lower()
    if re.search(r"deg|°|grad", t):
        raise InputError(f"angle {text!r}: degree input is not accepted, give radians (e.g. pi/2)")
    try:
        v = _eval(ast.parse(t, mode="eval"))
    except (SyntaxError, InputError, ZeroDivisionError):
        raise InputError(f"cannot parse angle {text!r}") from None
    if not math.isfinite(v):
        raise InputError(f"angle {text!r} is not finite")
    return v


def parse_real(text: str, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"{name}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise InputError(f"{name}: {text!r} is not finite")
    return v


def parse_alpha_range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"alpha range {text!r} must be LO:HI:N")
    lo, hi = parse_real(parts[0], "alpha range"), parse_real(parts[1], "alpha range")
    try:
        n = int(parts[2])
    except ValueError:
        raise InputError(f"alpha range count {parts[2]!r} is not an integer") from None
    if n < 1 or hi < lo or (n > 1 and hi == lo):
        raise InputError(f"alpha range {text!r} is empty")
    if not (0.0 < lo and hi < 2.0):
        raise InputError(f"alpha range {text!r} must lie inside (0, 2)")
    return np.linspace(lo, hi, n)


def parse_alpha(text: str) -> float:
    a = parse_real(text, "alpha")
    if not 0.0 < a < 2.0:
        raise InputError(f"alpha = {a!r} must lie in (0, 2)")
    return a


def parse_point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise InputError(f"point {text!r} must be R,THETA")
    r = parse_real(parts[0], "radius")
    if r <= 0.0:
        raise InputError(f"radius in {text!r} must be positive")
    return r, parse_angle(parts[1])


def parse_interval(text: str, name: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise InputError(f"{name} {text!r} must be LO:HI")
    lo, hi = parse_angle(parts[0]), parse_angle(parts[1])
    if not hi > lo:
        raise InputError(f"{name} {text!r} is empty")
    return lo, hi


def load_potential(path: str) -> TrigPolynomial:
    try:
        return TrigPolynomial.load(path)
    except FileNotFoundError:
        raise InputError(f"potential file {path!r} not found") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"potential file {path!r} is malformed: {exc}") from None


def worker_count() -> int:
    raw = os.environ.get("PARABOLIC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"PARABOLIC_THREADS={raw!r} is not an integer") from None


# ---------------------------------------------------------------------------
# SVG phase portrait


@dataclass
class _Canvas:
    window: tuple[float, float, float, float]
    width: int = 640
    height: int = 480
    margin: int = 48
    parts: list = field(default_factory=list)

    def x(self, th: float) -> float:
        a, b = self.window[0], self.window[1]
        return self.margin + (th - a) / (b - a) * (self.width - 2 * self.margin)

    def y(self, ph: float) -> float:
        c, d = self.window[2], self.window[3]
        return self.height - self.margin - (ph - c) / (d - c) * (self.height - 2 * self.margin)

    def polyline(self, th, ph, stroke: str, width: float = 1.0, dash: str | None = None) -> None:
        th, ph = np.asarray(th, dtype=float), np.asarray(ph, dtype=float)
        a, b, c, d = self.window
        pa, pc = 0.05 * (b - a), 0.05 * (d - c)
        inside = (th >= a - pa) & (th <= b + pa) & (ph >= c - pc) & (ph <= d + pc)
        # keep one point beyond each end of a visible run so lines reach the frame
        keep = inside.copy()
        keep[1:] |= inside[:-1]
        keep[:-1] |= inside[1:]
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        idx = np.flatnonzero(keep)
        if idx.size < 2:
            return
        for run in np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1):
            if run.size < 2:
                continue
            pts = " ".join(f"{self.x(th[i]):.2f},{self.y(ph[i]):.2f}" for i in run)
            self.parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"{extra}/>'
            )


def _clip_line(slope_c: float, window) -> tuple[tuple[float, float], tuple[float, float]] | None:
    """Segment of phi = theta + c inside the window, or None."""
    a, b, c, d = window
    t0, t1 = max(a, c - slope_c), min(b, d - slope_c)
    if t1 <= t0:
        return None
    return (t0, t0 + slope_c), (t1, t1 + slope_c)


def _window_events(window) -> list[Event]:
    a, b, c, d = window
    pad = 0.05 * max(b - a, d - c)
    return [
        Event(lambda t, y: y[0] - (a - pad), terminal=True, direction=-1, name="exit"),
        Event(lambda t, y: (b + pad) - y[0], terminal=True, direction=-1, name="exit"),
        Event(lambda t, y: y[1] - (c - pad), terminal=True, direction=-1, name="exit"),
        Event(lambda t, y: (d + pad) - y[1], terminal=True, direction=-1, name="exit"),
    ]


def _trace(rhs, y0, span, window, n: int = 240):
    try:
        orb = integrate(rhs, y0, (0.0, span), DEFAULT_CONFIG, _window_events(window))
    except IntegrationError:
        return None
    tau = np.linspace(orb.tau[0], orb.tau[-1], n)
    y = orb.sol(tau)
    return y[0], y[1]


def render_portrait(
    U: TrigPolynomial,
    alpha: float,
    window: tuple[float, float, float, float],
    orbits: int = 12,
    manifolds: bool = True,
    seed: int = 0,
    span: float = 12.0,
) -> str:
    """Static SVG of the phase plane: pericenter and equilibrium lines, equilibria,
    saddle manifolds and a fixed-seed set of sample orbits.  Deterministic in its inputs."""
    a, b, c, d = window
    if not all(math.isfinite(v) for v in window) or not (b > a and d > c):
        raise InputError(f"portrait window {window!r} must be finite and non-empty")
    cv = _Canvas(window)
    cv.parts.append(f'<rect x="0" y="0" width="{cv.width}" height="{cv.height}" fill="white"/>')
    cv.parts.append(
        f'<rect x="{cv.margin}" y="{cv.margin}" width="{cv.width - 2 * cv.margin}" '
        f'height="{cv.height - 2 * cv.margin}" fill="none" stroke="black"/>'
    )
    # ticks at multiples of pi/2
    for k in range(math.ceil(a / (math.pi / 2)), math.floor(b / (math.pi / 2)) + 1):
        xx = cv.x(k * math.pi / 2)
        cv.parts.append(f'<text x="{xx:.2f}" y="{cv.height - cv.margin + 16}" font-size="11" '
                        f'text-anchor="middle">{k}π/2</text>')
    for k in range(math.ceil(c / (math.pi / 2)), math.floor(d / (math.pi / 2)) + 1):
        yy = cv.y(k * math.pi / 2)
        cv.parts.append(f'<text x="{cv.margin - 6}" y="{yy + 4:.2f}" font-size="11" '
                        f'text-anchor="end">{k}π/2</text>')
    cv.parts.append(f'<text x="{cv.width / 2:.1f}" y="{cv.height - 8}" font-size="12" '
                    f'text-anchor="middle">θ</text>')
    cv.parts.append(f'<text x="12" y="{cv.height / 2:.1f}" font-size="12">φ</text>')
    cv.parts.append(f'<text x="{cv.width / 2:.1f}" y="20" font-size="13" text-anchor="middle">'
                    f'alpha = {alpha:.6g}</text>')
    # lines phi = theta + k pi / 2: equilibria lie on even k, the pericenter line on odd k
    for k in range(math.floor((c - b) / (math.pi / 2)) - 1, math.ceil((d - a) / (math.pi / 2)) + 2):
        seg = _clip_line(k * math.pi / 2, window)
        if seg is None:
            continue
        (t0, p0), (t1, p1) = seg
        colour, dash = ("#bbbbbb", "4 3") if k % 2 == 0 else ("#e0a040", "2 2")
        cv.polyline([t0, t1], [p0, p1], colour, 0.8, dash)

    rhs = planar_rhs(U, alpha)
    if not U.is_constant:
        eqs = classify_equilibria(U)
        colours = {"saddle": "#1f4fbf", "sink": "#2a9d3a", "source": "#c0392b", "degenerate": "#777777"}
        for e in eqs:
            th0 = e.base.angle
            for m in range(math.floor((a - th0) / (2 * math.pi)), math.ceil((b - th0) / (2 * math.pi)) + 1):
                th = th0 + 2 * math.pi * m
                if not a <= th <= b:
                    continue
                for j in range(math.floor((c - th) / math.pi) - 1, math.ceil((d - th) / math.pi) + 2):
                    if j % 2 != e.parity:
                        continue
                    ph = th + j * math.pi
                    if c <= ph <= d:
                        cv.parts.append(f'<circle cx="{cv.x(th):.2f}" cy="{cv.y(ph):.2f}" r="4" '
                                        f'fill="{colours[e.stability]}"/>')
        if manifolds:
            for cc in find_central_configurations(U):
                if cc.kind != "minimum":
                    continue
                lo_m = math.floor((a - cc.angle) / (2 * math.pi)) - 1
                hi_m = math.ceil((b - cc.angle) / (2 * math.pi)) + 1
                for m in range(lo_m, hi_m + 1):
                    th = cc.angle + 2 * math.pi * m
                    for sign in (1.0, -1.0):
                        try:
                            y0 = _seed(U, alpha, th, sign, 1e-7)
                        except PotentialError:
                            continue
                        tr = _trace(rhs, y0, span, (a - 2 * math.pi, b + 2 * math.pi, c - 4 * math.pi,
                                                    d + 4 * math.pi))
                        if tr is None:
                            continue
                        tt, pp = tr
                        # the unstable branch and, shifted by pi, the stable branch of the partner saddle
                        for j in range(math.floor((c - pp.max()) / math.pi) - 1,
                                       math.ceil((d - pp.min()) / math.pi) + 1):
                            colour = "#d0342c" if j % 2 == 0 else "#2060d0"
                            cv.polyline(tt, pp + j * math.pi, colour, 1.6)
    if orbits > 0:
        rng = np.random.default_rng(seed)
        starts = rng.uniform([a, c], [b, d], size=(orbits, 2))
        back = lambda t, y: [-v for v in rhs(t, y)]
        for y0 in starts:
            for f in (rhs, back):
                tr = _trace(f, y0, span, window)
                if tr is not None:
                    cv.polyline(tr[0], tr[1], "#888888", 0.6)
    cv.parts.append(f'<clipPath id="frame"><rect x="{cv.margin}" y="{cv.margin}" '
                    f'width="{cv.width - 2 * cv.margin}" height="{cv.height - 2 * cv.margin}"/></clipPath>')
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{cv.width}" height="{cv.height}" '
            f'viewBox="0 0 {cv.width} {cv.height}">')
    # drawing content sits in a clipped group; frame and labels are outside it
    frame, body = cv.parts[:2], cv.parts[2:]
    labels = [p for p in body if p.startswith("<text")]
    shapes = [p for p in body if not p.startswith("<text") and not p.startswith("<clipPath")]
    clip = [p for p in body if p.startswith("<clipPath")]
    out = [head, "<defs>", *clip, "</defs>", *frame, '<g clip-path="url(#frame)">', *shapes, "</g>",
           *labels, "</svg>"]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands


def _tolerances(args) -> dict:
    return {"integrator": DEFAULT_CONFIG.as_dict(), "alpha_tol": getattr(args, "tol", None)}


def _angles(args) -> tuple[float, float]:
    if args.theta_minus is None or args.theta_plus is None:
        raise InputError("--theta-minus and --theta-plus are required")
    tm, tp = parse_angle(args.theta_minus), parse_angle(args.theta_plus)
    if tm == tp:
        raise InputError("theta-minus and theta-plus must differ")
    return tm, tp


def _single_alpha(args, required: bool = True) -> float | None:
    vals = args.alpha or []
    if len(vals) > 1:
        raise InputError("this command takes a single --alpha")
    if not vals:
        if required:
            raise InputError("--alpha is required")
        return None
    return parse_alpha(vals[0])


def _check_minima(U, tm, tp):
    a, b = sorted((tm % (2 * math.pi), tp % (2 * math.pi)))
    d = check_class_U(U, a, b)
    if not d.passed:
        raise InputError("endpoints are not admissible minimal configurations: " + "; ".join(d.failures))


def cmd_threshold(args, U, out: Path) -> tuple[int, dict, list]:
    tm, tp = _angles(args)
    _check_minima(U, tm, tp)
    res = find_alpha_bar_general(U, tm, tp, args.tol)
    data = res.as_dict()
    data["tolerances"] = _tolerances(args)
    write_json(data, out / "threshold.json")
    return (EXIT_OK if res.found else EXIT_SENTINEL), data, ["threshold.json"]


def _gap_row(job):
    U_dict, a, tm, tp = job
    g = gap_value(TrigPolynomial.from_dict(U_dict), a, tm, tp, estimate_error=True)
    return (a, g.theta_hat_minus, g.theta_hat_plus, g.gap, g.err)


def cmd_gap_curve(args, U, out: Path):
    tm, tp = _angles(args)
    if tp < tm:
        tm, tp = tp, tm
    if winding_number(tm, tp) != 0:
        raise InputError("gap-curve works in the base sector theta+ - theta- <= 2 pi")
    if args.alpha_range is None:
        raise InputError("--alpha-range LO:HI:N is required")
    alphas = parse_alpha_range(args.alpha_range)
    jobs = [(U.to_dict(), float(a), tm, tp) for a in alphas]
    workers = worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_gap_row, jobs))
    else:
        rows = [_gap_row(j) for j in jobs]
    write_csv(out / "gap_curve.csv", ["alpha", "theta_hat_minus", "theta_hat_plus", "gap", "err"], rows)
    return EXIT_OK, {"points": len(rows), "tolerances": _tolerances(args)}, ["gap_curve.csv"]


def cmd_portrait(args, U, out: Path):
    alphas = [parse_alpha(s) for s in (args.alpha or [])]
    if args.alpha_range:
        alphas += [float(a) for a in parse_alpha_range(args.alpha_range)]
    if not alphas:
        raise InputError("portrait needs --alpha or --alpha-range")
    window = (-0.5, 3 * math.pi / 2, -0.5, 5 * math.pi / 2)
    if args.window:
        parts = args.window.split(":")
        if len(parts) != 4:
            raise InputError("--window must be THETA_LO:THETA_HI:PHI_LO:PHI_HI")
        window = tuple(parse_angle(p) for p in parts)
    files = []
    for a in alphas:
        svg = render_portrait(U, a, window, orbits=args.orbits, seed=args.seed)
        name = f"portrait_alpha_{a:.6f}.svg"
        (out / name).write_text(svg)
        files.append(name)
    return EXIT_OK, {"alphas": alphas, "window": list(window)}, files


def _arc_rows(arc, U, alpha):
    res = arc.energy_residual(U, alpha)
    return [(arc.t[i], arc.r[i], arc.theta[i], arc.x[i], arc.y[i], res[i]) for i in range(len(arc.t))]


def cmd_trajectory(args, U, out: Path):
    tm, tp = _angles(args)
    if tp < tm:
        raise InputError("trajectory needs theta-plus > theta-minus")
    if winding_number(tm, tp) != 0:
        raise InputError("trajectory works in sectors with theta+ - theta- <= 2 pi")
    _check_minima(U, tm, tp)
    alpha = _single_alpha(args, required=False)
    thr = None
    if alpha is None:
        thr = find_alpha_bar_general(U, tm, tp, args.tol)
        if not thr.found:
            write_json(thr.as_dict(), out / "threshold.json")
            return EXIT_SENTINEL, thr.as_dict(), ["threshold.json"]
        alpha = thr.alpha_bar
    m = constrained_minimizer(U, alpha, tm, tp, smooth_tol=max(1e-7, 100 * args.tol), r_max=args.r_max)
    header = ["t", "r", "theta", "x", "y", "energy_residual"]
    files, rows = [], []
    for i, arc in enumerate(m.arcs):
        name = f"arc_{i}_{arc.kind}.csv"
        arc_rows = _arc_rows(arc, U, alpha)
        write_csv(out / name, header, arc_rows)
        files.append(name)
        # consecutive arcs share their junction instant
        rows.extend(arc_rows[1:] if rows and rows[-1][0] == arc_rows[0][0] else arc_rows)
    write_csv(out / "trajectory.csv", header, rows)
    rep = check_parabolic_definition(m, U)
    data = m.as_dict()
    data["arc_files"] = files
    data["definition_check"] = {
        "passed": rep.passed, "min_radius": rep.min_radius, "angle_errors": list(rep.angle_errors),
        "energy_residual": rep.energy_residual, "velocity_jump": rep.velocity_jump,
        "failures": rep.failures, "caveats": rep.caveats,
    }
    if m.psi is not None:
        data["psi"] = {"residual": m.psi.residual, "derivative": m.psi.derivative,
                       "interval": list(m.psi.interval)}
    data["threshold"] = None if thr is None else thr.as_dict()
    data["tolerances"] = _tolerances(args)
    data["r_max"] = args.r_max
    write_json(data, out / "minimizer.json")
    return EXIT_OK, data, files + ["trajectory.csv", "minimizer.json"]


def _path_rows(p: DiscretePath, U, alpha):
    t = p.times
    vx, vy = np.gradient(p.x, t), np.gradient(p.y, t)
    res = 0.5 * (vx**2 + vy**2) - U(p.theta) / p.r**alpha
    return [(t[i], p.r[i], p.theta[i], p.x[i], p.y[i], res[i]) for i in range(len(t))]


def cmd_bolza(args, U, out: Path):
    alpha = _single_alpha(args)
    if args.start is None or args.end is None or args.T is None:
        raise InputError("bolza needs --start, --end and --T")
    start, end = parse_point(args.start), parse_point(args.end)
    T = parse_real(args.T, "T")
    if T <= 0:
        raise InputError("--T must be positive")
    sector = parse_interval(args.sector, "sector") if args.sector else None
    eps = [parse_real(e, "obstacle") for e in (args.obstacle or ["0"])]
    if any(e < 0 for e in eps):
        raise InputError("obstacle radii must be non-negative")
    rungs = obstacle_ladder(U, alpha, start, end, T, eps, sector, args.n, args.starts, args.seed)
    files, reports = [], []
    header = ["t", "r", "theta", "x", "y", "energy_residual"]
    for i, rg in enumerate(rungs):
        name = f"bolza_path_{i}.csv"
        write_csv(out / name, header, _path_rows(rg.path, U, alpha))
        files.append(name)
        d = rg.report.as_dict()
        d["eps"] = rg.eps
        d["path_file"] = name
        reports.append(d)
    data = {"alpha": alpha, "start": list(start), "end": list(end), "T": T, "n": args.n,
            "sector": None if sector is None else list(sector), "rungs": reports,
            "tolerances": _tolerances(args)}
    pos = [rg for rg in rungs if rg.eps > 0]
    if len(pos) >= 2:
        data["collision_trend_slope"] = collision_trend([r.eps for r in pos], [r.report.min_radius for r in pos])
    write_json(data, out / "bolza.json")
    return EXIT_OK, data, files + ["bolza.json"]


def cmd_periodic(args, U, out: Path):
    alpha = _single_alpha(args)
    if args.T is None:
        raise InputError("periodic needs --T")
    T = parse_real(args.T, "T")
    if T <= 0:
        raise InputError("--T must be positive")
    if args.k == 0:
        raise InputError("--k must be non-zero")
    eps = parse_real(args.obstacle[0], "obstacle") if args.obstacle else 0.0
    path, rep = minimize_periodic(U, alpha, T, args.k, eps, None, args.n, args.starts, args.seed)
    write_csv(out / "periodic_path.csv", ["t", "r", "theta", "x", "y", "energy_residual"],
              _path_rows(path, U, alpha))
    data = rep.as_dict()
    data.update({"alpha": alpha, "T": T, "k": args.k, "n": args.n, "path_file": "periodic_path.csv",
                 "tolerances": _tolerances(args)})
    write_json(data, out / "periodic.json")
    return EXIT_OK, data, ["periodic_path.csv", "periodic.json"]


def cmd_report(args, U, out: Path):
    tm, tp = _angles(args)
    ccs = find_central_configurations(U)
    d = check_class_U(U, *sorted((tm % (2 * math.pi), tp % (2 * math.pi))))
    lo, hi = sorted((tm, tp))
    data = {
        "central_configurations": [
            {"angle": c.angle, "value": c.value, "curvature": c.curvature, "kind": c.kind} for c in ccs
        ],
        "class_check": {"passed": d.passed, "failures": d.failures, "u_min": d.u_min, "u_max": d.u_max},
        "bounds": list(lemma22_bounds(U, lo, hi)),
        "h": winding_number(tm, tp),
        "tolerances": _tolerances(args),
    }
    files = []
    status = EXIT_OK
    if d.passed:
        res = find_alpha_bar_general(U, tm, tp, args.tol)
        data["threshold"] = res.as_dict()
        if res.found:
            svg = render_portrait(U, res.alpha_bar, (lo - 0.5, hi + 0.5, lo - 0.5, hi + math.pi + 0.5),
                                  orbits=args.orbits, seed=args.seed)
            (out / "portrait_threshold.svg").write_text(svg)
            files.append("portrait_threshold.svg")
        else:
            status = EXIT_SENTINEL
    write_json(data, out / "report.json")
    return status, data, files + ["report.json"]


COMMANDS = {
    "threshold": cmd_threshold,
    "gap-curve": cmd_gap_curve,
    "portrait": cmd_portrait,
    "trajectory": cmd_trajectory,
    "bolza": cmd_bolza,
    "periodic": cmd_periodic,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parabolic", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--potential", required=True, help="JSON file {constant, cos, sin}")
        s.add_argument("--theta-minus")
        s.add_argument("--theta-plus")
        s.add_argument("--alpha", action="append")
        s.add_argument("--alpha-range", help="LO:HI:N")
        s.add_argument("--tol", type=float, default=1e-8)
        s.add_argument("--out", default=".")
        s.add_argument("--window", help="THETA_LO:THETA_HI:PHI_LO:PHI_HI (portrait)")
        s.add_argument("--orbits", type=int, default=12)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--r-max", type=float, default=1e4)
        s.add_argument("--start", help="R,THETA")
        s.add_argument("--end", help="R,THETA")
        s.add_argument("--T")
        s.add_argument("--k", type=int, default=1)
        s.add_argument("--sector", help="LO:HI")
        s.add_argument("--obstacle", action="append", help="obstacle radius; repeat for a ladder")
        s.add_argument("--n", type=int, default=400)
        s.add_argument("--starts", type=int, default=5)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        if not args.tol > 0:
            raise InputError("--tol must be positive")
        if args.n < 2 or args.starts < 1:
            raise InputError("--n must be at least 2 and --starts at least 1")
        U = load_potential(args.potential)
        out.mkdir(parents=True, exist_ok=True)
        status, _, files = COMMANDS[args.command](args, U, out)
    except (InputError, PotentialError, ValueError) as exc:
        print(f"parabolic: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NUMERICAL_ERRORS as exc:
        print(f"parabolic: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = {
        "command": args.command,
        "parameters": {k: v for k, v in sorted(vars(args).items()) if k != "out"},
        "potential": U.to_dict(),
        "versions": {"parabolic": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "tolerances": _tolerances(args),
        "artifacts": files,
        "exit_status": status,
    }
    write_json(manifest, out / "manifest.json")
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
