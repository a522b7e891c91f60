"""Angular potentials U(theta) as finite trigonometric series.

The homogeneous potential is V(r, theta) = U(theta) / r**alpha; everything in
this package only ever needs U and its first two derivatives, so U is stored as
coefficients and differentiated term by term.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi

SCAN_POINTS = 2048
ROOT_TOL = 1e-12
DEGENERACY_REL_TOL = 1e-9


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class TrigPolynomial:
    """U(theta) = constant + sum_k cos_coeffs[k-1] cos(k theta) + sin_coeffs[k-1] sin(k theta)."""

    constant: float
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        a = tuple(float(c) for c in self.cos_coeffs)
        b = tuple(float(c) for c in self.sin_coeffs)
        n = max(len(a), len(b))
        a = a + (0.0,) * (n - len(a))
        b = b + (0.0,) * (n - len(b))
        if not all(math.isfinite(c) for c in (float(self.constant),) + a + b):
            raise PotentialError("potential coefficients must be finite")
        # strip trailing zero harmonics so equality is structural
        while n and a[-1] == 0.0 and b[-1] == 0.0:
            a, b, n = a[:-1], b[:-1], n - 1
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)

    @property
    def degree(self) -> int:
        return len(self.cos_coeffs)

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def jet(self, theta: float) -> tuple[float, float, float]:
        """Return (U, U', U'') at a scalar angle."""
        u, d1, d2 = self.constant, 0.0, 0.0
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            c = math.cos(k * theta)
            s = math.sin(k * theta)
            u += a * c + b * s
            d1 += k * (b * c - a * s)
            d2 -= k * k * (a * c + b * s)
        return u, d1, d2

    def value(self, theta: float) -> float:
        u = self.constant
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            u += a * math.cos(k * theta) + b * math.sin(k * theta)
        return u

    def value_d1(self, theta: float) -> tuple[float, float]:
        u, d1 = self.constant, 0.0
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            c = math.cos(k * theta)
            s = math.sin(k * theta)
            u += a * c + b * s
            d1 += k * (b * c - a * s)
        return u, d1

    def __call__(self, theta):
        return self.evaluate(theta)[0]

    def evaluate(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized (U, U', U'') over an array of angles."""
        th = np.asarray(theta, dtype=float)
        u = np.full(th.shape, self.constant)
        d1 = np.zeros(th.shape)
        d2 = np.zeros(th.shape)
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            c = np.cos(k * th)
            s = np.sin(k * th)
            u += a * c + b * s
            d1 += k * (b * c - a * s)
            d2 -= k * k * (a * c + b * s)
        return u, d1, d2

    def scaled(self, factor: float) -> "TrigPolynomial":
        return TrigPolynomial(
            self.constant * factor,
            tuple(factor * a for a in self.cos_coeffs),
            tuple(factor * b for b in self.sin_coeffs),
        )

    def compose_frequency(self, m: int) -> "TrigPolynomial":
        """Return theta -> U(m * theta)."""
        if m < 1:
            raise ValueError("frequency multiplier must be a positive integer")
        a = [0.0] * (m * self.degree)
        b = [0.0] * (m * self.degree)
        for k, (ak, bk) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            a[m * k - 1] = ak
            b[m * k - 1] = bk
        return TrigPolynomial(self.constant, tuple(a), tuple(b))

    def extrema(self, n: int = SCAN_POINTS) -> tuple[float, float]:
        """(U_min, U_max) over a period, polished at the critical points."""
        grid = np.linspace(0.0, TWO_PI, n, endpoint=False)
        vals = self.evaluate(grid)[0]
        lo, hi = float(vals.min()), float(vals.max())
        if not self.is_constant:
            for cc in find_central_configurations(self):
                lo = min(lo, cc.value)
                hi = max(hi, cc.value)
        return lo, hi

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {"constant": self.constant, "cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrigPolynomial":
        try:
            constant = float(data["constant"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PotentialError("potential needs a numeric 'constant' entry") from exc
        cos = data.get("cos", [])
        sin = data.get("sin", [])
        if not isinstance(cos, list) or not isinstance(sin, list):
            raise PotentialError("'cos' and 'sin' must be lists of numbers")
        return cls(constant, tuple(float(c) for c in cos), tuple(float(s) for s in sin))

    @classmethod
    def load(cls, path: str | Path) -> "TrigPolynomial":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def eval_jet(U: TrigPolynomial, theta: float) -> tuple[float, float, float]:
    return U.jet(theta)


@dataclass(frozen=True)
class CentralConfiguration:
    angle: float
    value: float
    curvature: float
    kind: str  # "minimum" | "maximum" | "degenerate"

    @property
    def mu(self) -> float:
        """Normalized curvature U''/U at the configuration."""
        return self.curvature / self.value


def _classify(U: TrigPolynomial, angle: float, degeneracy_tol: float) -> CentralConfiguration:
    u, _, d2 = U.jet(angle)
    if abs(d2) <= degeneracy_tol * max(abs(u), 1e-300):
        kind = "degenerate"
    elif d2 > 0:
        kind = "minimum"
    else:
        kind = "maximum"
    return CentralConfiguration(angle, u, d2, kind)


def find_central_configurations(
    U: TrigPolynomial,
    tol: float = ROOT_TOL,
    n_scan: int = SCAN_POINTS,
    degeneracy_tol: float = DEGENERACY_REL_TOL,
) -> list[CentralConfiguration]:
    """All critical points of U in [0, 2pi), sorted by angle.

    Simple roots come from sign changes of U' on the scan grid. Touching roots
    (even multiplicity) are picked up as local minima of |U'| that are tiny
    relative to the size of U', and reported as degenerate.
    """
    if U.is_constant:
        raise PotentialError("constant potential: every angle is a central configuration")

    grid = np.linspace(0.0, TWO_PI, n_scan + 1)
    d1 = U.evaluate(grid)[1]
    scale = float(np.max(np.abs(d1)))
    # normalized so sign products cannot underflow for tiny coefficients
    d1 = d1 / scale
    d1fn = lambda th: U.value_d1(th)[1] / scale

    roots: list[float] = []
    for i in range(n_scan):
        f0, f1 = d1[i], d1[i + 1]
        if f0 == 0.0:
            roots.append(float(grid[i]))
        elif f0 * f1 < 0.0:
            roots.append(brentq(d1fn, grid[i], grid[i + 1], xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps))

    # touching roots: |U'| has a local minimum without sign change
    absd = np.abs(d1[:-1])
    for i in range(n_scan):
        prev_, next_ = absd[i - 1], absd[(i + 1) % n_scan]
        if absd[i] < prev_ and absd[i] < next_ and absd[i] < 1e-6:
            if d1[(i - 1) % n_scan] * d1[(i + 1) % n_scan] > 0:
                d2fn = lambda th: U.jet(th)[2] / scale
                a, b = grid[i] - grid[1], grid[i] + grid[1]
                if d2fn(a) * d2fn(b) < 0:
                    roots.append(brentq(d2fn, a, b, xtol=tol * 1e-2))
                else:
                    roots.append(float(grid[i]))

    out: list[CentralConfiguration] = []
    for th in sorted(r % TWO_PI for r in roots):
        if out and abs(th - out[-1].angle) < 1e-9:
            continue
        out.append(_classify(U, th, degeneracy_tol))
    if len(out) > 1 and abs(out[0].angle + TWO_PI - out[-1].angle) < 1e-9:
        out.pop()
    for cc in out:
        if abs(U.value_d1(cc.angle)[1]) > max(tol, 1e-14 * scale) and cc.kind != "degenerate":
            raise PotentialError(f"critical point at {cc.angle!r} failed to polish below {tol}")
    return out


@dataclass
class ClassDiagnosis:
    passed: bool
    failures: list[str] = field(default_factory=list)
    u_min: float = float("nan")
    u_max: float = float("nan")

    def __bool__(self) -> bool:
        return self.passed


def check_class_U(
    U: TrigPolynomial,
    theta1: float,
    theta2: float,
    level_tol: float = 1e-9,
    crit_tol: float = 1e-8,
) -> ClassDiagnosis:
    """Check that theta1, theta2 are non-degenerate global minima of U at one positive level."""
    failures: list[str] = []
    grid = np.linspace(0.0, TWO_PI, SCAN_POINTS, endpoint=False)
    vals = U.evaluate(grid)[0]
    if np.any(vals <= 0.0):
        failures.append("positivity: U <= 0 somewhere on the scan grid")
    u_min, u_max = float(vals.min()), float(vals.max())
    if not U.is_constant:
        u_min, u_max = U.extrema()
        if u_min <= 0.0:
            failures.append("positivity: U <= 0 at a critical point")

    levels = []
    for name, th in (("theta1", theta1), ("theta2", theta2)):
        u, d1, d2 = U.jet(th)
        levels.append(u)
        if abs(d1) > crit_tol * max(1.0, abs(u)):
            failures.append(f"critical: U'({name}) = {d1:.3e} is not zero")
        if d2 <= DEGENERACY_REL_TOL * abs(u):
            failures.append(f"curvature: U''({name}) = {d2:.6g} is not positive")
    if abs(levels[0] - levels[1]) > level_tol * max(1.0, abs(levels[0])):
        failures.append(f"level: U(theta1) = {levels[0]:.12g} differs from U(theta2) = {levels[1]:.12g}")
    if min(levels) > u_min + level_tol * max(1.0, abs(u_min)):
        failures.append(f"global minimum: U_min = {u_min:.12g} lies below the configuration level")
    if min(levels) <= 0.0:
        failures.append("positivity: configuration level is not positive")
    return ClassDiagnosis(not failures, failures, u_min, u_max)


def too_strict_test(U: TrigPolynomial, theta_bar: float, alpha: float, crit_tol: float = 1e-8) -> bool:
    """True iff U''(theta_bar) < -(2 - alpha)**2 / 8 * U(theta_bar).

    Under this condition no zero-energy solution asymptotic to theta_bar can be
    a minimizer.
    """
    u, d1, d2 = U.jet(theta_bar)
    if abs(d1) > crit_tol * max(1.0, abs(u)):
        raise PotentialError(f"theta_bar = {theta_bar!r} is not a central configuration (U' = {d1:.3e})")
    return d2 < -((2.0 - alpha) ** 2) / 8.0 * u


def minimal_configurations(U: TrigPolynomial, level_tol: float = 1e-9) -> list[CentralConfiguration]:
    """Non-degenerate minima at the global minimum level."""
    ccs = find_central_configurations(U)
    u_min = min(cc.value for cc in ccs)
    return [
        cc for cc in ccs
        if cc.kind == "minimum" and cc.value <= u_min + level_tol * max(1.0, abs(u_min))
    ]


def from_coefficients(constant: float, cos: Sequence[float] = (), sin: Sequence[float] = ()) -> TrigPolynomial:
    return TrigPolynomial(constant, tuple(cos), tuple(sin))
