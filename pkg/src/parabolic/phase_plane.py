"""First-order blown-up reduction of the zero-energy planar flow.

With p = r**(-alpha/2) z (cos phi, sin phi), z = sqrt(2 U(theta)) and the time
change dt/dtau = z r**(1 + alpha/2), zero-energy solutions of x'' = grad V
become orbits of the autonomous planar system

    theta' = 2 U(theta) sin(phi - theta)
    phi'   = U'(theta) cos(phi - theta) + alpha U(theta) sin(phi - theta)

plus the decoupled radial law r' = 2 r U(theta) cos(phi - theta).  Angles live
on the universal cover throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853, RK45, OdeSolution
from scipy.optimize import brentq

from .potential import (
    CentralConfiguration,
    PotentialError,
    TrigPolynomial,
    find_central_configurations,
)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseState:
    theta: float
    phi: float

    @property
    def delta(self) -> float:
        return self.phi - self.theta

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi])


@dataclass(frozen=True)
class ExtendedState:
    r: float
    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not self.r > 0.0:
            raise ValueError(f"radius must be positive, got {self.r!r}")

    def z(self, U: TrigPolynomial) -> float:
        return math.sqrt(2.0 * U.value(self.theta))


@dataclass(frozen=True)
class Equilibrium:
    base: CentralConfiguration
    parity: int
    stability: str  # "saddle" | "sink" | "source" | "degenerate"

    @property
    def state(self) -> PhaseState:
        return PhaseState(self.base.angle, self.base.angle + self.parity * math.pi)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 200_000
    event_tol: float = 1e-10
    method: str = "DOP853"

    def __post_init__(self) -> None:
        if not (self.rtol > 0 and self.atol > 0 and self.event_tol > 0):
            raise ValueError("integrator tolerances must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {sorted(_METHODS)}")

    def as_dict(self) -> dict:
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "max_step": self.max_step if math.isfinite(self.max_step) else None,
            "max_steps": self.max_steps,
            "event_tol": self.event_tol,
            "method": self.method,
        }


_METHODS = {"DOP853": DOP853, "RK45": RK45}

DEFAULT_CONFIG = IntegratorConfig()


# ---------------------------------------------------------------------------
# vector fields


def vector_field(U: TrigPolynomial, alpha: float, theta: float, phi: float) -> tuple[float, float]:
    u, du = U.value_d1(theta)
    d = phi - theta
    s, c = math.sin(d), math.cos(d)
    return 2.0 * u * s, du * c + alpha * u * s


def extended_field(U: TrigPolynomial, alpha: float, state: ExtendedState) -> tuple[float, float, float]:
    if not state.r > 0.0:
        raise ValueError("radius must be positive")
    u, du = U.value_d1(state.theta)
    d = state.phi - state.theta
    s, c = math.sin(d), math.cos(d)
    return 2.0 * state.r * u * c, 2.0 * u * s, du * c + alpha * u * s


def v_value(U: TrigPolynomial, theta: float, phi: float) -> float:
    """The Lyapunov-like quantity sqrt(U) cos(phi - theta); non-decreasing on orbits."""
    return math.sqrt(U.value(theta)) * math.cos(phi - theta)


def v_rate(U: TrigPolynomial, alpha: float, theta: float, phi: float) -> float:
    """d v / d tau = (2 - alpha) U**1.5 sin(phi - theta)**2."""
    u = U.value(theta)
    return (2.0 - alpha) * u**1.5 * math.sin(phi - theta) ** 2


def z_consistency_residual(U: TrigPolynomial, theta: float, phi: float) -> float:
    """Residual of z' = z U' sin(phi-theta) when z is eliminated as sqrt(2U).

    d/dtau sqrt(2U) = U'/sqrt(2U) * theta' = U' * 2U sin / sqrt(2U) = z U' sin.
    """
    u, du = U.value_d1(theta)
    z = math.sqrt(2.0 * u)
    d = phi - theta
    implied = du / z * (2.0 * u * math.sin(d))
    return abs(implied - z * du * math.sin(d))


def planar_rhs(U: TrigPolynomial, alpha: float) -> Callable[[float, np.ndarray], list[float]]:
    coeffs = list(zip(range(1, U.degree + 1), U.cos_coeffs, U.sin_coeffs))
    a0 = U.constant
    cos, sin = math.cos, math.sin

    def rhs(tau, y):
        th = y[0]
        u, du = a0, 0.0
        for k, a, b in coeffs:
            ck, sk = cos(k * th), sin(k * th)
            u += a * ck + b * sk
            du += k * (b * ck - a * sk)
        d = y[1] - th
        s, c = sin(d), cos(d)
        return [2.0 * u * s, du * c + alpha * u * s]

    return rhs


def radial_rhs(U: TrigPolynomial, alpha: float) -> Callable[[float, np.ndarray], list[float]]:
    """(theta, phi, log r) system; log r' = 2 U cos(phi - theta)."""
    coeffs = list(zip(range(1, U.degree + 1), U.cos_coeffs, U.sin_coeffs))
    a0 = U.constant
    cos, sin = math.cos, math.sin

    def rhs(tau, y):
        th = y[0]
        u, du = a0, 0.0
        for k, a, b in coeffs:
            ck, sk = cos(k * th), sin(k * th)
            u += a * ck + b * sk
            du += k * (b * ck - a * sk)
        d = y[1] - th
        s, c = sin(d), cos(d)
        return [2.0 * u * s, du * c + alpha * u * s, 2.0 * u * c]

    return rhs


# ---------------------------------------------------------------------------
# equilibria


def classify_equilibria(U: TrigPolynomial) -> list[Equilibrium]:
    """Equilibria (theta*, theta* + h pi), h in {0, 1}, one per central configuration and parity."""
    if U.is_constant:
        raise PotentialError("constant potential: degenerate line of equilibria phi = theta + k pi")
    out = []
    for cc in find_central_configurations(U):
        for h in (0, 1):
            if cc.kind == "minimum":
                stab = "saddle"
            elif cc.kind == "maximum":
                # a sink/source pair: parity 0 attracts in the future (cos -> +1 branch)
                # only after the sign analysis of the Jacobian below
                stab = _max_stability(U, cc, h)
            else:
                stab = "degenerate"
            out.append(Equilibrium(cc, h, stab))
    return out


def jacobian(U: TrigPolynomial, alpha: float, theta: float, phi: float) -> np.ndarray:
    u, d1, d2 = U.jet(theta)
    d = phi - theta
    s, c = math.sin(d), math.cos(d)
    return np.array(
        [
            [2.0 * d1 * s - 2.0 * u * c, 2.0 * u * c],
            [d2 * c + d1 * s + alpha * d1 * s - alpha * u * c, -d1 * s + alpha * u * c],
        ]
    )


def _max_stability(U: TrigPolynomial, cc: CentralConfiguration, parity: int) -> str:
    # the trace is (alpha - 2) u cos(h pi); the determinant -2 U'' u cos^2 is positive at a maximum
    c = math.cos(parity * math.pi)
    return "sink" if c > 0 else "source"


def linearize_saddle(
    U: TrigPolynomial, alpha: float, theta_star: float, parity: int
) -> tuple[float, np.ndarray]:
    """Eigenpair of the saddle (theta*, theta* + parity*pi) driving its invariant manifold.

    parity 1: the unstable eigenvalue and the direction (1, v2) normalized to unit
    length, oriented with theta increasing.  parity 0: the stable eigenvalue and
    direction, again oriented with theta increasing.
    """
    u, d1, d2 = U.jet(theta_star)
    if abs(d1) > 1e-8 * max(1.0, abs(u)):
        raise PotentialError(f"theta* = {theta_star!r} is not a central configuration")
    if d2 <= 1e-9 * abs(u):
        raise PotentialError(f"degenerate or non-minimal saddle at theta* = {theta_star!r} (U'' = {d2:.3e})")
    mu = d2 / u
    root = math.sqrt((2.0 - alpha) ** 2 + 8.0 * mu)
    if parity % 2:
        # J = u [[2, -2], [alpha - mu, -alpha]]
        lam_n = 0.5 * (2.0 - alpha + root)
        v2 = 1.0 - 0.5 * lam_n
    else:
        # J = u [[-2, 2], [mu - alpha, alpha]]
        lam_n = 0.5 * (alpha - 2.0 - root)
        v2 = 1.0 + 0.5 * lam_n
    direction = np.array([1.0, v2])
    return u * lam_n, direction / np.linalg.norm(direction)


def unstable_slope(mu: float, alpha: float) -> float:
    """Slope v2 of the unstable direction (1, v2) at (theta-, theta- + pi)."""
    return 0.5 + alpha / 4.0 - 0.25 * math.sqrt((2.0 - alpha) ** 2 + 8.0 * mu)


# ---------------------------------------------------------------------------
# integration


@dataclass
class Event:
    fn: Callable[[float, np.ndarray], float]
    terminal: bool = False
    direction: int = 0
    name: str = ""


@dataclass
class EventHit:
    name: str
    tau: float
    state: np.ndarray
    residual: float


@dataclass
class Orbit:
    tau: np.ndarray
    y: np.ndarray  # shape (n, dim)
    events: list[EventHit]
    sol: OdeSolution | None = field(default=None, repr=False)
    status: str = "ok"
    n_steps: int = 0

    @property
    def theta(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def phi(self) -> np.ndarray:
        return self.y[:, 1]

    def __call__(self, tau):
        if self.sol is None:
            raise IntegrationError("orbit has no dense output")
        return self.sol(tau)

    def first(self, name: str) -> EventHit | None:
        for hit in self.events:
            if hit.name == name:
                return hit
        return None


def integrate(
    field_fn: Callable[[float, np.ndarray], Sequence[float]],
    y0: Sequence[float],
    tau_span: tuple[float, float],
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    events: Sequence[Event] = (),
) -> Orbit:
    """Adaptive embedded Runge-Kutta integration with dense-output event location.

    Events are scalar functions of (tau, y); a sign change across an accepted
    step (respecting ``direction``) is located by Brent's method on the step's
    interpolant.  Integration stops at the first terminal event.
    """
    t0, t1 = float(tau_span[0]), float(tau_span[1])
    y0 = np.asarray(y0, dtype=float)
    solver_cls = _METHODS[cfg.method]
    solver = solver_cls(
        field_fn, t0, y0, t1, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step, vectorized=False
    )
    ts = [t0]
    ys = [y0.copy()]
    interps = []
    hits: list[EventHit] = []
    ev_prev = [ev.fn(t0, y0) for ev in events]
    status = "ok"
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            raise IntegrationError(f"max_steps = {cfg.max_steps} exceeded at tau = {solver.t:.6g}")
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationError(f"step failed at tau = {solver.t:.6g}: {msg}")
        t_old, t_new = solver.t_old, solver.t
        dense = solver.dense_output()
        stop_at = None
        ev_new = [ev.fn(t_new, solver.y) for ev in events]
        found = []
        for k, ev in enumerate(events):
            g0, g1 = ev_prev[k], ev_new[k]
            if g0 == 0.0 or g0 * g1 > 0.0:
                continue
            up = g1 > g0
            if ev.direction > 0 and not up or ev.direction < 0 and up:
                continue
            if g1 == 0.0:
                te = t_new
            else:
                te = brentq(
                    lambda t: ev.fn(t, dense(t)), t_old, t_new,
                    xtol=min(cfg.event_tol, 1e-13), rtol=4 * np.finfo(float).eps,
                )
            found.append((te, k))
        found.sort(key=lambda p: p[0] if t1 >= t0 else -p[0])
        for te, k in found:
            ye = dense(te)
            hits.append(EventHit(events[k].name, te, ye, float(events[k].fn(te, ye))))
            if events[k].terminal:
                stop_at = (te, ye)
                break
        ev_prev = ev_new
        if stop_at is not None:
            te, ye = stop_at
            ts.append(te)
            ys.append(np.asarray(ye))
            interps.append(dense)
            status = f"event:{hits[-1].name}"
            break
        ts.append(t_new)
        ys.append(solver.y.copy())
        interps.append(dense)
    if solver.status == "failed":
        raise IntegrationError("integration failed")
    sol = OdeSolution(np.array(ts), interps) if interps else None
    return Orbit(np.array(ts), np.array(ys), hits, sol, status, steps)


def integrate_phase(
    U: TrigPolynomial,
    alpha: float,
    s0: PhaseState,
    tau_span: tuple[float, float],
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    events: Sequence[Event] = (),
) -> Orbit:
    return integrate(planar_rhs(U, alpha), s0.as_array(), tau_span, cfg, events)


def v_event(U: TrigPolynomial, name: str = "pericenter", terminal: bool = True) -> Event:
    """v = 0, i.e. the pericenter line phi = theta + pi/2 (mod pi), crossed upward."""
    return Event(lambda t, y: v_value(U, y[0], y[1]), terminal=terminal, direction=1, name=name)


def orbit_to_csv(orbit: Orbit, path, with_r: bool = False) -> None:
    """Write ``tau,theta,phi[,r],event`` rows; event rows carry the event name."""
    rows = []
    for t, y in zip(orbit.tau, orbit.y):
        rows.append((t, y, ""))
    for hit in orbit.events:
        rows.append((hit.tau, hit.state, hit.name))
    rows.sort(key=lambda r: r[0])
    header = "tau,theta,phi" + (",r" if with_r else "") + ",event"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, y, name in rows:
            vals = [t, y[0], y[1]] + ([math.exp(y[2])] if with_r else [])
            fh.write(",".join(format(float(v), ".17g") for v in vals) + f",{name}\n")
