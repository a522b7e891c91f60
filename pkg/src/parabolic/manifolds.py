"""Apsidal angles: first crossings of the saddle manifolds with the pericenter line.

The unstable branch leaves (theta-, theta- + pi) with theta increasing; the
stable branch enters (theta+, theta+) with theta increasing.  The stable branch
is obtained from the time reversal (theta(-tau), phi(-tau) + pi), which maps it
to the unstable manifold of (theta+, theta+ + pi) leaving with theta decreasing.
Both are therefore computed by one forward integration routine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .phase_plane import (
    DEFAULT_CONFIG,
    Event,
    IntegratorConfig,
    Orbit,
    PhaseState,
    integrate,
    linearize_saddle,
    planar_rhs,
    radial_rhs,
    v_event,
)
from .potential import TrigPolynomial


class ManifoldError(RuntimeError):
    pass


DEFAULT_SEED = 1e-7
MAX_TAU = 1e4


@dataclass
class ApsidalResult:
    alpha: float
    branch: str  # "unstable" | "stable"
    base: float  # theta- or theta+
    theta_hat: float
    crossing: PhaseState
    tau: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    err_estimate: float
    seed_offset: float
    orbit: Orbit = field(repr=False)

    @property
    def phi_shift(self) -> float:
        # stable branch is stored as its reversal; phi_original = phi_reversed - pi
        return -math.pi if self.branch == "stable" else 0.0

    @property
    def sweep(self) -> float:
        """Apsidal angle |theta_hat - base| swept from infinity to the pericenter."""
        return abs(self.theta_hat - self.base)


def seed_offset_for(theta_base: float) -> float:
    return DEFAULT_SEED * max(1.0, abs(theta_base))


def _seed(U: TrigPolynomial, alpha: float, theta0: float, sign: float, delta: float) -> np.ndarray:
    _, direction = linearize_saddle(U, alpha, theta0, 1)
    return np.array([theta0, theta0 + math.pi]) + sign * delta * direction


def _run_branch(
    U: TrigPolynomial,
    alpha: float,
    theta0: float,
    sign: float,
    delta: float,
    cfg: IntegratorConfig,
    with_log_r: bool = False,
    stop_theta: float | None = None,
) -> Orbit:
    """Integrate the unstable branch of (theta0, theta0 + pi) leaving in direction sign*(1, v2).

    Stops at the first pericenter crossing v = 0, or at theta = stop_theta when
    given.  Fails when theta runs past theta0 +- 2pi/(2-alpha) + 1 without
    crossing, which the monotonicity of v rules out for a correct integration.
    """
    y0 = _seed(U, alpha, theta0, sign, delta)
    limit = 2.0 * math.pi / (2.0 - alpha) + 1.0
    events = [
        v_event(U),
        Event(lambda t, y: sign * (y[0] - theta0) - limit, terminal=True, direction=1, name="runaway"),
    ]
    if stop_theta is not None:
        events.append(
            Event(lambda t, y: sign * (y[0] - stop_theta), terminal=True, direction=1, name="stop")
        )
    if with_log_r:
        rhs = radial_rhs(U, alpha)
        y0 = np.append(y0, 0.0)
    else:
        rhs = planar_rhs(U, alpha)
    orbit = integrate(rhs, y0, (0.0, MAX_TAU), cfg, events)
    if orbit.status == "event:runaway" or orbit.status == "ok":
        raise ManifoldError(
            f"no pericenter crossing from theta0 = {theta0:.12g} at alpha = {alpha:.12g} "
            f"(status {orbit.status}, tau = {orbit.tau[-1]:.6g})"
        )
    return orbit


def _apsidal(
    U: TrigPolynomial,
    alpha: float,
    theta0: float,
    branch: str,
    cfg: IntegratorConfig,
    seed_offset: float | None,
    estimate_error: bool,
) -> ApsidalResult:
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha!r}")
    delta = seed_offset_for(theta0) if seed_offset is None else seed_offset
    sign = 1.0 if branch == "unstable" else -1.0
    orbit = _run_branch(U, alpha, theta0, sign, delta, cfg)
    hit = orbit.first("pericenter")
    theta_hat = float(hit.state[0])
    err = 0.0
    if estimate_error:
        half = _run_branch(U, alpha, theta0, sign, 0.5 * delta, cfg)
        err = abs(float(half.first("pericenter").state[0]) - theta_hat)
    if branch == "unstable":
        crossing = PhaseState(theta_hat, float(hit.state[1]))
        tau, th, ph = orbit.tau, orbit.theta, orbit.phi
    else:
        crossing = PhaseState(theta_hat, float(hit.state[1]) - math.pi)
        # original-flow orientation: tau -> -tau, phi -> phi - pi
        tau, th, ph = -orbit.tau[::-1], orbit.theta[::-1], orbit.phi[::-1] - math.pi
    return ApsidalResult(alpha, branch, theta0, theta_hat, crossing, tau, th, ph, err, delta, orbit)


def unstable_apsidal(
    U: TrigPolynomial,
    alpha: float,
    theta_minus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    seed_offset: float | None = None,
    estimate_error: bool = True,
) -> ApsidalResult:
    """First pericenter crossing of the unstable manifold of (theta-, theta- + pi)."""
    return _apsidal(U, alpha, theta_minus, "unstable", cfg, seed_offset, estimate_error)


def stable_apsidal(
    U: TrigPolynomial,
    alpha: float,
    theta_plus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    seed_offset: float | None = None,
    estimate_error: bool = True,
) -> ApsidalResult:
    """Last pericenter crossing of the stable manifold entering (theta+, theta+)."""
    return _apsidal(U, alpha, theta_plus, "stable", cfg, seed_offset, estimate_error)


def apsidal_bounds(U: TrigPolynomial, alpha: float) -> tuple[float, float]:
    """Two-sided bound on the swept apsidal angle |theta_hat - base|."""
    u_min, u_max = U.extrema()
    lo = 2.0 / (2.0 - alpha) * math.asin(math.sqrt(u_min / u_max))
    return lo, math.pi / (2.0 - alpha)


class PhiGraph:
    """phi as a function of theta along a manifold branch, up to its crossing.

    Evaluation inverts the monotone theta(tau) on the dense output of the
    integration, so accuracy is that of the integrator.  Sampled grids with
    exact slopes are available through :meth:`sample`.
    """

    def __init__(self, res: ApsidalResult, U: TrigPolynomial):
        self.res = res
        self.U = U
        orb = res.orbit
        self._tau = orb.tau
        self._theta = orb.theta
        sign = 1.0 if res.branch == "unstable" else -1.0
        if np.any(np.diff(sign * self._theta) <= 0.0):
            raise ManifoldError("manifold polyline is not monotone in theta before the crossing")
        self._sign = sign
        lo, hi = sorted((float(self._theta[0]), float(self._theta[-1])))
        self.domain = (lo, hi)

    def tau_of(self, theta: float) -> float:
        lo, hi = self.domain
        if not lo - 1e-12 <= theta <= hi + 1e-12:
            raise ValueError(f"theta = {theta!r} outside branch domain [{lo!r}, {hi!r}]")
        theta = min(max(theta, lo), hi)
        i = int(np.searchsorted(self._sign * self._theta, self._sign * theta))
        i = min(max(i, 1), len(self._tau) - 1)
        t0, t1 = self._tau[i - 1], self._tau[i]
        f = lambda t: self.res.orbit.sol(t)[0] - theta
        f0, f1 = f(t0), f(t1)
        if f0 == 0.0:
            return float(t0)
        if f1 == 0.0:
            return float(t1)
        return brentq(f, t0, t1, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def __call__(self, theta: float) -> float:
        y = self.res.orbit.sol(self.tau_of(theta))
        return float(y[1]) + self.res.phi_shift

    def slope(self, theta: float) -> float:
        """Exact d phi / d theta from the field: alpha/2 + U'/(2U) cot(phi - theta)."""
        phi = self(theta)
        return graph_slope(self.U, self.res.alpha, theta, phi)

    def sample(self, n: int = 200, theta_range: tuple[float, float] | None = None):
        lo, hi = theta_range if theta_range is not None else self.domain
        th = np.linspace(lo, hi, n)
        ph = np.array([self(t) for t in th])
        return th, ph


def graph_slope(U: TrigPolynomial, alpha: float, theta: float, phi: float) -> float:
    u, du = U.value_d1(theta)
    return alpha / 2.0 + du / (2.0 * u) / math.tan(phi - theta)


def graph_phi_of_theta(
    U: TrigPolynomial,
    res: ApsidalResult,
    theta_range: tuple[float, float] | None = None,
    n: int = 200,
    check: bool = True,
):
    """Sample phi_alpha(theta) on a branch; returns (graph, theta, phi).

    With ``check`` the sampled graph is tested against the slope ODE by central
    differences at interior points (residual below 1e-6).
    """
    g = PhiGraph(res, U)
    lo, hi = g.domain
    if theta_range is not None:
        lo, hi = max(lo, theta_range[0]), min(hi, theta_range[1])
    # stay clear of the seed, where the graph hugs the saddle
    pad = 1e-3 * (hi - lo)
    if res.branch == "unstable":
        lo += pad
    else:
        hi -= pad
    th, ph = g.sample(n, (lo, hi))
    if check:
        h = 1e-5 * (hi - lo)
        worst = 0.0
        for t in th[1:-1:max(1, n // 25)]:
            if t - h < lo or t + h > hi:
                continue
            fd = (g(t + h) - g(t - h)) / (2 * h)
            worst = max(worst, abs(fd - g.slope(t)))
        if worst > 1e-6:
            raise ManifoldError(f"graph fails the slope ODE: residual {worst:.3e}")
    return g, th, ph
