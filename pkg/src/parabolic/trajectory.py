"""Physical zero-energy trajectories rebuilt from phase-plane arcs.

Along an arc, log r is integrated together with (theta, phi) and then shifted so
that r = 1 at the junction with the constraint circle (or at the pericenter).
Physical time follows from dt/dtau = z r**(1 + alpha/2) by Gauss-Legendre
quadrature on the dense output, accumulated outward from the junction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from .manifolds import (
    ApsidalResult,
    PhiGraph,
    _run_branch,
    seed_offset_for,
    stable_apsidal,
    unstable_apsidal,
)
from .phase_plane import DEFAULT_CONFIG, IntegratorConfig
from .potential import TrigPolynomial

R_MAX = 1e4
ARC_SAMPLES = 2000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class TrajectoryError(RuntimeError):
    pass


@dataclass
class Arc:
    """Chronologically ordered samples of one piece of a trajectory."""

    kind: str  # "incoming" | "outgoing" | "circular"
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    rdot: np.ndarray
    thetadot: np.ndarray
    truncated: bool = True  # False when the seed is reached before r = R_MAX

    def energy_residual(self, U: TrigPolynomial, alpha: float) -> np.ndarray:
        kin = 0.5 * (self.rdot**2 + (self.r * self.thetadot) ** 2)
        return kin - U(self.theta) / self.r**alpha

    def action(self, U: TrigPolynomial, alpha: float, i0: int = 0, i1: int | None = None) -> float:
        sl = slice(i0, None if i1 is None else i1 + 1)
        kin = 0.5 * (self.rdot[sl] ** 2 + (self.r[sl] * self.thetadot[sl]) ** 2)
        pot = U(self.theta[sl]) / self.r[sl] ** alpha
        return float(simpson(kin + pot, x=self.t[sl]))

    @property
    def x(self) -> np.ndarray:
        return self.r * np.cos(self.theta)

    @property
    def y(self) -> np.ndarray:
        return self.r * np.sin(self.theta)


def _arc_from_branch(
    U: TrigPolynomial,
    alpha: float,
    base: float,
    branch: str,
    cfg: IntegratorConfig,
    stop_theta: float | None = None,
    n_samples: int = ARC_SAMPLES,
    r_max: float = R_MAX,
    seed_offset: float | None = None,
) -> Arc:
    sign = 1.0 if branch == "unstable" else -1.0
    delta = seed_offset_for(base) if seed_offset is None else seed_offset
    orbit = _run_branch(U, alpha, base, sign, delta, cfg, with_log_r=True, stop_theta=stop_theta)
    sol = orbit.sol
    s_end = float(orbit.tau[-1])
    l_end = float(orbit.y[-1, 2])
    log_rmax = math.log(r_max)

    s_start = float(orbit.tau[0])
    truncated = False
    if orbit.y[0, 2] - l_end > log_rmax:
        # log r decreases monotonically toward the junction on this arc
        s_start = brentq(lambda s: sol(s)[2] - l_end - log_rmax, orbit.tau[0], s_end, xtol=1e-14)
        truncated = True
    s = np.linspace(s_start, s_end, n_samples)
    y = sol(s)
    th, ph, ell = y[0], y[1], y[2] - l_end
    if branch == "stable":
        ph = ph - math.pi

    # elapsed physical time from each sample to the junction
    c = 1.0 + alpha / 2.0
    a, b = s[:-1], s[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    yn = sol(nodes.ravel())
    fn = np.sqrt(2.0 * U(yn[0])) * np.exp(c * (yn[2] - l_end))
    pieces = (fn.reshape(nodes.shape) * _GL_W[None, :]).sum(axis=1) * half
    elapsed = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])

    r = np.exp(ell)
    z = np.sqrt(2.0 * U(th))
    d = ph - th
    rdot = z * r ** (-alpha / 2.0) * np.cos(d)
    thetadot = z * r ** (-1.0 - alpha / 2.0) * np.sin(d)
    if branch == "unstable":
        return Arc("incoming", -elapsed, r, th, ph, rdot, thetadot, truncated)
    rev = slice(None, None, -1)
    return Arc("outgoing", elapsed[rev], r[rev], th[rev], ph[rev], rdot[rev], thetadot[rev], truncated)


def _shift(arc: Arc, dt: float) -> Arc:
    return Arc(arc.kind, arc.t + dt, arc.r, arc.theta, arc.phi, arc.rdot, arc.thetadot, arc.truncated)


def circular_arc(U: TrigPolynomial, theta_a: float, theta_b: float, n: int = 400) -> Arc:
    """Zero-energy motion on r = 1 with theta' = sqrt(2 U(theta)), from theta_a to theta_b > theta_a."""
    th = np.linspace(theta_a, theta_b, n)
    if theta_b > theta_a:
        out = solve_ivp(
            lambda x, t: [1.0 / math.sqrt(2.0 * U.value(x))], (theta_a, theta_b), [0.0],
            t_eval=th, rtol=1e-12, atol=1e-14, method="DOP853",
        )
        t = out.y[0]
    else:
        t = np.zeros_like(th)
    z = np.sqrt(2.0 * U(th))
    ones = np.ones_like(th)
    return Arc("circular", t, ones, th, th + math.pi / 2.0, np.zeros_like(th), z, False)


@dataclass
class ParabolicTrajectory:
    alpha: float
    incoming: Arc
    outgoing: Arc
    asymptotes: tuple[float, float]
    crossing_mismatch: float
    energy_residual_sup: float

    @property
    def arcs(self) -> list[Arc]:
        return [self.incoming, self.outgoing]

    @property
    def t(self) -> np.ndarray:
        return np.concatenate([self.incoming.t, self.outgoing.t[1:]])

    @property
    def r(self) -> np.ndarray:
        return np.concatenate([self.incoming.r, self.outgoing.r[1:]])

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.incoming.theta, self.outgoing.theta[1:]])

    @property
    def pericenter_index(self) -> int:
        return len(self.incoming.t) - 1

    def action(self, U: TrigPolynomial, i0: int, i1: int) -> float:
        """Action between two sample indices of the concatenated samples."""
        p = self.pericenter_index
        if not 0 <= i0 < i1 < len(self.incoming.t) + len(self.outgoing.t) - 1:
            raise IndexError("sample indices out of range")
        total = 0.0
        if i0 < p:
            total += self.incoming.action(U, self.alpha, i0, min(i1, p))
        if i1 > p:
            total += self.outgoing.action(U, self.alpha, max(i0, p) - p, i1 - p)
        return total


def reconstruct(
    U: TrigPolynomial,
    alpha: float,
    theta_minus: float,
    theta_plus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    match_tol: float = 1e-6,
    n_samples: int = ARC_SAMPLES,
    r_max: float = R_MAX,
    seed_offset: float | None = None,
) -> ParabolicTrajectory:
    """Rebuild the parabolic trajectory at a matched exponent (gap ~ 0), normalized to r = 1 at the pericenter."""
    um = unstable_apsidal(U, alpha, theta_minus, cfg, estimate_error=False)
    sp = stable_apsidal(U, alpha, theta_plus, cfg, estimate_error=False)
    mismatch = abs(um.theta_hat - sp.theta_hat)
    if mismatch > match_tol:
        raise TrajectoryError(
            f"orbit not matched at alpha = {alpha!r}: apsidal angles differ by {mismatch:.3e}"
        )
    inc = _arc_from_branch(U, alpha, theta_minus, "unstable", cfg, None, n_samples, r_max, seed_offset)
    out = _arc_from_branch(U, alpha, theta_plus, "stable", cfg, None, n_samples, r_max, seed_offset)
    res = max(np.max(np.abs(inc.energy_residual(U, alpha))), np.max(np.abs(out.energy_residual(U, alpha))))
    return ParabolicTrajectory(alpha, inc, out, (theta_minus, theta_plus), mismatch, float(res))


# ---------------------------------------------------------------------------
# constrained minimizers


@dataclass
class PsiData:
    theta0: float
    residual: float
    derivative: float
    interval: tuple[float, float]


@dataclass
class ConstrainedMinimizer:
    kind: str  # "smooth" | "position_jump" | "velocity_jump"
    alpha: float
    incoming: Arc
    circular: Arc | None
    outgoing: Arc
    delta_pos: float
    delta_vel: float
    theta0: float | None
    gap: float
    theta_hat_minus: float
    theta_hat_plus: float
    asymptotes: tuple[float, float]
    psi: PsiData | None = None

    @property
    def arcs(self) -> list[Arc]:
        return [a for a in (self.incoming, self.circular, self.outgoing) if a is not None]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "delta_pos": self.delta_pos,
            "delta_vel": self.delta_vel,
            "theta0": self.theta0,
            "gap": self.gap,
            "theta_hat_minus": self.theta_hat_minus,
            "theta_hat_plus": self.theta_hat_plus,
            "asymptotes": list(self.asymptotes),
        }


class Psi:
    """psi(theta) = phi_plus(theta) + phi_minus(theta) - 2 theta - pi on the overlap of both graphs."""

    def __init__(self, U: TrigPolynomial, alpha: float, um: ApsidalResult, sp: ApsidalResult):
        self.U, self.alpha = U, alpha
        self.minus = PhiGraph(um, U)
        self.plus = PhiGraph(sp, U)
        lo = max(self.minus.domain[0], self.plus.domain[0], sp.theta_hat)
        hi = min(self.minus.domain[1], self.plus.domain[1], um.theta_hat)
        self.interval = (lo, hi)

    def __call__(self, theta: float) -> float:
        return self.plus(theta) + self.minus(theta) - 2.0 * theta - math.pi

    def derivative(self, theta: float) -> float:
        u, du = self.U.value_d1(theta)
        pp, pm = self.plus(theta), self.minus(theta)
        cot = lambda x: math.cos(x) / math.sin(x)
        return self.alpha + du / (2.0 * u) * (cot(pp - theta) + cot(pm - theta)) - 2.0


def constrained_minimizer(
    U: TrigPolynomial,
    alpha: float,
    theta_minus: float,
    theta_plus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    smooth_tol: float = 1e-7,
    n_samples: int = ARC_SAMPLES,
    r_max: float = R_MAX,
) -> ConstrainedMinimizer:
    """The constrained Morse minimizer (min r = 1) between theta- < theta+.

    Classified by the sign of the gap: position jump along r = 1 when the
    unstable branch reaches the pericenter line first, a symmetric velocity
    jump at the root theta0 of psi when it reaches it last, smooth otherwise.
    """
    um = unstable_apsidal(U, alpha, theta_minus, cfg)
    sp = stable_apsidal(U, alpha, theta_plus, cfg)
    g = um.theta_hat - sp.theta_hat
    tol = max(smooth_tol, 10.0 * (um.err_estimate + sp.err_estimate))
    common = dict(alpha=alpha, gap=g, theta_hat_minus=um.theta_hat, theta_hat_plus=sp.theta_hat,
                  asymptotes=(theta_minus, theta_plus))

    if abs(g) <= tol:
        inc = _arc_from_branch(U, alpha, theta_minus, "unstable", cfg, None, n_samples, r_max)
        out = _arc_from_branch(U, alpha, theta_plus, "stable", cfg, None, n_samples, r_max)
        return ConstrainedMinimizer("smooth", incoming=inc, circular=None, outgoing=out,
                                    delta_pos=0.0, delta_vel=0.0, theta0=None, **common)

    if g < 0.0:
        inc = _arc_from_branch(U, alpha, theta_minus, "unstable", cfg, None, n_samples, r_max)
        circ = circular_arc(U, um.theta_hat, sp.theta_hat)
        out = _arc_from_branch(U, alpha, theta_plus, "stable", cfg, None, n_samples, r_max)
        T = float(circ.t[-1])
        circ = _shift(circ, -0.5 * T)
        inc, out = _shift(inc, -0.5 * T), _shift(out, 0.5 * T)
        return ConstrainedMinimizer("position_jump", incoming=inc, circular=circ, outgoing=out,
                                    delta_pos=sp.theta_hat - um.theta_hat, delta_vel=0.0,
                                    theta0=None, **common)

    psi = Psi(U, alpha, um, sp)
    lo, hi = psi.interval
    p_lo, p_hi = psi(lo), psi(hi)
    if not (p_lo > 0.0 > p_hi):
        raise TrajectoryError(
            f"psi root not bracketed on ({lo:.12g}, {hi:.12g}): psi = ({p_lo:.3e}, {p_hi:.3e})"
        )
    theta0 = brentq(psi, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    dpsi = psi.derivative(theta0)
    inc = _arc_from_branch(U, alpha, theta_minus, "unstable", cfg, theta0, n_samples, r_max)
    out = _arc_from_branch(U, alpha, theta_plus, "stable", cfg, theta0, n_samples, r_max)
    z0 = math.sqrt(2.0 * U.value(theta0))
    dvel = 2.0 * z0 * math.cos(psi.plus(theta0) - theta0)
    return ConstrainedMinimizer("velocity_jump", incoming=inc, circular=None, outgoing=out,
                                delta_pos=0.0, delta_vel=dvel, theta0=theta0,
                                psi=PsiData(theta0, psi(theta0), dpsi, (lo, hi)), **common)


# ---------------------------------------------------------------------------
# checks and output


@dataclass
class ParabolicReport:
    passed: bool
    min_radius: float
    angle_errors: tuple[float, float]
    energy_residual: float
    velocity_jump: float
    eom_residual: float
    failures: list[str] = field(default_factory=list)
    caveats: list[str] = field(default_factory=list)


def check_parabolic_definition(
    x,
    U: TrigPolynomial,
    angle_tol: float = 0.05,
    energy_tol: float = 1e-6,
    jump_tol: float = 1e-6,
) -> ParabolicReport:
    """Test a trajectory (or constrained minimizer) against the definition of a parabolic trajectory.

    Checks positive minimum radius, asymptotic angles at the truncation
    radius, the energy relation, C1 continuity at the junctions, and the
    radial equation of motion on any constraint arc.
    """
    arcs = x.arcs
    alpha = x.alpha
    failures, caveats = [], []
    rmin = min(float(a.r.min()) for a in arcs)
    if not rmin > 0.0:
        failures.append("minimum radius is not positive")
    tm, tp = x.asymptotes
    err_in = abs(float(arcs[0].theta[0]) - tm)
    err_out = abs(float(arcs[-1].theta[-1]) - tp)
    if max(err_in, err_out) > angle_tol:
        failures.append(f"asymptotic angle error {max(err_in, err_out):.3e} exceeds {angle_tol}")
    caveats.append(
        f"finite window: asymptotes checked at r = {arcs[0].r[0]:.4g} (in) and {arcs[-1].r[-1]:.4g} (out)"
    )
    energy = max(float(np.max(np.abs(a.energy_residual(U, alpha)))) for a in arcs)
    if energy > energy_tol:
        failures.append(f"energy residual {energy:.3e} exceeds {energy_tol}")
    jump = 0.0
    for a, b in zip(arcs[:-1], arcs[1:]):
        jump = max(jump, abs(b.rdot[0] - a.rdot[-1]), abs(b.thetadot[0] - a.thetadot[-1]))
    if jump > jump_tol:
        failures.append(f"velocity not continuous at a junction (jump {jump:.3e})")
    eom = 0.0
    if getattr(x, "circular", None) is not None and len(x.circular.t) > 1:
        c = x.circular
        # radial equation r'' - r theta'^2 = -alpha U / r^(alpha+1) with r = 1, r'' = 0
        eom = float(np.max(np.abs(-c.thetadot**2 + alpha * U(c.theta))))
        if eom > energy_tol:
            failures.append(f"equation of motion fails on the constraint arc (residual {eom:.3e})")
    return ParabolicReport(not failures, rmin, (err_in, err_out), energy, jump, eom, failures, caveats)


def write_trajectory_csv(x, U: TrigPolynomial, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "r", "theta", "x", "y", "energy_residual"])
        first = True
        for arc in x.arcs:
            res = arc.energy_residual(U, x.alpha)
            start = 0 if first else 1
            for i in range(start, len(arc.t)):
                w.writerow([format(float(v), ".17g") for v in
                            (arc.t[i], arc.r[i], arc.theta[i], arc.x[i], arc.y[i], res[i])])
            first = False


def write_minimizer_json(m: ConstrainedMinimizer, path, arc_files: list[str]) -> None:
    data = m.as_dict()
    data["arc_files"] = arc_files
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
