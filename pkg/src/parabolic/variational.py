"""Discretized action and Maupertuis functionals, direct minimization, and a second-variation probe.

Paths are stored in polar form on the universal cover.  Between two nodes
the path is the straight chord in the plane, so the kinetic term of an
interval is |chord|**2 / (2 h) exactly; the potential uses the trapezoid rule
at the nodes.  Both pieces have closed-form gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp, simpson
from scipy.optimize import minimize, minimize_scalar
from scipy.sparse import coo_matrix, identity
from scipy.sparse.linalg import splu

from .potential import PotentialError, TrigPolynomial

R_FLOOR = 1e-9
MAX_TURN = 0.5 * math.pi  # largest angle a single chord may sweep during descent
DEFAULT_N = 400
DEFAULT_STARTS = 5


class VariationalError(RuntimeError):
    pass


@dataclass
class DiscretePath:
    times: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    fixed_start: bool = True
    fixed_end: bool = True
    allow_collision: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if not (self.times.shape == self.r.shape == self.theta.shape) or self.times.ndim != 1:
            raise ValueError("times, r and theta must be 1-d arrays of equal length")
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0.0):
            raise ValueError("time grid must be strictly increasing with at least two nodes")
        if not self.allow_collision and np.any(self.r <= 0.0):
            raise ValueError("collision node: r must be positive")

    @property
    def n(self) -> int:
        """Number of intervals."""
        return len(self.times) - 1

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def x(self) -> np.ndarray:
        return self.r * np.cos(self.theta)

    @property
    def y(self) -> np.ndarray:
        return self.r * np.sin(self.theta)

    @property
    def min_radius(self) -> float:
        return float(self.r.min())

    def rescaled(self, duration: float) -> "DiscretePath":
        t = self.times[0] + (self.times - self.times[0]) * (duration / self.duration)
        return DiscretePath(t, self.r.copy(), self.theta.copy(), self.fixed_start, self.fixed_end,
                            self.allow_collision)

    @classmethod
    def polar_line(cls, start, end, T: float, n: int = DEFAULT_N) -> "DiscretePath":
        """Linear interpolation in (r, theta) between two polar endpoints."""
        s = np.linspace(0.0, 1.0, n + 1)
        r = start[0] + s * (end[0] - start[0])
        th = start[1] + s * (end[1] - start[1])
        return cls(s * T, r, th)


@dataclass
class MinimizeReport:
    action_value: float
    min_radius: float
    iterations: int
    converged: bool
    active_constraints: dict
    projected_gradient: float
    n_starts: int = 1
    message: str = ""
    start_values: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "action_value": self.action_value,
            "min_radius": self.min_radius,
            "iterations": self.iterations,
            "converged": self.converged,
            "active_constraints": self.active_constraints,
            "projected_gradient": self.projected_gradient,
            "n_starts": self.n_starts,
            "message": self.message,
            "start_values": self.start_values,
        }


# ---------------------------------------------------------------------------
# functionals


def _terms(times, r, th, U: TrigPolynomial, alpha: float, grad: bool):
    if np.any(r <= 0.0):
        raise ValueError("collision node: action undefined at r = 0")
    h = np.diff(times)
    dth = np.diff(th)
    cd = np.cos(dth)
    ra, rb = r[:-1], r[1:]
    chord2 = ra * ra + rb * rb - 2.0 * ra * rb * cd
    kin = float(np.sum(chord2 / (2.0 * h)))
    w = np.zeros_like(r)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    u, du, _ = U.evaluate(th)
    ra_ = r ** (-alpha)
    pot = float(np.sum(w * u * ra_))
    if not grad:
        return kin, pot, None
    # kinetic gradient
    inv = 1.0 / (2.0 * h)
    gk_r = np.zeros_like(r)
    gk_t = np.zeros_like(r)
    gk_r[:-1] += inv * (2.0 * ra - 2.0 * rb * cd)
    gk_r[1:] += inv * (2.0 * rb - 2.0 * ra * cd)
    s = inv * 2.0 * ra * rb * np.sin(dth)
    gk_t[1:] += s
    gk_t[:-1] -= s
    # potential gradient
    gp_r = w * (-alpha) * u * r ** (-alpha - 1.0)
    gp_t = w * du * ra_
    return kin, pot, (gk_r, gk_t, gp_r, gp_t)


def kinetic_potential(p: DiscretePath, U: TrigPolynomial, alpha: float) -> tuple[float, float]:
    """The two integrals of 1/2 |x'|^2 and of V along the discrete path."""
    k, v, _ = _terms(p.times, p.r, p.theta, U, alpha, False)
    return k, v


def action(p: DiscretePath, U: TrigPolynomial, alpha: float) -> float:
    k, v = kinetic_potential(p, U, alpha)
    return k + v


def action_gradient(p: DiscretePath, U: TrigPolynomial, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the discrete action with respect to all node radii and angles."""
    _, _, g = _terms(p.times, p.r, p.theta, U, alpha, True)
    gk_r, gk_t, gp_r, gp_t = g
    return gk_r + gp_r, gk_t + gp_t


def maupertuis(p: DiscretePath, U: TrigPolynomial, alpha: float) -> float:
    k, v = kinetic_potential(p, U, alpha)
    return k * v


def maupertuis_gradient(p: DiscretePath, U: TrigPolynomial, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    k, v, g = _terms(p.times, p.r, p.theta, U, alpha, True)
    gk_r, gk_t, gp_r, gp_t = g
    return gk_r * v + k * gp_r, gk_t * v + k * gp_t


def free_time_action(p: DiscretePath, U: TrigPolynomial, alpha: float) -> tuple[float, float]:
    """Minimize the action of a fixed path shape over its duration; returns (T_opt, value).

    Uniform rescaling of the time grid multiplies the kinetic part by 1/s and
    the potential part by s, so the optimum sits where the two parts agree.
    """
    k, v = kinetic_potential(p, U, alpha)
    T0 = p.duration
    f = lambda logs: k * math.exp(-logs) + v * math.exp(logs)
    res = minimize_scalar(f, bounds=(-30.0, 30.0), method="bounded", options={"xatol": 1e-12})
    return T0 * math.exp(res.x), float(res.fun)


# ---------------------------------------------------------------------------
# minimization


def _smooth_bumps(rng: np.random.Generator, n: int, modes: int = 4) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n + 1)
    out = np.zeros_like(s)
    for m in range(1, modes + 1):
        out += rng.normal() / m * np.sin(m * math.pi * s)
    return out


def _hessian_coo(times, r, th, U: TrigPolynomial, alpha: float):
    """Exact Hessian of the discrete action in interleaved (r_0, theta_0, r_1, ...) order, as COO triplets."""
    h = np.diff(times)
    d = np.diff(th)
    c, s = np.cos(d), np.sin(d)
    ra, rb = r[:-1], r[1:]
    ia = np.arange(len(h))
    Ra, Ta, Rb, Tb = 2 * ia, 2 * ia + 1, 2 * ia + 2, 2 * ia + 3
    rows, cols, vals = [], [], []

    def put(i, j, v, sym=True):
        rows.append(i)
        cols.append(j)
        vals.append(v)
        if sym:
            rows.append(j)
            cols.append(i)
            vals.append(v)

    one = 1.0 / h
    put(Ra, Ra, one, False)
    put(Rb, Rb, one, False)
    put(Ra, Rb, -c / h)
    put(Ra, Ta, -rb * s / h)
    put(Ra, Tb, rb * s / h)
    put(Rb, Ta, -ra * s / h)
    put(Rb, Tb, ra * s / h)
    q = ra * rb * c / h
    put(Ta, Ta, q, False)
    put(Tb, Tb, q, False)
    put(Ta, Tb, -q)
    w = np.zeros_like(r)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    u, du, d2u = U.evaluate(th)
    node = np.arange(len(r))
    put(2 * node, 2 * node, w * alpha * (alpha + 1.0) * u * r ** (-alpha - 2.0), False)
    put(2 * node, 2 * node + 1, -w * alpha * du * r ** (-alpha - 1.0))
    put(2 * node + 1, 2 * node + 1, w * d2u * r ** (-alpha), False)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class _NodeObjective:
    """Discrete action over node variables z = (r_0, theta_0, ..., r_{M-1}, theta_{M-1}).

    With ``turn`` set, the path is closed: node N is node 0 shifted by ``turn`` in angle.
    """

    def __init__(self, times, U: TrigPolynomial, alpha: float, turn: float | None = None):
        self.times, self.U, self.alpha, self.turn = times, U, alpha, turn
        n_nodes = len(times)
        self.M = n_nodes - 1 if turn is not None else n_nodes
        full = np.arange(2 * n_nodes)
        self.fold = full % (2 * self.M)

    def unpack(self, z):
        r, th = z[0::2], z[1::2]
        if self.turn is not None:
            r = np.append(r, r[0])
            th = np.append(th, th[0] + self.turn)
        return r, th

    def admissible(self, z) -> bool:
        # chords turning by pi pass through the origin; keeping every step below
        # MAX_TURN along straight descent steps preserves the winding class
        _, th = self.unpack(z)
        return bool(np.all(np.abs(np.diff(th)) < MAX_TURN))

    def value(self, z) -> float:
        r, th = self.unpack(z)
        k, v, _ = _terms(self.times, r, th, self.U, self.alpha, False)
        return k + v

    def gradient(self, z) -> np.ndarray:
        r, th = self.unpack(z)
        _, _, g = _terms(self.times, r, th, self.U, self.alpha, True)
        gk_r, gk_t, gp_r, gp_t = g
        full = np.empty(2 * len(r))
        full[0::2] = gk_r + gp_r
        full[1::2] = gk_t + gp_t
        return np.bincount(self.fold, weights=full, minlength=2 * self.M)

    def hessian(self, z):
        r, th = self.unpack(z)
        i, j, v = _hessian_coo(self.times, r, th, self.U, self.alpha)
        m = 2 * self.M
        return coo_matrix((v, (self.fold[i], self.fold[j])), shape=(m, m)).tocsc()


def _spd_solve(A, b):
    """Solve A x = b if A is symmetric positive definite; None otherwise."""
    try:
        lu = splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError:
        return None
    if np.any(lu.U.diagonal() <= 0.0):
        return None
    return lu.solve(b)


@dataclass
class _NewtonResult:
    x: np.ndarray
    fun: float
    nit: int
    pg: float
    message: str


def _projected_newton(obj: _NodeObjective, z0, lo, hi, maxiter: int = 500, tol: float = 1e-13) -> _NewtonResult:
    """Projected Newton descent for box constraints with a Levenberg shift and Armijo backtracking.

    Variables at a bound with the gradient pushing outward are frozen for the
    step; the rest take a Newton step on the shifted positive-definite
    Hessian.  Fixed variables are encoded as lo == hi.
    """
    z = np.clip(z0, lo, hi)
    if not obj.admissible(z):
        raise VariationalError("initial path has a chord turning by pi/2 or more; refine the grid")
    f = obj.value(z)
    fixed = lo == hi
    msg = "iteration limit"
    it = 0
    pg = math.inf
    shift = 0.0
    for it in range(1, maxiter + 1):
        g = obj.gradient(z)
        pg = float(np.max(np.abs(z - np.clip(z - g, lo, hi))))
        if pg <= tol * max(1.0, abs(f)):
            msg = "converged"
            break
        eps_a = min(1e-6, pg)
        active = fixed | ((z <= lo + eps_a) & (g > 0.0)) | ((z >= hi - eps_a) & (g < 0.0))
        free = ~active
        H = obj.hessian(z)
        Hf = H[free][:, free]
        dscale = float(np.max(np.abs(Hf.diagonal()))) if Hf.shape[0] else 1.0
        shift = max(shift * 0.1, 0.0)
        p = np.zeros_like(z)
        while True:
            A = Hf + shift * identity(Hf.shape[0], format="csc") if shift > 0.0 else Hf
            sol = _spd_solve(A.tocsc(), -g[free])
            if sol is not None:
                break
            shift = max(10.0 * shift, 1e-10 * dscale)
            if shift > 1e12 * dscale:
                break
        if sol is None:
            msg = "no positive-definite shift found"
            break
        p[free] = sol
        p[active & ~fixed] = -g[active & ~fixed]
        t, accepted = 1.0, False
        while t > 1e-14:
            zn = np.clip(z + t * p, lo, hi)
            try:
                fn = obj.value(zn) if obj.admissible(zn) else math.inf
            except ValueError:
                fn = math.inf
            if fn <= f + 1e-4 * float(g @ (zn - z)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if shift < 1e6 * dscale:
                shift = max(100.0 * shift, 1e-6 * dscale)
                continue
            msg = "line search failed"
            break
        step = float(np.max(np.abs(zn - z)))
        z, f_old, f = zn, f, fn
        if step < 1e-15 * max(1.0, float(np.max(np.abs(z)))) and abs(f_old - f) <= 1e-16 * abs(f):
            msg = "stalled"
            break
    g = obj.gradient(z)
    pg = float(np.max(np.abs(z - np.clip(z - g, lo, hi))))
    if msg == "stalled" and pg <= 1e-8 * max(1.0, abs(f)):
        msg = "converged at the step floor"
    return _NewtonResult(z, f, it, pg, msg)


def _interleave(r, th):
    z = np.empty(2 * len(r))
    z[0::2], z[1::2] = r, th
    return z


def minimize_bolza(
    U: TrigPolynomial,
    alpha: float,
    start: tuple[float, float],
    end: tuple[float, float],
    T: float,
    sector: tuple[float, float] | None = None,
    obstacle: float = 0.0,
    init: DiscretePath | None = None,
    n: int = DEFAULT_N,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    maxiter: int = 500,
) -> tuple[DiscretePath, MinimizeReport]:
    """Fixed-time, fixed-endpoint minimizer of the discrete action.

    Endpoints are polar (r, theta) on the cover.  Interior nodes are kept in
    {theta in sector, r >= obstacle} by projected Newton descent.  Several
    perturbed starts are tried and the best is reported.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    if obstacle < 0.0:
        raise ValueError("obstacle radius must be non-negative")
    if sector is not None:
        lo_t, hi_t = sector
        for name, pt in (("start", start), ("end", end)):
            if not lo_t - 1e-12 <= pt[1] <= hi_t + 1e-12:
                raise ValueError(f"{name} angle {pt[1]!r} lies outside the sector {sector!r}")
    for name, pt in (("start", start), ("end", end)):
        if pt[0] < obstacle:
            raise ValueError(f"{name} radius {pt[0]!r} lies inside the obstacle")
    r_lo = max(obstacle, R_FLOOR)
    if init is not None:
        base = init.rescaled(T)
        n = base.n
        base.r[0], base.theta[0] = start
        base.r[-1], base.theta[-1] = end
    else:
        base = DiscretePath.polar_line(start, end, T, n)
    times = base.times
    obj = _NodeObjective(times, U, alpha)
    lo = _interleave(np.full(n + 1, r_lo), np.full(n + 1, -np.inf if sector is None else sector[0]))
    hi = _interleave(np.full(n + 1, np.inf), np.full(n + 1, np.inf if sector is None else sector[1]))
    for j, pt in ((0, start), (n, end)):
        lo[2 * j], lo[2 * j + 1] = pt
        hi[2 * j], hi[2 * j + 1] = pt

    rng = np.random.default_rng(seed)
    starts = [_interleave(base.r, base.theta)]
    span = abs(end[1] - start[1]) + 1e-3
    rscale = 0.5 * (start[0] + end[0])
    for _ in range(max(0, n_starts - 1)):
        dr = 0.3 * rscale * _smooth_bumps(rng, n)
        dt = 0.1 * span * _smooth_bumps(rng, n)
        starts.append(_interleave(np.maximum(base.r + dr, 2.0 * r_lo), base.theta + dt))

    best, values = None, []
    for z0 in starts:
        res = _projected_newton(obj, z0, lo, hi, maxiter)
        values.append(res.fun)
        if best is None or res.fun < best.fun:
            best = res
    r, th = obj.unpack(best.x)
    path = DiscretePath(times, r, th)
    active = {
        "obstacle": int(np.sum(r[1:-1] <= r_lo * (1.0 + 1e-6))) if obstacle > 0.0 else 0,
        "sector_walls": 0 if sector is None else int(
            np.sum((th[1:-1] <= sector[0] + 1e-9) | (th[1:-1] >= sector[1] - 1e-9))
        ),
        "obstacle_radius": obstacle,
        "sector": None if sector is None else list(sector),
    }
    converged = best.pg < 1e-8 * max(1.0, abs(best.fun))
    report = MinimizeReport(best.fun, path.min_radius, best.nit, bool(converged), active, best.pg,
                            len(starts), best.message, values)
    return path, report


@dataclass
class LadderRung:
    eps: float
    path: DiscretePath
    report: MinimizeReport

    @property
    def ratio(self) -> float:
        """min_radius / eps: 1 when the obstacle is touched."""
        return self.report.min_radius / self.eps


def obstacle_ladder(
    U: TrigPolynomial,
    alpha: float,
    start: tuple[float, float],
    end: tuple[float, float],
    T: float,
    eps_values,
    sector: tuple[float, float] | None = None,
    n: int = DEFAULT_N,
    n_starts: int = 3,
    seed: int = 0,
) -> list[LadderRung]:
    """Obstacle Bolza minimizers for decreasing eps, each rung warm-started from the previous one."""
    rungs, init = [], None
    for eps in sorted(eps_values, reverse=True):
        path, rep = minimize_bolza(U, alpha, start, end, T, sector, eps, init, n, n_starts, seed)
        rungs.append(LadderRung(eps, path, rep))
        init = path
    return rungs


def _circular_radius(U: TrigPolynomial, alpha: float, T: float, k: int) -> float:
    u = U.constant
    omega = 2.0 * math.pi * abs(k) / T
    return (alpha * u / omega**2) ** (1.0 / (alpha + 2.0))


def unwrap_polygon(theta: np.ndarray) -> np.ndarray:
    """Lift node angles so that every step is the chord's turning angle in (-pi, pi].

    The chord action only sees cos(theta_{i+1} - theta_i), so a node shifted by 2 pi
    describes the same polygon; this picks the canonical lift.
    """
    d = np.diff(theta)
    d = d - 2.0 * math.pi * np.round(d / (2.0 * math.pi))
    return theta[0] + np.concatenate([[0.0], np.cumsum(d)])


def polygon_winding(theta: np.ndarray) -> float:
    """Winding number of the closed polygon around the origin (exact integer for a valid loop)."""
    lifted = unwrap_polygon(theta)
    return (lifted[-1] - lifted[0]) / (2.0 * math.pi)


def minimize_periodic(
    U: TrigPolynomial,
    alpha: float,
    T: float,
    k: int,
    obstacle: float = 0.0,
    init: DiscretePath | None = None,
    n: int = DEFAULT_N,
    n_starts: int = DEFAULT_STARTS,
    seed: int = 0,
    maxiter: int = 500,
) -> tuple[DiscretePath, MinimizeReport]:
    """T-periodic loops winding k times around the origin.

    Node N is node 0 turned by 2 pi k.  A start whose optimum is a polygon of
    a different winding number has left its class and is discarded; if none
    survive the call fails.
    """
    if k == 0:
        raise ValueError("winding number k must be non-zero")
    if T <= 0.0:
        raise ValueError("T must be positive")
    r_lo = max(obstacle, R_FLOOR)
    turn = 2.0 * math.pi * k
    if init is not None:
        if abs(polygon_winding(init.theta) - k) > 1e-9:
            raise VariationalError("initial loop does not have winding k")
        base = init.rescaled(T)
        n = base.n
    else:
        rc = max(_circular_radius(U, alpha, T, k), 2.0 * r_lo)
        s = np.linspace(0.0, 1.0, n + 1)
        base = DiscretePath(s * T, np.full(n + 1, rc), s * turn)
    times = base.times
    obj = _NodeObjective(times, U, alpha, turn)
    lo = _interleave(np.full(n, r_lo), np.full(n, -np.inf))
    hi = np.full(2 * n, np.inf)
    rng = np.random.default_rng(seed)
    starts = [_interleave(base.r[:-1], base.theta[:-1])]
    for _ in range(max(0, n_starts - 1)):
        dr = 0.2 * base.r.mean() * _smooth_bumps(rng, n)
        dt = 0.2 * _smooth_bumps(rng, n)
        starts.append(_interleave(np.maximum(base.r + dr, 2.0 * r_lo)[:-1], (base.theta + dt)[:-1]))

    best, values, dropped = None, [], 0
    for z0 in starts:
        res = _projected_newton(obj, z0, lo, hi, maxiter)
        if abs(polygon_winding(obj.unpack(res.x)[1]) - k) > 1e-6:
            dropped += 1
            continue
        values.append(res.fun)
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise VariationalError(f"winding change detected in all {len(starts)} starts")
    r, th = obj.unpack(best.x)
    path = DiscretePath(times, r, unwrap_polygon(th))
    active = {
        "obstacle": int(np.sum(r[:-1] <= r_lo * (1.0 + 1e-6))) if obstacle > 0.0 else 0,
        "sector_walls": 0,
        "obstacle_radius": obstacle,
        "winding": k,
        "dropped_starts": dropped,
    }
    converged = best.pg < 1e-8 * max(1.0, abs(best.fun))
    return path, MinimizeReport(best.fun, path.min_radius, best.nit, bool(converged), active, best.pg,
                                len(starts), best.message, values)


def _lbfgsb(fun, z0, bounds, maxiter, gtol):
    return minimize(
        fun, z0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": maxiter, "maxfun": 4 * maxiter, "ftol": 1e-15, "gtol": gtol, "maxcor": 20},
    )


def maupertuis_minimize(
    U: TrigPolynomial,
    alpha: float,
    start: tuple[float, float],
    end: tuple[float, float],
    n: int = DEFAULT_N,
    init: DiscretePath | None = None,
    maxiter: int = 20000,
) -> tuple[DiscretePath, float]:
    """Minimize J over discrete paths on [0, 1] with fixed endpoints; returns (path, J_min)."""
    base = init.rescaled(1.0) if init is not None else DiscretePath.polar_line(start, end, 1.0, n)
    n = base.n
    times, m = base.times, n - 1

    def unpack(z):
        return (np.concatenate([[start[0]], z[:m], [end[0]]]),
                np.concatenate([[start[1]], z[m:], [end[1]]]))

    def fun(z):
        r, th = unpack(z)
        kk, v, g = _terms(times, r, th, U, alpha, True)
        gk_r, gk_t, gp_r, gp_t = g
        gr, gt = gk_r * v + kk * gp_r, gk_t * v + kk * gp_t
        return kk * v, np.concatenate([gr[1:-1], gt[1:-1]])

    z0 = np.concatenate([base.r[1:-1], base.theta[1:-1]])
    res = _lbfgsb(fun, z0, [(R_FLOOR, None)] * m + [(None, None)] * m, maxiter, 1e-14)
    r, th = unpack(res.x)
    return DiscretePath(times, r, th), float(res.fun)


# ---------------------------------------------------------------------------
# second variation along a homothetic ray


@dataclass
class ProbeResult:
    value: float
    oscillatory: bool
    zeros: tuple[float, float]
    gamma: float
    slope_error: float
    mu: float
    epsilon: float
    diagnostic: str = ""

    def __float__(self) -> float:
        return self.value


def homothetic_ray(U: TrigPolynomial, alpha: float, theta_bar: float, tau_span: tuple[float, float]):
    """Integrate rho along the ray theta = theta_bar in the Maupertuis time; returns dense solution and gamma.

    rho solves 16/(2-alpha)^2 rho'' = 2 U rho with the zero-energy start
    rho' = gamma rho, gamma = sqrt((2 - alpha)^2 U / 8).
    """
    u = U.value(theta_bar)
    gamma = math.sqrt((2.0 - alpha) ** 2 * u / 8.0)
    c = (2.0 - alpha) ** 2 * u / 8.0
    sol = solve_ivp(lambda t, y: [y[1], c * y[0]], tau_span, [1.0, gamma],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    return sol.sol, gamma


def second_variation_probe(
    U: TrigPolynomial,
    alpha: float,
    theta_bar: float,
    window: tuple[float, float] = (1.0, 25.0),
    eps_margin: float | None = None,
) -> ProbeResult:
    """Second differential of J along the homothetic ray to theta_bar, tested with (0, xi).

    xi solves (rho^2 xi')' = (mu + 2 eps) rho^2 xi between two consecutive zeros,
    mu = U''(theta_bar).  When that equation does not oscillate inside the
    window, a smooth bump on the whole window is used instead.
    """
    u, du, d2u = U.jet(theta_bar)
    if abs(du) > 1e-8 * max(1.0, abs(u)):
        raise PotentialError(f"theta_bar = {theta_bar!r} is not a central configuration")
    a, b = window
    ray, gamma = homothetic_ray(U, alpha, theta_bar, (0.0, b))
    grid = np.linspace(a, b, 2001)
    yy = ray(grid)
    slope_err = float(np.max(np.abs(yy[1] / yy[0] - gamma)) / gamma)
    mu = d2u
    room = -(mu + gamma**2)
    eps = eps_margin if eps_margin is not None else (0.25 * room if room > 0.0 else 0.0)

    if room > 0.0:
        k = mu + 2.0 * eps

        def rhs(t, y):
            r0, r1 = ray(t)
            return [y[1], k * y[0] - 2.0 * (r1 / r0) * y[1]]

        zero = lambda t, y: y[0]
        zero.direction = 0
        sol = solve_ivp(rhs, (a, b), [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14,
                        events=zero, dense_output=True)
        hits = [t for t in sol.t_events[0] if t > a + 1e-9]
        if hits:
            t1 = float(hits[0])
            tt = np.linspace(a, t1, 4001)
            y = sol.sol(tt)
            rr = ray(tt)[0] ** 2
            G = simpson(rr * u, x=tt)
            Q = simpson(rr * (y[1] ** 2 + d2u * y[0] ** 2), x=tt)
            dG = simpson(rr * du * y[0], x=tt)
            return ProbeResult(float(G * Q - 2.0 * dG**2), True, (a, t1), gamma, slope_err, mu, eps)
    tt = np.linspace(a, b, 4001)
    s = (tt - a) / (b - a)
    xi = np.sin(math.pi * s) ** 2
    dxi = 2.0 * math.pi / (b - a) * np.sin(math.pi * s) * np.cos(math.pi * s)
    rr = ray(tt)[0] ** 2
    G = simpson(rr * u, x=tt)
    Q = simpson(rr * (dxi**2 + d2u * xi**2), x=tt)
    dG = simpson(rr * du * xi, x=tt)
    diag = "no oscillation of the comparison equation in the window; bump test function used"
    return ProbeResult(float(G * Q - 2.0 * dG**2), False, (a, b), gamma, slope_err, mu, eps, diag)


# ---------------------------------------------------------------------------
# diagnostics


def blowup_rescale(p: DiscretePath, eps: float, alpha: float) -> DiscretePath:
    """x_hat(t) = x(eps**(-(2+alpha)/2) t) / eps, the blow-up of a path near the obstacle."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    c = eps ** ((2.0 + alpha) / 2.0)
    return DiscretePath(p.times * c, p.r / eps, p.theta.copy(), p.fixed_start, p.fixed_end, p.allow_collision)


def perturbed_condition(alpha: float, alpha_prime: float, samples, tol: float = 1e-3) -> bool:
    """Check the growth condition on a perturbation W from sampled bound data.

    ``samples`` rows are (r, sup|W| on |x| = r, sup|grad W| on |x| = r).  The
    condition holds when alpha > alpha' and r**alpha' (|W| + r |grad W|) is
    below ``tol`` at the smallest sampled radius and non-increasing toward it.
    """
    if not alpha > alpha_prime:
        return False
    a = np.asarray(samples, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or len(a) < 2:
        raise ValueError("samples must be rows of (r, sup|W|, sup|grad W|)")
    a = a[np.argsort(a[:, 0])]
    q = a[:, 0] ** alpha_prime * (np.abs(a[:, 1]) + a[:, 0] * np.abs(a[:, 2]))
    tail = q[: max(2, len(q) // 2)]
    return bool(q[0] < tol and np.all(np.diff(tail) >= -1e-15))


def collision_trend(eps_values, min_radii) -> float:
    """Log-log slope of min_radius against eps: near 1 for colliding families, near 0 when it stabilizes."""
    e = np.log(np.asarray(eps_values, dtype=float))
    m = np.log(np.asarray(min_radii, dtype=float))
    return float(np.polyfit(e, m, 1)[0])
