"""The parabolic threshold exponent alpha_bar(theta-, theta+, U).

alpha_bar is the unique alpha at which the unstable manifold of
(theta-, theta- + pi) and the stable manifold of (theta+, theta+) reach the
pericenter line at the same angle.  The gap theta_hat-(alpha) - theta_hat+(alpha)
is strictly increasing in alpha, so the root is found by plain bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .manifolds import stable_apsidal, unstable_apsidal
from .phase_plane import DEFAULT_CONFIG, IntegratorConfig
from .potential import PotentialError, TrigPolynomial

BELOW_RANGE = "below_range"
ABOVE_RANGE = "above_range"

EDGE_PULL = 1e-3
DEFAULT_TOL = 1e-8


class ThresholdError(RuntimeError):
    pass


@dataclass
class GapValue:
    alpha: float
    theta_hat_minus: float
    theta_hat_plus: float
    err: float

    @property
    def gap(self) -> float:
        return self.theta_hat_minus - self.theta_hat_plus


@dataclass
class ReducedProblem:
    U: TrigPolynomial
    theta_minus: float
    theta_plus: float
    alpha_bar: float | str | None = None


@dataclass
class ThresholdResult:
    alpha_bar: float | str
    bracket: tuple[float, float]
    gap_at_bracket: tuple[float, float]
    winding_h: int = 0
    reduced: ReducedProblem | None = None
    iterations: int = 0
    bounds: tuple[float, float] = (0.0, 2.0)
    samples: list[GapValue] = field(default_factory=list, repr=False)
    diagnostic: str = ""

    @property
    def found(self) -> bool:
        return isinstance(self.alpha_bar, float)

    @property
    def extended_value(self) -> float:
        """alpha_bar with the no-parabolic case mapped to 0."""
        if self.found:
            return self.alpha_bar
        return 0.0 if self.alpha_bar == BELOW_RANGE else math.nan

    def as_dict(self) -> dict:
        return {
            "alpha_bar": self.alpha_bar,
            "bracket": list(self.bracket),
            "gap_at_bracket": list(self.gap_at_bracket),
            "h": self.winding_h,
            "bounds": list(self.bounds),
            "iterations": self.iterations,
            "diagnostic": self.diagnostic,
            "reduced": None
            if self.reduced is None
            else {
                "potential": self.reduced.U.to_dict(),
                "theta_minus": self.reduced.theta_minus,
                "theta_plus": self.reduced.theta_plus,
                "alpha_bar": self.reduced.alpha_bar,
            },
        }


def gap_value(
    U: TrigPolynomial,
    alpha: float,
    theta_minus: float,
    theta_plus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    estimate_error: bool = False,
) -> GapValue:
    um = unstable_apsidal(U, alpha, theta_minus, cfg, estimate_error=estimate_error)
    sp = stable_apsidal(U, alpha, theta_plus, cfg, estimate_error=estimate_error)
    return GapValue(alpha, um.theta_hat, sp.theta_hat, um.err_estimate + sp.err_estimate)


def gap(
    U: TrigPolynomial,
    alpha: float,
    theta_minus: float,
    theta_plus: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> float:
    """theta_hat-(alpha) - theta_hat+(alpha); negative below alpha_bar, positive above."""
    if not theta_plus > theta_minus:
        raise ValueError("gap needs theta_plus > theta_minus")
    return gap_value(U, alpha, theta_minus, theta_plus, cfg).gap


def lemma22_bounds(U: TrigPolynomial, theta_minus: float, theta_plus: float) -> tuple[float, float]:
    """Necessary bracket for a saddle connection between theta- and theta+:

        2 - 2 pi / D  <=  alpha  <=  2 - (4 / D) asin sqrt(U_min / U_max),   D = theta+ - theta-,

    clipped to [0, 2].
    """
    d = theta_plus - theta_minus
    if not d > 0:
        raise ValueError("bounds need theta_plus > theta_minus")
    u_min, u_max = U.extrema()
    lo = 2.0 - 2.0 * math.pi / d
    hi = 2.0 - 4.0 / d * math.asin(math.sqrt(u_min / u_max))
    clip = lambda a: min(2.0, max(0.0, a))
    return clip(lo), clip(hi)


def _check_endpoints(U: TrigPolynomial, theta_minus: float, theta_plus: float) -> None:
    for name, th in (("theta_minus", theta_minus), ("theta_plus", theta_plus)):
        u, d1, d2 = U.jet(th)
        if abs(d1) > 1e-8 * max(1.0, abs(u)):
            raise PotentialError(f"{name} = {th!r} is not a central configuration (U' = {d1:.3e})")
        if d2 <= 1e-9 * abs(u):
            raise PotentialError(f"{name} = {th!r} is not a non-degenerate minimum (U'' = {d2:.3e})")


def find_alpha_bar(
    U: TrigPolynomial,
    theta_minus: float,
    theta_plus: float,
    tol: float = DEFAULT_TOL,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    max_iter: int = 200,
) -> ThresholdResult:
    """Bisection on the gap inside the closed-form bracket.

    Works for any theta+ > theta- (the flow does not care about the winding),
    but existence is only guaranteed when theta+ - theta- > pi.  Returns the
    sentinel BELOW_RANGE when the gap is positive on the whole admissible range
    (no parabolic trajectory for any alpha), ABOVE_RANGE when it is negative
    throughout.
    """
    if not theta_plus > theta_minus:
        raise ValueError("find_alpha_bar needs theta_plus > theta_minus; use find_alpha_bar_general")
    _check_endpoints(U, theta_minus, theta_plus)
    bounds = lemma22_bounds(U, theta_minus, theta_plus)
    lo = max(bounds[0], EDGE_PULL)
    hi = min(bounds[1], 2.0 - EDGE_PULL)
    if lo > hi:
        return ThresholdResult(BELOW_RANGE, (lo, hi), (math.nan, math.nan), bounds=bounds,
                               diagnostic="empty closed-form bracket")
    g_lo = gap_value(U, lo, theta_minus, theta_plus, cfg)
    g_hi = gap_value(U, hi, theta_minus, theta_plus, cfg)
    samples = [g_lo, g_hi]
    if g_lo.gap > 0.0:
        return ThresholdResult(
            BELOW_RANGE, (lo, hi), (g_lo.gap, g_hi.gap), bounds=bounds, samples=samples,
            diagnostic="gap positive on the whole admissible range: no parabolic trajectory for any alpha",
        )
    if g_hi.gap < 0.0:
        return ThresholdResult(
            ABOVE_RANGE, (lo, hi), (g_lo.gap, g_hi.gap), bounds=bounds, samples=samples,
            diagnostic="gap negative on the whole admissible range: the defining infimum is empty",
        )
    a, b, ga, gb = lo, hi, g_lo.gap, g_hi.gap
    it = 0
    while b - a >= tol:
        if it >= max_iter:
            raise ThresholdError(f"bisection did not reach tol = {tol} in {max_iter} iterations")
        m = 0.5 * (a + b)
        gm = gap_value(U, m, theta_minus, theta_plus, cfg)
        samples.append(gm)
        it += 1
        if gm.gap == 0.0:
            a = b = m
            ga = gb = 0.0
            break
        if gm.gap < 0.0:
            a, ga = m, gm.gap
        else:
            b, gb = m, gm.gap
    return ThresholdResult(0.5 * (a + b), (a, b), (ga, gb), iterations=it, bounds=bounds, samples=samples)


def winding_number(theta_minus: float, theta_plus: float) -> int:
    """h with 2 h pi < |theta+ - theta-| <= 2 (h + 1) pi."""
    d = abs(theta_plus - theta_minus)
    if d == 0.0:
        raise ValueError("theta_minus and theta_plus coincide")
    return max(0, math.ceil(d / (2.0 * math.pi) - 1e-12) - 1)


def conformal_reduce(
    U: TrigPolynomial, theta_minus: float, theta_plus: float
) -> tuple[TrigPolynomial, float, float, int]:
    """Map a winding-h sector to the base sector pi < D <= 2pi.

    With b = h + 1: U~(theta) = U(b theta) / b**2, theta~ = theta / b, and an
    exponent alpha of the original problem corresponds to 2 - b (2 - alpha).
    """
    h = winding_number(theta_minus, theta_plus)
    if h == 0:
        return U, theta_minus, theta_plus, 0
    b = h + 1
    Ut = U.compose_frequency(b).scaled(1.0 / b**2)
    return Ut, theta_minus / b, theta_plus / b, h


def reduced_alpha(alpha: float, beta: float) -> float:
    return 2.0 - beta * (2.0 - alpha)


def lifted_alpha(alpha_reduced: float, beta: float) -> float:
    return 2.0 - (2.0 - alpha_reduced) / beta


def no_parabolic_prefilter(alpha: float, h: int) -> bool:
    """True when alpha <= 2 - 1/h, which excludes parabolic minimizers of winding h >= 1."""
    return h >= 1 and alpha <= 2.0 - 1.0 / h


def find_alpha_bar_general(
    U: TrigPolynomial,
    theta_minus: float,
    theta_plus: float,
    tol: float = DEFAULT_TOL,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> ThresholdResult:
    """alpha_bar for arbitrary minimal configurations on the cover.

    Time reversal makes the problem symmetric in (theta-, theta+); a winding
    h >= 1 is reduced conformally to the base sector and mapped back.
    """
    if theta_minus == theta_plus:
        raise ValueError("theta_minus and theta_plus must differ")
    if theta_minus > theta_plus:
        theta_minus, theta_plus = theta_plus, theta_minus
    Ut, tm, tp, h = conformal_reduce(U, theta_minus, theta_plus)
    if h == 0:
        return find_alpha_bar(U, theta_minus, theta_plus, tol, cfg)
    b = h + 1
    # bisection tolerance in the reduced exponent shrinks by b on the way back
    inner = find_alpha_bar(Ut, tm, tp, tol * b, cfg)
    reduced = ReducedProblem(Ut, tm, tp, inner.alpha_bar)
    bounds = lemma22_bounds(U, theta_minus, theta_plus)
    if not inner.found:
        return ThresholdResult(
            inner.alpha_bar, inner.bracket, inner.gap_at_bracket, h, reduced, inner.iterations,
            bounds, inner.samples, inner.diagnostic,
        )
    a, c = inner.bracket
    return ThresholdResult(
        lifted_alpha(inner.alpha_bar, b),
        (lifted_alpha(a, b), lifted_alpha(c, b)),
        inner.gap_at_bracket,
        h,
        reduced,
        inner.iterations,
        bounds,
        inner.samples,
    )
