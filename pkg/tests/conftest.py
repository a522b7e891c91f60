"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

import math

import numpy as np
import pytest

from parabolic.potential import TrigPolynomial
from parabolic.threshold import find_alpha_bar

FIT_POINTS = 64


def fit_trig(fn, degree: int) -> TrigPolynomial:
    """Exact coefficients of a trigonometric polynomial of known degree, from samples."""
    th = 2.0 * math.pi * np.arange(FIT_POINTS) / FIT_POINTS
    c = np.fft.rfft(fn(th)) / FIT_POINTS
    cos = tuple(2.0 * c[1 : degree + 1].real)
    sin = tuple(-2.0 * c[1 : degree + 1].imag)
    return TrigPolynomial(float(c[0].real), cos, sin)


def random_class_u(rng: np.random.Generator, two_minima: bool):
    """Random potential with prescribed non-degenerate global minima.

    U = m + A (1 - cos(t - t1)) [(1 - cos(t - t2))] (1 + 0.4 w(t)) with w a
    random degree-2 polynomial scaled to |w| <= 1, so U - m >= 0 vanishes only
    at the prescribed angles.  Returns (U, theta-, theta+) with
    theta+ - theta- in (pi, 2pi].
    """
    m = rng.uniform(0.5, 2.0)
    amp = rng.uniform(0.3, 2.0)
    t1 = rng.uniform(0.0, 2.0 * math.pi)
    a = rng.normal(size=2)
    b = rng.normal(size=2)
    grid = np.linspace(0.0, 2.0 * math.pi, 4096)

    def w(t):
        return a[0] * np.cos(t) + a[1] * np.cos(2 * t) + b[0] * np.sin(t) + b[1] * np.sin(2 * t)

    scale = np.abs(w(grid)).max()
    if two_minima:
        sep = rng.uniform(0.6, 2.6)
        t2 = t1 + sep
        fn = lambda t: m + amp * (1 - np.cos(t - t1)) * (1 - np.cos(t - t2)) * (1 + 0.4 * w(t) / scale)
        return fit_trig(fn, 4), t2, t1 + 2.0 * math.pi
    fn = lambda t: m + amp * (1 - np.cos(t - t1)) * (1 + 0.4 * w(t) / scale)
    return fit_trig(fn, 3), t1, t1 + 2.0 * math.pi


def near_isotropic(eps: float) -> TrigPolynomial:
    return TrigPolynomial(1.0 + eps, (0.0, -eps))


@pytest.fixture(scope="session")
def U0() -> TrigPolynomial:
    """U = 2 - cos 2theta."""
    return TrigPolynomial(2.0, (0.0, -1.0))


@pytest.fixture(scope="session")
def alpha_bar0(U0) -> float:
    return find_alpha_bar(U0, 0.0, math.pi).alpha_bar


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
