import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import near_isotropic
from parabolic.manifolds import stable_apsidal, unstable_apsidal
from parabolic.threshold import find_alpha_bar, gap
from parabolic.trajectory import (
    Psi,
    TrajectoryError,
    check_parabolic_definition,
    circular_arc,
    constrained_minimizer,
    reconstruct,
    write_minimizer_json,
    write_trajectory_csv,
)


@pytest.fixture(scope="module")
def matched(U0, alpha_bar0):
    return reconstruct(U0, alpha_bar0, 0.0, math.pi)


def test_reconstruct_energy_and_shape(matched):
    assert matched.energy_residual_sup < 1e-6
    p = matched.pericenter_index
    r = matched.r
    assert np.all(np.diff(r[: p + 1]) < 0) and np.all(np.diff(r[p:]) > 0)
    assert r[p] == pytest.approx(1.0, abs=1e-12)
    assert matched.incoming.rdot[-1] == pytest.approx(0.0, abs=1e-9)
    assert matched.t[p] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(matched.t) > 0)


def test_reconstruct_asymptotes(matched):
    assert matched.incoming.theta[0] == pytest.approx(0.0, abs=0.05)
    assert matched.outgoing.theta[-1] == pytest.approx(math.pi, abs=0.05)


def test_reconstruct_passes_definition(U0, matched):
    rep = check_parabolic_definition(matched, U0)
    assert rep.passed, rep.failures
    assert rep.min_radius == pytest.approx(1.0)
    assert any("finite window" in c for c in rep.caveats)


def test_reconstruct_requires_match(U0):
    with pytest.raises(TrajectoryError):
        reconstruct(U0, 0.5, 0.0, math.pi)


def test_near_isotropic_parabola():
    # with U = 1 and alpha = 1 the zero-energy orbit through r = 1 is r = 2 / (1 + cos(theta - theta_p))
    dist = []
    for eps in (1e-2, 1e-3, 1e-4):
        U = near_isotropic(eps)
        a = find_alpha_bar(U, 0.0, 2 * math.pi).alpha_bar
        x = reconstruct(U, a, 0.0, 2 * math.pi)
        th_p = x.theta[x.pericenter_index]
        keep = x.r < 10.0
        fit = x.r[keep] * (1 + np.cos(x.theta[keep] - th_p)) / 2
        dist.append(np.abs(fit - 1).max())
    # the distance shrinks linearly in eps
    assert dist[1] < dist[0] / 5 and dist[2] < dist[1] / 5


def test_circular_arc_action(U0):
    arc = circular_arc(U0, 0.3, 2.5)
    assert np.all(np.diff(arc.theta) > 0)
    assert np.abs(arc.energy_residual(U0, 1.0)).max() < 1e-12
    # kinetic equals potential pointwise: action = 2 int U dt = 2 int U / theta' dtheta
    exact = quad(lambda t: 2 * U0.value(t) / math.sqrt(2 * U0.value(t)), 0.3, 2.5, epsabs=1e-13)[0]
    assert arc.action(U0, 1.0) == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("da", [-0.2, 0.0, 0.2])
def test_trichotomy(U0, alpha_bar0, da):
    m = constrained_minimizer(U0, alpha_bar0 + da, 0.0, math.pi)
    flags = [m.delta_pos > 0, m.delta_vel > 0, m.kind == "smooth"]
    assert sum(flags) == 1
    assert m.kind == {-0.2: "position_jump", 0.0: "smooth", 0.2: "velocity_jump"}[da]


def test_position_jump(U0, alpha_bar0):
    m = constrained_minimizer(U0, alpha_bar0 - 0.2, 0.0, math.pi)
    assert m.delta_pos == pytest.approx(-m.gap)
    c = m.circular
    assert np.all(np.diff(c.theta) > 0) and np.all(c.r == 1.0)
    assert c.theta[0] == pytest.approx(m.theta_hat_minus) and c.theta[-1] == pytest.approx(m.theta_hat_plus)
    # time is continuous across both junctions
    assert m.incoming.t[-1] == pytest.approx(c.t[0], abs=1e-12)
    assert m.outgoing.t[0] == pytest.approx(c.t[-1], abs=1e-12)
    rep = check_parabolic_definition(m, U0)
    assert rep.velocity_jump < 1e-6
    assert any("equation of motion" in f for f in rep.failures)


def test_velocity_jump(U0, alpha_bar0):
    m = constrained_minimizer(U0, alpha_bar0 + 0.2, 0.0, math.pi)
    assert m.psi is not None
    assert abs(m.psi.residual) < 1e-10 and m.psi.derivative < 0
    jump = abs(m.outgoing.rdot[0] - m.incoming.rdot[-1])
    assert jump == pytest.approx(m.delta_vel, rel=1e-6)
    assert m.incoming.theta[-1] == pytest.approx(m.theta0, abs=1e-12)
    rep = check_parabolic_definition(m, U0)
    assert not rep.passed
    assert any("not continuous" in f for f in rep.failures)


def test_full_turn_sector(U0):
    a_bar = find_alpha_bar(U0, 0.0, 2 * math.pi).alpha_bar
    lo = constrained_minimizer(U0, a_bar - 0.5, 0.0, 2 * math.pi)
    assert lo.kind == "position_jump"
    assert lo.delta_pos == pytest.approx(-gap(U0, a_bar - 0.5, 0.0, 2 * math.pi))
    hi = constrained_minimizer(U0, a_bar + 0.2, 0.0, 2 * math.pi)
    assert hi.kind == "velocity_jump" and hi.psi.derivative < 0


def test_psi_sign_change(U0, alpha_bar0):
    a = alpha_bar0 + 0.2
    psi = Psi(U0, a, unstable_apsidal(U0, a, 0.0), stable_apsidal(U0, a, math.pi))
    lo, hi = psi.interval
    assert psi(lo) > 0 > psi(hi)
    grid = np.linspace(lo, hi, 101)
    vals = np.array([psi(t) for t in grid])
    assert np.count_nonzero(np.diff(np.sign(vals))) == 1
    h = 1e-6
    t = 0.5 * (lo + hi)
    assert psi.derivative(t) == pytest.approx((psi(t + h) - psi(t - h)) / (2 * h), abs=1e-6)


def test_smooth_minimizer_passes(U0, alpha_bar0):
    m = constrained_minimizer(U0, alpha_bar0, 0.0, math.pi)
    assert m.delta_pos == 0.0 and m.delta_vel == 0.0
    assert check_parabolic_definition(m, U0).passed


def test_writers(tmp_path, U0, alpha_bar0, matched):
    path = tmp_path / "traj.csv"
    write_trajectory_csv(matched, U0, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,r,theta,x,y,energy_residual"
    assert len(lines) == len(matched.t) + 1
    m = constrained_minimizer(U0, alpha_bar0 + 0.2, 0.0, math.pi)
    jpath = tmp_path / "m.json"
    write_minimizer_json(m, jpath, ["a.csv"])
    data = json.loads(jpath.read_text())
    assert data["kind"] == "velocity_jump" and data["arc_files"] == ["a.csv"]
