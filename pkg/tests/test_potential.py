import json
import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from parabolic.potential import (
    PotentialError,
    TrigPolynomial,
    check_class_U,
    eval_jet,
    find_central_configurations,
    minimal_configurations,
    too_strict_test,
)

coef = st.floats(-2.0, 2.0, allow_nan=False)
polys = st.builds(
    lambda c0, a, b: TrigPolynomial(c0, tuple(a), tuple(b)),
    st.floats(-3.0, 3.0),
    st.lists(coef, min_size=0, max_size=5),
    st.lists(coef, min_size=0, max_size=5),
)


def test_jet_examples(U0):
    assert eval_jet(U0, 0.0) == pytest.approx((1.0, 0.0, 4.0), abs=1e-15)
    assert eval_jet(U0, math.pi / 2) == pytest.approx((3.0, 0.0, -4.0), abs=1e-14)
    assert eval_jet(TrigPolynomial(1.7), 0.3) == (1.7, 0.0, 0.0)


def test_jet_matches_finite_differences():
    U = TrigPolynomial(1.0, (0.2, -0.3, 0.1), (0.05, 0.4))
    h = 1e-5
    for th in np.linspace(-1, 7, 9):
        u, d1, d2 = eval_jet(U, th)
        assert d1 == pytest.approx((U.value(th + h) - U.value(th - h)) / (2 * h), abs=1e-8)
        assert d2 == pytest.approx((U.value(th + h) - 2 * u + U.value(th - h)) / h**2, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(polys, st.floats(-50.0, 50.0))
def test_jet_is_periodic(U, th):
    a = np.array(eval_jet(U, th))
    b = np.array(eval_jet(U, th + 2 * math.pi))
    assert np.allclose(a, b, rtol=0, atol=1e-12 * (1 + abs(th)) * (1 + np.abs(a).max()))


def test_vectorized_evaluate_agrees_with_jet(U0):
    th = np.linspace(0, 6, 11)
    u, d1, d2 = U0.evaluate(th)
    for k, t in enumerate(th):
        assert (u[k], d1[k], d2[k]) == pytest.approx(U0.jet(t), abs=1e-14)


def test_central_configurations_of_reference(U0):
    ccs = find_central_configurations(U0)
    assert [c.angle for c in ccs] == pytest.approx([0, math.pi / 2, math.pi, 3 * math.pi / 2], abs=1e-12)
    assert [c.kind for c in ccs] == ["minimum", "maximum", "minimum", "maximum"]
    assert ccs[0].mu == pytest.approx(4.0)


def test_central_configurations_constant_rejected():
    with pytest.raises(PotentialError, match="constant potential"):
        find_central_configurations(TrigPolynomial(1.0))


def test_central_configurations_perturbed():
    U = TrigPolynomial(2.0, (0.0, -1.0), (0.1,))
    ccs = find_central_configurations(U)
    assert len(ccs) == 4
    for c in ccs:
        assert abs(U.jet(c.angle)[1]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(polys)
@example(TrigPolynomial(0.0, (2.3061778417851908e-245,)))
def test_morse_configurations_alternate(U):
    if U.is_constant:
        return
    ccs = find_central_configurations(U)
    if any(c.kind == "degenerate" for c in ccs):
        return
    assert len(ccs) % 2 == 0
    kinds = [c.kind for c in ccs]
    assert all(a != b for a, b in zip(kinds, kinds[1:] + kinds[:1]))


def test_class_u_examples(U0):
    assert check_class_U(U0, 0.0, math.pi).passed
    d = check_class_U(U0, math.pi / 2, 3 * math.pi / 2)
    assert not d.passed
    assert sum("curvature" in f for f in d.failures) == 2
    # the pair (0, pi) of 2 + cos 2t - 2 cos t lies at levels 1 and 5
    d = check_class_U(TrigPolynomial(2.0, (-2.0, 1.0)), 0.0, math.pi)
    assert any(f.startswith("level") for f in d.failures)
    # genuinely unequal minima at 0 and pi
    d = check_class_U(TrigPolynomial(2.0, (0.3, -1.0)), 0.0, math.pi)
    assert [f.split(":")[0] for f in d.failures] == ["level"]


def test_class_u_positivity():
    d = check_class_U(TrigPolynomial(0.5, (0.0, -1.0)), 0.0, math.pi)
    assert any("positivity" in f for f in d.failures)


def test_minimal_configurations(U0):
    assert [c.angle for c in minimal_configurations(U0)] == pytest.approx([0.0, math.pi])


def test_too_strict_examples(U0):
    assert too_strict_test(U0, math.pi / 2, 1.0)
    assert not too_strict_test(U0, 0.0, 1.0)
    assert not too_strict_test(TrigPolynomial(2.0, (0.0, -0.1)), math.pi / 2, 0.1)
    with pytest.raises(PotentialError):
        too_strict_test(U0, 0.3, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 1.99), st.floats(0.01, 1.99), st.floats(0.01, 3.0))
def test_too_strict_monotone_in_alpha(a1, a2, depth):
    U = TrigPolynomial(2.0, (0.0, -depth))
    lo, hi = sorted((a1, a2))
    # the right side -(2 - alpha)^2 U / 8 increases with alpha
    if too_strict_test(U, math.pi / 2, lo):
        assert too_strict_test(U, math.pi / 2, hi)


def test_json_roundtrip(tmp_path):
    U = TrigPolynomial(1.5, (0.1, -0.2), (0.3,))
    path = tmp_path / "u.json"
    U.dump(path)
    data = json.loads(path.read_text())
    assert data == {"constant": 1.5, "cos": [0.1, -0.2], "sin": [0.3, 0.0]}
    assert TrigPolynomial.load(path) == U


def test_invalid_coefficients_rejected():
    with pytest.raises((PotentialError, ValueError)):
        TrigPolynomial(float("nan"))


def test_compose_frequency_and_scale(U0):
    V = U0.compose_frequency(2).scaled(0.25)
    for th in (0.1, 0.7, 2.0):
        assert V.value(th) == pytest.approx(U0.value(2 * th) / 4)
