import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import root

from umbilic import damon
from umbilic.damon import Branch, Morse

M = 1 / 72


def multistart_oracle(s: float):
    """Critical points of f(., ., s) from scipy root finding on a start lattice."""
    found = []
    for x0 in np.linspace(-0.6, 0.6, 9):
        for y0 in np.linspace(-0.6, 0.6, 9):
            sol = root(lambda p: damon.gradient(p[0], p[1], s), [x0, y0], tol=1e-14)
            if sol.success and np.hypot(*damon.gradient(*sol.x, s)) < 1e-12:
                if not any(np.hypot(*(sol.x - q)) < 1e-7 for q in found):
                    found.append(sol.x)
    return sorted(map(tuple, found))


def positions(s):
    return sorted((cp.x, cp.y) for cp in damon.critical_points(s))


def test_gradient_examples():
    assert damon.gradient(0, 0, 0) == (0, 0)
    g = damon.gradient(Fraction(1, 6), Fraction(1, 12), Fraction(1, 144))
    assert g == (0, 0)
    assert damon.gradient(1, 1, 0) == (-3, -10)


@pytest.mark.parametrize("s, expected", [
    (1 / 144, 4), (1 / 36, 2), (-1 / 72, 2),
])
def test_critical_points_match_multistart(s, expected):
    got = positions(s)
    ref = multistart_oracle(s)
    assert len(got) == len(ref) == expected
    assert np.allclose(got, ref, atol=1e-10)


def test_critical_point_values():
    s = 1 / 144
    pts = {cp.branch: cp for cp in damon.critical_points(s)}
    assert pts[Branch.PC1_PLUS].position == pytest.approx((1 / 6, 1 / 12))
    assert pts[Branch.PC2_MINUS].position == pytest.approx((-1 / (6 * math.sqrt(2)), 0))
    assert np.allclose(positions(1 / 36), [(-1 / math.sqrt(18), 0), (1 / math.sqrt(18), 0)])
    assert np.allclose(positions(-1 / 72), [(1 / 6, -1 / 6), (1 / 6, 1 / 6)])


def test_coincidences_are_reported_once():
    at_merge = damon.critical_points(Fraction(1, 72))
    assert [cp.branch for cp in at_merge] == [Branch.PC2_PLUS, Branch.PC2_MINUS]
    assert at_merge[0].morse is Morse.DEGENERATE
    assert at_merge[0].position == pytest.approx((1 / 6, 0))
    at_birth = damon.critical_points(0)
    assert [cp.morse for cp in at_birth if cp.branch is Branch.PC2_PLUS] == [Morse.DEGENERATE]
    assert len([cp for cp in at_birth if cp.position == (0.0, 0.0)]) == 1


def test_hessian_examples():
    assert np.array_equal(damon.hessian_at(1 / 6, 0), [[1, 0], [0, 0]])
    assert np.array_equal(damon.hessian_at(0, 0), [[0, 0], [0, 2]])
    s = 1 / 200
    r = math.sqrt(2 * s)
    assert np.allclose(damon.hessian_at(r, 0), np.diag([6 * r, 2 * (1 - 6 * r)]))


def test_eigen_examples():
    pc2p = {cp.branch: cp for cp in damon.critical_points(Fraction(1, 72))}
    assert sorted(pc2p[Branch.PC2_PLUS].eigenvalues) == pytest.approx([0, 1], abs=1e-15)
    assert sorted(pc2p[Branch.PC2_MINUS].eigenvalues) == pytest.approx([-1, 4])
    assert damon.closed_form_eigenvalues(Branch.PC1_PLUS, 0) == (-1, 2)
    assert damon.closed_form_eigenvalues(Branch.PC2_MINUS, 1 / 72) == pytest.approx((4, -1))
    with pytest.raises(ValueError):
        damon.closed_form_eigenvectors(Branch.PC1_PLUS, 1 / 72)


def test_eigen_analysis_listing_order():
    for cp in damon.critical_points(1 / 300):
        pairs = damon.eigen_analysis(cp)
        lam = damon.closed_form_eigenvalues(cp.branch, cp.s)
        assert [p[0] for p in pairs] == pytest.approx(lam, abs=1e-12)
        for l, v in pairs:
            assert np.allclose(cp.hessian @ v, l * v, atol=1e-12)


def test_pc1_minus_eigenvectors_pair_with_own_eigenvalues():
    s = 1 / 300
    x, y = damon.BRANCHES[1].position(s)
    H = damon.hessian_at(x, y)
    for l, v in zip(damon.closed_form_eigenvalues(Branch.PC1_MINUS, s),
                    damon.closed_form_eigenvectors(Branch.PC1_MINUS, s)):
        assert np.allclose(H @ v, l * v, atol=1e-12)


def test_classification_examples():
    pts = {cp.branch: cp for cp in damon.critical_points(1 / 144)}
    assert pts[Branch.PC2_PLUS].morse is Morse.MIN and pts[Branch.PC2_PLUS].index == 0
    assert pts[Branch.PC1_PLUS].morse is Morse.SADDLE
    assert damon.classify(pts[Branch.PC1_PLUS]) == (Morse.SADDLE, 1)
    after = {cp.branch: cp for cp in damon.critical_points(1 / 36)}
    assert after[Branch.PC2_PLUS].morse is Morse.SADDLE
    assert Morse.MIN.alias != Morse.MIN.value


def test_critical_value_examples():
    m = Fraction(1, 72)
    assert damon.critical_value(Branch.PC1_PLUS, m) == Fraction(1, 54)
    assert damon.critical_value(Branch.PC2_PLUS, m) == Fraction(1, 54)
    assert damon.critical_value(Branch.PC2_MINUS, m) == Fraction(1, 27)
    assert damon.critical_value(Branch.PC2_PLUS, 0) == 0
    assert damon.critical_value(Branch.PC1_MINUS, 0) == Fraction(1, 216)
    with pytest.raises(ValueError):
        damon.critical_value(Branch.PC1_PLUS, Fraction(1, 36))


def test_median_section_examples():
    assert damon.median_section(0, [0]) == [(0.0, 0.0)]
    assert damon.median_section(1 / 72, [1 / 6])[0][1] == pytest.approx(1 / 54, abs=1e-16)
    s = 1 / 144
    z = damon.median_section(s, [-1 / (6 * math.sqrt(2))])[0][1]
    assert z == pytest.approx(2 * s * (1 + 2 * math.sqrt(2 * s)), abs=1e-16)


def test_bifurcation_events():
    ev = damon.bifurcation_events()
    assert ev == [("Creation", 0, (0, 0)), ("TripleMerge", Fraction(1, 72), (Fraction(1, 6), 0))]


def test_signchange_scales():
    assert damon.eigen_signchange_scales() == [Fraction(1, 72), Fraction(1, 72)]
    assert 1 - 64 * Fraction(1, 72) == Fraction(1, 9)


def test_csv_exports():
    text = damon.branches_csv([Fraction(1, 144)])
    lines = text.splitlines()
    assert lines[0] == "s,branch,x,y,z,lambda1,lambda2,morse"
    assert len(lines) == 5
    assert damon.events_csv().splitlines()[1].startswith("Creation,0,")


# ---------------------------------------------------------------------------
# properties

scales = st.floats(min_value=-1 / 24, max_value=1 / 24, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(scales)
def test_gradient_vanishes_on_branches(s):
    for cp in damon.critical_points(s):
        assert math.hypot(*damon.gradient(cp.x, cp.y, s)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(scales)
def test_values_match_closed_forms(s):
    for cp in damon.critical_points(s):
        assert abs(cp.z - damon.critical_value(cp.branch, s)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1 / 24, allow_nan=False))
def test_morse_census(s):
    census = sorted(cp.morse.value for cp in damon.critical_points(s))
    if s < M:
        assert census == ["Min", "Saddle", "Saddle", "Saddle"]
    elif s > M:
        assert census == ["Saddle", "Saddle"]


def test_degenerate_points_at_event_scales():
    for s in (0, Fraction(1, 72)):
        assert any(cp.morse is Morse.DEGENERATE for cp in damon.critical_points(s))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-8, max_value=1 / 12, allow_nan=False))
def test_pc2_determinants(s):
    r = math.sqrt(2 * s)
    for b, sign in ((damon.BRANCHES[2], 1), (damon.BRANCHES[3], -1)):
        x, y = b.position(s)
        det = np.linalg.det(damon.hessian_at(x, y))
        assert det == pytest.approx(sign * 12 * r * (1 - sign * 6 * r), abs=1e-12)
    det_minus = np.linalg.det(damon.hessian_at(-r, 0))
    assert det_minus < 0
    det_plus = np.linalg.det(damon.hessian_at(r, 0))
    assert (det_plus > 0) == (s < M) or abs(s - M) < 1e-12
