from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from umbilic import heat_forms as hf
from umbilic.poly import Polynomial, heat_residual, parse

nonzero = st.fractions(min_value=-9, max_value=9, max_denominator=11).filter(lambda a: a != 0)


def test_build_examples():
    assert hf.build(hf.NormalForm("F1", 2, sign=1)) == parse("x^2 + y^2 + 4*s")
    assert hf.build(hf.NormalForm("F2", 2, (1, -1))) == parse("x^2 - y^2", n_spatial=2)
    assert hf.build(hf.NormalForm("F6", 2, (1, 2))) == parse("x^2 + 2*y^2 + 6*s")


def test_verify_examples():
    res, ok = hf.verify_heat(hf.NormalForm("F3", 1))
    assert ok and res.is_zero()
    assert hf.build(hf.NormalForm("F3", 1)) == parse("x^3 + 6*s*x")
    r2 = parse("x^2 + y^2")
    for sign in (1, -1):
        res, ok = hf.verify_heat(hf.f7_preset(False, 1, sign))
        assert not ok and res == -sign * Fraction(1, 2) * r2
        res, ok = hf.verify_heat(hf.f7_preset(True, 1, sign))
        assert ok and res.is_zero()


def test_f7_coefficient_solves_linear_condition():
    # residual of the quartic part is (1/2 - 16 q) r^2; the root is the corrected preset
    q = hf.F7_HEAT_Q
    assert Fraction(1, 2) - 16 * q == 0
    assert hf.NormalForm("F7", 2, (1, -1)).q == hf.F7_PRINTED_Q == Fraction(1, 16)


def test_constraint_errors():
    with pytest.raises(hf.FormConstraintError, match="a_2"):
        hf.build(hf.NormalForm("F6", 2, (1, 0)))
    with pytest.raises(hf.FormConstraintError, match="sum"):
        hf.build(hf.NormalForm("F2", 2, (1, 2)))
    with pytest.raises(hf.FormConstraintError, match="nonzero"):
        hf.build(hf.NormalForm("F6", 2, (1, -1)))
    with pytest.raises(hf.FormConstraintError):
        hf.build(hf.NormalForm("F7", 3, (1, -1, 0)))
    with pytest.raises(hf.FormConstraintError):
        hf.build(hf.NormalForm("F4", 1))
    with pytest.raises(hf.FormConstraintError):
        hf.build(hf.NormalForm("F3", 3, tail=hf.NormalForm("F3", 2)))
    with pytest.raises(hf.FormConstraintError):
        hf.build(hf.NormalForm("F3", 3, tail=hf.NormalForm("F1", 3)))
    with pytest.raises(ValueError):
        hf.NormalForm("F10", 2)


def test_tail_is_embedded_in_trailing_variables():
    form = hf.NormalForm("F4", 3, tail=hf.NormalForm("F6", 2, (1, 2)))
    p = hf.build(form)
    assert p == parse("x^3 - 6*s*x - 6*x*y^2 + y^2 + 2*z^2 + 6*s")
    assert hf.verify_heat(form)[1]


def test_list_catalog():
    assert [e["id"] for e in hf.list_catalog(1)] == ["F1", "F3", "F5", "F6"]
    assert [e["id"] for e in hf.list_catalog(2)] == [f"F{i}" for i in range(1, 10)]
    assert "F7" not in [e["id"] for e in hf.list_catalog(3)]
    with pytest.raises(ValueError):
        hf.list_catalog(0)


def test_verification_report_shape():
    rec = hf.verification_report(hf.f7_preset())
    assert set(rec) >= {"id", "kind", "n", "params", "residual", "is_solution"}
    assert rec["kind"] == "IS-stable" and rec["is_solution"] is False
    assert rec["residual"] == "-1/2*x^2 - 1/2*y^2"


# ---------------------------------------------------------------------------
# properties

@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.sampled_from([1, -1]))
def test_coupled_signs_solve_and_anti_coupled_fail(n, sign):
    assert heat_residual(hf.quadratic_morse_form(n, sign, sign)).is_zero()
    res = heat_residual(hf.quadratic_morse_form(n, sign, -sign))
    assert res == Polynomial.constant(n, -sign * 4 * n)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4))
def test_elliptic_cross_term_sign(n):
    assert heat_residual(hf.elliptic_cubic(n, -1)).is_zero()
    assert not heat_residual(hf.elliptic_cubic(n, 1)).is_zero()


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["F2", "F6", "F8", "F9"]), st.integers(2, 4), st.lists(nonzero, min_size=4, max_size=4))
def test_parametrized_forms_are_heat_solutions(fid, n, draws):
    if fid == "F2":
        a = draws[: n - 1]
        a = a + [-sum(a)]
        assume(a[-1] != 0)
    elif fid == "F6":
        a = draws[:n]
        assume(sum(a) != 0)
    else:
        a = draws[: n - 1]
        assume(sum(a) != 0)
    res, ok = hf.verify_heat(hf.NormalForm(fid, n, tuple(a)))
    assert ok, str(res)


@settings(max_examples=50, deadline=None)
@given(nonzero, st.sampled_from([1, -1]))
def test_f7_printed_never_solves(a1, sign):
    res, ok = hf.verify_heat(hf.f7_preset(False, a1, sign))
    assert not ok and res == -sign * Fraction(1, 2) * parse("x^2 + y^2")
    assert hf.verify_heat(hf.f7_preset(True, a1, sign))[1]
