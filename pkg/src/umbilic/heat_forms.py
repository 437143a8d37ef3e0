"""Catalog of H-stable and IS-stable normal forms of heat-equation solutions.

Each entry is built into an exact :class:`~umbilic.poly.Polynomial` in the
variables ``x1..xn, s`` and can be checked against ``u_s = Laplacian(u)``.

=====  ====  =========  ===================================================
id     kind  order      polynomial
=====  ====  =========  ===================================================
F1     H     quadratic  sign * (sum x_i^2 + 2n s)
F2     H     quadratic  sum a_i x_i^2,  sum a_i = 0
F3     H     cubic      x1^3 + 6 s x1 + Q(x2..xn, s)
F4     H     cubic      x1^3 - 6 s x1 - 6 x1 x2^2 + Q(x2..xn, s)
F5     IS    quadratic  sign * (sum x_i^2 + 2n s)
F6     IS    quadratic  sum a_i x_i^2 + 2 (sum a_i) s,  sum a_i != 0
F7     IS    quartic    a1 x1^2 + a2 x2^2 + sign (s^2 + s r^2 / 2 + q r^4),
                        n = 2, a1 + a2 = 0, r^2 = x1^2 + x2^2
F8     IS    cubic      x1^3 + 6 s x1 + sum_{i>=2} a_i (x_i^2 + 2 s)
F9     IS    cubic      x1^3 - 6 s x1 - 6 x1 x2^2 + sum_{i>=2} a_i (x_i^2 + 2 s)
=====  ====  =========  ===================================================

The two signs of F1/F5 are coupled: with independent signs the heat residual
is ``+-4n``.  The quartic coefficient of F7 defaults to the value 1/16 as it
is usually printed; that choice leaves a residual of ``-+ r^2 / 2`` and the
value that solves the equation, 1/32, is available as :data:`F7_HEAT_Q`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .poly import Polynomial, as_fraction, heat_residual

__all__ = [
    "NormalForm",
    "FormConstraintError",
    "F7_PRINTED_Q",
    "F7_HEAT_Q",
    "CATALOG",
    "build",
    "verify_heat",
    "list_catalog",
    "quadratic_morse_form",
    "elliptic_cubic",
    "f7_preset",
    "verification_report",
]

F7_PRINTED_Q = Fraction(1, 16)
F7_HEAT_Q = Fraction(1, 32)

H_STABLE = "H-stable"
IS_STABLE = "IS-stable"

# id -> (kind, order, minimum n, exact n or None, description)
CATALOG: dict[str, tuple[str, str, int, int | None, str]] = {
    "F1": (H_STABLE, "quadratic", 1, None, "sign*(sum x_i^2 + 2n*s)"),
    "F2": (H_STABLE, "quadratic", 2, None, "sum a_i*x_i^2 with a_i != 0, sum a_i = 0"),
    "F3": (H_STABLE, "cubic", 1, None, "x1^3 + 6*s*x1 + Q(x2..xn, s)"),
    "F4": (H_STABLE, "cubic", 2, None, "x1^3 - 6*s*x1 - 6*x1*x2^2 + Q(x2..xn, s)"),
    "F5": (IS_STABLE, "quadratic", 1, None, "sign*(sum x_i^2 + 2n*s)"),
    "F6": (IS_STABLE, "quadratic", 1, None, "sum a_i*x_i^2 + 2*(sum a_i)*s with a_i != 0, sum a_i != 0"),
    "F7": (IS_STABLE, "quartic", 2, 2, "a1*x1^2 + a2*x2^2 + sign*(s^2 + 1/2*s*r^2 + q*r^4), a1 + a2 = 0"),
    "F8": (IS_STABLE, "cubic", 2, None, "x1^3 + 6*s*x1 + sum_{i>=2} a_i*x_i^2 + 2*(sum_{i>=2} a_i)*s, sum != 0"),
    "F9": (IS_STABLE, "cubic", 2, None, "x1^3 - 6*s*x1 - 6*x1*x2^2 + sum_{i>=2} a_i*x_i^2 + 2*(sum_{i>=2} a_i)*s, sum != 0"),
}

# quadratic forms allowed as the tail Q of F3/F4
_TAIL_IDS = ("F1", "F2", "F5", "F6")


class FormConstraintError(ValueError):
    """A normal form's parameters violate its constraints."""


@dataclass(frozen=True)
class NormalForm:
    id: str
    n: int
    params: tuple[Fraction, ...] = ()
    sign: int = 1
    tail: "NormalForm | None" = None
    q: Fraction = F7_PRINTED_Q
    kind: str = field(init=False)

    def __post_init__(self):
        if self.id not in CATALOG:
            raise ValueError(f"unknown normal form {self.id!r}")
        object.__setattr__(self, "params", tuple(as_fraction(a) for a in self.params))
        object.__setattr__(self, "q", as_fraction(self.q))
        object.__setattr__(self, "kind", CATALOG[self.id][0])

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind,
            "n": self.n,
            "params": [str(a) for a in self.params],
        }
        if self.id in ("F1", "F5", "F7"):
            d["sign"] = self.sign
        if self.id == "F7":
            d["q"] = str(self.q)
        if self.tail is not None:
            d["tail"] = self.tail.to_dict()
        return d


# ---------------------------------------------------------------------------
# raw builders (no validation; used to demonstrate why the constraints exist)

def quadratic_morse_form(n: int, sign_x: int = 1, sign_s: int = 1) -> Polynomial:
    """``sign_x * sum x_i^2 + sign_s * 2n s`` with independent signs."""
    xs = Polynomial.variables(n)
    s = xs[-1]
    return sign_x * sum((x**2 for x in xs[:-1]), Polynomial(n)) + sign_s * 2 * n * s


def elliptic_cubic(n: int, cross_sign: int = -1) -> Polynomial:
    """``x1^3 - 6 s x1 + cross_sign * 6 x1 x2^2`` in ``n >= 2`` variables."""
    if n < 2:
        raise ValueError("the elliptic cubic needs n >= 2")
    xs = Polynomial.variables(n)
    x1, x2, s = xs[0], xs[1], xs[-1]
    return x1**3 - 6 * s * x1 + cross_sign * 6 * x1 * x2**2


def _weighted_squares(n: int, coeffs: Sequence[Fraction], first: int) -> Polynomial:
    xs = Polynomial.variables(n)
    out = Polynomial(n)
    for a, x in zip(coeffs, xs[first:-1]):
        out = out + a * x**2
    return out


def _embed(p: Polynomial, n: int, shift: int) -> Polynomial:
    # move the spatial variables of p to positions shift.. in an n-variable ring
    out = {}
    for e, c in p.items():
        exps = [0] * (n + 1)
        exps[shift : shift + p.n_spatial] = e[:-1]
        exps[-1] = e[-1]
        out[tuple(exps)] = c
    return Polynomial(n, out)


# ---------------------------------------------------------------------------
# validation

def _require(cond: bool, msg: str):
    if not cond:
        raise FormConstraintError(msg)


def _check(form: NormalForm):
    kind, order, n_min, n_exact, _ = CATALOG[form.id]
    _require(form.n >= 1, "spatial dimension must be at least 1")
    _require(form.n >= n_min, f"{form.id} requires n >= {n_min}")
    if n_exact is not None:
        _require(form.n == n_exact, f"{form.id} requires n = {n_exact}")
    a = form.params
    if form.id in ("F1", "F5", "F7"):
        _require(form.sign in (1, -1), "sign must be +1 or -1")
    if form.id in ("F1", "F5", "F3", "F4"):
        _require(not a, f"{form.id} takes no coefficient parameters")
    if form.id in ("F2", "F6", "F7"):
        _require(len(a) == form.n, f"{form.id} needs {form.n} coefficients a_1..a_n, got {len(a)}")
    if form.id in ("F8", "F9"):
        _require(len(a) == form.n - 1, f"{form.id} needs {form.n - 1} coefficients a_2..a_n, got {len(a)}")
    if a:
        zero = [i for i, v in enumerate(a) if v == 0]
        first = 2 if form.id in ("F8", "F9") else 1
        _require(not zero, "some a_i = 0: " + ", ".join(f"a_{i + first}" for i in zero))
    if form.id in ("F2", "F7"):
        _require(sum(a) == 0, f"sum of a_i must be 0 (got {sum(a)})")
    if form.id in ("F6", "F8", "F9"):
        _require(sum(a) != 0, "sum of a_i must be nonzero")
    if form.tail is not None:
        _require(form.id in ("F3", "F4"), f"{form.id} does not take a quadratic tail")
        t = form.tail
        _require(t.id in _TAIL_IDS, f"tail must be one of {', '.join(_TAIL_IDS)}, got {t.id}")
        _require(t.n == form.n - 1, f"tail must have n = {form.n - 1} variables (x2..xn)")
        _check(t)


# ---------------------------------------------------------------------------
# public API

def build(form: NormalForm) -> Polynomial:
    """Exact polynomial of a catalog entry; raises FormConstraintError."""
    _check(form)
    n, a = form.n, form.params
    xs = Polynomial.variables(n)
    x1, s = xs[0], xs[-1]
    fid = form.id
    if fid in ("F1", "F5"):
        return quadratic_morse_form(n, form.sign, form.sign)
    if fid == "F2":
        return _weighted_squares(n, a, 0)
    if fid == "F6":
        return _weighted_squares(n, a, 0) + 2 * sum(a) * s
    if fid == "F7":
        r2 = xs[0] ** 2 + xs[1] ** 2
        return _weighted_squares(n, a, 0) + form.sign * (s**2 + Fraction(1, 2) * s * r2 + form.q * r2**2)
    if fid in ("F3", "F8"):
        core = x1**3 + 6 * s * x1
    else:
        core = elliptic_cubic(n)
    if fid in ("F8", "F9"):
        return core + _weighted_squares(n, a, 1) + 2 * sum(a) * s
    if form.tail is not None:
        core = core + _embed(build(form.tail), n, 1)
    return core


def verify_heat(form: NormalForm) -> tuple[Polynomial, bool]:
    """Heat residual of the built form and whether it vanishes identically."""
    res = heat_residual(build(form))
    return res, res.is_zero()


def f7_preset(corrected: bool = False, a1=1, sign: int = 1) -> NormalForm:
    """F7 with ``a = (a1, -a1)``; the corrected preset uses q = 1/32."""
    a1 = as_fraction(a1)
    return NormalForm("F7", 2, (a1, -a1), sign=sign, q=F7_HEAT_Q if corrected else F7_PRINTED_Q)


def list_catalog(n: int) -> list[dict]:
    """Templates applicable in dimension ``n`` with their parameter slots."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    out = []
    for fid, (kind, order, n_min, n_exact, desc) in CATALOG.items():
        if n < n_min or (n_exact is not None and n != n_exact):
            continue
        if fid in ("F2", "F6", "F7"):
            slots = [f"a_{i}" for i in range(1, n + 1)]
        elif fid in ("F8", "F9"):
            slots = [f"a_{i}" for i in range(2, n + 1)]
        else:
            slots = []
        if fid in ("F1", "F5", "F7"):
            slots = slots + ["sign"]
        if fid == "F7":
            slots = slots + ["q"]
        if fid in ("F3", "F4") and n >= 2:
            slots = slots + ["tail"]
        out.append({"id": fid, "kind": kind, "order": order, "n": n,
                    "slots": slots, "form": desc})
    return out


def verification_report(form: NormalForm) -> dict:
    """JSON-ready record ``{id, kind, n, params, residual, is_solution}``."""
    residual, ok = verify_heat(form)
    rec = form.to_dict()
    rec["residual"] = str(residual)
    rec["is_solution"] = ok
    return rec
