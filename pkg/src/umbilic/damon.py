"""Closed-form analysis of f(x, y, s) = x^3 - 6xy^2 + y^2 - 6sx + 2s.

f solves the heat equation exactly.  Its critical points form two
parabolic branches in s:

* pc1+-: x = 1/6, y = +-sqrt(1 - 72 s) / (6 sqrt 2), real for s <= 1/72
* pc2+-: x = +-sqrt(2 s), y = 0, real for s >= 0

A saddle/minimum pair is created at the origin at s = 0, and at s = 1/72
pc1+, pc1- and pc2+ fuse at (1/6, 0), leaving pc2+ as a saddle.  Everything
here is a closed form; the numerical engine in :mod:`umbilic.scale_space`
is checked against it.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .poly import Polynomial, parse

__all__ = [
    "F",
    "S_MERGE",
    "EPS_LAMBDA",
    "Morse",
    "Branch",
    "CriticalPoint",
    "BranchDescriptor",
    "BRANCHES",
    "gradient",
    "value",
    "hessian_at",
    "classify_eigenvalues",
    "critical_points",
    "closed_form_hessian",
    "closed_form_eigenvalues",
    "closed_form_eigenvectors",
    "eigen_analysis",
    "classify",
    "critical_value",
    "critical_values",
    "median_section",
    "bifurcation_events",
    "eigen_signchange_scales",
    "branches_csv",
    "events_csv",
]

F: Polynomial = parse("x^3 - 6*x*y^2 + y^2 - 6*s*x + 2*s")
S_MERGE = Fraction(1, 72)
EPS_LAMBDA = 1e-9


class Morse(str, Enum):
    MIN = "Min"
    MAX = "Max"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"

    @property
    def alias(self) -> str:
        # report wording: both eigenvalues positive is the "summit" of the tables
        return {"Min": "summit/extremum", "Max": "extremum", "Saddle": "col",
                "Degenerate": "degenerate"}[self.value]


class Branch(str, Enum):
    PC1_PLUS = "Pc1Plus"
    PC1_MINUS = "Pc1Minus"
    PC2_PLUS = "Pc2Plus"
    PC2_MINUS = "Pc2Minus"


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    y: float
    s: float
    z: float
    hessian: np.ndarray
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[np.ndarray, np.ndarray]
    morse: Morse
    branch: Branch | None = None

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def index(self) -> int | None:
        """Morse index (number of negative eigenvalues); None if degenerate."""
        if self.morse is Morse.DEGENERATE:
            return None
        return sum(1 for lam in self.eigenvalues if lam < 0)


@dataclass(frozen=True)
class BranchDescriptor:
    label: Branch
    condition: str

    def is_real(self, s) -> bool:
        if self.label in (Branch.PC1_PLUS, Branch.PC1_MINUS):
            return _cmp_s(s, S_MERGE) <= 0
        return _cmp_s(s, 0) >= 0

    def position(self, s) -> tuple[float, float]:
        if not self.is_real(s):
            raise ValueError(f"{self.label.value} is not real at s={s}")
        s = float(s)
        if self.label is Branch.PC1_PLUS:
            return (1 / 6, math.sqrt(max(1 - 72 * s, 0.0)) / (6 * math.sqrt(2)))
        if self.label is Branch.PC1_MINUS:
            return (1 / 6, -math.sqrt(max(1 - 72 * s, 0.0)) / (6 * math.sqrt(2)))
        if self.label is Branch.PC2_PLUS:
            return (math.sqrt(2 * s), 0.0)
        return (-math.sqrt(2 * s), 0.0)


BRANCHES = (
    BranchDescriptor(Branch.PC1_PLUS, "s <= 1/72"),
    BranchDescriptor(Branch.PC1_MINUS, "s <= 1/72"),
    BranchDescriptor(Branch.PC2_PLUS, "s >= 0"),
    BranchDescriptor(Branch.PC2_MINUS, "s >= 0"),
)
_BY_LABEL = {b.label: b for b in BRANCHES}


def _cmp_s(s, ref) -> int:
    # exact comparison for rationals, float comparison otherwise
    if isinstance(s, (int, Fraction)):
        d = Fraction(s) - Fraction(ref)
    else:
        d = float(s) - float(ref)
    return (d > 0) - (d < 0)


# ---------------------------------------------------------------------------
# derivatives

def gradient(x, y, s):
    return (3 * x * x - 6 * y * y - 6 * s, -12 * x * y + 2 * y)


def value(x, y, s):
    return x**3 - 6 * x * y * y + y * y - 6 * s * x + 2 * s


def hessian_at(x, y) -> np.ndarray:
    """Hessian of f; it does not depend on s."""
    return np.array([[6.0 * x, -12.0 * y], [-12.0 * y, 2.0 - 12.0 * x]])


def classify_eigenvalues(lams, eps: float = EPS_LAMBDA) -> Morse:
    lo = min(abs(lam) for lam in lams)
    if lo <= eps:
        return Morse.DEGENERATE
    if all(lam > 0 for lam in lams):
        return Morse.MIN
    if all(lam < 0 for lam in lams):
        return Morse.MAX
    return Morse.SADDLE


# ---------------------------------------------------------------------------
# closed forms listed per branch in the order pc1+, pc1-, pc2+, pc2-

def closed_form_hessian(branch: Branch, s) -> np.ndarray:
    s = float(s)
    if branch in (Branch.PC1_PLUS, Branch.PC1_MINUS):
        b = math.sqrt(2 * max(1 - 72 * s, 0.0))
        off = -b if branch is Branch.PC1_PLUS else b
        return np.array([[1.0, off], [off, 0.0]])
    r = math.sqrt(2 * s)
    if branch is Branch.PC2_PLUS:
        return np.diag([6 * r, 2 * (1 - 6 * r)])
    return np.diag([-6 * r, 2 * (1 + 6 * r)])


def closed_form_eigenvalues(branch: Branch, s) -> tuple[float, float]:
    s = float(s)
    if branch in (Branch.PC1_PLUS, Branch.PC1_MINUS):
        r = math.sqrt(1 - 64 * s)
        lo, hi = (1 - 3 * r) / 2, (1 + 3 * r) / 2
        return (lo, hi) if branch is Branch.PC1_PLUS else (hi, lo)
    r = math.sqrt(2 * s)
    if branch is Branch.PC2_PLUS:
        return (2 - 12 * r, 6 * r)
    return (2 + 12 * r, -6 * r)


def closed_form_eigenvectors(branch: Branch, s):
    """Unnormalised eigenvectors, paired with :func:`closed_form_eigenvalues`.

    For pc1- the textbook listing gives the two vectors in the order of the
    pc1+ eigenvalues; here they are returned in the order of pc1-'s own
    eigenvalue list so that ``H v = lambda v`` holds entry by entry.
    Raises ValueError at s = 1/72 where the pc1 formulas divide by zero.
    """
    s = float(s)
    if branch in (Branch.PC1_PLUS, Branch.PC1_MINUS):
        den = 2 * math.sqrt(2 * (1 - 72 * s)) if s < 1 / 72 else 0.0
        if den == 0.0:
            raise ValueError("pc1 eigenvector closed form is undefined at s = 1/72")
        r = math.sqrt(1 - 64 * s)
        if branch is Branch.PC1_PLUS:
            return (np.array([(-1 + 3 * r) / den, 1.0]), np.array([(-1 - 3 * r) / den, 1.0]))
        return (np.array([(1 + 3 * r) / den, 1.0]), np.array([(1 - 3 * r) / den, 1.0]))
    return (np.array([0.0, 1.0]), np.array([1.0, 0.0]))


def _numeric_eigen(h: np.ndarray, order_hint):
    vals, vecs = np.linalg.eigh(h)
    pairs = [(float(vals[i]), vecs[:, i]) for i in range(2)]
    if order_hint is not None:
        first = min(range(2), key=lambda i: abs(pairs[i][0] - order_hint[0]))
        pairs = [pairs[first], pairs[1 - first]]
    return pairs


def eigen_analysis(cp: CriticalPoint):
    """Numeric eigen pairs of cp's Hessian, in the branch's listing order."""
    hint = closed_form_eigenvalues(cp.branch, cp.s) if cp.branch is not None else None
    return _numeric_eigen(cp.hessian, hint)


def classify(cp: CriticalPoint, eps: float = EPS_LAMBDA) -> tuple[Morse, int | None]:
    """Morse type and index (None when degenerate)."""
    m = classify_eigenvalues(cp.eigenvalues, eps)
    idx = None if m is Morse.DEGENERATE else sum(1 for lam in cp.eigenvalues if lam < 0)
    return m, idx


def _make_point(x, y, s, branch, morse=None) -> CriticalPoint:
    h = hessian_at(x, y)
    hint = closed_form_eigenvalues(branch, s) if branch is not None else None
    pairs = _numeric_eigen(h, hint)
    lams = (pairs[0][0], pairs[1][0])
    return CriticalPoint(
        x=float(x), y=float(y), s=float(s), z=float(value(x, y, float(s))),
        hessian=h, eigenvalues=lams, eigenvectors=(pairs[0][1], pairs[1][1]),
        morse=morse or classify_eigenvalues(lams), branch=branch,
    )


def critical_points(s) -> list[CriticalPoint]:
    """All real critical points of f(., ., s).

    At s = 0 the two pc2 points coincide at the origin and at s = 1/72 the
    pc1 pair fuses with pc2+ at (1/6, 0); each coincidence is reported once,
    as a Degenerate point labelled with the surviving pc2 branch.
    """
    at_merge = _cmp_s(s, S_MERGE) == 0
    at_birth = _cmp_s(s, 0) == 0
    out = []
    for b in BRANCHES:
        if not b.is_real(s):
            continue
        if at_merge and b.label in (Branch.PC1_PLUS, Branch.PC1_MINUS):
            continue
        if at_birth and b.label is Branch.PC2_MINUS:
            continue
        x, y = b.position(s)
        degenerate = (at_merge and b.label is Branch.PC2_PLUS) or (at_birth and b.label is Branch.PC2_PLUS)
        out.append(_make_point(x, y, s, b.label, Morse.DEGENERATE if degenerate else None))
    return out


# ---------------------------------------------------------------------------
# critical values and sections

def critical_value(branch: Branch, s):
    """z on a branch; exact Fraction for rational s where the root is rational."""
    if not _BY_LABEL[branch].is_real(s):
        raise ValueError(f"{branch.value} is not real at s={s}")
    if branch in (Branch.PC1_PLUS, Branch.PC1_MINUS):
        return s + Fraction(1, 216) if isinstance(s, (int, Fraction)) else float(s) + 1 / 216
    sign = 1 if branch is Branch.PC2_PLUS else -1
    if isinstance(s, (int, Fraction)):
        root = _exact_sqrt(2 * Fraction(s))
        if root is not None:
            return 2 * Fraction(s) * (1 - sign * 2 * root)
    s = float(s)
    return 2 * s * (1 - sign * 2 * math.sqrt(2 * s))


def _exact_sqrt(q: Fraction) -> Fraction | None:
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def critical_values(s) -> dict[Branch, object]:
    return {b.label: critical_value(b.label, s) for b in BRANCHES if b.is_real(s)}


def median_section(s, xs) -> list[tuple[float, float]]:
    """Samples of f along the symmetry axis y = 0, i.e. x^3 - 6 s x + 2 s."""
    s = float(s)
    return [(float(x), float(x) ** 3 - 6 * s * float(x) + 2 * s) for x in xs]


def bifurcation_events() -> list[tuple[str, Fraction, tuple[Fraction, Fraction]]]:
    return [
        ("Creation", Fraction(0), (Fraction(0), Fraction(0))),
        ("TripleMerge", S_MERGE, (Fraction(1, 6), Fraction(0))),
    ]


def eigen_signchange_scales() -> list[Fraction]:
    """Exact roots of 1 - 3 sqrt(1 - 64 s) = 0 and 1 - 6 sqrt(2 s) = 0."""

    def root(a, b, c, d):
        # a - b sqrt(c + d s) = 0  =>  s = ((a/b)^2 - c) / d
        return ((Fraction(a) / b) ** 2 - c) / d

    return [root(1, 3, 1, -64), root(1, 6, 0, 2)]


# ---------------------------------------------------------------------------
# CSV export

def _g(v) -> str:
    return format(float(v), ".17g")


def branches_csv(scales) -> str:
    """Rows (s, branch, x, y, z, lambda1, lambda2, morse) over the given scales."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "branch", "x", "y", "z", "lambda1", "lambda2", "morse"])
    for s in scales:
        for cp in critical_points(s):
            w.writerow([_g(s), cp.branch.value, _g(cp.x), _g(cp.y), _g(cp.z),
                        _g(cp.eigenvalues[0]), _g(cp.eigenvalues[1]), cp.morse.value])
    return buf.getvalue()


def events_csv() -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "s", "x", "y"])
    for kind, s, (x, y) in bifurcation_events():
        w.writerow([kind, _g(s), _g(x), _g(y)])
    return buf.getvalue()
