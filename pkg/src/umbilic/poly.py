"""Exact sparse polynomials in spatial variables x1..xn and a scale variable s.

Coefficients are ``fractions.Fraction`` so that heat-equation residuals are
exactly zero rather than zero to a tolerance.  Terms are keyed by exponent
tuples ``(e1, ..., en, es)``; the scale exponent is always last.

Spatial variables are named ``x, y, z`` for n <= 3 and ``x1 .. xn`` otherwise.
The textual form is plain ASCII, e.g. ``x^3 - 6*x*y^2 + y^2 - 6*s*x + 2*s``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import comb, factorial
from numbers import Rational, Real
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Polynomial",
    "as_fraction",
    "variable_names",
    "differentiate",
    "laplacian",
    "heat_residual",
    "evaluate",
    "recenter",
    "heat_flow",
    "weighted_degree",
    "parse",
]

SCALE = "s"


def variable_names(n_spatial: int) -> tuple[str, ...]:
    if n_spatial < 0:
        raise ValueError("n_spatial must be non-negative")
    if n_spatial <= 3:
        return ("x", "y", "z")[:n_spatial] + (SCALE,)
    return tuple(f"x{i}" for i in range(1, n_spatial + 1)) + (SCALE,)


def as_fraction(value) -> Fraction:
    """Exact rational value of an int, Fraction, float or 'p/q' string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, (Real, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            raise ValueError(f"non-finite coefficient {value!r}")
        return Fraction(v)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _order_key(exps: tuple[int, ...]):
    # graded lexicographic, descending; s is the last variable
    return (-sum(exps), tuple(-e for e in exps))


class Polynomial:
    """Immutable polynomial with exact rational coefficients.

    Parameters
    ----------
    n_spatial : int
        Number of spatial variables.
    terms : mapping
        Exponent tuple of length ``n_spatial + 1`` -> coefficient.  Zero
        coefficients are dropped; coefficients are converted to Fraction.
    """

    __slots__ = ("_n", "_terms", "_hash")

    def __init__(self, n_spatial: int, terms: Mapping[tuple[int, ...], object] | None = None):
        if n_spatial < 0:
            raise ValueError("n_spatial must be non-negative")
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n_spatial + 1:
                raise ValueError(f"exponent {exps} does not match {n_spatial} spatial variables + s")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = as_fraction(coeff)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self._n = n_spatial
        self._terms = dict(sorted(clean.items(), key=lambda kv: _order_key(kv[0])))
        self._hash = None

    # construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, n_spatial: int, value=1) -> Polynomial:
        return cls(n_spatial, {(0,) * (n_spatial + 1): value})

    @classmethod
    def var(cls, n_spatial: int, which) -> Polynomial:
        idx = _var_index(n_spatial, which)
        exps = [0] * (n_spatial + 1)
        exps[idx] = 1
        return cls(n_spatial, {tuple(exps): 1})

    @classmethod
    def variables(cls, n_spatial: int) -> tuple[Polynomial, ...]:
        """All generators ``(x1, ..., xn, s)``."""
        return tuple(cls.var(n_spatial, i) for i in range(n_spatial + 1))

    # basic protocol -------------------------------------------------------

    @property
    def n_spatial(self) -> int:
        return self._n

    @property
    def terms(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self._n == other._n and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(self._n, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._n, tuple(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"Polynomial({self._n}, {self!s})"

    def __str__(self):
        return to_string(self)

    def coefficient(self, exps: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(exps), Fraction(0))

    # arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other._n != self._n:
                raise ValueError("polynomials live in different variable sets")
            return other
        return Polynomial.constant(self._n, other)

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(self._n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self._n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            try:
                k = as_fraction(other)
            except TypeError:
                return NotImplemented
            return Polynomial(self._n, {e: c * k for e, c in self._terms.items()})
        other = self._coerce(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self._n, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        k = as_fraction(other)
        return self * (1 / k)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = Polynomial.constant(self._n, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # numerics -------------------------------------------------------------

    def __call__(self, *coords):
        return evaluate(self, coords)

    def degree(self) -> int:
        if not self._terms:
            raise ValueError("degree of the zero polynomial is undefined")
        return max(sum(e) for e in self._terms)

    def substitute_scale(self, s) -> Polynomial:
        """Fix the scale variable to the (exact) value ``s``."""
        sv = as_fraction(s)
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self._terms.items():
            key = e[:-1] + (0,)
            out[key] = out.get(key, 0) + c * sv ** e[-1]
        return Polynomial(self._n, out)

    def to_numpy(self):
        """Vectorised float evaluator ``fn(*coords)`` broadcasting over arrays.

        Missing trailing coordinates (e.g. the scale) are taken as zero.
        """
        items = [(e, float(c)) for e, c in self._terms.items()]
        n = self._n

        def fn(*coords):
            if len(coords) == n:
                coords = coords + (0.0,)
            if len(coords) != n + 1:
                raise ValueError(f"expected {n} or {n + 1} coordinates, got {len(coords)}")
            arrs = [np.asarray(c, dtype=float) for c in coords]
            out = np.zeros(np.broadcast(*arrs).shape)
            for e, c in items:
                term = c
                for a, k in zip(arrs, e):
                    if k:
                        term = term * a**k
                out = out + term
            return out

        return fn


def _var_index(n_spatial: int, which) -> int:
    if isinstance(which, (int, np.integer)):
        idx = int(which)
        if not 0 <= idx <= n_spatial:
            raise ValueError(f"variable index {idx} out of range for {n_spatial} spatial variables")
        return idx
    names = variable_names(n_spatial)
    if which in names:
        return names.index(which)
    m = re.fullmatch(r"x(\d+)", str(which))
    if m and 1 <= int(m.group(1)) <= n_spatial:
        return int(m.group(1)) - 1
    raise ValueError(f"unknown variable {which!r}; known: {', '.join(names)}")


# ---------------------------------------------------------------------------
# calculus

def differentiate(p: Polynomial, var) -> Polynomial:
    """Exact partial derivative with respect to a spatial variable or ``s``."""
    idx = _var_index(p.n_spatial, var)
    out = {}
    for e, c in p.items():
        k = e[idx]
        if k:
            ne = list(e)
            ne[idx] = k - 1
            out[tuple(ne)] = c * k
    return Polynomial(p.n_spatial, out)


def laplacian(p: Polynomial) -> Polynomial:
    """Sum of second derivatives over the spatial variables only."""
    out = Polynomial(p.n_spatial)
    for i in range(p.n_spatial):
        out = out + differentiate(differentiate(p, i), i)
    return out


def heat_residual(p: Polynomial) -> Polynomial:
    """``dp/ds - Laplacian(p)``; zero exactly when p solves the heat equation."""
    return differentiate(p, SCALE) - laplacian(p)


def heat_flow(p: Polynomial, t=SCALE) -> Polynomial:
    """Apply ``exp(t * Laplacian)`` to ``p``.

    ``t`` is a non-negative number, or the string ``"s"`` for the symbolic
    scale variable.  The series terminates after ``degree // 2 + 1`` terms,
    so the result is exact and equals Gaussian smoothing with per-axis
    variance ``2 t``.
    """
    if isinstance(t, str):
        if t != SCALE:
            raise ValueError(f"symbolic flow time must be {SCALE!r}")
        tpow = Polynomial.var(p.n_spatial, SCALE)
    else:
        tv = as_fraction(t)
        if tv < 0:
            raise ValueError("heat flow time must be non-negative")
        tpow = Polynomial.constant(p.n_spatial, tv)
    out = Polynomial(p.n_spatial)
    term = p
    k = 0
    weight = Polynomial.constant(p.n_spatial, 1)
    while not term.is_zero():
        out = out + weight * term * Fraction(1, factorial(k))
        term = laplacian(term)
        weight = weight * tpow
        k += 1
    return out


def weighted_degree(p: Polynomial) -> int:
    """Degree with spatial variables of weight 1 and ``s`` of weight 2."""
    if p.is_zero():
        raise ValueError("weighted degree of the zero polynomial is undefined")
    return max(sum(e[:-1]) + 2 * e[-1] for e, _ in p.items())


# ---------------------------------------------------------------------------
# evaluation and translation

def _check_point(p: Polynomial, pt) -> list:
    pt = list(pt)
    if len(pt) == p.n_spatial:
        pt.append(0)
    if len(pt) != p.n_spatial + 1:
        raise ValueError(
            f"point has {len(pt)} coordinates, polynomial needs {p.n_spatial} spatial (+ s)"
        )
    return pt


def _horner(terms: dict, coords: list, depth: int):
    # group by the exponent of coords[depth]; evaluate the inner groups first
    if depth == len(coords):
        return sum(terms.values(), 0)
    groups: dict[int, dict] = {}
    for e, c in terms.items():
        groups.setdefault(e[depth], {})[e] = c
    top = max(groups)
    acc = 0
    for k in range(top, -1, -1):
        inner = groups.get(k)
        acc = acc * coords[depth] + (_horner(inner, coords, depth + 1) if inner else 0)
    return acc


def evaluate(p: Polynomial, pt):
    """Evaluate at ``(x1, ..., xn[, s])`` by nested Horner accumulation.

    Returns an exact Fraction when every coordinate is rational (int or
    Fraction), a float otherwise.
    """
    pt = _check_point(p, pt)
    exact = all(isinstance(v, (int, Fraction, np.integer)) for v in pt)
    if exact:
        coords = [Fraction(v) for v in pt]
        terms = dict(p.items())
        return _horner(terms, coords, 0) if terms else Fraction(0)
    coords = [float(v) for v in pt]
    terms = {e: float(c) for e, c in p.items()}
    return float(_horner(terms, coords, 0)) if terms else 0.0


def recenter(p: Polynomial, offset) -> Polynomial:
    """Exact composition ``q(v) = p(v + offset)``, binomially expanded."""
    off = [as_fraction(v) for v in _check_point(p, offset)]
    out: dict[tuple[int, ...], Fraction] = {}
    for e, c in p.items():
        partial = {(): c}
        for k, a in zip(e, off):
            nxt = {}
            for pre, pc in partial.items():
                if a == 0:
                    nxt[pre + (k,)] = nxt.get(pre + (k,), 0) + pc
                    continue
                for j in range(k + 1):
                    key = pre + (j,)
                    nxt[key] = nxt.get(key, 0) + pc * comb(k, j) * a ** (k - j)
            partial = nxt
        for key, v in partial.items():
            out[key] = out.get(key, 0) + v
    return Polynomial(p.n_spatial, out)


# ---------------------------------------------------------------------------
# text form

def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def to_string(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    names = variable_names(p.n_spatial)
    parts = []
    for e, c in p.items():
        factors = [n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k]
        mag = abs(c)
        if factors:
            body = "*".join(factors if mag == 1 else [_fmt_coeff(mag)] + factors)
        else:
            body = _fmt_coeff(mag)
        parts.append(("-" if c < 0 else "+", body))
    sign, body = parts[0]
    text = ("-" if sign == "-" else "") + body
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


_TERM_SPLIT = re.compile(r"([+-])")
_FACTOR = re.compile(r"^(?:(\d+(?:/\d+)?)|([A-Za-z]\w*)(?:\^(\d+))?)$")


def parse(text: str, n_spatial: int | None = None) -> Polynomial:
    """Parse the canonical ASCII form, e.g. ``'x^3 - 6*x*y^2 + 1/2*s'``.

    ``*`` is required between factors; ``^`` takes a non-negative integer.
    When ``n_spatial`` is omitted it is inferred from the variable names.
    """
    src = text.replace(" ", "")
    if not src:
        raise ValueError("empty polynomial text")
    tokens = _TERM_SPLIT.split(src)
    signed_terms: list[tuple[int, str]] = []
    sign = 1
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        if tok:
            signed_terms.append((sign, tok))
        sign = 1
    parsed: list[tuple[Fraction, dict[str, int]]] = []
    seen: set[str] = set()
    for sgn, body in signed_terms:
        coeff = Fraction(sgn)
        powers: dict[str, int] = {}
        for factor in body.split("*"):
            m = _FACTOR.match(factor)
            if not m:
                raise ValueError(f"cannot parse factor {factor!r} in {text!r}")
            if m.group(1):
                coeff *= Fraction(m.group(1))
            else:
                name = m.group(2)
                powers[name] = powers.get(name, 0) + int(m.group(3) or 1)
                seen.add(name)
        parsed.append((coeff, powers))
    if n_spatial is None:
        n_spatial = _infer_dimension(seen - {SCALE})
    out: dict[tuple[int, ...], Fraction] = {}
    for coeff, powers in parsed:
        exps = [0] * (n_spatial + 1)
        for name, k in powers.items():
            exps[_var_index(n_spatial, name)] += k
        key = tuple(exps)
        out[key] = out.get(key, 0) + coeff
    return Polynomial(n_spatial, out)


def _infer_dimension(names: Iterable[str]) -> int:
    names = set(names)
    if not names:
        return 1
    if names <= {"x", "y", "z"}:
        return max(("x", "y", "z").index(n) for n in names) + 1
    idx = []
    for n in names:
        m = re.fullmatch(r"x(\d+)", n)
        if not m:
            raise ValueError(f"cannot infer dimension from variable {n!r}")
        idx.append(int(m.group(1)))
    return max(idx)
