"""Elliptic umbilic unfolding g = x^3 - 6xy^2 + w x^2 + u x + v y + c.

Critical points come from a quartic in x (v != 0) or from two explicit
branches (v = 0).  The degeneracy locus in a section w = const is traced
through its generating degenerate critical points, which lie on the ellipse
3x^2 + wx + 6y^2 = 0; the image in the (u, v) plane is a three-cusped
hypocycloid-like curve.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .damon import Morse, classify_eigenvalues
from .poly import Polynomial, parse

__all__ = [
    "UnfoldingParams",
    "GCritical",
    "DiscriminantCurve",
    "g_value",
    "g_gradient",
    "g_hessian",
    "critical_points_g",
    "critical_points_newton",
    "discriminant_section",
    "implicit_residual",
    "critical_value_graph",
    "embedding_line",
    "inside",
    "inside_transitions",
    "organizing_center",
    "discriminant_csv",
    "cvgraph_csv",
    "line_csv",
]

IMAG_TOL = 1e-9
DOUBLE_TOL = 1e-6
DEDUP_TOL = 1e-8
POLISH_STEPS = 5
GRAD_TOL = 1e-9
MERGE_TOL = 1e-6
CLUSTER_TOL = 1e-4


@dataclass(frozen=True)
class UnfoldingParams:
    w: float
    u: float
    v: float
    c: float = 0.0

    def __post_init__(self):
        for name in ("w", "u", "v", "c"):
            if not math.isfinite(float(getattr(self, name))):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class GCritical:
    x: float
    y: float
    z: float
    morse: Morse
    eigenvalues: tuple[float, float]


def g_value(p: UnfoldingParams, x, y):
    return x**3 - 6 * x * y * y + p.w * x * x + p.u * x + p.v * y + p.c


def g_gradient(p: UnfoldingParams, x, y):
    return (3 * x * x - 6 * y * y + 2 * p.w * x + p.u, -12 * x * y + p.v)


def g_hessian(p: UnfoldingParams, x, y) -> np.ndarray:
    return np.array([[6 * x + 2 * p.w, -12 * y], [-12 * y, -12 * x]], dtype=float)


def _point(p: UnfoldingParams, x: float, y: float) -> GCritical:
    lams = tuple(float(v) for v in np.linalg.eigvalsh(g_hessian(p, x, y)))
    return GCritical(float(x), float(y), float(g_value(p, x, y)), classify_eigenvalues(lams), lams)


def _real_quartic_roots(coeffs) -> list[float]:
    """Real roots of sum coeffs[k] x^(4-k) via companion-matrix eigenvalues."""
    return _dedup_1d(_real_roots(np.asarray(coeffs, dtype=float)))


def _real_roots(a: np.ndarray) -> list[float]:
    n = len(a) - 1
    if n == 0:
        return []
    if a[-1] == 0.0:
        return [0.0] + _real_roots(a[:-1])
    # rescale x = rho t so that tiny roots are not swallowed by absolute tolerances;
    # monic in t, and repeated division keeps every coefficient at most 2^-k
    rho = min(1.0, 2 * max(abs(a[k] / a[0]) ** (1 / k) for k in range(1, n + 1)))
    if rho == 0.0:
        # every ratio underflowed: all roots are zero at double precision
        return [0.0]
    b = np.ones(n + 1)
    for k in range(1, n + 1):
        c = a[k] / a[0]
        for _ in range(k):
            c /= rho
        b[k] = c
    comp = np.zeros((n, n))
    comp[0, :] = -b[1:]
    comp[1:, :-1] = np.eye(n - 1)
    eig = np.linalg.eigvals(comp)
    small = np.abs(eig) < CLUSTER_TOL
    m = int(small.sum())
    roots = [rho * t for t in _classify_roots(b, eig[~small])] if m < n else []
    if 0 < m < n:
        # roots far below the scale of the others belong to the trailing
        # coefficients; solve those at their own scale, then polish on the full p
        k = n - m
        while a[k] == 0.0:
            k -= 1
        dpoly = np.polyder(a)
        roots += [_newton_1d(a, dpoly, x) for x in _real_roots(a[k:])]
    elif m == n:
        roots = [rho * t for t in _classify_roots(b, eig)]
    return roots


def _newton_1d(a, dpoly, x: float) -> float:
    for _ in range(POLISH_STEPS):
        d = np.polyval(dpoly, x)
        if d == 0:
            break
        nx = x - np.polyval(a, x) / d
        # near a double root p' ~ 0 and a full step can overshoot
        if abs(np.polyval(a, nx)) >= abs(np.polyval(a, x)):
            break
        x = nx
    return float(x)


def _classify_roots(a: np.ndarray, eig) -> list[float]:
    dpoly = np.polyder(a)
    roots = []
    for z in eig:
        if abs(z.imag) <= IMAG_TOL * max(1.0, abs(z.real)):
            roots.append(_newton_1d(a, dpoly, float(z.real)))
        elif abs(z.imag) <= DOUBLE_TOL * max(1.0, abs(z.real)):
            # a double root splits into a conjugate pair of size ~sqrt(eps)
            x = _double_root(a, dpoly, float(z.real))
            if x is not None:
                roots.append(x)
    return roots


def _double_root(a, dpoly, x: float) -> float | None:
    # a real double root is a common root of p and p'; polish on p'
    ddpoly = np.polyder(dpoly)
    for _ in range(POLISH_STEPS):
        d2 = np.polyval(ddpoly, x)
        if d2 == 0:
            break
        x -= np.polyval(dpoly, x) / d2
    scale = float(np.sum(np.abs(a) * max(1.0, abs(x)) ** np.arange(len(a) - 1, -1, -1)))
    return x if abs(np.polyval(a, x)) <= 1e-13 * scale else None


def _dedup_1d(xs) -> list[float]:
    out: list[float] = []
    for x in sorted(xs):
        if out and abs(x - out[-1]) <= DEDUP_TOL * max(abs(x), abs(out[-1])):
            continue
        out.append(x)
    return out


def critical_points_g(p: UnfoldingParams) -> list[GCritical]:
    """Real critical points of g, sorted by (x, y)."""
    w, u, v = float(p.w), float(p.u), float(p.v)
    pts: list[tuple[float, float]] = []
    if v != 0.0:
        # g is weighted homogeneous (x, y, w ~ lam; u, v ~ lam^2): solve at unit
        # scale so tiny parameters neither underflow nor hide behind tolerances
        lam = max(abs(w), math.sqrt(abs(u)), math.sqrt(abs(v)))
        q = UnfoldingParams(w / lam, u / lam / lam, v / lam / lam)
        pts = [(lam * x, lam * y) for x, y in _generic_points(q)]
    else:
        disc = 4 * w * w - 12 * u
        if disc > 0:
            r = math.sqrt(disc)
            pts += [((-2 * w - r) / 6, 0.0), ((-2 * w + r) / 6, 0.0)]
        elif disc == 0:
            pts.append((-w / 3, 0.0))
        if u > 0:
            y = math.sqrt(u / 6)
            pts += [(0.0, -y), (0.0, y)]
        elif u == 0 and not any(x == 0.0 for x, _ in pts):
            pts.append((0.0, 0.0))
    pts = _dedup_2d(pts)
    return [_point(p, x, y) for x, y in sorted(pts)]


def _generic_points(p: UnfoldingParams) -> list[tuple[float, float]]:
    w, u, v = p.w, p.u, p.v
    # y = v / (12 x) turns grad g = 0 into 3x^4 + 2w x^3 + u x^2 - v^2/24 = 0.
    # Roots with tiny x lose accuracy there, so the mirror quartic in y,
    # from x = v / (12 y), covers them.
    tol = GRAD_TOL * max(1.0, abs(w), abs(u), abs(v))
    pts: list[tuple[float, float]] = []
    for x in _real_quartic_roots([3.0, 2 * w, u, 0.0, -v * v / 24]):
        if x != 0.0:
            pt = _polish(p, x, v / (12 * x))
            if pt is not None and _residual(p, *pt) <= tol:
                pts.append(pt)
    for y in _real_quartic_roots([-288.0, 0.0, 48 * u, 8 * w * v, v * v]):
        if y != 0.0:
            pt = _polish(p, v / (12 * y), y)
            if pt is None or _residual(p, *pt) > tol:
                continue
            near = MERGE_TOL * max(1.0, abs(pt[0]), abs(pt[1]))
            if not any(math.hypot(pt[0] - a, pt[1] - b) <= near for a, b in pts):
                pts.append(pt)
    return pts


def _residual(p: UnfoldingParams, x: float, y: float) -> float:
    return math.hypot(*g_gradient(p, x, y))


def _polish(p: UnfoldingParams, x: float, y: float):
    """Newton on grad g, keeping only steps that shrink the residual."""
    if not (math.isfinite(x) and math.isfinite(y)):
        return None
    r = _residual(p, x, y)
    for _ in range(POLISH_STEPS):
        if r == 0.0:
            break
        try:
            dx, dy = np.linalg.solve(g_hessian(p, x, y), [-c for c in g_gradient(p, x, y)])
        except np.linalg.LinAlgError:
            break
        nx, ny = x + float(dx), y + float(dy)
        nr = _residual(p, nx, ny) if math.isfinite(nx) and math.isfinite(ny) else math.inf
        if nr >= r:
            break
        x, y, r = nx, ny, nr
    return x, y


def _dedup_2d(pts):
    out = []
    for x, y in sorted(pts):
        if any(math.hypot(x - a, y - b) <= DEDUP_TOL * max(1.0, abs(x), abs(y)) for a, b in out):
            continue
        out.append((x, y))
    return out


def critical_points_newton(p: UnfoldingParams, starts: int = 256, box: float | None = None,
                           seed: int = 0, max_iter: int = 100) -> list[GCritical]:
    """Independent solver: damped Newton on grad g = 0 from random starts.

    By default the starts are split over boxes sized by the natural lengths
    |w|, sqrt|u|, sqrt|v|, |u/w| and |v/w|, since critical points near the
    degeneracy locus sit on the smaller of these scales.  None exceeds the
    weighted scale max(|w|, sqrt|u|, sqrt|v|), which bounds every critical point.
    """
    w, u, v = abs(float(p.w)), abs(float(p.u)), abs(float(p.v))
    if box is None:
        lam = max(w, math.sqrt(u), math.sqrt(v))
        lengths = [w, math.sqrt(u), math.sqrt(v)]
        if w > 0:
            lengths += [min(u / w, lam), min(v / w, lam)]
        boxes = sorted({3.0 * r for r in lengths if r > 0}) or [1.0]
    else:
        boxes = [box]
    rng = np.random.default_rng(seed)
    per = -(-starts // len(boxes))
    grid = np.concatenate([rng.uniform(-b, b, size=(per, 2)) for b in boxes])
    found = []
    for x0, y0 in grid:
        x, y = float(x0), float(y0)
        ok = False
        for _ in range(max_iter):
            gx, gy = g_gradient(p, x, y)
            h = g_hessian(p, x, y)
            try:
                dx, dy = np.linalg.solve(h, [-gx, -gy])
            except np.linalg.LinAlgError:
                break
            step = math.hypot(dx, dy)
            if not math.isfinite(step):
                break
            if step > 1.0:
                dx, dy = dx / step, dy / step
            x, y = x + dx, y + dy
            if step < 1e-15 * max(1.0, abs(x), abs(y)):
                ok = True
                break
        if not ok:
            gx, gy = g_gradient(p, x, y)
            ok = math.isfinite(x) and math.isfinite(y) and math.hypot(gx, gy) < 1e-13
        if ok:
            found.append((x, y))
    pts = []
    for x, y in sorted(found):
        if any(math.hypot(x - a, y - b) <= 1e-7 for a, b in pts):
            continue
        pts.append((x, y))
    return [_point(p, x, y) for x, y in pts]


# ---------------------------------------------------------------------------
# degeneracy locus

@dataclass(frozen=True)
class DiscriminantCurve:
    w: float
    samples: np.ndarray          # (N, 4): u, v, x, y ordered along the curve
    is_cusp: np.ndarray          # (N,) bool
    cusps: list[tuple[float, float]]
    fold_axis_crossings: list[tuple[float, float]]

    def residuals(self) -> tuple[float, float]:
        """Max |grad g| and max |det H| over all samples."""
        u, v, x, y = self.samples.T
        gx = 3 * x * x - 6 * y * y + 2 * self.w * x + u
        gy = -12 * x * y + v
        det = (6 * x + 2 * self.w) * (-12 * x) - 144 * y * y
        return float(np.max(np.hypot(gx, gy))), float(np.max(np.abs(det)))


def _ellipse(w: float, theta):
    # 3x^2 + w x + 6y^2 = 0, i.e. det H = 0
    x = (w / 6) * (np.cos(theta) - 1)
    y = (w / (6 * math.sqrt(2))) * np.sin(theta)
    dx = -(w / 6) * np.sin(theta)
    dy = (w / (6 * math.sqrt(2))) * np.cos(theta)
    return x, y, dx, dy


def _control(w: float, x, y):
    # (u, v) for which (x, y) is a critical point of g
    return -3 * x * x + 6 * y * y - 2 * w * x, 12 * x * y


def _velocity_rows(w: float, theta):
    # d(u, v)/dtheta = -H t; returns the two components
    x, y, dx, dy = _ellipse(w, theta)
    r1 = (6 * x + 2 * w) * dx - 12 * y * dy
    r2 = -12 * y * dx - 12 * x * dy
    return -r1, -r2


def _sign_roots(fn, grid) -> list[float]:
    vals = fn(grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots


def _unique_angles(thetas, tol=1e-9) -> list[float]:
    out: list[float] = []
    for t in sorted(float(t) % (2 * math.pi) for t in thetas):
        if out and abs(t - out[-1]) <= tol:
            continue
        out.append(t)
    if len(out) > 1 and abs(out[0] + 2 * math.pi - out[-1]) <= tol:
        out.pop()
    return out


def discriminant_section(w: float, n_samples: int = 256) -> DiscriminantCurve:
    """Sample the degeneracy locus of g in the section w = const (w > 0).

    Samples are uniform along the generating ellipse angle; the cusps
    (zeros of the curve velocity) and axis crossings are located by root
    bracketing and inserted exactly.
    """
    w = float(w)
    if w <= 0:
        raise ValueError("the degeneracy section is only traced for w > 0")
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    grid = np.linspace(0.0, 2 * math.pi, max(n_samples, 16) * 4 + 1)
    scale = w * w

    candidates = []
    for k in (0, 1):
        candidates += _sign_roots(lambda t, k=k: _velocity_rows(w, t)[k], grid)
    cusp_theta = []
    for t in _unique_angles(candidates):
        r1, r2 = _velocity_rows(w, t)
        if math.hypot(r1, r2) <= 1e-9 * scale:
            cusp_theta.append(t)
    cusp_theta = _unique_angles(cusp_theta)

    cross_theta = _unique_angles(_sign_roots(lambda t: _control(w, *_ellipse(w, t)[:2])[1], grid))

    base = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
    thetas = np.array(sorted(set(base.tolist()) | set(cusp_theta)))
    cusp_mask = np.array([any(abs(t - c) <= 1e-12 for c in cusp_theta) for t in thetas])
    x, y, _, _ = _ellipse(w, thetas)
    u, v = _control(w, x, y)
    samples = np.column_stack([u, v, x, y])

    def at(t):
        xx, yy, _, _ = _ellipse(w, t)
        uu, vv = _control(w, xx, yy)
        return (float(uu), float(vv))

    return DiscriminantCurve(
        w=w, samples=samples, is_cusp=cusp_mask,
        cusps=[at(t) for t in cusp_theta],
        fold_axis_crossings=[at(t) for t in cross_theta],
    )


def implicit_residual(u, v):
    """The printed section quartic (-1+u)u^3 + (486-648u+144u^2)v^2 + 5184v^4."""
    return (-1 + u) * u**3 + (486 - 648 * u + 144 * u * u) * v * v + 5184 * v**4


def critical_value_graph(w: float, u_range, v_range, resolution) -> list[tuple[float, float, float, Morse]]:
    """All critical values over a (u, v) grid; one record per sheet."""
    if isinstance(resolution, int):
        nu = nv = resolution
    else:
        nu, nv = resolution
    if nu < 8 or nv < 8:
        raise ValueError("resolution must be at least 8 per axis")
    out = []
    for u in np.linspace(u_range[0], u_range[1], nu):
        for v in np.linspace(v_range[0], v_range[1], nv):
            for cp in critical_points_g(UnfoldingParams(w, float(u), float(v))):
                out.append((float(u), float(v), cp.z, cp.morse))
    return out


# ---------------------------------------------------------------------------
# the heat family inside the unfolding

def embedding_line(s):
    """(u, c) such that f(1/6 + x, y, s) = g_{1/2, u, 0}(x, y) + c."""
    if isinstance(s, (int, Fraction)):
        s = Fraction(s)
        return (Fraction(1, 12) - 6 * s, s + Fraction(1, 216))
    s = float(s)
    return (1 / 12 - 6 * s, s + 1 / 216)


def inside(s) -> bool:
    """True when g_{1/2, u(s), 0} has four real critical points."""
    u, c = embedding_line(s)
    return len(critical_points_g(UnfoldingParams(0.5, float(u), 0.0, float(c)))) == 4


def inside_transitions(s_lo: float, s_hi: float, steps: int = 400, tol: float = 1e-6) -> list[tuple[float, float]]:
    """Brackets ``(a, b)`` with b - a <= tol where :func:`inside` flips."""
    grid = np.linspace(s_lo, s_hi, steps + 1)
    states = [inside(float(s)) for s in grid]
    out = []
    for i in range(steps):
        if states[i] == states[i + 1]:
            continue
        a, b = float(grid[i]), float(grid[i + 1])
        sa = states[i]
        while b - a > tol:
            m = 0.5 * (a + b)
            if inside(m) == sa:
                a = m
            else:
                b = m
        out.append((a, b))
    return out


def organizing_center() -> Polynomial:
    return parse("x^3 - 6*x*y^2 + 1/2*x^2 + 1/54", n_spatial=2)


# ---------------------------------------------------------------------------
# CSV export

def _g(v) -> str:
    return format(float(v), ".17g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def discriminant_csv(curve: DiscriminantCurve) -> str:
    rows = [[_g(u), _g(v), _g(x), _g(y), int(c)] for (u, v, x, y), c in zip(curve.samples, curve.is_cusp)]
    return _csv(["u", "v", "x", "y", "is_cusp"], rows)


def cvgraph_csv(records) -> str:
    return _csv(["u", "v", "z", "morse"], [[_g(u), _g(v), _g(z), m.value] for u, v, z, m in records])


def line_csv(scales) -> str:
    rows = []
    for s in scales:
        u, c = embedding_line(s)
        rows.append([_g(s), _g(u), _g(c), int(inside(s))])
    return _csv(["s", "u", "c", "inside"], rows)
