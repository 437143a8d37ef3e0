"""Numerical Gaussian scale space on uniform 2-D grids.

A :class:`GridField` holds samples ``values[i, j] = I(x0 + i h, y0 + j h)``
at scale ``s``.  Blurring by ``ds`` convolves with a Gaussian of per-axis
variance ``2 ds`` (the heat kernel), critical points are located to
sub-pixel accuracy on a local biquadratic interpolant, and
:func:`track`/:func:`find_events` link them across a ladder of scales and
report creation, annihilation and merge events.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.ndimage import correlate1d
from scipy.optimize import brentq

from .damon import CriticalPoint, Morse, classify_eigenvalues
from .poly import Polynomial, as_fraction, heat_flow

log = logging.getLogger(__name__)

__all__ = [
    "GridField",
    "TrackConfig",
    "Trajectory",
    "ScaleEvent",
    "Polyline",
    "sample",
    "blur",
    "gaussian_kernel",
    "detect",
    "gradient_at",
    "track",
    "find_events",
    "level_sets",
    "gradient_vectors",
    "detections_csv",
    "trajectories_csv",
    "events_csv",
    "run_manifest",
]

MIN_DIMS = 3
DETECT_MIN_DIMS = 8


# ---------------------------------------------------------------------------
# fields

@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar samples on a uniform grid; ``values`` is indexed ``[ix, iy]``.

    ``margin`` counts the cells along each edge whose values are affected by
    the boundary treatment of earlier blurs; ``blur_sigmas`` lists the
    standard deviations of the numeric blurs applied since sampling.  ``source`` is the
    exact spatial polynomial the samples represent, when known.
    """

    origin: tuple[float, float]
    h: float
    values: np.ndarray
    s: float = 0.0
    margin: int = 0
    blur_sigmas: tuple[float, ...] = ()
    source: Polynomial | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("values must be a 2-D array")
        if min(vals.shape) < MIN_DIMS:
            raise ValueError(f"grid must be at least {MIN_DIMS}x{MIN_DIMS}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if not self.h > 0:
            raise ValueError("spacing must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.dims[0])

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.dims[1])

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def interior_mask(self) -> np.ndarray:
        """Nodes not flagged as boundary-affected."""
        m = np.zeros(self.dims, dtype=bool)
        k = self.margin
        if 2 * k < self.dims[0] and 2 * k < self.dims[1]:
            m[k : self.dims[0] - k, k : self.dims[1] - k] = True
        return m

    def in_interior(self, x: float, y: float, pad: float = 0.0) -> bool:
        lo = self.margin * self.h + pad
        x0, y0 = self.origin
        x1 = x0 + (self.dims[0] - 1) * self.h
        y1 = y0 + (self.dims[1] - 1) * self.h
        return x0 + lo <= x <= x1 - lo and y0 + lo <= y <= y1 - lo


def sample(fn, window, h: float, s: float = 0.0) -> GridField:
    """Sample ``fn`` on ``window = (x0, y0, x1, y1)`` with spacing ``h``.

    ``fn`` is a vectorised callable ``fn(X, Y)`` or a :class:`Polynomial`
    (evaluated at scale ``s`` and kept as the field's exact source).
    """
    x0, y0, x1, y1 = (float(v) for v in window)
    if not h > 0:
        raise ValueError("spacing must be positive")
    if x1 <= x0 or y1 <= y0:
        raise ValueError("degenerate window")
    nx = int(math.floor((x1 - x0) / h + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / h + 1e-9)) + 1
    if nx < MIN_DIMS or ny < MIN_DIMS:
        raise ValueError(f"window too small: {nx}x{ny} nodes, need at least {MIN_DIMS}x{MIN_DIMS}")
    X, Y = np.meshgrid(x0 + h * np.arange(nx), y0 + h * np.arange(ny), indexing="ij")
    source = None
    if isinstance(fn, Polynomial):
        if fn.n_spatial != 2:
            raise ValueError("only polynomials in (x, y[, s]) can be sampled")
        source = fn.substitute_scale(as_fraction(s))
        values = source.to_numpy()(X, Y)
    else:
        values = np.broadcast_to(np.asarray(fn(X, Y), dtype=float), X.shape)
    return GridField((x0, y0), float(h), values, s=float(s), source=source)


# ---------------------------------------------------------------------------
# blurring

@lru_cache(maxsize=256)
def gaussian_kernel(sigma_cells: float) -> np.ndarray:
    """Sampled Gaussian truncated at 4 sigma, unit sum, variance sigma^2.

    The width parameter of the sampled exponential is adjusted so that the
    discrete kernel's variance (in cell units) is exactly ``sigma_cells**2``;
    plain truncation and renormalisation would otherwise lose a fraction of
    the variance and shift the effective scale.
    """
    radius = int(math.ceil(4 * sigma_cells))
    k = np.arange(-radius, radius + 1, dtype=float)

    def weights(width):
        w = np.exp(-0.5 * (k / width) ** 2)
        return w / w.sum()

    target = sigma_cells**2
    width = brentq(lambda t: float(np.sum(k * k * weights(t))) - target,
                   1e-3 * sigma_cells, 1e3 * sigma_cells, xtol=1e-15, rtol=1e-15)
    return weights(width)


def _margin_cells(sigmas, h: float) -> int:
    # Blur k only reads reflected values within 4 sigma_k of the edge; the
    # blurs after it carry that error inward with combined width
    # sqrt(sum of later sigma^2), so it is treated as spent after 4 of those.
    reach, tail = 0.0, 0.0
    for sig in reversed(sigmas):
        reach = max(reach, 4 * sig + 4 * math.sqrt(tail))
        tail += sig * sig
    return int(math.ceil(reach / h - 1e-9))


def blur(field: GridField, ds: float, mode: str = "numeric") -> GridField:
    """Advance the field by ``ds`` in scale (heat flow for time ``ds``).

    ``mode="numeric"`` convolves separably with :func:`gaussian_kernel` and
    reflects at the edges; the boundary-affected margin is recorded on the
    result.  ``mode="oracle"`` resamples the exact heat flow of the field's
    polynomial source.  A kernel narrower than half a cell is not applied:
    the input comes back unchanged, flagged ``"under-resolved"``.
    """
    ds = float(ds)
    if ds < 0:
        raise ValueError("blur amount must be non-negative")
    if ds == 0:
        return field
    sigma = math.sqrt(2 * ds)
    if sigma < field.h / 2:
        log.warning("blur by %.3g is under-resolved at h=%.3g; field left unchanged", ds, field.h)
        return replace(field, flags=tuple(sorted(set(field.flags) | {"under-resolved"})))
    new_source = heat_flow(field.source, as_fraction(ds)) if field.source is not None else None
    if mode == "oracle":
        if new_source is None:
            raise ValueError("oracle blur needs a polynomial source")
        X, Y = field.mesh()
        return replace(field, values=new_source.to_numpy()(X, Y), s=field.s + ds, source=new_source)
    if mode != "numeric":
        raise ValueError(f"unknown blur mode {mode!r}")
    kern = gaussian_kernel(sigma / field.h)
    vals = correlate1d(field.values, kern, axis=0, mode="reflect")
    vals = correlate1d(vals, kern, axis=1, mode="reflect")
    sigmas = field.blur_sigmas + (sigma,)
    return replace(field, values=vals, s=field.s + ds, blur_sigmas=sigmas,
                   margin=max(field.margin, _margin_cells(sigmas, field.h)), source=new_source)


# ---------------------------------------------------------------------------
# local biquadratic interpolation

def _basis(t):
    # quadratic Lagrange basis on nodes -1, 0, 1 and its derivatives
    b = np.array([0.5 * t * (t - 1), 1 - t * t, 0.5 * t * (t + 1)])
    d1 = np.array([t - 0.5, -2 * t, t + 0.5])
    d2 = np.array([1.0, -2.0, 1.0])
    return b, d1, d2


def _nearest_node(field: GridField, x, y):
    nx, ny = field.dims
    i = int(np.clip(math.floor((x - field.origin[0]) / field.h + 0.5), 1, nx - 2))
    j = int(np.clip(math.floor((y - field.origin[1]) / field.h + 0.5), 1, ny - 2))
    return i, j


def _local_fit(field: GridField, x: float, y: float):
    """Value, gradient and Hessian of the 3x3 biquadratic interpolant at (x, y)."""
    i, j = _nearest_node(field, x, y)
    h = field.h
    t = (x - (field.origin[0] + i * h)) / h
    u = (y - (field.origin[1] + j * h)) / h
    V = field.values[i - 1 : i + 2, j - 1 : j + 2]
    bx, dx, ddx = _basis(t)
    by, dy, ddy = _basis(u)
    val = bx @ V @ by
    grad = np.array([dx @ V @ by, bx @ V @ dy]) / h
    hxx = ddx @ V @ by
    hyy = bx @ V @ ddy
    hxy = dx @ V @ dy
    hess = np.array([[hxx, hxy], [hxy, hyy]]) / (h * h)
    return float(val), grad, hess


def gradient_at(field: GridField, x: float, y: float) -> np.ndarray:
    """Gradient of the local biquadratic interpolant (central differences at nodes)."""
    return _local_fit(field, x, y)[1]


# ---------------------------------------------------------------------------
# detection

@dataclass(frozen=True)
class TrackConfig:
    """Discretisation constants of detection, linking and event localisation."""

    max_newton: int = 20
    cond_max: float = 1e12
    eps_lambda_h2: float = 1.0      # Degenerate when min |lambda| <= eps_lambda_h2 * h^2
    gate_cells: float = 3.0
    tie_ratio: float = 0.10
    event_cells: float = 5.0
    bisect_rel: float = 0.01
    bisect_max: int = 60
    mode: str = "numeric"


def _central_gradient(values: np.ndarray, h: float):
    gx = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * h)
    gy = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * h)
    return gx, gy


def _sign_change(g: np.ndarray, tol: float) -> np.ndarray:
    # per cell of the node grid g: min <= 0 <= max, beyond the noise floor
    c = np.stack([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
    lo, hi = c.min(axis=0), c.max(axis=0)
    return (lo <= tol) & (hi >= -tol) & (hi - lo > tol)


def _make_cp(field: GridField, x, y, val, hess, eps, degenerate=False) -> CriticalPoint:
    lams, vecs = np.linalg.eigh(hess)
    lam = (float(lams[0]), float(lams[1]))
    morse = Morse.DEGENERATE if degenerate else classify_eigenvalues(lam, eps)
    return CriticalPoint(x=float(x), y=float(y), s=float(field.s), z=float(val), hessian=hess,
                         eigenvalues=lam, eigenvectors=(vecs[:, 0], vecs[:, 1]), morse=morse)


def _refine(field: GridField, x: float, y: float, cfg: TrackConfig, gtol: float):
    """Newton iteration on the local fit; returns (x, y, degenerate) or None."""
    h = field.h
    cx, cy = x, y
    converged = False
    for _ in range(cfg.max_newton):
        _, g, H = _local_fit(field, x, y)
        if not np.all(np.isfinite(H)) or np.linalg.cond(H) > cfg.cond_max:
            return cx, cy, True
        step = -np.linalg.solve(H, g)
        n = float(np.hypot(*step))
        if n > h:
            step *= h / n
        x, y = x + float(step[0]), y + float(step[1])
        if n < 1e-10 * h:
            converged = True
            break
    if not converged:
        g = _local_fit(field, x, y)[1]
        if float(np.hypot(*g)) > gtol:
            return None
    if abs(x - cx) > 1.5 * h or abs(y - cy) > 1.5 * h:
        return None
    return x, y, False


def detect(field: GridField, config: TrackConfig | None = None) -> list[CriticalPoint]:
    """Critical points of the sampled field outside its boundary margin.

    Candidate cells are those across which both central-difference gradient
    components change sign.  Each candidate is refined by Newton steps on
    the local biquadratic interpolant (at most ``max_newton`` steps, each
    clamped to one cell), duplicates closer than ``h`` are merged, and the
    Hessian of the interpolant classifies the point.
    """
    cfg = config or TrackConfig()
    nx, ny = field.dims
    if nx < DETECT_MIN_DIMS or ny < DETECT_MIN_DIMS:
        raise ValueError(f"detection needs at least {DETECT_MIN_DIMS}x{DETECT_MIN_DIMS} nodes")
    h = field.h
    v = field.values
    gx, gy = _central_gradient(v, h)
    scale_v = float(np.max(np.abs(v))) or 1.0
    tol = 64 * np.finfo(float).eps * scale_v / h
    cand = _sign_change(gx, tol) & _sign_change(gy, tol)
    scale_g = max(float(np.max(np.hypot(gx, gy))), tol)
    gtol = 1e-9 * scale_g
    eps = cfg.eps_lambda_h2 * h * h

    found: list[tuple[float, float, bool]] = []
    for ci, cj in zip(*np.nonzero(cand)):
        # cell between interior nodes ci+1..ci+2 (node indices of the full grid)
        x = field.origin[0] + (ci + 1.5) * h
        y = field.origin[1] + (cj + 1.5) * h
        if not field.in_interior(x, y, pad=h):
            continue
        r = _refine(field, x, y, cfg, gtol)
        if r is None:
            continue
        if not field.in_interior(r[0], r[1], pad=h):
            continue
        found.append(r)

    # single-linkage merge within radius h, deterministic order
    clusters: list[list[tuple[float, float, bool]]] = []
    for p in found:
        hit = [c for c in clusters if any(math.hypot(p[0] - q[0], p[1] - q[1]) <= h for q in c)]
        if not hit:
            clusters.append([p])
            continue
        merged = [p]
        for c in hit:
            merged.extend(c)
            clusters.remove(c)
        clusters.append(merged)

    out = []
    for c in clusters:
        good = [p for p in c if not p[2]]
        if good:
            x, y, _ = min(good, key=lambda p: float(np.hypot(*_local_fit(field, p[0], p[1])[1])))
            degenerate = False
        else:
            x = float(np.mean([p[0] for p in c]))
            y = float(np.mean([p[1] for p in c]))
            degenerate = True
        val, _, H = _local_fit(field, x, y)
        out.append(_make_cp(field, x, y, val, H, eps, degenerate))
    out.sort(key=lambda cp: (cp.x, cp.y))
    return out


# ---------------------------------------------------------------------------
# tracking

@dataclass(eq=False)
class Trajectory:
    id: int
    points: list[tuple[int, CriticalPoint]] = field(default_factory=list)   # (rung, point)
    start_status: str = "AtBoundary"
    end_status: str = "AtBoundary"
    run: "_Run | None" = field(default=None, repr=False)

    @property
    def scales(self) -> list[float]:
        return [cp.s for _, cp in self.points]

    @property
    def first_rung(self) -> int:
        return self.points[0][0]

    @property
    def last_rung(self) -> int:
        return self.points[-1][0]

    def at(self, rung: int) -> CriticalPoint | None:
        for r, cp in self.points:
            if r == rung:
                return cp
        return None

    def morse_types(self) -> list[Morse]:
        return [cp.morse for _, cp in self.points]


@dataclass(frozen=True)
class ScaleEvent:
    kind: str                      # Creation | Annihilation | Merge
    s_estimate: float
    location: tuple[float, float]
    participants: tuple[int, ...]
    s_lo: float
    s_hi: float


@dataclass(eq=False)
class _Run:
    initial: GridField
    ladder: list[float]
    config: TrackConfig
    census: list[int] = field(default_factory=list)
    snapshots: dict[int, GridField] = field(default_factory=dict)

    @property
    def h(self) -> float:
        return self.initial.h


def _predict(traj: Trajectory, ladder, rung_next: int) -> tuple[np.ndarray, float]:
    (r1, p1) = traj.points[-1]
    last = np.array(p1.position)
    if len(traj.points) < 2:
        return last, 0.0
    (r0, p0) = traj.points[-2]
    prev = np.array(p0.position)
    frac = (ladder[rung_next] - ladder[r1]) / (ladder[r1] - ladder[r0])
    pred = last + (last - prev) * frac
    return pred, float(np.hypot(*(pred - last)))


def _link(active: list[Trajectory], dets: list[CriticalPoint], ladder, rung: int, cfg: TrackConfig, h: float):
    pairs = []
    for ti, t in enumerate(active):
        pred, disp = _predict(t, ladder, rung)
        gate = max(cfg.gate_cells * h, 2 * disp)
        dists = sorted((float(np.hypot(d.x - pred[0], d.y - pred[1])), di) for di, d in enumerate(dets))
        within = [(dd, di) for dd, di in dists if dd <= gate]
        if len(within) >= 2 and within[1][0] - within[0][0] <= cfg.tie_ratio * within[1][0]:
            log.info("linking ambiguity for trajectory %d at rung %d: candidates %d and %d "
                     "at %.3g / %.3g; smaller index wins", t.id, rung, within[0][1], within[1][1],
                     within[0][0], within[1][0])
        pairs.extend((dd, ti, di) for dd, di in within)
    pairs.sort()
    used_t, used_d, links = set(), set(), {}
    for dd, ti, di in pairs:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        links[ti] = di
    return links


def track(initial: GridField, ladder, config: TrackConfig | None = None) -> list[Trajectory]:
    """Follow critical points across ``ladder`` (first entry = ``initial.s``).

    The field is blurred incrementally from rung to rung.  Degenerate
    detections are not linked.  Detections are matched to the linear
    extrapolation of each trajectory's last two positions, nearest first,
    within a gate of ``max(gate_cells * h, 2 * predicted displacement)``.
    """
    cfg = config or TrackConfig()
    ladder = [float(s) for s in ladder]
    if not ladder or abs(ladder[0] - initial.s) > 1e-12 * max(1.0, abs(initial.s)):
        raise ValueError("ladder must start at the initial field's scale")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly increasing")
    run = _Run(initial, ladder, cfg)
    h = initial.h
    trajs: list[Trajectory] = []
    active: list[Trajectory] = []
    fld = initial
    prev_fld = None
    for rung, s in enumerate(ladder):
        if rung:
            prev_fld = fld
            fld = blur(fld, s - ladder[rung - 1], cfg.mode)
            if not fld.interior_mask().any():
                log.warning("boundary margin covers the whole grid at s=%.6g; widen the window", s)
        dets = [d for d in detect(fld, cfg) if d.morse is not Morse.DEGENERATE]
        run.census.append(len(dets))
        links = _link(active, dets, ladder, rung, cfg, h) if rung else {}
        still = []
        for ti, t in enumerate(active):
            if ti in links:
                t.points.append((rung, dets[links[ti]]))
                still.append(t)
            else:
                t.end_status = "Vanished"
                run.snapshots.setdefault(rung - 1, prev_fld)
        linked = set(links.values())
        for di, d in enumerate(dets):
            if di in linked:
                continue
            t = Trajectory(len(trajs), [(rung, d)], "Created" if rung else "AtBoundary", run=run)
            if rung:
                run.snapshots.setdefault(rung - 1, prev_fld)
            trajs.append(t)
            still.append(t)
        active = still
    for t in active:
        t.end_status = "AtBoundary"
    last_field = fld
    for t in trajs:
        if t.end_status == "Vanished":
            cp = t.points[-1][1]
            if not last_field.in_interior(cp.x, cp.y, pad=3 * h):
                t.end_status = "AtBoundary"
    merged = set()
    for ev in _group_events(trajs, run):
        if ev.kind in ("Merge", "Annihilation"):
            merged.update(ev.participants)
    for t in trajs:
        if t.end_status == "Vanished" and t.id in merged:
            t.end_status = "Merged"
    return trajs


# ---------------------------------------------------------------------------
# events

def _fold_zero(s0, d0sq, s1, d1sq) -> float | None:
    """Scale where a squared separation varying linearly in s reaches zero."""
    if d0sq == d1sq:
        return None
    return s1 - d1sq * (s1 - s0) / (d1sq - d0sq)


def _pair_fold(a: Trajectory, b: Trajectory, rungs, ladder) -> float | None:
    pa, pb = [a.at(r) for r in rungs], [b.at(r) for r in rungs]
    if any(p is None for p in pa + pb):
        return None
    d = [(p.x - q.x) ** 2 + (p.y - q.y) ** 2 for p, q in zip(pa, pb)]
    return _fold_zero(ladder[rungs[0]], d[0], ladder[rungs[1]], d[1])


def _clusters(items, linked) -> list[list]:
    out: list[list] = []
    for it in items:
        hit = [c for c in out if any(linked(it, o) for o in c)]
        merged = [it]
        for c in hit:
            merged.extend(c)
            out.remove(c)
        out.append(merged)
    return [sorted(c, key=lambda t: t.id) for c in out]


def _morse_index(cp: CriticalPoint) -> int | None:
    return cp.index


def _group_events(trajs: list[Trajectory], run: _Run) -> list[ScaleEvent]:
    ladder, cfg, h = run.ladder, run.config, run.h
    radius = cfg.event_cells * h
    last = len(ladder) - 1
    events: list[ScaleEvent] = []

    # endings: annihilation / merge between rungs k and k+1
    ends: dict[int, list[Trajectory]] = {}
    for t in trajs:
        if t.end_status in ("Vanished", "Merged") and t.last_rung < last:
            ends.setdefault(t.last_rung, []).append(t)
    for k in sorted(ends):
        s_lo, s_hi = ladder[k], ladder[k + 1]

        def partners(a, b, k=k, s_hi=s_hi, s_lo=s_lo):
            pa, pb = a.points[-1][1], b.points[-1][1]
            if math.hypot(pa.x - pb.x, pa.y - pb.y) <= radius:
                return True
            if k >= 1:
                z = _pair_fold(a, b, (k - 1, k), ladder)
                return z is not None and s_lo <= z <= s_hi + 0.5 * (s_hi - s_lo)
            return False

        for cl in _clusters(ends[k], partners):
            if len(cl) < 2:
                continue
            term = np.array([t.points[-1][1].position for t in cl])
            loc = term.mean(axis=0)
            spread = float(np.max(np.hypot(*(term - loc).T)))
            reach = max(radius, spread + radius)
            survivors = []
            for t in trajs:
                if t in cl:
                    continue
                a, b = t.at(k), t.at(k + 1)
                if a is None or b is None:
                    continue
                near = min(math.hypot(a.x - loc[0], a.y - loc[1]), math.hypot(b.x - loc[0], b.y - loc[1]))
                if near <= reach and a.morse != b.morse:
                    survivors.append(t)
            est = _cluster_fold(cl, (k - 1, k), ladder) if k >= 1 else None
            est = 0.5 * (s_lo + s_hi) if est is None else min(max(est, s_lo), s_hi)
            idx = [_morse_index(t.points[-1][1]) for t in cl]
            if not survivors and len(cl) == 2 and None not in idx and abs(idx[0] - idx[1]) == 1:
                kind = "Annihilation"
            else:
                kind = "Merge"
            parts = tuple(sorted(t.id for t in cl + survivors))
            events.append(ScaleEvent(kind, float(est), (float(loc[0]), float(loc[1])), parts, s_lo, s_hi))

    # beginnings: creation between rungs k-1 and k
    starts: dict[int, list[Trajectory]] = {}
    for t in trajs:
        if t.start_status == "Created" and t.first_rung > 0:
            starts.setdefault(t.first_rung, []).append(t)
    for k in sorted(starts):
        s_lo, s_hi = ladder[k - 1], ladder[k]

        def partners(a, b, k=k, s_lo=s_lo, s_hi=s_hi):
            pa, pb = a.points[0][1], b.points[0][1]
            if math.hypot(pa.x - pb.x, pa.y - pb.y) <= radius:
                return True
            if k < last:
                z = _pair_fold(a, b, (k, k + 1), ladder)
                return z is not None and s_lo - 0.5 * (s_hi - s_lo) <= z <= s_hi
            return False

        for cl in _clusters(starts[k], partners):
            if len(cl) != 2:
                continue
            idx = [_morse_index(t.points[0][1]) for t in cl]
            if None in idx or abs(idx[0] - idx[1]) != 1:
                continue
            first = np.array([t.points[0][1].position for t in cl])
            loc = first.mean(axis=0)
            est = _cluster_fold(cl, (k, k + 1), ladder) if k < last else None
            est = 0.5 * (s_lo + s_hi) if est is None else min(max(est, s_lo), s_hi)
            events.append(ScaleEvent("Creation", float(est), (float(loc[0]), float(loc[1])),
                                     tuple(t.id for t in cl), s_lo, s_hi))
    events.sort(key=lambda e: (e.s_lo, e.kind, e.participants))
    return events


def _cluster_fold(cl, rungs, ladder) -> float | None:
    # fold-law estimate from the most separated pair of the cluster
    best, best_d = None, -1.0
    for i in range(len(cl)):
        for j in range(i + 1, len(cl)):
            a, b = cl[i].at(rungs[1]), cl[j].at(rungs[1])
            if a is None or b is None:
                continue
            d = (a.x - b.x) ** 2 + (a.y - b.y) ** 2
            if d > best_d:
                best, best_d = (cl[i], cl[j]), d
    if best is None:
        return None
    return _pair_fold(best[0], best[1], rungs, ladder)


def _local_census(fld: GridField, loc, reach, cfg: TrackConfig):
    dets = [d for d in detect(fld, cfg) if d.morse is not Morse.DEGENERATE
            and math.hypot(d.x - loc[0], d.y - loc[1]) <= reach]
    dsq = 0.0
    for i in range(len(dets)):
        for j in range(i + 1, len(dets)):
            dsq = max(dsq, (dets[i].x - dets[j].x) ** 2 + (dets[i].y - dets[j].y) ** 2)
    return len(dets), dsq


def _refine_event(ev: ScaleEvent, trajs: list[Trajectory], run: _Run) -> ScaleEvent:
    cfg, ladder = run.config, run.ladder
    k_lo = ladder.index(ev.s_lo)
    base = run.snapshots.get(k_lo)
    if base is None:
        return ev
    by_id = {t.id: t for t in trajs}
    loc = ev.location
    # radius covering every participant on both bracketing rungs
    reach = cfg.event_cells * run.h
    for pid in ev.participants:
        for r in (k_lo, k_lo + 1):
            cp = by_id[pid].at(r)
            if cp is not None:
                reach = max(reach, math.hypot(cp.x - loc[0], cp.y - loc[1]) + 3 * run.h)
    n_lo, d_lo = _local_census(base, loc, reach, cfg)
    n_hi, d_hi = _local_census(blur(base, ev.s_hi - ev.s_lo, cfg.mode), loc, reach, cfg)
    if n_lo == n_hi:
        return ev
    lo, hi = ev.s_lo, ev.s_hi
    lo_hist = [(lo, d_lo)]
    hi_hist = [(hi, d_hi)]
    it = 0
    while hi - lo > cfg.bisect_rel * abs(hi) and it < cfg.bisect_max:
        m = 0.5 * (lo + hi)
        n_m, d_m = _local_census(blur(base, m - ev.s_lo, cfg.mode), loc, reach, cfg)
        if n_m == n_lo:
            lo = m
            lo_hist.append((m, d_m))
        else:
            hi = m
            hi_hist.append((m, d_m))
        it += 1
    # pair separation squared is linear in s near a fold: extrapolate inside the bracket
    side = lo_hist if ev.kind != "Creation" else hi_hist
    est = None
    if len(side) >= 2:
        (s0, q0), (s1, q1) = side[-2], side[-1]
        if q0 > 0 and q1 > 0:
            est = _fold_zero(s0, q0, s1, q1)
    if est is None or not lo <= est <= hi:
        est = 0.5 * (lo + hi)
    return replace(ev, s_estimate=float(est), s_lo=float(lo), s_hi=float(hi))


def find_events(trajectories: list[Trajectory], refine: bool = False) -> list[ScaleEvent]:
    """Creation, annihilation and merge events implied by a tracking run.

    A merge is two or more trajectories ending at the same rung, either with
    terminal positions within ``event_cells * h`` or with a squared
    separation that extrapolates linearly to zero inside the bracket; a
    surviving trajectory nearby whose Morse type changes joins the event.
    Creations are the time-reversed picture for pairs of new trajectories
    whose Morse indices differ by one.  With ``refine`` the event scale is
    bisected by re-blurring and re-detecting until the bracket is below
    ``bisect_rel`` relative width.
    """
    if not trajectories:
        return []
    run = trajectories[0].run
    if run is None:
        raise ValueError("trajectories must come from track()")
    events = _group_events(trajectories, run)
    if refine:
        events = [_refine_event(ev, trajectories, run) for ev in events]
    return events


# ---------------------------------------------------------------------------
# level sets and gradient field

@dataclass(frozen=True)
class Polyline:
    level: float
    points: np.ndarray      # (N, 2)
    closed: bool


# edges of cell (i, j): 0 bottom (i,j)-(i+1,j), 1 right (i+1,j)-(i+1,j+1),
# 2 top (i,j+1)-(i+1,j+1), 3 left (i,j)-(i,j+1)
def _edge_key(i, j, e):
    if e == 0:
        return ("h", i, j)
    if e == 1:
        return ("v", i + 1, j)
    if e == 2:
        return ("h", i, j + 1)
    return ("v", i, j)


# corner bits: a=(i,j) 1, b=(i+1,j) 2, c=(i+1,j+1) 4, d=(i,j+1) 8
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def _cell_segments(case: int, center_above: bool):
    if case == 5:    # a and c above
        return [(0, 1), (2, 3)] if center_above else [(3, 0), (1, 2)]
    if case == 10:   # b and d above
        return [(3, 0), (1, 2)] if center_above else [(0, 1), (2, 3)]
    return _SEGMENTS.get(case, [])


def level_sets(field: GridField, levels) -> list[Polyline]:
    """Marching-squares contours with linear interpolation along cell edges.

    Saddle cells are disambiguated by the mean of the four corner values.
    Every returned polyline is closed or ends on the grid boundary.
    """
    v = field.values
    nx, ny = field.dims
    h = field.h
    x0, y0 = field.origin
    out = []
    for level in levels:
        level = float(level)
        above = v >= level
        case = (above[:-1, :-1] * 1 + above[1:, :-1] * 2 + above[1:, 1:] * 4 + above[:-1, 1:] * 8)
        cells = np.argwhere((case != 0) & (case != 15))
        adj: dict[tuple, list[tuple]] = {}
        for i, j in cells:
            c = int(case[i, j])
            center = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]) >= level
            for e1, e2 in _cell_segments(c, center):
                k1, k2 = _edge_key(i, j, e1), _edge_key(i, j, e2)
                adj.setdefault(k1, []).append(k2)
                adj.setdefault(k2, []).append(k1)

        def point(key):
            kind, i, j = key
            if kind == "h":
                a, b = v[i, j], v[i + 1, j]
                t = (level - a) / (b - a)
                return (x0 + (i + t) * h, y0 + j * h)
            a, b = v[i, j], v[i, j + 1]
            t = (level - a) / (b - a)
            return (x0 + i * h, y0 + (j + t) * h)

        seen: set[tuple] = set()

        def walk(start):
            chain = [start]
            seen.add(start)
            prev, cur = None, start
            while True:
                nxt = [k for k in adj[cur] if k != prev and k not in seen]
                if not nxt:
                    closed = len(chain) > 2 and start in adj[cur] and prev is not None
                    return chain, closed
                prev, cur = cur, nxt[0]
                seen.add(cur)
                chain.append(cur)

        ends = sorted(k for k, nb in adj.items() if len(nb) == 1)
        for k in ends:
            if k not in seen:
                chain, _ = walk(k)
                out.append(Polyline(level, np.array([point(c) for c in chain]), False))
        for k in sorted(adj):
            if k not in seen:
                chain, closed = walk(k)
                pts = [point(c) for c in chain]
                if closed:
                    pts.append(pts[0])
                out.append(Polyline(level, np.array(pts), closed))
    return out


def gradient_vectors(field: GridField):
    """Central-difference gradient at interior nodes: (X, Y, GX, GY) arrays."""
    gx, gy = _central_gradient(field.values, field.h)
    X, Y = field.mesh()
    return X[1:-1, 1:-1], Y[1:-1, 1:-1], gx, gy


# ---------------------------------------------------------------------------
# serialisation

def _g(v) -> str:
    return format(float(v), ".17g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def detections_csv(points: list[CriticalPoint]) -> str:
    rows = [[_g(p.s), _g(p.x), _g(p.y), _g(p.z), _g(p.eigenvalues[0]), _g(p.eigenvalues[1]), p.morse.value]
            for p in points]
    return _csv(["s", "x", "y", "z", "lambda1", "lambda2", "morse"], rows)


def trajectories_csv(trajs: list[Trajectory]) -> str:
    rows = [[t.id, _g(cp.s), _g(cp.x), _g(cp.y), cp.morse.value] for t in trajs for _, cp in t.points]
    return _csv(["traj_id", "s", "x", "y", "morse"], rows)


def events_csv(events: list[ScaleEvent]) -> str:
    rows = [[e.kind, _g(e.s_estimate), _g(e.location[0]), _g(e.location[1]),
             " ".join(str(p) for p in e.participants)] for e in events]
    return _csv(["kind", "s", "x", "y", "participants"], rows)


def run_manifest(window, h, ladder, config: TrackConfig) -> str:
    doc = {
        "window": [float(v) for v in window],
        "h": float(h),
        "ladder": [float(s) for s in ladder],
        "thresholds": {
            "gate_cells": config.gate_cells,
            "event_cells": config.event_cells,
            "bisect_rel": config.bisect_rel,
            "eps_lambda_h2": config.eps_lambda_h2,
            "cond_max": config.cond_max,
            "max_newton": config.max_newton,
            "mode": config.mode,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
