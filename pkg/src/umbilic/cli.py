"""``umbilic`` command line: regenerate figure data and run verification suites.

Every command writes plain CSV (or JSON) files into ``--out`` and, with
``--emit-plot``, a gnuplot script per figure that references them.  Exit
status is 0 on success, 1 when a verification check fails and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import damon, heat_forms, scale_space, unfolding
from .poly import Polynomial, heat_residual, parse

log = logging.getLogger("umbilic")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# six scales (k/3)(1/72), k = -1..4
DEFAULT_SCALES = [Fraction(k, 3) * damon.S_MERGE for k in range(-1, 5)]


class ConfigError(ValueError):
    pass


@dataclass
class Preset:
    function: Polynomial
    window: tuple[float, float, float, float]
    h: float
    ladder: list[float]


def _damon_ladder():
    return [float(s) for s in np.linspace(1 / 720, 1 / 36, 64)]


def _creation_ladder():
    return [0.0] + [float(s) for s in np.geomspace(1e-5, 1e-3, 12)]


def presets() -> dict[str, Preset]:
    return {
        "damon": Preset(damon.F, (-1.5, -1.5, 1.5, 1.5), 1 / 256, _damon_ladder()),
        "bowl": Preset(parse("x^2 + y^2 + 4*s", n_spatial=2), (-2.0, -2.0, 2.0, 2.0), 1 / 64,
                       [float(s) for s in np.linspace(0.0, 0.05, 11)]),
        "creation": Preset(damon.F, (-0.5, -0.5, 0.5, 0.5), 1 / 512, _creation_ladder()),
    }


@dataclass
class RunConfig:
    command: str
    out: Path
    fmt: str = "csv"
    emit_plot: bool = False
    window: tuple[float, float, float, float] | None = None
    h: float | None = None
    scales: list = field(default_factory=list)
    ladder: list[float] = field(default_factory=list)
    levels: list[float] | None = None
    preset: str = "damon"
    function: Polynomial | None = None
    sub: str | None = None
    refine: bool = False


# ---------------------------------------------------------------------------
# output

def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v: str):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def _csv_to_json(text: str) -> str:
    rows = [{k: _num(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO(text))]
    return json.dumps(rows, indent=1) + "\n"


class Writer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.written: list[Path] = []

    def table(self, stem: str, csv_text: str) -> Path:
        if self.cfg.fmt == "json":
            path = self.cfg.out / f"{stem}.json"
            _atomic_write(path, _csv_to_json(csv_text))
        else:
            path = self.cfg.out / f"{stem}.csv"
            _atomic_write(path, csv_text)
        self.written.append(path)
        return path

    def json(self, stem: str, doc) -> Path:
        path = self.cfg.out / f"{stem}.json"
        _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path

    def plot(self, stem: str, script: str):
        if self.cfg.emit_plot:
            path = self.cfg.out / f"{stem}.gp"
            _atomic_write(path, script)
            self.written.append(path)


def _g(v) -> str:
    return format(float(v), ".17g")


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _gp_header(title: str) -> str:
    return f"# gnuplot script\nset datafile separator ','\nset key autotitle columnhead\nset title '{title}'\n"


# ---------------------------------------------------------------------------
# commands

def _scales(cfg: RunConfig):
    return cfg.scales or DEFAULT_SCALES


def cmd_branches(cfg: RunConfig, wr: Writer) -> int:
    if not cfg.scales:
        raise ConfigError("branches needs --s or --s-min/--s-max/--steps")
    path = wr.table("branches", damon.branches_csv(cfg.scales))
    wr.table("events", damon.events_csv())
    wr.plot("branches", _gp_header("critical branches") +
            f"set xlabel 'x'\nset ylabel 'y'\nset zlabel 's'\n"
            f"splot '{path.name}' using 3:4:1 with points pt 7 ps 0.4\n")
    return EXIT_OK


def _field_fn(cfg: RunConfig) -> Polynomial:
    return cfg.function if cfg.function is not None else presets()[cfg.preset].function


def cmd_sections(cfg: RunConfig, wr: Writer) -> int:
    window = cfg.window or (-0.5, -0.5, 0.5, 0.5)
    h = cfg.h or 1 / 32
    fn = _field_fn(cfg)
    index = []
    median_rows = []
    xs = np.arange(window[0], window[2] + 0.5 * h, h)
    for i, s in enumerate(_scales(cfg)):
        fld = scale_space.sample(fn, window, h, s=s)
        X, Y = fld.mesh()
        rows = [[_g(x), _g(y), _g(z)] for x, y, z in zip(X.ravel(), Y.ravel(), fld.values.ravel())]
        path = wr.table(f"surface_{i:02d}", _table(["x", "y", "z"], rows))
        index.append({"file": path.name, "s": float(s), "s_exact": str(Fraction(s)) if isinstance(s, Fraction) else None})
        ev = fn.substitute_scale(s).to_numpy()
        pts = [(float(x), float(ev(x, 0.0))) for x in xs]
        if fn == damon.F:
            # critical points on the axis join the samples so their values appear exactly
            on_axis = [cp.x for cp in damon.critical_points(s) if cp.y == 0 and window[0] <= cp.x <= window[2]]
            pts = sorted(set(pts) | set(damon.median_section(s, on_axis)))
        median_rows += [[_g(s), _g(x), _g(z)] for x, z in pts]
        wr.plot(f"surface_{i:02d}", _gp_header(f"f at s = {float(s):.6g}") +
                f"set dgrid3d {fld.dims[1]},{fld.dims[0]}\nsplot '{path.name}' using 1:2:3 with lines\n")
    path = wr.table("median", _table(["s", "x", "z"], median_rows))
    wr.json("sections", {"window": list(window), "h": h, "surfaces": index})
    wr.plot("median", _gp_header("median sections y = 0") + f"plot '{path.name}' using 2:3 with lines\n")
    return EXIT_OK


def _auto_levels(fld: scale_space.GridField, s, fn: Polynomial) -> list[float]:
    qs = np.quantile(fld.values, np.linspace(0.05, 0.95, 13))
    if fn == damon.F:
        crit = [float(z) for z in damon.critical_values(s).values()]
    else:
        crit = [cp.z for cp in scale_space.detect(fld)] if min(fld.dims) >= 8 else []
    return sorted(set(float(q) for q in qs) | set(crit))


def cmd_levelsets(cfg: RunConfig, wr: Writer) -> int:
    window = cfg.window or (-0.5, -0.5, 0.5, 0.5)
    h = cfg.h or 1 / 64
    fn = _field_fn(cfg)
    for i, s in enumerate(_scales(cfg)):
        fld = scale_space.sample(fn, window, h, s=s)
        levels = cfg.levels if cfg.levels is not None else _auto_levels(fld, s, fn)
        rows = []
        for pid, pl in enumerate(scale_space.level_sets(fld, levels)):
            rows += [[pid, _g(pl.level), int(pl.closed), _g(x), _g(y)] for x, y in pl.points]
        lpath = wr.table(f"levels_{i:02d}", _table(["polyline", "level", "closed", "x", "y"], rows))
        X, Y, GX, GY = scale_space.gradient_vectors(fld)
        grows = [[_g(a), _g(b), _g(c), _g(d)] for a, b, c, d in zip(X.ravel(), Y.ravel(), GX.ravel(), GY.ravel())]
        gpath = wr.table(f"gradient_{i:02d}", _table(["x", "y", "gx", "gy"], grows))
        wr.plot(f"levels_{i:02d}", _gp_header(f"level sets and gradient at s = {float(s):.6g}") +
                f"plot '{lpath.name}' using 4:5 with lines, '{gpath.name}' every 4 using 1:2:($3/50):($4/50) with vectors\n")
    return EXIT_OK


def cmd_track(cfg: RunConfig, wr: Writer) -> int:
    pre = presets()[cfg.preset]
    fn = _field_fn(cfg)
    window = cfg.window or pre.window
    h = cfg.h or pre.h
    ladder = cfg.ladder or pre.ladder
    tcfg = scale_space.TrackConfig()
    initial = scale_space.sample(fn, window, h, s=ladder[0])
    trajs = scale_space.track(initial, ladder, tcfg)
    events = scale_space.find_events(trajs, refine=cfg.refine)
    tpath = wr.table("trajectories", scale_space.trajectories_csv(trajs))
    wr.table("track_events", scale_space.events_csv(events))
    run = trajs[0].run if trajs else None
    census = run.census if run else []
    summary = {
        "preset": cfg.preset,
        "census": [{"s": s, "count": c} for s, c in zip(ladder, census)],
        "trajectories": [{"id": t.id, "start": t.start_status, "end": t.end_status,
                          "s_first": t.points[0][1].s, "s_last": t.points[-1][1].s} for t in trajs],
        "events": [{"kind": e.kind, "s": e.s_estimate, "s_lo": e.s_lo, "s_hi": e.s_hi,
                    "x": e.location[0], "y": e.location[1], "participants": list(e.participants)}
                   for e in events],
    }
    wr.json("summary", summary)
    _atomic_write(cfg.out / "manifest.json", scale_space.run_manifest(window, h, ladder, tcfg))
    wr.plot("trajectories", _gp_header("critical point trajectories") +
            f"splot '{tpath.name}' using 3:4:2 with points pt 7 ps 0.3\n")
    for e in events:
        print(f"{e.kind} at s = {e.s_estimate:.7g} near ({e.location[0]:.6g}, {e.location[1]:.6g})")
    if not events:
        print("no events")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verification

def _check(report, name, ok, detail=""):
    report.append({"name": name, "passed": bool(ok), "detail": detail})


def _sample_params(fid, n, rng):
    def rat():
        return Fraction(int(rng.integers(1, 20)) * int(rng.choice([-1, 1])), int(rng.integers(1, 10)))

    if fid in ("F2", "F7"):
        a = [rat() for _ in range(n - 1)]
        return a + [-sum(a)] if sum(a) != 0 else None
    if fid == "F6":
        a = [rat() for _ in range(n)]
        return a if sum(a) != 0 else None
    if fid in ("F8", "F9"):
        a = [rat() for _ in range(n - 1)]
        return a if sum(a) != 0 else None
    return []


def verify_report(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    report: list[dict] = []
    res = heat_residual(damon.F)
    _check(report, "heat residual of the worked example", res.is_zero(), f"residual = {res}")

    forms = []
    for n in (2, 3):
        for entry in heat_forms.list_catalog(n):
            fid = entry["id"]
            if fid == "F7":
                continue
            a = None
            while a is None:
                a = _sample_params(fid, n, rng)
            forms.append(heat_forms.NormalForm(fid, n, tuple(a), sign=int(rng.choice([-1, 1]))))
    for nf in forms:
        rec = heat_forms.verification_report(nf)
        _check(report, f"normal form {nf.id} (n={nf.n})", rec["is_solution"], f"residual = {rec['residual']}")
    for sign in (1, -1):
        printed = heat_forms.verification_report(heat_forms.f7_preset(False, 1, sign))
        expected = str(-sign * Fraction(1, 2) * (Polynomial.var(2, 0) ** 2 + Polynomial.var(2, 1) ** 2))
        _check(report, f"F7 printed coefficient flagged (sign {sign:+d})",
               not printed["is_solution"] and printed["residual"] == expected,
               f"residual = {printed['residual']}")
        fixed = heat_forms.verification_report(heat_forms.f7_preset(True, 1, sign))
        _check(report, f"F7 corrected coefficient (sign {sign:+d})", fixed["is_solution"],
               f"residual = {fixed['residual']}")

    sc = damon.eigen_signchange_scales()
    _check(report, "eigenvalue sign changes at 1/72", all(s == damon.S_MERGE for s in sc),
           ", ".join(str(s) for s in sc))
    zs = damon.critical_values(damon.S_MERGE)
    z1 = damon.critical_value(damon.Branch.PC1_PLUS, damon.S_MERGE)
    z2 = damon.critical_value(damon.Branch.PC2_PLUS, damon.S_MERGE)
    _check(report, "critical values coincide at the merge", z1 == z2 == Fraction(1, 54),
           f"z1 = {z1}, z2+ = {z2}, values = {sorted(str(v) for v in zs.values())}")

    worst = 0.0
    for s in np.linspace(-1 / 216, 1 / 72 - 1e-4, 25):
        for b in damon.BRANCHES:
            if not b.is_real(float(s)) or (b.label in (damon.Branch.PC2_PLUS, damon.Branch.PC2_MINUS) and s <= 0):
                continue
            lam = np.array(damon.closed_form_eigenvalues(b.label, float(s)))
            x, y = b.position(float(s))
            num = np.linalg.eigvalsh(damon.hessian_at(x, y))
            worst = max(worst, float(np.max(np.abs(np.sort(lam) - num))))
    _check(report, "closed-form eigenvalues match numeric", worst <= 1e-10, f"max error = {worst:.3g}")

    worst = 0.0
    for _ in range(25):
        p = unfolding.UnfoldingParams(*(float(v) for v in rng.uniform(-1, 1, 3)))
        a = unfolding.critical_points_g(p)
        b = unfolding.critical_points_newton(p)
        if len(a) != len(b):
            worst = math.inf
            break
        for pa, pb in zip(a, b):
            worst = max(worst, math.hypot(pa.x - pb.x, pa.y - pb.y))
    _check(report, "unfolding quartic vs Newton multistart", worst <= 1e-10, f"max deviation = {worst:.3g}")

    curve = unfolding.discriminant_section(0.5)
    ref = [(0.0, 0.0), (3 / 32, -math.sqrt(6) / 32), (3 / 32, math.sqrt(6) / 32)]
    got = curve.cusps
    cusp_err = max(min(math.hypot(a[0] - b[0], a[1] - b[1]) for a in got) for b in ref) if len(got) == 3 else math.inf
    _check(report, "discriminant has three cusps", len(got) == 3 and cusp_err <= 1e-9, f"cusps = {got}")
    flips = unfolding.inside_transitions(-1 / 72, 1 / 36)
    ok = len(flips) == 2 and flips[0][0] <= 0 <= flips[0][1] and flips[1][0] <= 1 / 72 <= flips[1][1]
    _check(report, "embedding line census flips at 0 and 1/72", ok, f"brackets = {flips}")
    return report


def cmd_verify(cfg: RunConfig, wr: Writer) -> int:
    seed = int(os.environ.get("UMBILIC_SEED", "0"))
    report = verify_report(seed)
    passed = all(r["passed"] for r in report)
    wr.json("verify", {"passed": passed, "checks": report})
    for r in report:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_unfolding(cfg: RunConfig, wr: Writer) -> int:
    w = 0.5
    if cfg.sub == "discriminant":
        curve = unfolding.discriminant_section(w, 512)
        path = wr.table("discriminant", unfolding.discriminant_csv(curve))
        wr.plot("discriminant", _gp_header("degeneracy locus, w = 1/2") +
                f"plot '{path.name}' using 1:2 with lines, '' using ($5 ? $1 : 1/0):2 with points pt 7\n")
    elif cfg.sub == "cvgraph":
        n = 64
        records = unfolding.critical_value_graph(w, (-0.05, 0.15), (-0.05, 0.05), n)
        path = wr.table("cvgraph", unfolding.cvgraph_csv(records))
        wr.plot("cvgraph", _gp_header("critical value graph, w = 1/2") +
                f"splot '{path.name}' using 1:2:3 with points pt 7 ps 0.2\n")
    elif cfg.sub == "line":
        scales = cfg.scales or [float(s) for s in np.linspace(-1 / 72, 1 / 36, 121)]
        path = wr.table("line", unfolding.line_csv(scales))
        wr.plot("line", _gp_header("embedding line") + f"plot '{path.name}' using 2:4 with steps\n")
    else:
        raise ConfigError(f"unknown unfolding subcommand {cfg.sub!r}")
    return EXIT_OK


COMMANDS = {
    "branches": cmd_branches,
    "sections": cmd_sections,
    "levelsets": cmd_levelsets,
    "track": cmd_track,
    "verify": cmd_verify,
    "unfolding": cmd_unfolding,
}


# ---------------------------------------------------------------------------
# argument parsing

def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {len(vals)} in {text!r}")
    return vals


def _scale(text: str):
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad scale {text!r}") from exc


def parse_ladder(text: str, mode: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--ladder expects s0:s1:n")
    s0, s1 = float(_scale(parts[0])), float(_scale(parts[1]))
    try:
        n = int(parts[2])
    except ValueError as exc:
        raise ConfigError("ladder count must be an integer") from exc
    if n < 2 or s1 <= s0:
        raise ConfigError("ladder needs n >= 2 and s1 > s0")
    if mode == "geometric":
        if s0 <= 0:
            raise ConfigError("a geometric ladder needs s0 > 0")
        return [float(s) for s in np.geomspace(s0, s1, n)]
    return [float(s) for s in np.linspace(s0, s1, n)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--emit-plot", action="store_true", help="write gnuplot scripts next to the data")
    common.add_argument("--window", help="x0,y0,x1,y1")
    common.add_argument("--h", type=str, help="grid spacing")
    common.add_argument("--s", action="append", help="scale value (repeatable, p/q allowed)")
    common.add_argument("--s-min")
    common.add_argument("--s-max")
    common.add_argument("--steps", type=int)
    common.add_argument("--ladder", help="s0:s1:n")
    common.add_argument("--ladder-mode", choices=("linear", "geometric"), default="linear")
    common.add_argument("--levels", help="comma separated contour levels")
    common.add_argument("--preset", choices=("damon", "bowl", "creation"), default="damon")
    common.add_argument("--function", help="polynomial in x, y, s overriding the preset field")
    common.add_argument("--refine", action="store_true", help="bisect event scales (track)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="umbilic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("branches", "sections", "levelsets", "track", "verify"):
        sub.add_parser(name, parents=[common])
    u = sub.add_parser("unfolding", parents=[common])
    u.add_argument("sub", choices=("discriminant", "cvgraph", "line"))
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, out=Path(ns.out), fmt=ns.fmt, emit_plot=ns.emit_plot,
                    preset=ns.preset, sub=getattr(ns, "sub", None), refine=ns.refine)
    if ns.window:
        w = _floats(ns.window, 4)
        if w[2] <= w[0] or w[3] <= w[1]:
            raise ConfigError("window must satisfy x0 < x1 and y0 < y1")
        cfg.window = tuple(w)
    if ns.h is not None:
        cfg.h = _floats(ns.h, 1)[0]
        if not cfg.h > 0:
            raise ConfigError("--h must be positive")
    if ns.s:
        cfg.scales = [_scale(t) for t in ns.s]
    elif ns.s_min is not None or ns.s_max is not None or ns.steps is not None:
        if ns.s_min is None or ns.steps is None:
            raise ConfigError("--s-min and --steps are required for a scale range")
        if ns.steps < 1:
            raise ConfigError("--steps must be at least 1")
        lo = float(_scale(ns.s_min))
        hi = float(_scale(ns.s_max)) if ns.s_max is not None else lo
        if ns.steps > 1 and hi <= lo:
            raise ConfigError("--s-max must exceed --s-min")
        cfg.scales = [float(s) for s in np.linspace(lo, hi, ns.steps)] if ns.steps > 1 else [_scale(ns.s_min)]
    if ns.ladder:
        cfg.ladder = parse_ladder(ns.ladder, ns.ladder_mode)
        if cfg.scales:
            s0 = float(cfg.scales[0])
            if s0 < cfg.ladder[0]:
                cfg.ladder = [s0] + cfg.ladder
    if ns.levels:
        cfg.levels = _floats(ns.levels)
    if ns.function:
        try:
            cfg.function = parse(ns.function, n_spatial=2)
        except ValueError as exc:
            raise ConfigError(f"bad --function: {exc}") from exc
    if cfg.out.exists() and not cfg.out.is_dir():
        raise ConfigError(f"{cfg.out} is not a directory")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        cfg.out.mkdir(parents=True, exist_ok=True)
        if not os.access(cfg.out, os.W_OK):
            raise ConfigError(f"{cfg.out} is not writable")
        return COMMANDS[cfg.command](cfg, Writer(cfg))
    except ConfigError as exc:
        print(f"umbilic: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"umbilic: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
