"""The elliptic umbilic unfolding g = x^3 - 6xy^2 + w x^2 + u x + v y and the cubic family.

Shifting f to (1/6, 0) turns it into g with w = 1/2, u = 1/12 - 6s and
c = s + 1/216, so the scale parameter runs along a straight line in (u, c).
"""
from fractions import Fraction

from umbilic import damon, unfolding as uf
from umbilic.poly import recenter, to_string

shifted = recenter(damon.F, (Fraction(1, 6), 0, 0))
print("f(x + 1/6, y, s) =", to_string(shifted))
print("organizing centre:", to_string(uf.organizing_center()))

for u, v in ((1 / 24, 0.0), (0.05, 0.01), (1.0, 0.0)):
    pts = uf.critical_points_g(uf.UnfoldingParams(0.5, u, v))
    print(f"w=1/2 u={u:g} v={v:g}: {len(pts)} critical points",
          [f"({p.x:+.4f},{p.y:+.4f}) {p.morse.value}" for p in pts])

curve = uf.discriminant_section(0.5, 512)
g_res, det_res = curve.residuals()
print(f"degeneracy locus at w=1/2: {len(curve.samples)} samples, max |grad g| {g_res:.1e}, max |det H| {det_res:.1e}")
print("cusps:", [f"({u:.5f}, {v:+.5f})" for u, v in curve.cusps])

print("embedding line census changes in:", [f"[{a:.3g}, {b:.3g}]" for a, b in uf.inside_transitions(-1 / 72, 1 / 36)])
