"""The cubic family f = x^3 - 6xy^2 + y^2 - 6sx + 2s and its critical branches.

Run with ``python demos/01_worked_example.py``.
"""
from fractions import Fraction

from umbilic import damon
from umbilic.poly import heat_residual, to_string

print("f =", to_string(damon.F))
print("f_s - Laplacian f =", heat_residual(damon.F) or 0)

# four critical points below the merge scale, two above it
for s in (Fraction(1, 144), Fraction(1, 36)):
    print(f"\ns = {s}")
    for cp in damon.critical_points(s):
        lam = ", ".join(f"{v:+.4f}" for v in cp.eigenvalues)
        print(f"  {cp.branch.value:9s} ({cp.x:+.5f}, {cp.y:+.5f})  z={cp.z:.6f}  lambda=({lam})  {cp.morse.value}")

# at s = 1/72 the two saddles on x = 1/6 meet the minimum and leave a saddle behind
m = damon.S_MERGE
print(f"\nmerge scale {m}: pc1 value {damon.critical_value(damon.Branch.PC1_PLUS, m)},"
      f" pc2+ value {damon.critical_value(damon.Branch.PC2_PLUS, m)}")
print("scales where an eigenvalue crosses zero:", [str(s) for s in damon.eigen_signchange_scales()])
for kind, s, loc in damon.bifurcation_events():
    print(f"{kind:12s} s={s}  at ({loc[0]}, {loc[1]})")
