"""Heat-equation normal forms: build each catalogue entry and check it solves u_s = Laplacian u."""
from umbilic import heat_forms as hf

for n in (1, 2, 3):
    print(f"n = {n}:", " ".join(e["id"] for e in hf.list_catalog(n)))

examples = [
    hf.NormalForm("F1", 2, sign=1),
    hf.NormalForm("F2", 3, (1, 2, -3)),
    hf.NormalForm("F4", 3, tail=hf.NormalForm("F6", 2, (1, 2))),
    hf.NormalForm("F8", 2, (3,)),
]
for nf in examples:
    rec = hf.verification_report(nf)
    print(f"{rec['id']} n={rec['n']}: {hf.build(nf)}   residual {rec['residual']}")

# the quartic form only solves the heat equation with the corrected coefficient
for corrected in (False, True):
    rec = hf.verification_report(hf.f7_preset(corrected))
    print(f"F7 with q = {rec['q']}: residual {rec['residual']}, solution: {rec['is_solution']}")
