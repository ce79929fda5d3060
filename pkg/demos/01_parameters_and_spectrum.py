"""Parameters, regimes and the linearized spectrum.

Walks through one admissible weight pair: the derived exponents, the
spectral gap selection, and a finite-difference check of the two discrete
eigenvalues against their closed forms.
"""
from wfdlab.grid import make_grid
from wfdlab.params import classify_regime, derive, spectral_gap, validate
from wfdlab.spectrum import compare_to_formulas

p = validate(5, 0.9, 0.2, 1)
dv = derive(p)
print(f"d={p.d}, m={p.m}, beta={p.beta}, gamma={p.gamma}")
print(f"alpha={dv.alpha:.4f}  delta={dv.delta:.4f}  n={dv.n:.4f}  eta={dv.eta:.6f}")
print(f"thresholds: m_star={dv.m_star:.4f} < m_c={dv.m_c:.4f} < m_1={dv.m_1:.4f}")

print("\nclosed-form eigenvalues")
print(f"  lambda_ess = {dv.lambda_ess:.6f}")
print(f"  lambda_01  = {dv.lambda_01:.6f}   (first non-radial)")
print(f"  lambda_10  = {dv.lambda_10:.6f}   (first radial)")

gap = spectral_gap(p)
print(f"\nselected gap: {gap.lambda_:.6f} on branch {gap.branch}")
print(f"times alpha^2: {gap.lambda_physical:.6f}")
print("regime tags:", ", ".join(classify_regime(p).tags()))

# The truncated problem on [1e-4, 1e4] with a log grid; doubling N should
# roughly quarter the error.
for N in (1000, 2000):
    rep = compare_to_formulas(p, 1.0, make_grid(p, 1e-4, 1e4, N), sectors=(0, 1), k=3)
    for ell in (0, 1):
        print(f"N={N} sector {ell}: lowest {rep.eigenvalues[ell][0]:.6f}, "
              f"prediction {rep.predictions[ell]:.6f}, rel error {rep.rel_errors[ell]:.2e}")

# Without weights the l=1 eigenvalue coincides with lambda_10 exactly when
# delta = d; this is the translation mode.
q = validate(5, 0.8, 0, 0, allow_boundary=True)
dq = derive(q)
print(f"\nunweighted, delta=d: lambda_01={dq.lambda_01:.6f}, lambda_10={dq.lambda_10:.6f}")
