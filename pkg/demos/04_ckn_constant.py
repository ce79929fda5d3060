"""The radial CKN quotient is maximized by powers of the Barenblatt profile."""
import numpy as np

from wfdlab.functionals import ckn_quotient, ckn_star_constant
from wfdlab.grid import RadialField, make_grid
from wfdlab.params import derive, validate
from wfdlab.profiles import BarenblattSpec

p = validate(5, 0.9, 0.2, 1)
pexp = 1 / (2 * p.m - 1)
print(f"p = {pexp:.4f} (p_star = {derive(p).p_star:.4f})")
print(f"quotient at w = B^(m-1/2), exact derivative: {ckn_star_constant(p, pexp):.8f}")

# Same quotient with grid gradients, then for bumped competitors; the
# optimizer should give the largest value.
g = make_grid(p, 1e-6, 1e6, 4000)
w0 = BarenblattSpec(1.0, p).values(g.r) ** (p.m - 0.5)
for eps in (0.0, 0.05, 0.2):
    w = RadialField(w0 * (1 + eps * np.exp(-np.log(g.r) ** 2)), g)
    print(f"bump eps={eps:<4}: quotient {ckn_quotient(w, pexp):.8f}")
