"""Random sandwiched test data."""
import numpy as np

from wfdlab.grid import RadialField


def random_sandwiched(rng, spec, g, amp=0.3, n_bumps=3):
    """Profile times 1 + (random bumps)/(1 + r^k).

    The damping keeps the pressure gap bounded at infinity, so the field is
    sandwiched and the profile tail stays valid beyond the grid.
    """
    logr = np.log(g.r)
    pert = np.zeros_like(logr)
    for _ in range(n_bumps):
        c, w, a = rng.uniform(-3, 3), rng.uniform(0.3, 1.5), rng.uniform(-1, 1)
        pert += a * np.exp(-((logr - c) / w) ** 2)
    pert /= 1 + g.r ** spec.params.k
    pert *= amp / max(1.0, np.abs(pert).max())
    return RadialField(spec.values(g.r) * (1 + pert), g, spec.tail())
