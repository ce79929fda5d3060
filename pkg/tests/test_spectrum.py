from fractions import Fraction

import numpy as np
import pytest

from wfdlab.errors import DegenerateGap, GridMismatch, SpectralGapCollapse
from wfdlab.functionals import linearized_fisher, linearized_free_energy
from wfdlab.grid import RadialField, make_grid
from wfdlab.params import derive, validate
from wfdlab.profiles import BarenblattSpec
from wfdlab.spectrum import assemble_sector, compare_to_formulas, lowest_eigenvalues

EXA = validate(5, 0.9, 0.2, 1)
L10, L01 = 80 / 3, 34.71037077155802


@pytest.fixture(scope="module")
def grid2000():
    return make_grid(EXA, 1e-4, 1e4, 2000)


def test_operator_structure(grid2000):
    op = assemble_sector(EXA, 1.0, grid2000, 0)
    K = op.stiffness_dense()[:50, :50]
    assert np.allclose(K, K.T)
    assert np.all(op.mass > 0)
    # constants are in the kernel of the radial stiffness
    assert np.max(np.abs(op.apply(np.ones(grid2000.N)))) < 1e-12 * np.max(op.diag)
    assert op.constraint is not None
    assert assemble_sector(EXA, 1.0, grid2000, 1).constraint is None
    assert op.alpha2 == pytest.approx(0.36)


def test_eigenvalues_nonnegative_and_sorted(grid2000):
    w = lowest_eigenvalues(assemble_sector(EXA, 1.0, grid2000, 0), 5, constrained=False)
    assert w[0] == pytest.approx(0, abs=1e-10)
    assert np.all(np.diff(w) > 0) and np.all(w >= -1e-10)


def test_radial_ground_state_matches_closed_form(grid2000):
    w = lowest_eigenvalues(assemble_sector(EXA, 1.0, grid2000, 0), 3)
    assert abs(w[0] - L10) / L10 < 1e-4


def test_first_harmonic_matches_closed_form(grid2000):
    w = lowest_eigenvalues(assemble_sector(EXA, 1.0, grid2000, 1), 3)
    assert abs(w[0] - L01) / L01 < 1e-4


def test_errors_shrink_under_refinement():
    errs = []
    for N in (1000, 2000, 4000):
        g = make_grid(EXA, 1e-4, 1e4, N)
        w = lowest_eigenvalues(assemble_sector(EXA, 1.0, g, 0), 1)[0]
        errs.append(abs(w - L10) / L10)
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] > 3


def test_independent_of_profile_constant(grid2000):
    # B_C(r) is a rescaling of B_1, so the spectrum does not depend on C
    # up to the shift of the truncated domain
    w1 = lowest_eigenvalues(assemble_sector(EXA, 1.0, grid2000, 0), 1)[0]
    w2 = lowest_eigenvalues(assemble_sector(EXA, 2.0, grid2000, 0), 1)[0]
    assert w2 == pytest.approx(w1, rel=1e-4)


def test_classical_case():
    p = validate(5, 0.8, 0, 0, allow_boundary=True)
    g = make_grid(p, 1e-4, 1e4, 2000)
    rep = compare_to_formulas(p, 1.0, g)
    assert rep.eigenvalues[0][0] == pytest.approx(10, rel=1e-3)
    assert rep.eigenvalues[1][0] == pytest.approx(10, rel=1e-3)
    assert rep.alpha2 == 1.0


def test_sector_monotonicity(grid2000):
    ground = [lowest_eigenvalues(assemble_sector(EXA, 1.0, grid2000, ell), 1,
                                 constrained=False)[0] for ell in range(4)]
    assert ground[0] == pytest.approx(0, abs=1e-10)
    assert ground[1] < ground[2] < ground[3]


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_rayleigh_pairs_with_linearized_forms(ell, grid2000):
    spec = BarenblattSpec(1.0, EXA)
    op = assemble_sector(EXA, 1.0, grid2000, ell)
    logr = np.log(grid2000.r)
    f = np.exp(-(logr - 0.4) ** 2) * (1 + 0.3 * logr)
    fld = RadialField(f, grid2000)
    ratio = linearized_fisher(fld, spec, ell) / (2 * (1 - EXA.m) * linearized_free_energy(fld, spec))
    assert op.alpha2 * op.rayleigh(f) == pytest.approx(ratio, rel=1e-12)


def test_ground_eigenfunction_quotient(grid2000):
    spec = BarenblattSpec(1.0, EXA)
    op = assemble_sector(EXA, 1.0, grid2000, 0)
    w, f = lowest_eigenvalues(op, 1, return_vectors=True)
    fld = RadialField(f[:, 0], grid2000)
    q = linearized_fisher(fld, spec) / (2 * (1 - EXA.m) * linearized_free_energy(fld, spec))
    assert q / op.alpha2 == pytest.approx(w[0], rel=0.005)
    # the constrained mode has zero weighted mean
    assert abs(op.mass @ f[:, 0]) < 1e-8 * np.sqrt(op.mass @ f[:, 0] ** 2 * op.mass.sum())


def test_report(grid2000):
    rep = compare_to_formulas(EXA, 1.0, grid2000)
    assert rep.predictions == {0: pytest.approx(L10), 1: pytest.approx(L01)}
    assert rep.rel_errors[0] < 0.01 and rep.rel_errors[1] < 0.01
    assert rep.reliable[0][0] and rep.reliable[1][0]
    assert rep.hardy_poincare[0][0] == pytest.approx(0.36 * rep.eigenvalues[0][0])
    rows = rep.rows()
    assert len(rows) == 6 and rows[0][:2] == (0, 0)


def test_gap_collapse_flagged():
    p = validate(5, 0.65, 0.2, 1)  # below the discrete-branch threshold
    g = make_grid(p, 1e-3, 1e3, 400)
    with pytest.warns(SpectralGapCollapse):
        rep = compare_to_formulas(p, 1.0, g)
    assert not rep.reliable[0][0] and not rep.reliable[1][0]
    assert rep.lambda_ess == pytest.approx(derive(p).lambda_ess)


def test_assembly_errors(grid2000):
    with pytest.raises(GridMismatch):
        assemble_sector(validate(5, 0.8, 0.2, 1), 1.0, grid2000, 0)
    with pytest.raises(ValueError):
        assemble_sector(EXA, 1.0, grid2000, -1)
    p = validate(5, Fraction(4, 7), 0.2, 1)
    with pytest.raises(DegenerateGap):
        compare_to_formulas(p, 1.0, make_grid(p, N=100))
