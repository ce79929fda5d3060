import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fields import random_sandwiched
from wfdlab.errors import (
    InconsistentPair, MassMismatch, MomentDiverges, NegativeField, NonpositiveField,
    OutsideValidRange, SupercriticalExponent,
)
from wfdlab.functionals import (
    best_match_entropy, best_match_entropy_two_term, best_match_fisher, best_match_mu,
    bregman_power, ckn_quotient, ckn_star_constant, ckp_lower_bound, evaluate_all,
    fisher_information, free_energy, linearized_fisher, linearized_free_energy, mass,
    relative_error_norms,
)
from wfdlab.grid import RadialField, make_grid
from wfdlab.params import validate
from wfdlab.profiles import (
    BarenblattSpec, barenblatt_eval, barenblatt_mass, rescale_mu, sandwich_constants,
)

EXA = validate(5, 0.9, 0.2, 1)
SPEC = BarenblattSpec(1.0, EXA)


@pytest.fixture(scope="module")
def grid():
    return make_grid(EXA, 1e-5, 1e4, 2000)


def mass_matched(rng, g):
    """Random sandwiched field together with the profile of the same mass."""
    v = random_sandwiched(rng, SPEC, g)
    C = sandwich_constants(v).C
    return v, BarenblattSpec(C, EXA)


# --- Bregman pieces ---------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.floats(-0.999, 50), st.floats(0.01, 0.99))
def test_bregman_power_sign(e, m):
    # concave power: (1+e)^m - 1 - m e <= 0
    assert bregman_power(e, m) <= 1e-300


def test_bregman_series_is_continuous():
    for m in (0.3, 0.9):
        for e in (9.99e-4, -9.99e-4):
            exact = float(mp.power(1 + mp.mpf(e), m) - 1 - m * mp.mpf(e))
            assert float(bregman_power(e, m)) == pytest.approx(exact, rel=1e-10)


# --- free energy and Fisher information -------------------------------------

def test_free_energy_at_profile(grid):
    assert free_energy(barenblatt_eval(SPEC, grid), SPEC) == 0.0
    assert fisher_information(barenblatt_eval(SPEC, grid), SPEC) == pytest.approx(0.0, abs=1e-25)


def test_free_energy_of_shifted_profile_matches_quadrature():
    g = make_grid(EXA, 1e-6, 1e5, 3000)
    v = barenblatt_eval(BarenblattSpec(1.2, EXA), g)
    m = mp.mpf("0.9")
    k = mp.mpf("1.2")

    def f(r):
        B, V = (1 + r ** k) ** -10, (mp.mpf("1.2") + r ** k) ** -10
        return (V ** m - B ** m - m * B ** (m - 1) * (V - B)) / (m - 1)
    ref = float(oracles.weighted_integral(5, 4, f, mp.mpf("1e-6"), mp.mpf("1e5")))
    assert free_energy(v, SPEC) > 0
    assert free_energy(v, SPEC) == pytest.approx(ref, rel=1e-6)
    # constant pressure gap: zero Fisher information
    assert fisher_information(v, SPEC) == pytest.approx(0.0, abs=1e-25)


def test_sign_errors(grid):
    vals = SPEC.values(grid.r).copy()
    vals[5] = -1e-3
    with pytest.raises(NegativeField):
        free_energy(RadialField(vals, grid), SPEC)
    vals[5] = 0.0
    with pytest.raises(NonpositiveField):
        fisher_information(RadialField(vals, grid), SPEC)


def test_fisher_methods_converge_together():
    rng = np.random.default_rng(3)
    vals = {}
    for N in (500, 1000, 2000, 4000):
        g = make_grid(EXA, 1e-4, 1e4, N)
        logr = np.log(g.r)
        v = RadialField(SPEC.values(g.r) * (1 + 0.2 * np.exp(-(logr - 0.5) ** 2)), g, SPEC.tail())
        vals[N] = (fisher_information(v, SPEC), fisher_information(v, SPEC, "nodal"))
    face = [vals[N][0] for N in (500, 1000, 2000, 4000)]
    e1, e2 = abs(face[0] - face[2]), abs(face[1] - face[2])
    assert e1 / e2 > 3.0  # second order
    assert vals[4000][1] == pytest.approx(vals[4000][0], rel=1e-4)
    with pytest.raises(ValueError):
        fisher_information(v, SPEC, "spline")


@pytest.mark.parametrize("seed", range(10))
def test_entropy_production_inequality(seed, grid):
    rng = np.random.default_rng(seed)
    v, spec = mass_matched(rng, grid)
    rep = evaluate_all(v, spec)
    assert rep.ep_ratio >= 1.44


# --- best matching ----------------------------------------------------------

def test_best_match_at_profile(grid):
    G, mu = best_match_entropy(barenblatt_eval(SPEC, grid), SPEC)
    assert mu == pytest.approx(1.0, abs=1e-12)
    assert G == pytest.approx(0.0, abs=1e-25)


@pytest.mark.parametrize("mu", [1.5, 2.0, 0.7])
def test_best_match_recovers_scale(mu, grid):
    v = rescale_mu(SPEC, mu, grid)
    assert best_match_mu(v, SPEC) == pytest.approx(mu, rel=1e-10)
    G, mu_star = best_match_entropy(v, SPEC)
    assert G <= 1e-8 and abs(G) < 1e-20


def test_best_match_needs_finite_moment(grid):
    p = validate(5, 0.75, 0.2, 1)
    spec = BarenblattSpec(1.0, p)
    g = make_grid(p, N=200)
    with pytest.raises(MomentDiverges):
        best_match_mu(barenblatt_eval(spec, g), spec)
    with pytest.raises(MomentDiverges):
        ckp_lower_bound(barenblatt_eval(spec, g), 1.0, spec)


def test_mass_mismatch(grid):
    v = barenblatt_eval(BarenblattSpec(1.1, EXA), grid)
    with pytest.raises(MassMismatch):
        best_match_entropy(v, SPEC)


@pytest.mark.parametrize("seed", range(10))
def test_best_match_below_free_energy(seed, grid):
    v, spec = mass_matched(np.random.default_rng(100 + seed), grid)
    F = free_energy(v, spec)
    G, mu = best_match_entropy(v, spec)
    assert 0 <= G <= F * (1 + 1e-12)
    assert G < F  # mu_star differs from 1 for a generic bump
    assert best_match_entropy_two_term(v, spec) == pytest.approx(G, rel=1e-6, abs=1e-14)
    J = best_match_fisher(v, spec, mu)
    assert J >= 0


def test_ckp_zero_at_matched_profile(grid):
    assert ckp_lower_bound(rescale_mu(SPEC, 1.3, grid), 1.3, SPEC) == pytest.approx(0, abs=1e-30)


def test_ckp_bound_below_entropy_randomized(grid):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        v, spec = mass_matched(rng, grid)
        G, mu = best_match_entropy(v, spec)
        assert ckp_lower_bound(v, mu, spec) <= G


# --- linearized forms -------------------------------------------------------

def test_linearized_forms_of_constant(grid):
    one = RadialField(np.ones(grid.N), grid)
    assert linearized_fisher(one, SPEC) == 0.0
    B = SPEC.values(grid.r)
    assert linearized_free_energy(one, SPEC) == pytest.approx(
        0.5 * float(np.dot(grid.quad_gamma, B ** 1.1)))
    f = RadialField(np.exp(-grid.r), grid)
    assert linearized_free_energy(f.with_values(3 * f.values), SPEC) == pytest.approx(
        9 * linearized_free_energy(f, SPEC), rel=1e-15)


def test_quadratic_consistency(grid):
    eps = 1e-3
    logr = np.log(grid.r)
    f = RadialField(np.exp(-(logr - 0.3) ** 2), grid)
    B = SPEC.values(grid.r)
    v = RadialField(B * (1 + eps * B ** (1 - 0.9) * f.values), grid, SPEC.tail())
    F, I = free_energy(v, SPEC), fisher_information(v, SPEC)
    m = 0.9
    assert F / (m * eps ** 2 * linearized_free_energy(f, SPEC)) == pytest.approx(1, rel=0.01)
    # pressure gap is (m-1) eps f to first order, so I ~ (1-m) eps^2 I_lin
    assert I / ((1 - m) * eps ** 2 * linearized_fisher(f, SPEC)) == pytest.approx(1, rel=0.02)


# --- relative error norms ----------------------------------------------------

def test_relative_error_norms(grid):
    v = RadialField(1.05 * SPEC.values(grid.r), grid)
    out = relative_error_norms(v, SPEC, (math.inf, 11.0))
    assert out[math.inf] == pytest.approx(0.05, rel=1e-12)
    ones = float(np.dot(grid.quad_gamma, np.ones(grid.N))) ** (1 / 11)
    assert out[11.0] == pytest.approx(0.05 * ones, rel=1e-12)
    with pytest.warns(OutsideValidRange):
        relative_error_norms(v, SPEC, (2.0,))


def test_sup_norm_within_sandwich(grid):
    rng = np.random.default_rng(7)
    for _ in range(10):
        v, spec = mass_matched(rng, grid)
        sc = sandwich_constants(v, C=spec)
        sup = relative_error_norms(v, spec)[math.inf]
        assert sup <= max(sc.W2 - 1, 1 - sc.W1) * (1 + 1e-12)


# --- CKN -------------------------------------------------------------------

def test_ckn_constant():
    c1 = ckn_star_constant(EXA, 1.25)
    assert c1 > 0 and math.isfinite(c1)
    c2 = ckn_star_constant(EXA, 1.25, grid=make_grid(EXA, 1e-7, 1e7, 8000))
    assert c2 == pytest.approx(c1, rel=1e-5)
    assert ckn_star_constant(EXA, 1.25, C=3.0) == pytest.approx(c1, rel=1e-8)
    with pytest.raises(SupercriticalExponent):
        ckn_star_constant(validate(5, 0.8, 0.2, 1), 1.5)
    with pytest.raises(InconsistentPair):
        ckn_star_constant(EXA, 1.2)


def test_ckn_quotient_agrees_at_profile():
    g = make_grid(EXA, 1e-6, 1e6, 4000)
    w = RadialField(SPEC.values(g.r) ** 0.4, g)
    assert ckn_quotient(w, 1.25) == pytest.approx(ckn_star_constant(EXA, 1.25, grid=g), rel=1e-4)


def test_mass_includes_tail(grid):
    assert mass(barenblatt_eval(SPEC, grid)) == pytest.approx(barenblatt_mass(SPEC), rel=1e-12)
