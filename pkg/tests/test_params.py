import math
import warnings
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from wfdlab.errors import (
    ComplexRoot, DegenerateGap, DimensionTooSmall, ExponentBelowRange,
    ExponentOutOfRange, NearThresholdWarning, WeightConstraintViolated, ConfigError,
)
from wfdlab.params import (
    Derived, as_fraction, beta_fs, classify_regime, compare_m, derive,
    params_from_mapping, spectral_formulas, spectral_gap, symmetry_class,
    validate, vartheta_ckn, zeta,
)

EXA = (5, 0.9, 0.2, 1)
CLASSICAL = (5, 0.8, 0, 0)
BREAKING = (5, 0.9, -1, -1)


@st.composite
def admissible(draw, boundary=False):
    d = draw(st.integers(2, 8))
    gamma = draw(st.floats(-4.0, d - 0.05))
    lo, hi = gamma - 2, (d - 2) * gamma / d
    assume(hi - lo > 1e-3)
    beta = draw(st.floats(lo + 1e-4 * (hi - lo), hi - 1e-4 * (hi - lo)))
    m = draw(st.floats(0.02, 0.98))
    return validate(d, m, beta, gamma)


# --- validate ------------------------------------------------------------

def test_validate_accepts_reference_sets():
    p = validate(*EXA)
    assert (p.d, p.m, p.beta, p.gamma) == (5, 0.9, 0.2, 1.0)
    assert not p.on_boundary


def test_validate_names_violated_upper_weight_bound():
    with pytest.raises(WeightConstraintViolated) as exc:
        validate(3, 0.5, 0.2, 0.5)
    assert "(d-2)*gamma/d" in exc.value.inequality
    assert exc.value.lhs == 0.2
    assert exc.value.rhs == pytest.approx(1 / 6)


def test_boundary_needs_flag():
    with pytest.raises(WeightConstraintViolated):
        validate(*CLASSICAL)
    p = validate(*CLASSICAL, allow_boundary=True)
    assert p.on_boundary and p.allow_boundary


@pytest.mark.parametrize("args,err", [
    ((1, 0.5, 0, 0), DimensionTooSmall),
    ((2.5, 0.5, 0, 0), DimensionTooSmall),
    ((5, 1.0, 0.2, 1), ExponentOutOfRange),
    ((5, 0.0, 0.2, 1), ExponentOutOfRange),
    ((5, 0.9, 0.2, 5), WeightConstraintViolated),
    ((5, 0.9, -1.5, 1), WeightConstraintViolated),
])
def test_validate_rejections(args, err):
    with pytest.raises(err):
        validate(*args)


def test_decimal_inputs_are_exact():
    assert as_fraction(0.9) == Fraction(9, 10)
    p = validate(5, 0.7, 0.2, 1)
    assert compare_m(p, "m_c") == 0
    assert derive(p).rho is None


def test_near_threshold_warns():
    p = validate(5, 0.7 + 1e-14, 0.2, 1)
    with pytest.warns(NearThresholdWarning):
        assert compare_m(p, "m_c") == 0


# --- derive ----------------------------------------------------------------

def test_derive_example_values():
    dv = derive(validate(*EXA))
    assert dv.alpha == pytest.approx(0.6, rel=1e-15)
    assert dv.delta == pytest.approx(10, rel=1e-15)
    assert dv.n == pytest.approx(20 / 3, rel=1e-15)
    assert dv.eta == pytest.approx(1.735518538577901, rel=1e-13)
    assert dv.m_c == pytest.approx(0.7)
    assert dv.m_star == pytest.approx(4 / 7)
    assert dv.m_1 == pytest.approx(0.85)
    assert dv.m_tilde_1 == pytest.approx(10 / 13)
    assert dv.p_star == pytest.approx(10 / 7)
    assert dv.lambda_star == pytest.approx(7.2)
    assert dv.rho == pytest.approx(1.25)


def test_derive_classical_values():
    dv = derive(validate(*CLASSICAL, allow_boundary=True))
    assert (dv.alpha, dv.delta, dv.n, dv.m_c) == pytest.approx((1, 5, 5, 0.6))
    assert dv.eta == pytest.approx(1, rel=1e-15)


@pytest.mark.parametrize("args", [EXA, BREAKING, (3, 0.4, 0.1, 0.5), (7, 0.95, -2.5, -1)])
def test_derive_matches_oracle(args):
    dv = derive(validate(*args)).as_dict()
    ref = oracles.derived(*args)
    for key, val in ref.items():
        if val is None:
            assert dv[key] is None
        else:
            assert dv[key] == pytest.approx(float(val), rel=1e-13, abs=1e-15), key


@settings(max_examples=200, deadline=None)
@given(admissible())
def test_eta_solves_its_quadratic(p):
    dv = derive(p)
    assert dv.eta > 0
    lhs = dv.eta * (dv.eta + dv.n - 2) * dv.alpha ** 2
    assert lhs == pytest.approx(p.d - 1, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(admissible())
def test_threshold_chain_and_theta_range(p):
    dv = derive(p)
    assert dv.m_star < dv.m_c
    if 0 < p.gamma < p.d:
        assert 0 < dv.theta <= (1 - p.m) / (2 - p.m) * (1 + 1e-12)
        assert 0 < zeta(p, math.inf) <= 1 + 1e-12


# --- spectral formulas and gap ---------------------------------------------

def test_spectral_formulas_examples():
    assert spectral_formulas(validate(*EXA)) == pytest.approx((58.7777777778, 34.7103707716, 80 / 3))
    assert spectral_formulas(validate(*CLASSICAL, allow_boundary=True)) == pytest.approx((12.25, 10, 10))


def test_lambda_ess_vanishes_at_m_star():
    p = validate(5, Fraction(4, 7), 0.2, 1)
    assert spectral_formulas(p)[0] == pytest.approx(0, abs=1e-14)
    with pytest.raises(DegenerateGap):
        spectral_gap(p)


def test_gap_selection_examples():
    gap = spectral_gap(validate(*EXA))
    assert gap.branch == "1,0"
    assert gap.lambda_ == pytest.approx(80 / 3)
    assert gap.lambda_improved == pytest.approx(34.7103707716)
    assert gap.lambda_physical == pytest.approx(0.36 * 80 / 3)
    assert not gap.in_essential["0,1"] and not gap.in_essential["1,0"]
    low = spectral_gap(validate(5, 0.7, 0.2, 1))
    assert low.branch == "ess"
    assert low.lambda_ == pytest.approx(derive(validate(5, 0.7, 0.2, 1)).lambda_ess)


def test_negative_lambda_10_is_flagged():
    p = validate(5, 0.65, 0.2, 1)  # delta < n/2
    gap = spectral_gap(p)
    assert gap.nonphysical_10 and spectral_formulas(p)[2] < 0
    assert gap.branch == "ess"


def test_gap_selection_rule_on_lattice():
    d, gamma = 5, 1.0
    lo, hi = gamma - 2, (d - 2) * gamma / d
    for i in range(50):
        beta = lo + (hi - lo) * (i + 0.5) / 50
        for j in range(50):
            m = 0.02 + 0.96 * j / 49
            p = validate(d, m, beta, gamma)
            dv = derive(p)
            if abs(m - dv.m_star) < 1e-9:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NearThresholdWarning)
                gap = spectral_gap(p)
            if dv.delta > (dv.n + 2) / 2:
                assert gap.lambda_ == min(dv.lambda_ess, dv.lambda_01, dv.lambda_10)
            else:
                assert gap.lambda_ == dv.lambda_ess
            assert gap.lambda_improved >= gap.lambda_


def test_translation_degeneracy_without_weights():
    # with beta = gamma = 0 the l=1 exponent is always 1, and the two
    # discrete branches meet exactly when delta = d
    for d in range(2, 9):
        for m in (0.3, 0.5, 0.8, 0.9):
            dv = derive(validate(d, m, 0, 0, allow_boundary=True))
            assert dv.eta == pytest.approx(1, rel=1e-14)
            assert (abs(dv.lambda_01 - dv.lambda_10) < 1e-12) == (abs(dv.delta - d) < 1e-12)
    dv = derive(validate(5, 0.8, 0, 0, allow_boundary=True))
    assert dv.lambda_01 == pytest.approx(dv.lambda_10)


# --- Felli-Schneider, zeta, regimes ------------------------------------------

def test_beta_fs_values():
    assert beta_fs(5, -1) == pytest.approx(3 - 2 * math.sqrt(5))
    assert beta_fs(5, 0) == 0
    for d in range(2, 12):
        assert beta_fs(d, 0) == pytest.approx(0, abs=1e-14)
    with pytest.raises(ComplexRoot):
        beta_fs(5, 2)


def test_symmetry_classification():
    assert symmetry_class(5, -1, -1) == "symmetry-breaking"
    assert symmetry_class(5, -2, -1) == "symmetry"
    assert symmetry_class(5, 0.2, 1) == "symmetry"


def test_zeta_values():
    p = validate(*EXA)
    assert derive(p).theta == pytest.approx(0.0845070422535211, rel=1e-12)
    assert zeta(p, math.inf) == pytest.approx(0.929577464788733, rel=1e-12)
    assert zeta(p, 11) == pytest.approx(1.0)
    assert zeta(validate(5, 0.9, -1, -0.5), math.inf) == 1.0
    with pytest.raises(ExponentBelowRange):
        zeta(p, 5)


def test_vartheta_value():
    assert vartheta_ckn(validate(*EXA), 1.25) == pytest.approx(1 / (1.25 * 1.7), rel=1e-14)


def test_regimes():
    tags = classify_regime(validate(*EXA))
    assert tags.mass_finite and tags.l1_difference and tags.moment_finite
    assert tags.ckn_subcritical and tags.symmetry == "symmetry"
    assert tags.prediction == "Lambda(M) > Lambda_star"
    assert classify_regime(validate(5, 0.3, 0.2, 1)).extinction
    crit = classify_regime(validate(5, 0.7, 0.2, 1))
    assert crit.critical and "critical-unrated" in crit.tags()
    brk = classify_regime(validate(*BREAKING))
    assert brk.symmetry == "symmetry-breaking"
    assert brk.prediction == "Lambda(M) <= Lambda_01 < Lambda_star"
    dv = derive(validate(*BREAKING))
    assert dv.lambda_01 < dv.lambda_star


def test_params_from_mapping():
    p = params_from_mapping({"d": "5", "m": "0.9", "beta": "0.2", "gamma": "1"})
    assert p == validate(*EXA)
    with pytest.raises(ConfigError):
        params_from_mapping({"d": "5", "m": "0.9"})
    with pytest.raises(ConfigError):
        params_from_mapping({"d": "5", "m": "x", "beta": "0", "gamma": "0"})
