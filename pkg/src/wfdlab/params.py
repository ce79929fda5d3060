"""Parameter validation and closed-form constants.

The model is the weighted fast diffusion equation

    |x|^{-gamma} u_t = div(|x|^{-beta} grad u^m),   0 < m < 1,

in dimension d.  Everything here is exact arithmetic on the four inputs
(rationals where possible) followed by conversion to float.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Optional

from .errors import (
    ComplexRoot, DegenerateGap, DimensionTooSmall, ExponentBelowRange,
    ExponentOutOfRange, NearThresholdWarning, WeightConstraintViolated,
)

THRESHOLD_BAND = 1e-12


def as_fraction(x) -> Fraction:
    """Exact rational for ``x``; floats are read through their shortest repr.

    A float typed as ``0.9`` becomes 9/10 rather than the binary expansion,
    which is what makes ``m == m_c`` decidable for decimal inputs.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    return Fraction(str(x).strip())


@dataclass(frozen=True)
class Params:
    """Validated quadruple (d, m, beta, gamma).

    Build through :func:`validate`; the constructor itself does not check.
    """
    d: int
    m: float
    beta: float
    gamma: float
    allow_boundary: bool = False
    exact: tuple = field(default=(), repr=False, compare=False)

    @property
    def on_boundary(self) -> bool:
        d, _, b, g = self.fractions()
        return b == Fraction(d - 2, d) * g

    def fractions(self):
        if self.exact:
            return self.exact
        return (Fraction(self.d), as_fraction(self.m), as_fraction(self.beta),
                as_fraction(self.gamma))

    @property
    def k(self) -> float:
        """Exponent 2 + beta - gamma of the Barenblatt pressure."""
        return float(2 + self.fractions()[2] - self.fractions()[3])

    def as_dict(self):
        return {"d": self.d, "m": self.m, "beta": self.beta, "gamma": self.gamma,
                "allow_boundary": self.allow_boundary}


def validate(d, m, beta, gamma, allow_boundary: bool = False) -> Params:
    """Check admissibility and return a :class:`Params`.

    Raises
    ------
    DimensionTooSmall
        d is not an integer >= 2.
    ExponentOutOfRange
        m outside (0, 1).
    WeightConstraintViolated
        One of gamma < d, gamma - 2 < beta, beta < (d-2) gamma / d fails.
        The last one may hold with equality when ``allow_boundary`` is set.
    """
    fd = as_fraction(d)
    if fd.denominator != 1 or fd < 2:
        raise DimensionTooSmall(f"dimension must be an integer >= 2, got {d!r}")
    fm, fb, fg = as_fraction(m), as_fraction(beta), as_fraction(gamma)
    if not (0 < fm < 1):
        raise ExponentOutOfRange(f"m must lie in (0, 1), got {m!r}")
    if not fg < fd:
        raise WeightConstraintViolated("gamma < d", fg, fd)
    if not fg - 2 < fb:
        raise WeightConstraintViolated("gamma - 2 < beta", fg - 2, fb)
    upper = (fd - 2) * fg / fd
    if allow_boundary:
        if not fb <= upper:
            raise WeightConstraintViolated("beta <= (d-2)*gamma/d", fb, upper)
    elif not fb < upper:
        raise WeightConstraintViolated("beta < (d-2)*gamma/d", fb, upper)
    return Params(int(fd), float(fm), float(fb), float(fg), bool(allow_boundary),
                  exact=(fd, fm, fb, fg))


# --- exact thresholds -----------------------------------------------------

def _thresholds(p: Params) -> dict:
    d, m, b, g = p.fractions()
    return {
        "m_c": (d - 2 - b) / (d - g),
        # m_c = 0 (only d = 2, beta = 0): every m lies above m_star
        "m_star": (d - 4 - 2 * b + g) / (d - 2 - b) if d - 2 - b != 0 else None,
        "m_1": (2 * d - 2 - b - g) / (2 * (d - g)),
        "m_tilde_1": (d - g) / (d + 2 + b - 2 * g),
    }


def compare_m(p: Params, name: str) -> int:
    """Sign of m minus the named threshold (-1, 0, +1).

    Exact on the rational inputs.  Values within ``THRESHOLD_BAND`` of the
    threshold without being equal count as equal and emit a warning.
    """
    thr = _thresholds(p)[name]
    if thr is None:
        return 1
    diff = p.fractions()[1] - thr
    if diff == 0:
        return 0
    if abs(diff) < Fraction(THRESHOLD_BAND):
        warnings.warn(f"m is within {THRESHOLD_BAND:g} of {name}; treated as equal",
                      NearThresholdWarning, stacklevel=2)
        return 0
    return 1 if diff > 0 else -1


@dataclass(frozen=True)
class Derived:
    """Closed-form constants attached to a parameter set."""
    m_c: float
    m_star: float
    m_1: float
    m_tilde_1: float
    p_star: float
    alpha: float
    delta: float
    n: float
    eta: float
    rho: Optional[float]
    lambda_ess: float
    lambda_01: float
    lambda_10: float
    lambda_star: float
    theta: float

    def as_dict(self):
        return asdict(self)


def _eta(d, alpha, n) -> float:
    # positive root of eta^2 + (n-2) eta - (d-1)/alpha^2 = 0, written without
    # the cancellation of sqrt(a^2+c) - a for large n
    c = (d - 1) / alpha ** 2
    a = (n - 2) / 2
    return c / (math.sqrt(a * a + c) + a) if a >= 0 else math.sqrt(a * a + c) - a


def _safe_recip(x) -> float:
    try:
        return float(1 / x)
    except OverflowError:
        return math.copysign(math.inf, x)


def derive(p: Params) -> Derived:
    """All closed-form constants for ``p``.  Total on valid input."""
    d, m, b, g = p.fractions()
    th = _thresholds(p)
    alpha = 1 + (b - g) / 2
    delta = 1 / (1 - m)
    n = 2 * (d - g) / (b + 2 - g)
    inv_rho = (d - g) * (m - th["m_c"])
    eta = _eta(float(d), float(alpha), float(n))
    lam_ess = (n - 2 - 2 * delta) ** 2 / 4
    if 0 < g < d:
        theta = (1 - m) * (2 + b - g) / ((1 - m) * (2 + b) + 2 + b - g)
    else:
        theta = (1 - m) / (2 - m)
    return Derived(
        m_c=float(th["m_c"]), m_star=-math.inf if th["m_star"] is None else float(th["m_star"]), m_1=float(th["m_1"]),
        m_tilde_1=float(th["m_tilde_1"]),
        p_star=float((d - g) / (d - b - 2)) if d - b - 2 != 0 else math.inf,
        alpha=float(alpha), delta=float(delta), n=float(n), eta=eta,
        rho=None if inv_rho == 0 else _safe_recip(inv_rho),
        lambda_ess=float(lam_ess),
        lambda_01=2 * float(delta) * eta,
        lambda_10=float(2 * (2 * delta - n)),
        lambda_star=float((2 + b - g) ** 2 / (2 * (1 - m))),
        theta=float(theta),
    )


def vartheta_ckn(p: Params, pexp: float) -> float:
    """Interpolation exponent of the weighted CKN inequality for exponent ``pexp``."""
    d, _, b, g = (float(x) for x in p.fractions())
    return (d - g) * (pexp - 1) / (pexp * (d + b + 2 - 2 * g - pexp * (d - b - 2)))


def spectral_formulas(p: Params):
    """Return ``(lambda_ess, lambda_01, lambda_10)``; lambda_10 may be negative."""
    dv = derive(p)
    return dv.lambda_ess, dv.lambda_01, dv.lambda_10


@dataclass(frozen=True)
class GapReport:
    """Optimal Hardy-Poincare constant and where it comes from.

    ``lambda_`` is in the normalization of the closed forms; multiply by
    ``alpha2`` for the constant of the inequality in the original radial
    variable (this is the number that sets decay rates of the flow).
    """
    lambda_: float
    branch: str
    lambda_improved: float
    lambda_radial: float
    in_essential: dict
    nonphysical_10: bool
    alpha2: float

    @property
    def lambda_physical(self) -> float:
        return self.alpha2 * self.lambda_

    @property
    def lambda_radial_physical(self) -> float:
        return self.alpha2 * self.lambda_radial


def _discrete_branch_allowed(dv: Derived) -> bool:
    return dv.delta > (dv.n + 2) / 2


def spectral_gap(p: Params) -> GapReport:
    """Select the optimal constant among the essential and two discrete branches.

    Raises
    ------
    DegenerateGap
        When m equals m_star, so that the essential spectrum reaches zero.
    """
    if compare_m(p, "m_star") == 0:
        raise DegenerateGap("m = m_star: the essential spectrum touches 0, no gap")
    dv = derive(p)
    cands = {"ess": dv.lambda_ess, "0,1": dv.lambda_01, "1,0": dv.lambda_10}
    if _discrete_branch_allowed(dv):
        branch = min(cands, key=lambda key: (cands[key], key != "ess"))
        radial = min(dv.lambda_ess, dv.lambda_10)
        improved = min(dv.lambda_ess, dv.lambda_01)
    else:
        branch = "ess"
        radial = improved = dv.lambda_ess
    return GapReport(
        lambda_=cands[branch], branch=branch,
        lambda_improved=improved,
        lambda_radial=radial,
        in_essential={"0,1": dv.lambda_01 >= dv.lambda_ess,
                      "1,0": dv.lambda_10 >= dv.lambda_ess},
        nonphysical_10=dv.lambda_10 < 0,
        alpha2=dv.alpha ** 2,
    )


def beta_fs(d: int, gamma: float) -> float:
    """Felli-Schneider threshold d - 2 - sqrt((gamma-d)^2 - 4(d-1))."""
    disc = (gamma - d) ** 2 - 4 * (d - 1)
    if disc < 0:
        raise ComplexRoot(f"(gamma-d)^2 - 4(d-1) = {disc!r} < 0")
    return d - 2 - math.sqrt(disc)


def symmetry_class(d: int, beta: float, gamma: float) -> str:
    """``'symmetry'`` or ``'symmetry-breaking'`` side of the Felli-Schneider curve."""
    if gamma >= 0:
        return "symmetry"
    bfs = beta_fs(d, gamma)
    if beta > bfs + THRESHOLD_BAND:
        return "symmetry-breaking"
    if abs(beta - bfs) <= THRESHOLD_BAND:
        warnings.warn("beta lies on the Felli-Schneider curve", NearThresholdWarning,
                      stacklevel=2)
    return "symmetry"


def zeta(p: Params, q: float) -> float:
    """Rate-reduction factor for the L^{q,gamma} relative-error estimate.

    ``q`` may be ``math.inf``.  Equal to 1 when gamma <= 0.
    """
    m = p.m
    qmin = (2 - m) / (1 - m)
    if q < qmin * (1 - 1e-14):
        raise ExponentBelowRange(f"q={q!r} below (2-m)/(1-m)={qmin!r}")
    if p.gamma <= 0:
        return 1.0
    theta = derive(p).theta
    first = 1.0 if math.isinf(q) else 1 - qmin / q
    return 1 - first * (1 - qmin * theta)


@dataclass(frozen=True)
class RegimeTags:
    extinction: bool
    critical: bool
    mass_finite: bool
    l1_difference: bool
    moment_finite: bool
    ckn_subcritical: bool
    symmetry: str
    prediction: str

    def tags(self):
        out = []
        if self.extinction:
            out.append("extinction")
        if self.critical:
            out.append("critical-unrated")
        if self.mass_finite:
            out.append("mass-finite")
        if self.l1_difference:
            out.append("L1-difference")
        if self.moment_finite:
            out.append("moment-finite")
        if self.ckn_subcritical:
            out.append("CKN-subcritical")
        out.append(self.symmetry)
        return out


def classify_regime(p: Params) -> RegimeTags:
    """Threshold tags plus the qualitative prediction on Lambda(M) vs Lambda_star."""
    c_mc = compare_m(p, "m_c")
    sym = symmetry_class(p.d, p.beta, p.gamma)
    subcrit = compare_m(p, "m_1") >= 0
    if not subcrit:
        pred = "no prediction (m < m_1)"
    elif p.gamma >= 0:
        pred = "Lambda(M) > Lambda_star"
    elif sym == "symmetry-breaking":
        pred = "Lambda(M) <= Lambda_01 < Lambda_star"
    elif abs(p.beta - beta_fs(p.d, p.gamma)) <= THRESHOLD_BAND:
        pred = "Lambda(M) = Lambda_star possible"
    else:
        pred = "Lambda(M) > Lambda_star"
    return RegimeTags(
        extinction=c_mc < 0, critical=c_mc == 0, mass_finite=c_mc > 0,
        l1_difference=compare_m(p, "m_star") > 0,
        moment_finite=compare_m(p, "m_tilde_1") > 0,
        ckn_subcritical=subcrit, symmetry=sym, prediction=pred,
    )


def params_from_mapping(cfg: dict) -> Params:
    """Build Params from a parsed key=value mapping (strings accepted)."""
    from .errors import ConfigError
    missing = [k for k in ("d", "m", "beta", "gamma") if k not in cfg]
    if missing:
        raise ConfigError("missing key(s): " + ", ".join(missing))
    flag = str(cfg.get("allow_boundary", "false")).strip().lower()
    if flag not in ("true", "false", "1", "0", "yes", "no"):
        raise ConfigError(f"allow_boundary must be true/false, got {flag!r}")
    try:
        vals = [as_fraction(cfg[k]) for k in ("d", "m", "beta", "gamma")]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad number: {exc}") from None
    return validate(*vals, allow_boundary=flag in ("true", "1", "yes"))


PARAMS_COLUMNS = ("d", "m", "beta", "gamma", "allow_boundary")
DERIVED_COLUMNS = tuple(Derived.__dataclass_fields__)


def derived_row(p: Params):
    """CSV row: params columns followed by derived columns."""
    dv = derive(p).as_dict()
    return [p.d, p.m, p.beta, p.gamma, p.allow_boundary] + [dv[k] for k in DERIVED_COLUMNS]
