"""Entropy-type functionals of a radial density relative to a Barenblatt profile.

All integrals use the grid quadrature.  Gradients appearing in quadratic
forms are taken as log-difference quotients at cell faces, which makes the
discrete Fisher information the exact dissipation of the evolution scheme
and the linearized forms the exact Rayleigh pair of the spectral operator.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    InconsistentPair, MassMismatch, MomentDiverges, NegativeField,
    NonpositiveField, OutsideValidRange, SupercriticalExponent,
)
from .grid import RadialField, face_difference, face_weights, gradient, norm_qgamma
from .params import compare_m, derive, vartheta_ckn
from .profiles import (
    BarenblattSpec, BarenblattTail, barenblatt_eval, c_of_mass, rescale_mu,
)

MASS_TOL = 1e-6


def bregman_power(e, m):
    """(1+e)^m - 1 - m e, with a short series where cancellation would bite."""
    e = np.asarray(e, dtype=float)
    small = np.abs(e) < 1e-3
    es = np.where(small, e, 0.0)
    series = 0.5 * m * (m - 1) * es ** 2 * (
        1 + (m - 2) / 3 * es + (m - 2) * (m - 3) / 12 * es ** 2)
    full = np.power(1 + np.where(small, 0.0, e), m) - 1 - m * np.where(small, 0.0, e)
    return np.where(small, series, full)


def _bregman_integral(v, ref, grid, m):
    """1/(m-1) * int [v^m - ref^m - m ref^{m-1}(v - ref)] |x|^{-gamma} dx."""
    e = v / ref - 1
    return float(np.dot(grid.quad_gamma, ref ** m * bregman_power(e, m))) / (m - 1)


def free_energy(v: RadialField, spec: BarenblattSpec) -> float:
    """Relative entropy of v with respect to the profile."""
    if np.any(v.values < 0):
        raise NegativeField("free energy needs a nonnegative field")
    g = v.grid
    return _bregman_integral(v.values, spec.values(g.r), g, spec.params.m)


def _face_fisher(v, P, grid):
    p = grid.params
    vf = 0.5 * (v[1:] + v[:-1])
    dP = face_difference(P, grid)
    return float(np.dot(face_weights(grid, p.d - p.beta), vf * dP ** 2))


def fisher_information(v: RadialField, spec: BarenblattSpec, method: str = "face") -> float:
    """int v |grad(v^{m-1} - B^{m-1})|^2 |x|^{-beta} dx.

    ``method='face'`` (default) differences the pressure gap across cell
    faces.  ``method='nodal'`` uses :func:`gradient` on v^{m-1} and the
    exact derivative k r^{k-1} of B^{m-1}.
    """
    if np.any(v.values <= 0):
        raise NonpositiveField("Fisher information needs a positive field")
    g = v.grid
    p = g.params
    if method == "face":
        P = v.values ** (p.m - 1) - spec.pressure(g.r)
        return _face_fisher(v.values, P, g)
    if method == "nodal":
        dvm = gradient(v.with_values(v.values ** (p.m - 1))).values
        dB = p.k * g.r ** (p.k - 1)
        return float(np.dot(g.quad_beta, v.values * (dvm - dB) ** 2))
    raise ValueError(f"unknown method {method!r}")


def _moment(field_: RadialField) -> float:
    g = field_.grid
    p = g.params
    val = float(np.dot(g.quad_gamma, g.r ** p.k * field_.values))
    if field_.tail is not None:
        val += field_.tail.integral(p.d - p.gamma + p.k, g.r_max)
    return val


def mass(v: RadialField) -> float:
    """Weighted mass including the analytic tail when present."""
    g = v.grid
    p = g.params
    val = float(np.dot(g.quad_gamma, v.values))
    if v.tail is not None:
        val += v.tail.integral(p.d - p.gamma, g.r_max)
    return val


def best_match_mu(v: RadialField, spec: BarenblattSpec) -> float:
    """Scale mu with the same k-moment as v, k = 2 + beta - gamma."""
    p = spec.params
    if compare_m(p, "m_tilde_1") <= 0:
        raise MomentDiverges("k-moment diverges for m <= m_tilde_1")
    ref = barenblatt_eval(spec, v.grid)
    return (_moment(ref) / _moment(v)) ** (1 / p.k)


def _check_mass(v, spec):
    ref = barenblatt_eval(spec, v.grid)
    mv, mb = mass(v), mass(ref)
    if abs(mv - mb) > MASS_TOL * mb:
        raise MassMismatch(f"relative mass difference {(mv - mb) / mb:.3e} exceeds {MASS_TOL:g}")


def best_match_entropy(v: RadialField, spec: BarenblattSpec, check_mass: bool = True):
    """Relative entropy against the moment-matched profile; returns (G, mu_star).

    Evaluated as a pointwise nonnegative Bregman sum against B_mu.  With
    equal masses and matched moments the linear term integrates to zero, so
    this is the two-term form without its cancellation.
    """
    if check_mass:
        _check_mass(v, spec)
    mu = best_match_mu(v, spec)
    ref = rescale_mu(spec, mu, v.grid)
    if np.any(v.values < 0):
        raise NegativeField("entropy needs a nonnegative field")
    return _bregman_integral(v.values, ref.values, v.grid, spec.params.m), mu


def best_match_entropy_two_term(v: RadialField, spec: BarenblattSpec) -> float:
    """Literal 1/(m-1) * int (v^m - B_mu^m); subject to cancellation."""
    mu = best_match_mu(v, spec)
    ref = rescale_mu(spec, mu, v.grid)
    m = spec.params.m
    return float(np.dot(v.grid.quad_gamma, v.values ** m - ref.values ** m)) / (m - 1)


def best_match_fisher(v: RadialField, spec: BarenblattSpec, mu: Optional[float] = None) -> float:
    """Fisher information relative to B_mu at the matched scale."""
    if np.any(v.values <= 0):
        raise NonpositiveField("Fisher information needs a positive field")
    if mu is None:
        mu = best_match_mu(v, spec)
    p = spec.params
    ref = rescale_mu(spec, mu, v.grid)
    P = v.values ** (p.m - 1) - ref.values ** (p.m - 1)
    return _face_fisher(v.values, P, v.grid)


def ckp_lower_bound(v: RadialField, mu_star: float, spec: BarenblattSpec) -> float:
    """Lower bound on the best-matching entropy by weighted L1 distances.

    m / (8 ||B_mu^m||_{1,gamma}^m) * (C(M) ||v - B_mu||_{1,gamma}
    + int |x|^k |v - B_mu| |x|^{-gamma} dx)^2, with C(M) the profile
    constant for the mass of v.
    """
    p = spec.params
    if compare_m(p, "m_tilde_1") <= 0:
        raise MomentDiverges("bound needs a finite k-moment (m > m_tilde_1)")
    g = v.grid
    ref = rescale_mu(spec, mu_star, g)
    CM = c_of_mass(mass(v), p).C
    diff = np.abs(v.values - ref.values)
    l1 = float(np.dot(g.quad_gamma, diff))
    mom = float(np.dot(g.quad_gamma, g.r ** p.k * diff))
    bm = float(np.dot(g.quad_gamma, ref.values ** p.m))
    return p.m / (8 * bm ** p.m) * (CM * l1 + mom) ** 2


def linearized_free_energy(f: RadialField, spec: BarenblattSpec) -> float:
    """1/2 int f^2 B^{2-m} |x|^{-gamma} dx."""
    g = f.grid
    B = spec.values(g.r)
    return 0.5 * float(np.dot(g.quad_gamma, f.values ** 2 * B ** (2 - spec.params.m)))


def linearized_fisher(f: RadialField, spec: BarenblattSpec, ell: int = 0) -> float:
    """(1-m) int |grad f|^2 B |x|^{-beta} dx for f(r) Y_ell.

    The angular part contributes ell(ell+d-2) int f^2 B r^{-2} |x|^{-beta} dx.
    """
    g = f.grid
    p = g.params
    Bf = spec.values(g.edges)
    val = float(np.dot(face_weights(g, p.d - p.beta), Bf * face_difference(f.values, g) ** 2))
    if ell:
        ang = ell * (ell + p.d - 2)
        val += ang * float(np.dot(g.quad_beta, f.values ** 2 * spec.values(g.r) / g.r ** 2))
    return (1 - p.m) * val


def relative_error_norms(v: RadialField, spec: BarenblattSpec, q_list=(math.inf,)) -> dict:
    """Map q -> ||v/B - 1||_{q,gamma}; q = inf is the sup over nodes."""
    m = spec.params.m
    qmin = (2 - m) / (1 - m)
    w = v.with_values(v.values / spec.values(v.grid.r) - 1)
    out = {}
    for q in q_list:
        if q < qmin * (1 - 1e-14):
            warnings.warn(f"q={q!r} is below (2-m)/(1-m)={qmin:.6g}", OutsideValidRange,
                          stacklevel=2)
        out[q] = norm_qgamma(w, q)
    return out


def ckn_star_constant(p, pexp: float, C: float = 1.0, grid=None) -> float:
    """Radial optimal CKN constant from w = B^{m - 1/2}, pexp = 1/(2m-1).

    ||grad w||_{2,beta}^{-theta} ||w||_{p+1,gamma}^{theta-1} ||w||_{2p,gamma},
    evaluated by quadrature with the exact derivative of w.
    """
    from .grid import make_grid
    dv = derive(p)
    if not pexp > 1:
        raise InconsistentPair(f"CKN exponent must exceed 1, got {pexp!r}")
    if pexp > dv.p_star * (1 + 1e-14):
        raise SupercriticalExponent(f"p={pexp!r} exceeds p_star={dv.p_star!r}")
    if abs(p.m - (pexp + 1) / (2 * pexp)) > 1e-12:
        raise InconsistentPair(f"m={p.m!r} does not match (p+1)/(2p)={(pexp + 1) / (2 * pexp)!r}")
    grid = grid or make_grid(p, 1e-6, 1e6, 4000)
    spec = BarenblattSpec(C, p)
    r = grid.r
    B = spec.values(r)
    a = p.m - 0.5
    w = B ** a
    # d/dr B = -delta k r^{k-1} B / (C + r^k)
    dw = -a * dv.delta * p.k * r ** (p.k - 1) * w / spec.pressure(r)
    grad2 = float(np.dot(grid.quad_beta, dw ** 2))
    lp1 = float(np.dot(grid.quad_gamma, w ** (pexp + 1)))
    l2p = float(np.dot(grid.quad_gamma, w ** (2 * pexp)))
    th = vartheta_ckn(p, pexp)
    return (grad2 ** (-th / 2) * lp1 ** ((th - 1) / (pexp + 1)) * l2p ** (1 / (2 * pexp)))


def ckn_quotient(w: RadialField, pexp: float) -> float:
    """||w||_{2p,gamma} / (||grad w||^theta ||w||_{p+1}^{1-theta}) for a radial field."""
    g = w.grid
    p = g.params
    th = vartheta_ckn(p, pexp)
    grad2 = float(np.dot(g.quad_beta, gradient(w).values ** 2))
    lp1 = norm_qgamma(w, pexp + 1)
    l2p = norm_qgamma(w, 2 * pexp)
    return l2p / (grad2 ** (th / 2) * lp1 ** (1 - th))


@dataclass(frozen=True)
class FunctionalReport:
    F: float
    I: float
    G: float
    J: float
    mu_star: float
    F_lin: Optional[float]
    I_lin: Optional[float]
    rel_err_norms: dict = field(default_factory=dict)
    ckp_bound: float = math.nan
    ep_ratio: float = math.nan

    COLUMNS = ("F", "I", "G", "J", "mu_star", "F_lin", "I_lin", "ckp_bound", "ep_ratio")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS] + list(self.rel_err_norms.values())

    def header(self):
        return list(self.COLUMNS) + [f"lq_{q}" for q in self.rel_err_norms]


def evaluate_all(v: RadialField, spec: BarenblattSpec, f: Optional[RadialField] = None,
                 q_list=(math.inf,)) -> FunctionalReport:
    """Every functional at once; quantities outside their range come back NaN."""
    p = spec.params
    F = free_energy(v, spec)
    I = fisher_information(v, spec)
    G = J = mu = ckp = math.nan
    if compare_m(p, "m_tilde_1") > 0:
        try:
            G, mu = best_match_entropy(v, spec)
            J = best_match_fisher(v, spec, mu)
            ckp = ckp_lower_bound(v, mu, spec)
        except MassMismatch:
            pass
    F_lin = I_lin = None
    if f is not None:
        F_lin, I_lin = linearized_free_energy(f, spec), linearized_fisher(f, spec)
    ep = (p.m / (1 - p.m)) * I / F if F > 0 else math.nan
    return FunctionalReport(F, I, G, J, mu, F_lin, I_lin,
                            relative_error_norms(v, spec, q_list), ckp, ep)
