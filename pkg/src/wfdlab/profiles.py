"""Barenblatt profiles, their masses and rescalings, and self-similar variables."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import betainc, betaln

from .errors import (
    BeyondExtinction, InfiniteMass, MomentDiverges, NotSandwichable,
    RelativeMassUnsolvable,
)
from .grid import RadialField, RadialGrid, sphere_area
from .params import Params, compare_m, derive


@dataclass(frozen=True)
class BarenblattSpec:
    """Profile (C + r^k)^{-1/(1-m)} with k = 2 + beta - gamma."""
    C: float
    params: Params

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise ValueError(f"Barenblatt constant must be positive and finite, got {self.C!r}")

    @property
    def delta(self) -> float:
        return 1.0 / (1.0 - self.params.m)

    def values(self, r) -> np.ndarray:
        return np.exp(-self.delta * np.log(self.C + np.asarray(r, dtype=float) ** self.params.k))

    def pressure(self, r) -> np.ndarray:
        """B^{m-1} = C + r^k."""
        return self.C + np.asarray(r, dtype=float) ** self.params.k

    def tail(self) -> "BarenblattTail":
        return BarenblattTail(self.params, self.C)


@dataclass(frozen=True)
class BarenblattTail:
    """Analytic continuation a * (C + (mu r)^k)^{-delta} beyond the last node."""
    params: Params
    C: float
    amplitude: float = 1.0
    scale: float = 1.0

    def values(self, r) -> np.ndarray:
        p = self.params
        r = np.asarray(r, dtype=float)
        return self.amplitude * np.exp(-np.log(self.C + (self.scale * r) ** p.k) / (1 - p.m))

    def pressure_coefficient(self) -> float:
        """Limit ratio of values(r)^{m-1} to r^k as r -> infinity."""
        return self.amplitude ** (self.params.m - 1) * self.scale ** self.params.k

    def integral(self, power: float, R: float) -> float:
        """omega * int_R^inf values(r) r^{power-1} dr (inf when divergent)."""
        p = self.params
        val = _power_tail(p, self.C, power, self.scale * R)
        return sphere_area(p.d) * self.amplitude * self.scale ** (-power) * val

    def rescaled(self, amplitude: float, scale: float) -> "BarenblattTail":
        return BarenblattTail(self.params, self.C, self.amplitude * amplitude, self.scale * scale)


def _power_tail(p: Params, C: float, power: float, Y: float) -> float:
    """int_Y^inf (C + y^k)^{-delta} y^{power-1} dy via the incomplete Beta function."""
    k, delta = p.k, 1 / (1 - p.m)
    a = power / k
    b = delta - a
    if b <= 0:
        return math.inf
    x = C / (C + Y ** k)
    if x == 0.0:
        return 0.0
    log_full = (a - delta) * math.log(C) + betaln(a, b) - math.log(k)
    return math.exp(log_full) * float(betainc(b, a, x))


def barenblatt_eval(spec: BarenblattSpec, grid: RadialGrid) -> RadialField:
    """Node values of the profile, tagged with its power-law tail."""
    return RadialField(spec.values(grid.r), grid, spec.tail())


def _mass_unit(p: Params) -> float:
    dv = derive(p)
    a, b = dv.n / 2, dv.delta - dv.n / 2
    return sphere_area(p.d) / p.k * math.exp(betaln(a, b))


def barenblatt_mass(spec: BarenblattSpec) -> float:
    """Weighted mass C^{n/2 - delta} * M1 with M1 = omega/k * B(n/2, delta - n/2).

    Raises
    ------
    InfiniteMass
        When m <= m_c.
    """
    p = spec.params
    if compare_m(p, "m_c") <= 0:
        raise InfiniteMass("profile mass is infinite for m <= m_c")
    dv = derive(p)
    return spec.C ** (dv.n / 2 - dv.delta) * _mass_unit(p)


def barenblatt_moment(spec: BarenblattSpec) -> float:
    """int |x|^k B |x|^{-gamma} dx = omega/k * C^{n/2+1-delta} B(n/2+1, delta-n/2-1)."""
    p = spec.params
    if compare_m(p, "m_tilde_1") <= 0:
        raise MomentDiverges("k-moment of the profile diverges for m <= m_tilde_1")
    dv = derive(p)
    a, b = dv.n / 2 + 1, dv.delta - dv.n / 2 - 1
    return sphere_area(p.d) / p.k * spec.C ** (a - dv.delta) * math.exp(betaln(a, b))


def c_of_mass(M: float, p: Params) -> BarenblattSpec:
    """The profile of weighted mass M (inverse of :func:`barenblatt_mass`)."""
    if not M > 0:
        raise ValueError(f"mass must be positive, got {M!r}")
    if compare_m(p, "m_c") <= 0:
        raise InfiniteMass("no finite-mass profile for m <= m_c")
    dv = derive(p)
    return BarenblattSpec((M / _mass_unit(p)) ** (1 / (dv.n / 2 - dv.delta)), p)


def rescale_mu(spec: BarenblattSpec, mu: float, grid: RadialGrid) -> RadialField:
    """Mass-preserving rescaling mu^{d-gamma} B(mu r)."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    p = spec.params
    amp = mu ** (p.d - p.gamma)
    return RadialField(amp * spec.values(mu * grid.r), grid,
                       BarenblattTail(p, spec.C, amp, mu))


# --- relative mass and sandwiching ----------------------------------------

def _tail_difference(tail: Optional[BarenblattTail], spec: BarenblattSpec, R: float) -> float:
    """omega * int_R^inf (tail - B) r^{d-1-gamma} dr."""
    if tail is None:
        return 0.0
    p = spec.params
    power = p.d - p.gamma
    t1, t2 = tail.integral(power, R), spec.tail().integral(power, R)
    if math.isfinite(t1) and math.isfinite(t2):
        return t1 - t2
    k, delta = p.k, 1 / (1 - p.m)
    # both tails are r^{-k delta} (A (1 + a x)^{-delta} - (1 + b x)^{-delta}),
    # x = r^{-k}; the bracket is formed as exp(e2) expm1(e1 - e2) so the
    # cancellation between matching leading terms stays accurate
    logA = math.log(tail.amplitude) - k * delta * math.log(tail.scale)
    a, b = tail.C * tail.scale ** (-k), spec.C

    def g(t):
        lr = math.log(R) + t
        x = math.exp(-k * lr)
        e1 = logA - delta * math.log1p(a * x)
        e2 = -delta * math.log1p(b * x)
        br = math.expm1(e1 - e2)
        if br == 0.0:
            return 0.0
        return math.copysign(math.exp((power - k * delta) * lr + e2 + math.log(abs(br))), br)

    # absolute floor: 1e-14 of one tail's integrand scale over a unit log interval
    floor = 1e-14 * math.exp((power - k * delta) * math.log(R) + min(logA, 0.0))
    val, _ = integrate.quad(g, 0.0, np.inf, epsabs=floor, epsrel=1e-10, limit=400)
    return sphere_area(p.d) * val


def relative_mass(v: RadialField, spec: BarenblattSpec, tail: bool = True) -> float:
    """int (v - B) |x|^{-gamma} dx, finite even when both masses are infinite."""
    g = v.grid
    val = float(np.dot(g.quad_gamma, v.values - spec.values(g.r)))
    if tail:
        val += _tail_difference(v.tail, spec, g.r_max)
    return val


class SandwichConstants(NamedTuple):
    C1: float
    C2: float
    W1: float
    W2: float
    C: float


def _pressure_bounds(v0: RadialField):
    p = v0.grid.params
    if np.any(v0.values <= 0):
        raise NotSandwichable("initial datum must be strictly positive")
    diff = v0.values ** (p.m - 1) - v0.grid.r ** p.k
    hi, lo = float(diff.max()), float(diff.min())
    if v0.tail is not None:
        coef = v0.tail.pressure_coefficient()
        if abs(coef - 1) <= 1e-12:
            lim = v0.tail.amplitude ** (p.m - 1) * v0.tail.C
            hi, lo = max(hi, lim), min(lo, lim)
        elif coef > 1:
            hi = math.inf
        else:
            lo = -math.inf
    return hi, lo


def solve_relative_mass(v0: RadialField, bounds=None) -> BarenblattSpec:
    """Profile constant C with zero relative mass against ``v0``.

    The root lies between the sandwich constants, where the relative mass
    changes sign.
    """
    p = v0.grid.params
    if compare_m(p, "m_star") <= 0:
        raise RelativeMassUnsolvable("relative mass does not determine C for m <= m_star")
    C1, C2 = bounds if bounds is not None else _pressure_bounds(v0)
    if not (0 < C2 <= C1 < math.inf):
        raise NotSandwichable(f"datum is not sandwiched (C1={C1!r}, C2={C2!r})")
    f = lambda c: relative_mass(v0, BarenblattSpec(c, p))
    if C1 == C2:
        return BarenblattSpec(C1, p)
    f1, f2 = f(C1), f(C2)
    if f1 == 0:
        return BarenblattSpec(C1, p)
    if f2 == 0:
        return BarenblattSpec(C2, p)
    if f1 * f2 > 0:
        raise RelativeMassUnsolvable(f"no sign change on [{C2!r}, {C1!r}]")
    c = brentq(f, C2, C1, xtol=1e-15 * C1, rtol=4 * np.finfo(float).eps, maxiter=200)
    return BarenblattSpec(c, p)


def sandwich_constants(v0: RadialField, p: Optional[Params] = None, C=None) -> SandwichConstants:
    """Tightest C1 >= C2 with B_{C1} <= v0 <= B_{C2}, and W1, W2 relative to C.

    ``C`` may be a number or a :class:`BarenblattSpec`.  If omitted it is
    solved from the zero relative mass condition (possible only for
    m > m_star).

    Raises
    ------
    NotSandwichable
        If C2 <= 0 or one of the bounds is infinite.
    """
    p = p or v0.grid.params
    C1, C2 = _pressure_bounds(v0)
    if not C2 > 0 or not math.isfinite(C1) or not math.isfinite(C2):
        raise NotSandwichable(f"datum is not sandwiched (C1={C1!r}, C2={C2!r})")
    if C is None:
        C = solve_relative_mass(v0, (C1, C2)).C
    elif isinstance(C, BarenblattSpec):
        C = C.C
    delta = 1 / (1 - p.m)
    return SandwichConstants(C1, C2, (C / C1) ** delta, (C / C2) ** delta, float(C))


# --- self-similar variables -----------------------------------------------

@dataclass(frozen=True)
class SelfSimilarFrame:
    """Time offset T and the branch of the scaling law R(tau)."""
    T: float
    params: Params

    def __post_init__(self):
        if self.branch != "critical" and not self.T > 0:
            raise ValueError("T must be positive away from m = m_c")

    @property
    def branch(self) -> str:
        c = compare_m(self.params, "m_c")
        return {1: "supercritical", 0: "critical", -1: "subcritical"}[c]

    @property
    def R0(self) -> float:
        return r_of_tau(0.0, self)

    def _rate(self) -> float:
        p = self.params
        return (p.d - p.gamma) * abs(p.m - derive(p).m_c)


def r_of_tau(tau: float, frame: SelfSimilarFrame, p: Optional[Params] = None) -> float:
    """Length scale R(tau) of the self-similar solution."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    br = frame.branch
    if br == "critical":
        return math.exp(frame.T + tau)
    A = frame._rate()
    rho = derive(frame.params).rho
    if br == "supercritical":
        return (A * (frame.T + tau)) ** rho
    if tau >= frame.T:
        raise BeyondExtinction(f"tau={tau!r} is past the extinction time T={frame.T!r}")
    return (A * (frame.T - tau)) ** rho


def tau_of_r(R: float, frame: SelfSimilarFrame) -> float:
    br = frame.branch
    if br == "critical":
        return math.log(R) - frame.T
    A = frame._rate()
    inv_rho = 1 / derive(frame.params).rho
    if br == "supercritical":
        return R ** inv_rho / A - frame.T
    return frame.T - R ** inv_rho / A


def _resample(u: RadialField, x: np.ndarray) -> np.ndarray:
    """Values of u at positions x; monotone cubic in (log r, log u)."""
    g = u.grid
    if np.any(u.values <= 0):
        raise ValueError("resampling needs a positive field")
    interp = PchipInterpolator(np.log(g.r), np.log(u.values), extrapolate=False)
    out = np.exp(interp(np.log(np.clip(x, g.r_min, g.r_max))))
    above = x > g.r_max
    if np.any(above):
        out[above] = u.tail.values(x[above]) if u.tail is not None else u.values[-1]
    below = x < g.r_min
    if np.any(below):
        # near the origin log u is close to linear in r^k
        k = g.params.k
        z0, z1 = g.r[0] ** k, g.r[1] ** k
        y0, y1 = math.log(u.values[0]), math.log(u.values[1])
        out[below] = np.exp(y0 + (y1 - y0) / (z1 - z0) * (x[below] ** k - z0))
    return out


def to_self_similar(u: RadialField, tau: float, frame: SelfSimilarFrame,
                    target: Optional[RadialGrid] = None):
    """v(t, x) = R^{d-gamma} u(tau, R x) with t = log(R(tau)/R(0)).

    Returns ``(v, t)``; ``v`` lives on ``target`` (default: u's grid).
    """
    p = frame.params
    R = r_of_tau(tau, frame)
    grid = target or u.grid
    amp = R ** (p.d - p.gamma)
    vals = amp * _resample(u, R * grid.r)
    tail = u.tail.rescaled(amp, R) if u.tail is not None else None
    return RadialField(vals, grid, tail), math.log(R / frame.R0)


def from_self_similar(v: RadialField, t: float, frame: SelfSimilarFrame,
                      target: Optional[RadialGrid] = None):
    """Inverse of :func:`to_self_similar`; returns ``(u, tau)``."""
    p = frame.params
    R = frame.R0 * math.exp(t)
    tau = tau_of_r(R, frame)
    if frame.branch == "subcritical" and tau >= frame.T:
        raise BeyondExtinction("t maps past the extinction time")
    grid = target or v.grid
    amp = R ** (p.gamma - p.d)
    vals = amp * _resample(v, grid.r / R)
    tail = v.tail.rescaled(amp, 1 / R) if v.tail is not None else None
    return RadialField(vals, grid, tail), max(tau, 0.0)


def barenblatt_solution(spec: BarenblattSpec, frame: SelfSimilarFrame, tau: float,
                        grid: RadialGrid) -> RadialField:
    """Self-similar solution R^{gamma-d} B(y / R) in original variables."""
    p = spec.params
    R = r_of_tau(tau, frame)
    amp = R ** (p.gamma - p.d)
    return RadialField(amp * spec.values(grid.r / R), grid,
                       spec.tail().rescaled(amp, 1 / R))
