"""Implicit radial solver for the self-similar (Fokker-Planck) form of the flow

    |x|^{-gamma} v_t = -div(|x|^{-beta} v grad(v^{m-1} - B^{m-1})),

with entropy diagnostics and exponential rate fitting.

Finite volumes with vertex unknowns: the control volume of node i is its
quadrature weight, faces sit at geometric midpoints, and the face flux is

    a_f * mean(v) * (P_{i+1} - P_i),   a_f = omega r_f^{d-2-beta} / h,

with P = v^{m-1} - B^{m-1} and zero flux at both ends.  Every profile
B_{C'} has P constant, so it is an exact discrete steady state, and the
discrete relative mass is conserved by telescoping.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.stats import linregress

from .errors import (
    ConfigError, InsufficientDecay, MassMismatch, MomentDiverges, NewtonDiverged,
    NumericalError, PositivityLost, RatesUnavailable, RelativeMassUnsolvable,
)
from .functionals import (
    best_match_entropy, bregman_power, fisher_information, relative_error_norms,
)
from .grid import RadialField, RadialGrid, make_grid, read_field_csv
from .params import Params, compare_m, derive, spectral_gap, zeta
from .profiles import (
    BarenblattSpec, SandwichConstants, c_of_mass, relative_mass, sandwich_constants,
    solve_relative_mass,
)


ROUNDOFF_REL_ERR = 1e-10
# F below this multiple of the profile mass is round-off (|w - 1| ~ 1e-13)
F_NOISE = 1e-26


@dataclass(frozen=True)
class Bump:
    """Gaussian in log r: amplitude * exp(-(log(r/center))^2 / (2 width^2))."""
    center: float = 1.0
    width: float = 0.5
    amplitude: float = 1.0

    def __call__(self, r):
        return self.amplitude * np.exp(-np.log(r / self.center) ** 2 / (2 * self.width ** 2))


@dataclass(frozen=True)
class EvolveConfig:
    """Everything a run needs.

    ``datum`` is one of ``'barenblatt'`` (B_{datum_C}), ``'perturbed'``
    (B_{datum_C} * (1 + eps * sum of bumps)) or ``'file'``.  ``C`` fixes
    the reference profile and is only honoured for m <= m_star; above it
    the reference is re-solved from zero relative mass.
    """
    params: Params
    C: Optional[float] = None
    r_min: float = 1e-4
    r_max: float = 1e4
    N: int = 1000
    datum: str = "perturbed"
    datum_C: float = 1.0
    eps: float = 0.1
    bumps: tuple = (Bump(),)
    datum_file: Optional[str] = None
    dt0: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 0.5
    change_lo: float = 1e-4
    change_hi: float = 1e-2
    adaptive: bool = True
    t_end: float = 5.0
    newton_tol: float = 1e-12
    newton_maxit: int = 40
    cadence: int = 1
    q_list: Optional[tuple] = None

    def __post_init__(self):
        if not self.dt0 > 0 or not self.t_end > 0:
            raise ConfigError("dt0 and t_end must be positive")
        if not 0 < self.change_lo < self.change_hi:
            raise ConfigError("need 0 < change_lo < change_hi")
        if self.datum not in ("barenblatt", "perturbed", "file"):
            raise ConfigError(f"unknown datum {self.datum!r}")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")

    def norms(self):
        if self.q_list is not None:
            return tuple(self.q_list)
        m = self.params.m
        return ((2 - m) / (1 - m), math.inf)


@dataclass(frozen=True, eq=False)
class State:
    grid: RadialGrid
    spec: BarenblattSpec
    v: np.ndarray
    t: float
    sandwich: SandwichConstants
    relmass0: float
    mass_scale: float
    B: np.ndarray = field(repr=False)
    Bp: np.ndarray = field(repr=False)
    af: np.ndarray = field(repr=False)

    def field(self) -> RadialField:
        return RadialField(self.v, self.grid, self.spec.tail())

    def relmass(self) -> float:
        return float(np.dot(self.grid.quad_gamma, self.v - self.B))


def initial_datum(cfg: EvolveConfig, grid: RadialGrid) -> RadialField:
    p = cfg.params
    base = BarenblattSpec(cfg.datum_C, p)
    if cfg.datum == "file":
        if not cfg.datum_file:
            raise ConfigError("datum = file needs datum_file")
        f, _ = read_field_csv(cfg.datum_file)
        if f.grid.N != grid.N or not np.allclose(f.grid.r, grid.r, rtol=1e-12):
            raise ConfigError("datum file grid differs from the run grid")
        return RadialField(f.values, grid, base.tail())
    vals = base.values(grid.r)
    if cfg.datum == "perturbed" and cfg.eps:
        vals = vals * (1 + cfg.eps * sum(b(grid.r) for b in cfg.bumps))
    return RadialField(vals, grid, base.tail())


def init_state(cfg: EvolveConfig, v0: Optional[RadialField] = None) -> State:
    """Build the initial state and the reference profile.

    For m > m_star the reference constant C makes the discrete relative mass
    of the datum vanish; otherwise ``cfg.C`` is required.
    """
    p = cfg.params
    grid = v0.grid if v0 is not None else make_grid(p, cfg.r_min, cfg.r_max, cfg.N)
    v0 = v0 if v0 is not None else initial_datum(cfg, grid)
    if compare_m(p, "m_star") > 0:
        spec = solve_relative_mass(v0)
    else:
        if cfg.C is None:
            raise RelativeMassUnsolvable("m <= m_star: the reference constant C must be given")
        spec = BarenblattSpec(float(cfg.C), p)
    sw = sandwich_constants(v0, p, spec)
    B = spec.values(grid.r)
    af = grid.omega * grid.edges ** (p.d - 2 - p.beta) / grid.h
    ms = float(np.dot(grid.quad_gamma, B))
    st = State(grid, spec, v0.values.copy(), 0.0, sw, 0.0, ms, B, spec.pressure(grid.r), af)
    return replace(st, relmass0=st.relmass())


def _newton(state: State, dt: float, tol: float, maxit: int) -> np.ndarray:
    p = state.grid.params
    m = p.m
    V, af, Bp = state.grid.quad_gamma, state.af, state.Bp
    vold = state.v
    v = vold.copy()
    prev = math.inf
    for it in range(maxit):
        P = v ** (m - 1) - Bp
        dP = (m - 1) * v ** (m - 2)
        vf = 0.5 * (v[1:] + v[:-1])
        dPf = np.diff(P)
        Phi = af * vf * dPf
        R = V * (v - vold) / dt
        R[:-1] += Phi
        R[1:] -= Phi
        dl = af * (0.5 * dPf - vf * dP[:-1])
        du = af * (0.5 * dPf + vf * dP[1:])
        diag = V / dt
        diag[:-1] += dl
        diag[1:] -= du
        ab = np.zeros((3, v.size))
        ab[0, 1:] = du
        ab[1] = diag
        ab[2, :-1] = -dl
        try:
            dv = solve_banded((1, 1), ab, -R)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NewtonDiverged(f"singular Jacobian: {exc}", it) from None
        if not np.all(np.isfinite(dv)):
            raise NewtonDiverged("non-finite Newton update", it)
        # damping keeps positivity; any damped step still conserves mass
        neg = dv < 0
        lam = 1.0
        if np.any(neg):
            lam = min(1.0, 0.5 * float(np.min(v[neg] / -dv[neg])))
        v = v + lam * dv
        if np.any(v <= 0):
            raise PositivityLost("Newton iterate lost positivity")
        err = float(np.max(np.abs(dv) / v))
        if lam == 1.0 and err < tol:
            return v
        if it >= 8 and err < 1e-10 and err >= 0.5 * prev:
            return v  # stagnating at round-off
        prev = err
    raise NewtonDiverged(f"no convergence in {maxit} iterations (last update {err:.2e})", maxit)


def step(state: State, dt: float, tol: float = 1e-12, maxit: int = 40) -> State:
    """One backward Euler step; raises NewtonDiverged or PositivityLost."""
    v = _newton(state, dt, tol, maxit)
    return replace(state, v=v, t=state.t + dt)


def _free_energy_nodes(state: State, v) -> float:
    m = state.grid.params.m
    return float(np.dot(state.grid.quad_gamma,
                        state.B ** m * bregman_power(v / state.B - 1, m))) / (m - 1)


@dataclass
class EvolutionTrace:
    """Sampled diagnostics of a run; columns are numpy arrays."""
    params: Params
    C: float
    grid_info: dict
    q_list: tuple
    columns: dict
    sandwich: Optional[SandwichConstants] = None
    fields: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0

    def __getitem__(self, key):
        return self.columns[key]

    def __len__(self):
        return len(self.columns["t"])

    @staticmethod
    def norm_key(q) -> str:
        return "lq_inf" if math.isinf(q) else f"lq_{q:.12g}"

    def header(self):
        return (["t", "F", "I", "G", "mu_star", "mass_err", "sup_rel_err"]
                + [self.norm_key(q) for q in self.q_list] + ["ep_ratio", "dt"])


def _diagnostics(state: State, dt: float, q_list) -> dict:
    p = state.grid.params
    fld = state.field()
    F = _free_energy_nodes(state, state.v)
    I = fisher_information(fld, state.spec)
    G = mu = math.nan
    if compare_m(p, "m_tilde_1") > 0:
        try:
            G, mu = best_match_entropy(fld, state.spec)
        except (MassMismatch, MomentDiverges):
            pass
    norms = relative_error_norms(fld, state.spec, q_list) if q_list else {}
    sup = float(np.max(np.abs(state.v / state.B - 1)))
    row = {"t": state.t, "F": F, "I": I, "G": G, "mu_star": mu,
           "mass_err": (state.relmass() - state.relmass0) / state.mass_scale,
           "sup_rel_err": sup}
    for q, val in norms.items():
        row[EvolutionTrace.norm_key(q)] = val
    # no ratio at round-off level: both sides are noise there
    row["ep_ratio"] = (p.m / (1 - p.m)) * I / F if F > F_NOISE * state.mass_scale else math.nan
    row["dt"] = dt
    return row


def run(cfg: EvolveConfig, v0: Optional[RadialField] = None, keep_fields: bool = False,
        callback: Optional[Callable[[State], None]] = None) -> EvolutionTrace:
    """Integrate to ``cfg.t_end``.

    With ``cfg.adaptive`` the step aims at a relative change of F equal to
    the geometric mean of (change_lo, change_hi); steps above change_hi are
    rejected and retried at half size.  Once F is at round-off level the
    step just grows toward ``dt_max``.  Failed Newton solves also halve dt
    until ``dt_min``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        q_list = cfg.norms()
    state = init_state(cfg, v0)
    target = math.sqrt(cfg.change_lo * cfg.change_hi)
    tr = EvolutionTrace(cfg.params, state.spec.C,
                        {"N": state.grid.N, "r_min": state.grid.r_min, "r_max": state.grid.r_max},
                        q_list, {}, state.sandwich)
    rows = []

    def record(st, dt):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rows.append(_diagnostics(st, dt, q_list))
        if keep_fields:
            tr.fields.append(st.v.copy())
        if callback is not None:
            callback(st)

    record(state, 0.0)
    dt = min(cfg.dt0, cfg.t_end)
    F_old = rows[0]["F"]
    nstep = 0
    while state.t < cfg.t_end * (1 - 1e-14):
        dt_try = min(dt, cfg.t_end - state.t)
        try:
            new = step(state, dt_try, cfg.newton_tol, cfg.newton_maxit)
        except (NewtonDiverged, PositivityLost):
            if dt_try / 2 < cfg.dt_min:
                raise
            dt = dt_try / 2
            tr.rejected += 1
            continue
        F_new = _free_energy_nodes(new, new.v)
        if cfg.adaptive:
            floor = F_NOISE * state.mass_scale
            rel = abs(F_new - F_old) / F_old if F_old > floor else 0.0
            if rel > cfg.change_hi and dt_try / 2 >= cfg.dt_min:
                dt = dt_try / 2
                tr.rejected += 1
                continue
            factor = 1.5 if rel == 0 else min(1.5, max(0.5, target / rel))
            dt_next = min(cfg.dt_max, dt_try * factor)
        else:
            dt_next = dt
        state, F_old = new, F_new
        nstep += 1
        if nstep % cfg.cadence == 0 or state.t >= cfg.t_end * (1 - 1e-14):
            record(state, dt_try)
        dt = dt_next
    tr.steps = nstep
    keys = tr.header()
    tr.columns = {k: np.array([row.get(k, math.nan) for row in rows]) for k in keys}
    return tr


# --- post-processing -----------------------------------------------------

@dataclass(frozen=True)
class EPIReport:
    max_mismatch: float
    mismatches: np.ndarray
    checked: int
    below_noise: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.below_noise or self.max_mismatch < self.tol


def verify_epi(trace: EvolutionTrace, tol: float = 0.02, floor: float = 1e-8) -> EPIReport:
    """Compare dF/dt (second-order differences in t) with -(m/(1-m)) I.

    Only interior samples with F above ``floor`` take part; if none do, the
    report is marked below the noise floor instead of forming 0/0 ratios.
    """
    t, F, I = trace["t"], trace["F"], trace["I"]
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    m = trace.params.m
    dF = np.gradient(F, t, edge_order=2)
    rhs = -(m / (1 - m)) * I
    sel = np.zeros(len(t), dtype=bool)
    sel[1:-1] = F[1:-1] > floor
    if not np.any(sel):
        return EPIReport(0.0, np.array([]), 0, True, tol)
    mis = np.abs(dF[sel] - rhs[sel]) / np.abs(rhs[sel])
    return EPIReport(float(mis.max()), mis, int(sel.sum()), False, tol)


@dataclass(frozen=True)
class RateFit:
    """Fitted exponential rates and the corresponding predictions."""
    t_a: float
    t_b: float
    rates: dict
    r2: dict
    predicted: dict
    verdicts: dict
    normalization: str

    HEADER = ("quantity", "fitted_rate", "predicted_rate", "r2", "verdict")

    def rows(self):
        return [(k, self.rates[k], self.predicted.get(k), self.r2[k], self.verdicts.get(k, ""))
                for k in self.rates]

    @property
    def passed(self) -> bool:
        return all(v == "PASS" for v in self.verdicts.values())


def predicted_rates(p: Params, q_list, normalization: str = "physical") -> dict:
    """Predicted exponential rates for F, G and the relative-error norms.

    ``normalization='formula'`` uses the closed-form eigenvalues directly;
    ``'physical'`` multiplies them by alpha^2, the factor between those
    values and the Hardy-Poincare constant of the radial variable.
    """
    if normalization not in ("physical", "formula"):
        raise ValueError("normalization must be 'physical' or 'formula'")
    gap = spectral_gap(p)
    scale = gap.alpha2 if normalization == "physical" else 1.0
    m = p.m
    lam = scale * gap.lambda_radial
    out = {"F": 2 * (1 - m) * lam, "G": 2 * (1 - m) * scale * gap.lambda_improved}
    ruc = 2 * (1 - m) ** 2 / (2 - m) * lam
    out["sup_rel_err"] = ruc * zeta(p, math.inf)
    for q in q_list:
        out[EvolutionTrace.norm_key(q)] = ruc * zeta(p, q)
    return out


def _fit(t, y):
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 3:
        return math.nan, math.nan
    res = linregress(t[ok], np.log(y[ok]))
    return -res.slope, res.rvalue ** 2


def fit_rate(trace: EvolutionTrace, window=None, normalization: str = "physical",
             rate_tol: float = 0.10, slack: float = 0.05) -> RateFit:
    """Least-squares exponential rates over a late-time window.

    Default window: the last half of the samples where F < 1e-2 F(0) and
    sup|w - 1| > 1e-10 (above that the relative error is round-off).  F
    must fall by at least three decades across the window with R^2 >=
    0.999, else :class:`InsufficientDecay`.

    Verdicts: F within ``rate_tol`` of its prediction; G at least as fast
    as F; each relative-error norm at least (1 - slack) times its
    predicted rate.
    """
    p = trace.params
    if compare_m(p, "m_c") <= 0:
        raise RatesUnavailable("no rate predictions for m <= m_c")
    t, F = trace["t"], trace["F"]
    if window is None:
        keep = F < 1e-2 * F[0]
        if "sup_rel_err" in trace.columns:
            keep &= trace["sup_rel_err"] > ROUNDOFF_REL_ERR
        idx = np.flatnonzero(keep)
        if idx.size < 6:
            raise InsufficientDecay("F never fell below 1e-2 F(0) long enough to fit")
        idx = idx[idx.size // 2:]
        a, b = int(idx[0]), int(idx[-1])
    else:
        a = int(np.searchsorted(t, window[0]))
        b = int(np.searchsorted(t, window[1], side="right")) - 1
    sl = slice(a, b + 1)
    if not (F[a] > 0 and F[b] > 0) or math.log10(F[a] / F[b]) < 3:
        decades = math.log10(F[a] / F[b]) if F[a] > 0 and F[b] > 0 else math.nan
        raise InsufficientDecay(f"F falls {decades:.2f} decades in the window; need >= 3")
    rates, r2 = {}, {}
    for key in ["F", "G", "sup_rel_err"] + [EvolutionTrace.norm_key(q) for q in trace.q_list]:
        if key in trace.columns and key not in rates:
            rates[key], r2[key] = _fit(t[sl], trace[key][sl])
    if not r2["F"] >= 0.999:
        raise InsufficientDecay(f"log F is not linear in the window (R^2={r2['F']:.5f})")
    pred = predicted_rates(p, trace.q_list, normalization)
    verdicts = {"F": "PASS" if abs(rates["F"] - pred["F"]) <= rate_tol * pred["F"] else "FAIL"}
    if math.isfinite(rates.get("G", math.nan)):
        verdicts["G"] = "PASS" if rates["G"] >= rates["F"] else "FAIL"
    for key in rates:
        if key in ("F", "G") or not math.isfinite(rates[key]):
            continue
        verdicts[key] = "PASS" if rates[key] >= (1 - slack) * pred[key] else "FAIL"
    return RateFit(float(t[a]), float(t[b]), rates, r2, pred, verdicts, normalization)


# --- trace CSV --------------------------------------------------------------

def trace_provenance(trace: EvolutionTrace):
    p = trace.params
    g = trace.grid_info
    qs = ";".join("inf" if math.isinf(q) else repr(float(q)) for q in trace.q_list)
    return [f"d={p.d}, m={p.m!r}, beta={p.beta!r}, gamma={p.gamma!r}, "
            f"allow_boundary={str(p.allow_boundary).lower()}",
            f"C={trace.C!r}, N={g['N']}, r_min={g['r_min']!r}, r_max={g['r_max']!r}",
            f"q_list={qs}, steps={trace.steps}, rejected={trace.rejected}"]


def write_trace_csv(path, trace: EvolutionTrace, extra=()):
    from .csvio import write_csv
    keys = trace.header()
    rows = [[float(trace[k][i]) for k in keys] for i in range(len(trace))]
    return write_csv(path, keys, rows, [*trace_provenance(trace), *extra])


def read_trace_csv(path) -> EvolutionTrace:
    from .csvio import read_csv
    from .params import params_from_mapping
    meta, header, rows = read_csv(path)
    for need in ("t", "F", "I"):
        if need not in header:
            raise ConfigError(f"{path}: trace lacks column {need!r}")
    p = params_from_mapping(meta)
    qs = tuple(math.inf if x == "inf" else float(x)
               for x in meta.get("q_list", "").split(";") if x)
    data = np.array([[float(x) if x != "" else math.nan for x in row] for row in rows])
    cols = {k: data[:, i] for i, k in enumerate(header)}
    return EvolutionTrace(p, float(meta.get("C", "nan")),
                          {"N": int(meta.get("N", 0)), "r_min": float(meta.get("r_min", "nan")),
                           "r_max": float(meta.get("r_max", "nan"))}, qs, cols,
                          steps=int(meta.get("steps", 0)), rejected=int(meta.get("rejected", 0)))
