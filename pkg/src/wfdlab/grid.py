"""Geometric radial mesh, weighted quadrature and radial fields."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import bernoulli, gamma as gamma_fn

from .errors import BadBounds, GridMismatch
from .params import Params, derive

GREGORY_ORDER = 6


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d, 2 pi^{d/2} / Gamma(d/2)."""
    return 2 * math.pi ** (d / 2) / gamma_fn(d / 2)


@lru_cache(maxsize=None)
def gregory_end_weights(q: int) -> np.ndarray:
    """End corrections turning the trapezoid rule into a Gregory rule.

    The corrections c_j, j < q, cancel the Euler-Maclaurin boundary terms
    up to order q: sum_j c_j j^p = B_{p+1}/(p+1) for odd p, 0 for even p.
    """
    B = bernoulli(q + 1)
    A = np.array([[float(j) ** p if (j or p) else 1.0 for j in range(q)]
                  for p in range(q)])
    b = np.array([B[p + 1] / (p + 1) if p % 2 == 1 else 0.0 for p in range(q)])
    c = np.linalg.solve(A, b)
    c.setflags(write=False)
    return c


def log_weights(N: int, q: int = GREGORY_ORDER) -> np.ndarray:
    """Unit-spacing Gregory weights for N equispaced samples."""
    if N < 2 * q:
        q = max(1, N // 2)
    w = np.ones(N)
    w[0] = w[-1] = 0.5
    if q > 1:
        c = gregory_end_weights(q)
        w[:q] += c
        w[-q:] += c[::-1]
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-spaced nodes with weighted quadrature.

    Attributes
    ----------
    r : ndarray
        Nodes, r[i] = r_min * (r_max/r_min)**(i/(N-1)).
    s : ndarray
        Transformed nodes r**alpha.
    edges : ndarray
        Geometric midpoints between neighbouring nodes (N-1 faces).
    h : float
        Spacing in log r.
    quad_gamma, quad_beta : ndarray
        Weights for omega * int f(r) r^{d-1-gamma} dr and the beta analogue.
    quad_n : ndarray
        Weights for int g(s) s^{n-1} ds on the same nodes.
    """
    params: Params
    r_min: float
    r_max: float
    N: int
    r: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    h: float = field(repr=False)
    omega: float = field(repr=False)
    log_w: np.ndarray = field(repr=False)
    quad_gamma: np.ndarray = field(repr=False)
    quad_beta: np.ndarray = field(repr=False)
    quad_n: np.ndarray = field(repr=False)

    def power_weights(self, power: float) -> np.ndarray:
        """Weights for omega * int f(r) r^{power-1} dr."""
        return self.omega * self.h * self.log_w * self.r ** power

    def same_as(self, other: "RadialGrid") -> bool:
        return other is self or (
            self.N == other.N and self.r_min == other.r_min and self.r_max == other.r_max
            and self.params == other.params)


def make_grid(p: Params, r_min: float = 1e-4, r_max: float = 1e4, N: int = 2000) -> RadialGrid:
    """Geometric mesh on [r_min, r_max] with N nodes.

    Raises
    ------
    BadBounds
        Unless 0 < r_min < 1 < r_max and N >= 16.
    """
    r_min, r_max = float(r_min), float(r_max)
    if not (0 < r_min < 1 < r_max) or not math.isfinite(r_max) or int(N) != N or N < 16:
        raise BadBounds(f"need 0 < r_min < 1 < r_max and N >= 16, got "
                        f"r_min={r_min!r}, r_max={r_max!r}, N={N!r}")
    N = int(N)
    u = np.linspace(math.log(r_min), math.log(r_max), N)
    r = np.exp(u)
    r[0], r[-1] = r_min, r_max
    h = (u[-1] - u[0]) / (N - 1)
    alpha = derive(p).alpha
    omega = sphere_area(p.d)
    lw = log_weights(N)
    qg = omega * h * lw * r ** (p.d - p.gamma)
    qb = omega * h * lw * r ** (p.d - p.beta)
    for a in (r, lw, qg, qb):
        a.setflags(write=False)
    s = r ** alpha
    edges = np.sqrt(r[1:] * r[:-1])
    qn = alpha * qg / omega
    for a in (s, edges, qn):
        a.setflags(write=False)
    return RadialGrid(p, r_min, r_max, N, r, s, edges, h, omega, lw, qg, qb, qn)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Node values on a grid plus an optional analytic tail beyond r_max.

    ``tail`` is either None or an object with an ``integral(power, R)``
    method and a ``values(r)`` method (see profiles.BarenblattTail).
    """
    values: np.ndarray
    grid: RadialGrid
    tail: Optional[object] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise GridMismatch(f"field has shape {v.shape}, grid has {self.grid.N} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def tail_tag(self) -> str:
        return "none" if self.tail is None else "barenblatt-power"

    def with_values(self, values, tail=None) -> "RadialField":
        return RadialField(np.asarray(values, dtype=float), self.grid, tail)


def _check(f: RadialField, grid: Optional[RadialGrid]):
    if grid is not None and not grid.same_as(f.grid):
        raise GridMismatch("field lives on a different grid")


def integrate_gamma(f: RadialField, grid: Optional[RadialGrid] = None, tail: bool = False) -> float:
    """omega * int f r^{d-1-gamma} dr, i.e. int f |x|^{-gamma} dx for radial f.

    With ``tail=True`` and an analytic tail attached, the contribution of
    (r_max, inf) is added.
    """
    _check(f, grid)
    val = float(np.dot(f.grid.quad_gamma, f.values))
    if tail and f.tail is not None:
        val += f.tail.integral(f.grid.params.d - f.grid.params.gamma, f.grid.r_max)
    return val


def integrate_beta(f: RadialField, grid: Optional[RadialGrid] = None) -> float:
    """omega * int f r^{d-1-beta} dr."""
    _check(f, grid)
    return float(np.dot(f.grid.quad_beta, f.values))


def integrate_s(g, grid: RadialGrid) -> float:
    """int g(s) s^{n-1} ds with node values g."""
    return float(np.dot(grid.quad_n, np.asarray(g, dtype=float)))


def norm_qgamma(f: RadialField, q: float) -> float:
    """(int |f|^q |x|^{-gamma} dx)^{1/q}; for q = inf the max over nodes."""
    if not q > 0:
        raise ValueError("q must be positive")
    a = np.abs(f.values)
    if math.isinf(q):
        return float(a.max())
    return float(np.dot(f.grid.quad_gamma, a ** q)) ** (1.0 / q)


def gradient(f: RadialField) -> RadialField:
    """Radial derivative, second order on the non-uniform mesh (one-sided at ends)."""
    return RadialField(np.gradient(f.values, f.grid.r, edge_order=2), f.grid)


def face_difference(values, grid: RadialGrid) -> np.ndarray:
    """Derivative at faces, (f_{i+1} - f_i) / (r_face * h).

    This is the log-difference quotient used by every quadratic form in the
    package; it is invariant in form under r -> r**alpha.
    """
    return np.diff(values) / (grid.edges * grid.h)


def face_weights(grid: RadialGrid, power: float) -> np.ndarray:
    """Face weights for omega * int g r^{power-1} dr from face samples."""
    return grid.omega * grid.h * grid.edges ** power


# --- CSV ------------------------------------------------------------------

def grid_header(grid: RadialGrid) -> str:
    p = grid.params
    return (f"d={p.d}, m={p.m!r}, beta={p.beta!r}, gamma={p.gamma!r}, "
            f"allow_boundary={str(p.allow_boundary).lower()}, N={grid.N}, "
            f"r_min={grid.r_min!r}, r_max={grid.r_max!r}")


def write_field_csv(path, f: RadialField, extra_lines=()):
    from .csvio import write_csv
    rows = [(repr(float(r)), repr(float(v))) for r, v in zip(f.grid.r, f.values)]
    write_csv(path, ["r", "value"], rows, [grid_header(f.grid), *extra_lines])


def read_field_csv(path):
    """Read a field file; returns (RadialField, provenance dict).

    The grid is rebuilt from the header and checked against the r column.
    """
    from .csvio import read_csv
    from .errors import ConfigError
    from .params import params_from_mapping
    meta, header, rows = read_csv(path)
    if header[:2] != ["r", "value"]:
        raise ConfigError(f"{path}: expected columns r,value")
    try:
        p = params_from_mapping(meta)
        grid = make_grid(p, float(meta["r_min"]), float(meta["r_max"]), int(meta["N"]))
    except KeyError as exc:
        raise ConfigError(f"{path}: header lacks {exc}") from None
    data = np.array([[float(x) for x in row[:2]] for row in rows])
    if data.shape[0] != grid.N or not np.allclose(data[:, 0], grid.r, rtol=1e-12):
        raise GridMismatch(f"{path}: r column does not match the header grid")
    return RadialField(data[:, 1], grid), meta
