"""Linearized operator per angular sector and its lowest eigenvalues.

The radial quadratic forms are written in s = r^alpha, where the flux and
measure weights share the power s^{n-1}:

    stiffness  int f_s^2 B s^{n-1} ds + ell(ell+d-2)/alpha^2 int f^2 B s^{n-3} ds
    mass       int f^2 B^{2-m} s^{n-1} ds

Eigenvalues of this pencil are in the normalization of the closed forms
(lambda_ess, lambda_01, lambda_10).  The Hardy-Poincare quotient in the
original radial variable, I_lin / (2(1-m) F_lin), equals alpha^2 times the
pencil's Rayleigh quotient; ``hardy_poincare`` carries that scaled value.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConvergenceFailure, DegenerateGap, GridMismatch, SpectralGapCollapse
from .grid import RadialGrid
from .params import Params, compare_m, derive, spectral_gap
from .profiles import BarenblattSpec


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """Symmetric tridiagonal stiffness and diagonal mass for one sector.

    ``diag``/``offdiag`` hold the stiffness; ``mass`` its diagonal
    counterpart.  ``constraint`` is the mass-weighted constant direction
    when the zero-mean condition applies (ell = 0 and m > m_star).
    """
    ell: int
    diag: np.ndarray = field(repr=False)
    offdiag: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    constraint: Optional[np.ndarray] = field(repr=False)
    params: Params = field(repr=False)
    grid: RadialGrid = field(repr=False)
    alpha2: float = 1.0
    potential: Optional[np.ndarray] = field(default=None, repr=False)

    def stiffness_dense(self) -> np.ndarray:
        K = np.diag(self.diag)
        K += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return K

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        out = self.diag * f
        out[:-1] += self.offdiag * f[1:]
        out[1:] += self.offdiag * f[:-1]
        return out

    def energy(self, f) -> float:
        """f^T K f as a sum of nonnegative face and node terms."""
        f = np.asarray(f, dtype=float)
        val = float(np.dot(-self.offdiag, np.diff(f) ** 2))
        if self.potential is not None:
            val += float(np.dot(self.potential, f * f))
        return val

    def rayleigh(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return self.energy(f) / float(np.dot(self.mass, f * f))


def assemble_sector(p: Params, C: float, grid: RadialGrid, ell: int) -> SectorOperator:
    """Build the pencil for sector ``ell`` on ``grid``."""
    if grid.params != p:
        raise GridMismatch("grid was built for different parameters")
    if ell < 0 or int(ell) != ell:
        raise ValueError("sector index must be a nonnegative integer")
    dv = derive(p)
    spec = BarenblattSpec(C, p)
    alpha = dv.alpha
    hs = alpha * grid.h
    s_f = grid.edges ** alpha
    # face form: B(s_f) s_f^{n-1} * ((f_{i+1}-f_i) / (s_f hs))^2 * (s_f hs)
    a = spec.values(grid.edges) * s_f ** (dv.n - 2) / hs
    diag = np.zeros(grid.N)
    diag[:-1] += a
    diag[1:] += a
    off = -a
    pot = None
    if ell:
        ang = ell * (ell + p.d - 2) / alpha ** 2
        pot = ang * grid.quad_n * spec.values(grid.r) / grid.s ** 2
        diag = diag + pot
    mass = grid.quad_n * spec.values(grid.r) ** (2 - p.m)
    constraint = None
    if ell == 0 and compare_m(p, "m_star") > 0:
        constraint = mass / math.sqrt(float(mass.sum()))
    return SectorOperator(int(ell), diag, off, mass, constraint, p, grid, alpha ** 2, pot)


def _solve(op: SectorOperator, count: int):
    scale = 1 / np.sqrt(op.mass)
    d = op.diag * scale ** 2
    e = op.offdiag * scale[:-1] * scale[1:]
    count = min(count, op.grid.N)
    try:
        w, y = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    except LinAlgError as exc:
        raise ConvergenceFailure(f"tridiagonal eigensolver failed: {exc}") from None
    # residual of the symmetric problem relative to the matrix norm
    anorm = float(np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0.0))
    Ay = d[:, None] * y
    Ay[:-1] += e[:, None] * y[1:]
    Ay[1:] += e[:, None] * y[:-1]
    res = float(np.max(np.linalg.norm(Ay - y * w, axis=0))) / anorm
    if res > 1e-10:
        raise ConvergenceFailure("eigenpair residual too large", res)
    f = y * scale[:, None]
    # the solver's error is relative to the matrix norm, which the tiny tail
    # masses make large; the factored Rayleigh quotient is nonnegative and
    # second order in the eigenvector error, so it resolves values near 0
    w = np.array([op.rayleigh(f[:, j]) for j in range(f.shape[1])])
    return w, f


def lowest_eigenvalues(op: SectorOperator, k: int, constrained: Optional[bool] = None,
                       return_vectors: bool = False):
    """The k smallest eigenvalues of the pencil.

    With an active constraint the constant direction is an exact kernel
    vector of the stiffness, hence an eigenvector; the constrained spectrum
    is the remaining one, obtained by dropping that mode.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if constrained is None:
        constrained = op.constraint is not None
    w, f = _solve(op, k + (1 if constrained else 0))
    if constrained:
        const = np.ones(op.grid.N)
        overlap = np.abs(op.mass @ (f * const[:, None])) / np.sqrt(
            np.einsum("ij,i,ij->j", f, op.mass, f) * float(op.mass.sum()))
        drop = int(np.argmax(overlap))
        keep = [j for j in range(len(w)) if j != drop][:k]
        w, f = w[keep], f[:, keep]
    else:
        w, f = w[:k], f[:, :k]
    if return_vectors:
        return w, f
    return w


@dataclass(frozen=True)
class SpectralReport:
    """Computed eigenvalues per sector next to the closed-form predictions."""
    eigenvalues: dict
    predictions: dict
    lambda_ess: float
    rel_errors: dict
    reliable: dict
    alpha2: float
    warnings: tuple = ()

    @property
    def hardy_poincare(self) -> dict:
        """Eigenvalues rescaled to the original-variable quotient."""
        return {ell: self.alpha2 * np.asarray(v) for ell, v in self.eigenvalues.items()}

    HEADER = ("sector", "index", "eigenvalue", "prediction", "rel_error", "reliable")

    def rows(self):
        out = []
        for ell in sorted(self.eigenvalues):
            for i, lam in enumerate(self.eigenvalues[ell]):
                pred = self.predictions.get(ell) if i == 0 else None
                err = self.rel_errors.get(ell) if i == 0 else None
                out.append((ell, i, float(lam), pred, err, bool(self.reliable[ell][i])))
        return out


def compare_to_formulas(p: Params, C: float, grid: RadialGrid, sectors=(0, 1), k: int = 3) -> SpectralReport:
    """Solve each sector and compare with lambda_10 (ell=0) and lambda_01 (ell=1).

    A prediction is reliable when the discrete branch it belongs to is
    selected (delta > (n+2)/2) and it lies strictly below lambda_ess.
    Computed eigenvalues at or above lambda_ess approximate the essential
    spectrum of the truncated problem and are flagged unreliable.
    """
    if compare_m(p, "m_star") == 0:
        raise DegenerateGap("m = m_star: no spectral gap to compare")
    dv = derive(p)
    spectral_gap(p)
    branch_ok = dv.delta > (dv.n + 2) / 2
    formula = {0: dv.lambda_10, 1: dv.lambda_01}
    eig, preds, errs, rel = {}, {}, {}, {}
    for ell in sectors:
        op = assemble_sector(p, C, grid, ell)
        w = lowest_eigenvalues(op, k)
        eig[ell] = w
        flags = [bool(x < dv.lambda_ess) for x in w]
        if ell in formula:
            pred = formula[ell]
            preds[ell] = pred
            errs[ell] = abs(w[0] - pred) / abs(pred) if pred else math.inf
            if not (branch_ok and pred < dv.lambda_ess):
                flags[0] = False
        rel[ell] = flags
    notes = ()
    if not any(any(f) for f in rel.values()):
        msg = (f"all computed eigenvalues sit at or above lambda_ess={dv.lambda_ess:.6g}; "
               "the spectral gap has collapsed")
        warnings.warn(msg, SpectralGapCollapse, stacklevel=2)
        notes = (msg,)
    return SpectralReport(eig, preds, dv.lambda_ess, errs, rel, dv.alpha ** 2, notes)
