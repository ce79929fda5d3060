"""Command line front end.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or config
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .csvio import parse_list, read_config, render_csv, write_csv
from .errors import ConfigError, NumericalError, RatesUnavailable, ValidationError, WfdError
from .params import (
    DERIVED_COLUMNS, PARAMS_COLUMNS, classify_regime, derive, derived_row,
    params_from_mapping, spectral_gap,
)

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass(frozen=True)
class RunManifest:
    verb: str
    config: str
    out: str
    seed: int
    jobs: int

    def provenance(self):
        return [f"verb={self.verb}, seed={self.seed}, config={os.path.basename(self.config or '')}"]


def _num(cfg, key, default, cast=float):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {cfg[key]!r}") from None


def _bool(cfg, key, default):
    if key not in cfg:
        return default
    val = cfg[key].strip().lower()
    if val not in ("true", "false", "1", "0", "yes", "no"):
        raise ConfigError(f"{key}: expected true/false, got {cfg[key]!r}")
    return val in ("true", "1", "yes")


def _params_line(p):
    return (f"d={p.d}, m={p.m!r}, beta={p.beta!r}, gamma={p.gamma!r}, "
            f"allow_boundary={str(p.allow_boundary).lower()}")


def _out_path(man: RunManifest, name: str) -> str:
    os.makedirs(man.out, exist_ok=True)
    return os.path.join(man.out, name)


def _grid(cfg, p):
    from .grid import make_grid
    return make_grid(p, _num(cfg, "r_min", 1e-4), _num(cfg, "r_max", 1e4),
                     _num(cfg, "N", 2000, int))


def _spec(cfg, p):
    from .profiles import BarenblattSpec, c_of_mass
    if "M" in cfg:
        return c_of_mass(_num(cfg, "M", None), p)
    return BarenblattSpec(_num(cfg, "C", 1.0), p)


# --- verbs -----------------------------------------------------------------

def cmd_classify(cfg, man):
    p = params_from_mapping(cfg)
    dv = derive(p)
    tags = classify_regime(p)
    lines = [f"params   {_params_line(p)}"]
    for k, v in dv.as_dict().items():
        lines.append(f"{k:<12} {'undefined' if v is None else f'{v:.6g}'}")
    try:
        gap = spectral_gap(p)
        lines.append(f"Lambda       {gap.lambda_:.6g}  branch ({gap.branch})")
        lines.append(f"Lambda_impr  {gap.lambda_improved:.6g}")
        lines.append(f"Lambda_rad   {gap.lambda_radial:.6g}  (x alpha^2 = {gap.lambda_radial_physical:.6g})")
        if gap.nonphysical_10:
            lines.append("note         lambda_10 < 0 (non-physical branch)")
        gap_cols = [gap.lambda_, gap.branch, gap.lambda_improved]
    except ValidationError as exc:
        lines.append(f"Lambda       none ({exc})")
        gap_cols = [math.nan, "none", math.nan]
    lines.append("tags         " + ", ".join(tags.tags()))
    if tags.symmetry == "symmetry-breaking":
        lines.append("             symmetry breaking")
    lines.append(f"prediction   {tags.prediction}")
    print("\n".join(lines))
    header = list(PARAMS_COLUMNS) + list(DERIVED_COLUMNS) + [
        "lambda", "branch", "lambda_improved", "tags", "prediction"]
    row = derived_row(p) + gap_cols + [";".join(tags.tags()), tags.prediction]
    if man.out:
        write_csv(_out_path(man, "classify.csv"), header, [row], man.provenance())
    return EXIT_OK


def cmd_profile(cfg, man):
    from .grid import write_field_csv
    from .profiles import barenblatt_eval
    p = params_from_mapping(cfg)
    spec = _spec(cfg, p)
    f = barenblatt_eval(spec, _grid(cfg, p))
    path = _out_path(man, "profile.csv")
    write_field_csv(path, f, [f"C={spec.C!r}", *man.provenance()])
    print(f"wrote {path} (C={spec.C:.12g}, N={f.grid.N})")
    return EXIT_OK


def cmd_functionals(cfg, man):
    from .functionals import evaluate_all
    from .grid import read_field_csv
    if "field" not in cfg:
        raise ConfigError("functionals needs 'field = <csv path>'")
    v, meta = read_field_csv(cfg["field"])
    p = v.grid.params
    spec = _spec(cfg, p)
    v = v.with_values(v.values, spec.tail())
    qs = parse_list(cfg.get("q_list", "inf"), lambda x: math.inf if x == "inf" else float(x))
    rep = evaluate_all(v, spec, q_list=qs)
    for name, val in zip(rep.header(), rep.row()):
        print(f"{name:<10} {val}")
    write_csv(_out_path(man, "functionals.csv"), rep.header(), [rep.row()],
              [_params_line(p), f"C={spec.C!r}", *man.provenance()])
    return EXIT_OK


def cmd_spectrum(cfg, man):
    from .spectrum import SpectralReport, compare_to_formulas
    p = params_from_mapping(cfg)
    sectors = parse_list(cfg.get("sectors", "0,1"), int)
    if not sectors:
        raise ConfigError("sectors list is empty")
    k = _num(cfg, "k", 3, int)
    tol = _num(cfg, "tol", 0.01)
    spec = _spec(cfg, p)
    grid = _grid(cfg, p)
    rep = compare_to_formulas(p, spec.C, grid, sectors, k)
    write_csv(_out_path(man, "spectrum.csv"), SpectralReport.HEADER, rep.rows(),
              [_params_line(p), f"C={spec.C!r}, N={grid.N}, r_min={grid.r_min!r}, "
               f"r_max={grid.r_max!r}", *man.provenance()])
    status = EXIT_OK
    for ell in sectors:
        print(f"sector {ell}: " + ", ".join(f"{x:.6g}" for x in rep.eigenvalues[ell]))
        if ell in rep.predictions:
            ok = rep.reliable[ell][0] and rep.rel_errors[ell] <= tol
            if rep.reliable[ell][0]:
                print(f"  {'PASS' if ok else 'FAIL'} prediction {rep.predictions[ell]:.6g}, "
                      f"rel error {rep.rel_errors[ell]:.2e}")
                status = status if ok else EXIT_VERDICT
            else:
                print(f"  prediction {rep.predictions[ell]:.6g} not reliable (at or above lambda_ess)")
    for note in rep.warnings:
        print("warning: " + note)
    return status


def evolve_config(cfg):
    from .evolve import Bump, EvolveConfig
    p = params_from_mapping(cfg)
    centers = parse_list(cfg.get("bump_center", "1.0"))
    widths = parse_list(cfg.get("bump_width", "0.5"))
    amps = parse_list(cfg.get("bump_amplitude", "1.0"))
    if not (len(centers) == len(widths) == len(amps)):
        raise ConfigError("bump_center, bump_width and bump_amplitude must have equal length")
    qs = None
    if "q_list" in cfg:
        qs = tuple(parse_list(cfg["q_list"], lambda x: math.inf if x == "inf" else float(x)))
    return EvolveConfig(
        params=p, C=_num(cfg, "C", None), r_min=_num(cfg, "r_min", 1e-4),
        r_max=_num(cfg, "r_max", 1e4), N=_num(cfg, "N", 1000, int),
        datum=cfg.get("datum", "perturbed"), datum_C=_num(cfg, "datum_C", 1.0),
        eps=_num(cfg, "eps", 0.1),
        bumps=tuple(Bump(c, w, a) for c, w, a in zip(centers, widths, amps)),
        datum_file=cfg.get("datum_file"), dt0=_num(cfg, "dt0", 1e-4),
        dt_min=_num(cfg, "dt_min", 1e-12), dt_max=_num(cfg, "dt_max", 0.5),
        change_lo=_num(cfg, "change_lo", 1e-4), change_hi=_num(cfg, "change_hi", 1e-2),
        adaptive=_bool(cfg, "adaptive", True), t_end=_num(cfg, "t_end", 5.0),
        newton_tol=_num(cfg, "newton_tol", 1e-12), cadence=_num(cfg, "cadence", 1, int),
        q_list=qs)


def cmd_evolve(cfg, man):
    from .evolve import run, verify_epi, write_trace_csv
    ecfg = evolve_config(cfg)
    tr = run(ecfg)
    path = _out_path(man, "trace.csv")
    write_trace_csv(path, tr, man.provenance())
    drift = float(np.nanmax(np.abs(tr["mass_err"])))
    epi = verify_epi(tr)
    print(f"wrote {path}: {len(tr)} samples, {tr.steps} steps, C={tr.C:.12g}")
    print(f"F: {tr['F'][0]:.4e} -> {tr['F'][-1]:.4e}; max mass drift {drift:.2e}; "
          f"EPI mismatch {epi.max_mismatch:.2e}")
    return EXIT_OK


def _rate_lines(tr, normalization):
    from .evolve import fit_rate, verify_epi
    lines, ok = [], True
    fit = None
    try:
        fit = fit_rate(tr, normalization=normalization)
        for q, rate, pred, r2, verdict in fit.rows():
            if verdict:
                rel = "(+-10%)" if q == "F" else ("(>= F)" if q == "G" else "(one-sided)")
                lines.append(f"{verdict} {q}-rate {rel}: fitted {rate:.5g}, "
                             f"predicted {pred:.5g}, R^2 {r2:.6f}")
        ok = fit.passed
    except RatesUnavailable as exc:
        lines.append(f"SKIP rates: {exc}")
    epi = verify_epi(tr)
    epi_ok = epi.passed
    lines.append(f"{'PASS' if epi_ok else 'FAIL'} EPI (<2%): max mismatch "
                 + ("below noise floor" if epi.below_noise else f"{epi.max_mismatch:.3e}"))
    drift = float(np.nanmax(np.abs(tr["mass_err"])))
    mass_ok = drift < 1e-10
    lines.append(f"{'PASS' if mass_ok else 'FAIL'} mass (<1e-10): max drift {drift:.3e}")
    return lines, ok and epi_ok and mass_ok, fit


def cmd_rates(cfg, man, trace_path=None, normalization="physical"):
    from .evolve import RateFit, read_trace_csv
    path = trace_path or cfg.get("trace")
    if not path:
        raise ConfigError("rates needs --trace or 'trace = <csv path>' in the config")
    tr = read_trace_csv(path)
    normalization = cfg.get("normalization", normalization)
    lines, ok, fit = _rate_lines(tr, normalization)
    print("\n".join(lines))
    if fit is not None:
        write_csv(_out_path(man, "rates.csv"), RateFit.HEADER, fit.rows(),
                  [_params_line(tr.params), f"window={fit.t_a!r}..{fit.t_b!r}, "
                   f"normalization={fit.normalization}", *man.provenance()])
    return EXIT_OK if ok else EXIT_VERDICT


def _sweep_point(args):
    from .evolve import fit_rate, predicted_rates, run
    cfg, m = args
    cfg = dict(cfg, m=repr(m))
    try:
        ecfg = evolve_config(cfg)
        tr = run(ecfg)
        pred = predicted_rates(ecfg.params, ecfg.norms(), cfg.get("normalization", "physical"))
        fit = fit_rate(tr, normalization=cfg.get("normalization", "physical"))
        return [m, fit.rates["F"], pred["F"], fit.r2["F"], fit.verdicts["F"], "ok"]
    except WfdError as exc:
        return [m, math.nan, math.nan, math.nan, "FAIL", f"{type(exc).__name__}: {exc}"]


def cmd_sweep(cfg, man):
    ms = parse_list(cfg.get("sweep_m", ""))
    if not ms:
        print("no runs", file=sys.stderr)
        return EXIT_USAGE
    base = {k: v for k, v in cfg.items() if k != "sweep_m"}
    base.setdefault("m", repr(ms[0]))
    jobs = max(1, man.jobs)
    if jobs == 1:
        rows = [_sweep_point((base, m)) for m in ms]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, [(base, m) for m in ms]))
    header = ["m", "fitted_F_rate", "predicted_F_rate", "r2", "verdict", "status"]
    path = _out_path(man, "sweep.csv")
    write_csv(path, header, rows,
              [f"d={base.get('d')}, beta={base.get('beta')}, gamma={base.get('gamma')}",
               *man.provenance()])
    for row in rows:
        print(f"m={row[0]!r}: fitted {row[1]:.5g} predicted {row[2]:.5g} {row[4]} {row[5]}")
    return EXIT_OK if all(r[4] == "PASS" for r in rows) else EXIT_VERDICT


VERBS = {
    "classify": cmd_classify, "profile": cmd_profile, "functionals": cmd_functionals,
    "spectrum": cmd_spectrum, "evolve": cmd_evolve, "rates": cmd_rates, "sweep": cmd_sweep,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="wfdlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"wfdlab {__version__}")
    ap.add_argument("verb", choices=sorted(VERBS))
    ap.add_argument("--config", help="key = value parameter file")
    ap.add_argument("--out", default=".", help="output directory (default: .)")
    ap.add_argument("--seed", type=int, default=0, help="recorded in every output header")
    ap.add_argument("--jobs", type=int, default=1, help="parallel runs for sweep")
    ap.add_argument("--trace", help="trace CSV for the rates verb")
    ap.add_argument("--normalization", choices=("physical", "formula"), default="physical",
                    help="eigenvalue scaling for predicted rates (rates verb)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    man = RunManifest(args.verb, args.config, args.out, args.seed, args.jobs)
    try:
        cfg = read_config(args.config) if args.config else {}
        if args.verb == "rates":
            return cmd_rates(cfg, man, args.trace, args.normalization)
        if not args.config:
            raise ConfigError(f"{args.verb} needs --config")
        return VERBS[args.verb](cfg, man)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
