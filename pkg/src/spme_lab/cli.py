"""``spme-lab`` command line.

Exit codes: 0 success, 1 assumption or check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .estimators import (ESTIMATE_HEADER, HminusOne, McEstimate, PathError, SupInf, SupLp, TerminalLp,
                         epsilon_sweep, ito_check, monotonicity_check, path_statistics, smoothing_rate_fit)
from .grid import gn_check
from .model import initial_field, validate_assumptions
from .moser import AdmissibilityError, format_ladder, format_value, ladder
from .solver import SolverError, solve_path


EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class RunDir:
    """Run directory; ``manifest.json`` is written on creation and updated as files appear."""

    def __init__(self, root, command, exp, seed, argv):
        self.path = Path(root) / f"{command}-{exp.spec_hash[:12]}-seed{seed}"
        self.path.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "command": command,
            "argv": argv,
            "config_source": exp.source,
            "config": exp.raw.decode("utf-8"),
            "spec_hash": exp.spec_hash,
            "seed": seed,
            "solver": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(exp.cfg).items()},
            "ladder": _ladder_summary(exp.spec),
            "version": __version__,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "status": "running",
            "files": [],
        }
        self._flush()

    def _flush(self):
        with open(self.path / "manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, name, header, rows):
        with open(self.path / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        self.add(name)

    def add(self, name):
        if name not in self.manifest["files"]:
            self.manifest["files"].append(name)
        self._flush()

    def __enter__(self):
        return self

    def __exit__(self, etype, exc, tb):
        if exc is not None:
            info = {"error": str(exc)}
            if isinstance(exc, PathError):
                info["failed_path"] = exc.path_index
            self.finish("failed", **info)
        return False

    def finish(self, status="complete", **info):
        self.manifest["status"] = status
        self.manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.manifest.update(info)
        self._flush()


def _ladder_summary(spec):
    mt = spec.phi.growth - 1.0
    if not mt > 0:
        return None
    try:
        lad = ladder(spec.d, mt, spec.mu, spec.alpha)
    except (AdmissibilityError, ValueError):
        return None
    return {k: format_value(getattr(lad, k))
            for k in ("mu_conj", "gamma_bar", "delta", "n0", "kappa", "theta_tilde")}


def _out_root(args):
    return args.out or os.environ.get("SPME_LAB_OUT") or "runs"


def _experiment(args):
    exp = load_config(args.config)
    if args.seed is not None:
        exp = exp.with_seed(args.seed)
    return exp


def _check_assumptions(exp, args):
    if getattr(args, "skip_validation", False):
        return True
    rep = validate_assumptions(exp.spec)
    if not rep.passed:
        print(rep.format())
        print(f"assumption check failed: {rep.first_failure.condition}", file=sys.stderr)
    return rep.passed


def _rd(args, command, exp):
    return RunDir(_out_root(args), command, exp, exp.spec.seed, sys.argv[1:] if args._argv is None else args._argv)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args):
    exp = _experiment(args)
    rep = validate_assumptions(exp.spec)
    print(rep.format())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _statistics(cfg):
    stats = [SupInf()] + [SupLp(p) for p in cfg.p_list] + [TerminalLp(p) for p in cfg.p_list] + [HminusOne()]
    return stats


def cmd_simulate(args):
    exp = _experiment(args)
    if not _check_assumptions(exp, args):
        return EXIT_FAIL
    M = args.paths or exp.paths
    spec, cfg = exp.spec, exp.cfg
    with _rd(args, "simulate", exp) as rd:
        try:
            tr = solve_path(spec, cfg, 0)
        except SolverError as exc:
            raise PathError(0, str(exc)) from exc
        tr.write_csv(rd.path / "trajectory_0000.csv")
        rd.add("trajectory_0000.csv")
        stats = _statistics(cfg)
        vals = path_statistics([spec], cfg, M, stats, args.threads)[:, 0, :] ** spec.alpha
        rd.write_csv("paths.csv", ["path"] + [s.name for s in stats],
                     [[m] + [repr(float(v)) for v in row] for m, row in enumerate(vals)])
        rows = []
        for j, s in enumerate(stats):
            if M >= 2:
                rows.append(McEstimate.from_values(s.name, vals[:, j], spec.seed, keep=False).row())
            else:
                v = float(vals[0, j])
                rows.append([s.name, "", 1, repr(v), "nan", "nan", "nan", spec.seed])
        rd.write_csv("estimates.csv", ESTIMATE_HEADER, rows)
        rd.finish()
    print(f"{'statistic':<20} {'mean':>14} {'stderr':>12}")
    for r in rows:
        print(f"{r[0]:<20} {float(r[3]):>14.6g} {float(r[4]):>12.3g}")
    print(f"run directory: {rd.path}")
    return EXIT_OK


def cmd_sweep_epsilon(args):
    exp = _experiment(args)
    if not exp.eps_list:
        raise ConfigError("sweep-epsilon needs experiment.eps_list", "experiment.eps_list")
    if not _check_assumptions(exp, args):
        return EXIT_FAIL
    M = args.paths or exp.paths
    with _rd(args, "sweep-epsilon", exp) as rd:
        res = epsilon_sweep(exp.spec, exp.cfg, M, exp.eps_list, args.threads)
        lo = min(e.mean for e in res.estimates)
        rows = [e.row(repr(eps)) + [repr(e.mean / lo) if lo > 0 else "nan"]
                for eps, e in zip(res.eps_list, res.estimates)]
        rd.write_csv("paths.csv", ["path"] + [f"eps={e!r}" for e in res.eps_list],
                     [[m] + [repr(float(e.values[m])) for e in res.estimates] for m in range(M)])
        rd.write_csv("estimates.csv", ESTIMATE_HEADER + ["ratio"], rows)
        rd.finish(max_min_ratio=res.ratio)
    print(f"{'epsilon':>10} {'E sup|u|^2':>14} {'stderr':>12} {'ratio':>8}")
    for r in rows:
        print(f"{float(r[1]):>10.3g} {float(r[3]):>14.6g} {float(r[4]):>12.3g} {float(r[8]):>8.4f}")
    print(f"max/min ratio: {res.ratio:.6g}")
    print(f"run directory: {rd.path}")
    return EXIT_OK


def cmd_smoothing(args):
    exp = _experiment(args)
    if not exp.rho_list:
        raise ConfigError("smoothing needs experiment.rho_list", "experiment.rho_list")
    if not _check_assumptions(exp, args):
        return EXIT_FAIL
    M = args.paths or exp.paths
    with _rd(args, "smoothing", exp) as rd:
        fit = smoothing_rate_fit(exp.spec, exp.cfg, M, exp.rho_list, args.threads)
        rd.write_csv("paths.csv", ["path"] + [f"rho={float(r)!r}" for r in fit.rho],
                     [[m] + [repr(float(e.values[m])) for e in fit.estimates] for m in range(M)])
        rd.write_csv("estimates.csv", ESTIMATE_HEADER, [e.row(repr(float(r))) for r, e in zip(fit.rho, fit.estimates)])
        ref = "nan" if fit.reference is None else repr(fit.reference)
        rd.write_csv("ratefit.csv", ["slope", "ci_low", "ci_high", "reference", "blow_up", "monotone_pathwise"],
                     [[repr(fit.slope), repr(fit.slope_ci[0]), repr(fit.slope_ci[1]), ref,
                       int(fit.blow_up), int(fit.monotone_pathwise)]])
        rd.finish()
    for r, e in zip(fit.rho, fit.estimates):
        print(f"rho={float(r):<8g} E sup|u|^2 = {e.mean:.6g} +- {e.stderr:.2g}")
    print(f"slope = {fit.slope:.4f}  95% CI [{fit.slope_ci[0]:.4f}, {fit.slope_ci[1]:.4f}]  reference -theta~ = {ref}")
    print(f"window statistic monotone on every path: {fit.monotone_pathwise}")
    print(f"run directory: {rd.path}")
    return EXIT_OK


def cmd_moser_ladder(args):
    try:
        lad = ladder(args.d, args.mtilde, args.mu, args.alpha)
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(format_ladder(lad, args.nfree, args.nmax))
    return EXIT_OK


def cmd_gn_check(args):
    exp = _experiment(args)
    spec, cfg = exp.spec, exp.cfg
    g = spec.grid
    n = cfg.n_steps(spec.T)
    if args.frozen:
        xi = initial_field(spec, g, 0)
        fields = [xi] * n
    else:
        tr = solve_path(spec, replace(cfg, record_every=1, keep_fields=True), 0)
        fields = list(tr.fields[1:])
    ok = True
    for lam in args.lam:
        r = gn_check(g, fields, cfg.dt, lam, args.slack)
        ok &= r.passed
        print(f"lambda={lam:g} q={r.q:g} N={r.constant:.6g} lhs={r.lhs:.6g} rhs={r.rhs:.6g} "
              f"{'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_ito_check(args):
    exp = _experiment(args)
    if not _check_assumptions(exp, args):
        return EXIT_FAIL
    M = args.paths or exp.paths
    with _rd(args, "ito-check", exp) as rd:
        ref = ito_check(exp.spec, exp.cfg, M, args.p, args.levels, args.qv, args.threads)
        rd.write_csv("estimates.csv", ESTIMATE_HEADER, [e.row(repr(dt)) for dt, e in zip(ref.dts, ref.estimates)])
        rd.finish(ratios=list(ref.ratios))
    for dt, e in zip(ref.dts, ref.estimates):
        print(f"dt={dt:<10g} mean cumulative residual = {e.mean:.6g} +- {e.stderr:.2g}")
    for r in ref.ratios:
        print(f"ratio (dt / dt/2) = {r:.4f}")
    print(f"run directory: {rd.path}")
    return EXIT_OK


def cmd_monotonicity_check(args):
    exp = _experiment(args)
    res = monotonicity_check(exp.spec, exp.spec.grid, args.pairs)
    print(f"pairs={res.n_pairs} max Phi-term={res.phi_term_max:.3e} fitted N={res.fitted_N:.6g} "
          f"(without Phi-term {res.fitted_N_linear:.6g})")
    ok = res.phi_term_max <= 1e-12
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="spme-lab", description="Simulate and check stochastic porous medium equations.")
    p.add_argument("--seed", type=int, default=None, help="override the noise seed of the config")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes for path loops")
    p.add_argument("--out", default=None, help="output root (default $SPME_LAB_OUT or ./runs)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="TOML experiment file")
        sp.set_defaults(func=fn)
        return sp

    with_config("validate", cmd_validate, "check the structural assumptions")
    for name, fn, help_ in (("simulate", cmd_simulate, "run paths and estimate moments"),
                            ("sweep-epsilon", cmd_sweep_epsilon, "sup-norm moments across viscosities"),
                            ("smoothing", cmd_smoothing, "window sup-norm moments and rate fit"),
                            ("ito-check", cmd_ito_check, "Itô identity residual under dt refinement")):
        sp = with_config(name, fn, help_)
        sp.add_argument("--paths", type=int, default=None, help="number of paths (default from config)")
        sp.add_argument("--skip-validation", action="store_true", help="do not check assumptions first")
        if name == "ito-check":
            sp.add_argument("--p", type=float, default=2.0)
            sp.add_argument("--levels", type=int, default=2)
            sp.add_argument("--qv", choices=("expected", "realized"), default="expected")
    sp = with_config("gn-check", cmd_gn_check, "Gagliardo-Nirenberg check along a trajectory")
    sp.add_argument("--lam", type=float, nargs="+", default=[2.0])
    sp.add_argument("--slack", type=float, default=0.05)
    sp.add_argument("--frozen", action="store_true", help="use the initial datum constant in time")
    sp = with_config("monotonicity-check", cmd_monotonicity_check, "operator monotonicity on random pairs")
    sp.add_argument("--pairs", type=int, default=500)
    sp = sub.add_parser("moser-ladder", help="print the Moser exponent ladder")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--mtilde", required=True)
    sp.add_argument("--mu", default="inf")
    sp.add_argument("--alpha", default="2")
    sp.add_argument("--nfree", type=float, default=10.0, help="stand-in for the unspecified constant N")
    sp.add_argument("--nmax", type=int, default=8)
    sp.set_defaults(func=cmd_moser_ladder)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args._argv = argv
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SolverError, AdmissibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
