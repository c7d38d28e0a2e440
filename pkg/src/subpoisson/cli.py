"""Command-line entry point: ``subpoisson <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import LEVELS, collective_operator, enumerate_basis, write_basis_csv, write_operator_csv
from .config import config_hash, load_config, preset_names
from .dynamics import bloch_pe, build_rate_table, loss_rate_scan
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    HorizonTooShortError,
    ResourceError,
    SolverError,
)
from .output import load_rate_table, save_rate_table, write_csv, write_json
from .params import hz, to_hz, transition_mismatch
from .trajectories import histogram_at, noise_sweep, run_ensemble, stabilization_time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

log = logging.getLogger("subpoisson")


def _sigmas(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("sigmas must be non-negative")
    return values


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="subpoisson",
        description="Loss-rate tables and atom-number statistics for Rydberg-dressed EIT loss.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker processes")

    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument(
        "--config",
        required=True,
        help=f"config JSON path or preset name ({', '.join(preset_names())})",
    )
    cfg.add_argument("--seed", type=int, default=None, help="override run.seed")

    p = sub.add_parser("loss-rates", parents=[common, cfg], help="Gamma_N against atom number")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--delta-l-hz", type=float, default=0.0, help="laser shift in Hz")

    p = sub.add_parser("evolve", parents=[common, cfg], help="ensemble evolution and histogram")
    p.add_argument("--rate-table", type=Path, help="reuse a table written by a previous run")
    p.add_argument("--trajectories-csv", action="store_true", help="also write every loss event")

    p = sub.add_parser("sweep", parents=[common, cfg], help="minimum variance against laser noise")
    p.add_argument("--sigmas-hz", type=_sigmas, help="comma-separated noise levels in Hz")

    p = sub.add_parser("validate", parents=[common], help="run the built-in consistency checks")
    p.add_argument("--quick", action="store_true", help="skip the loss-rate trend scan")

    p = sub.add_parser("dump-basis", parents=[common], help="write a basis and its operators as CSV")
    p.add_argument("--n", type=int, required=True, help="atom number")
    p.add_argument("--max-excitations", type=int, default=None)
    return parser


def _summary_base(resolved):
    doc = resolved.resolved()
    return {"tool_version": __version__, "config_sha256": config_hash(doc), "config": doc}


def cmd_loss_rates(args):
    resolved = load_config(args.config, seed=args.seed)
    params, settings = resolved.params, resolved.run.solver
    if not 1 <= args.n_min <= args.n_max:
        raise ConfigError("need 1 <= --n-min <= --n-max")
    sha = resolved.sha256()
    ns = range(args.n_min, args.n_max + 1)
    delta_l = hz(args.delta_l_hz)
    rows = []
    for n, rate, pe, pr in loss_rate_scan(params, ns, delta_l, settings):
        approx = params.gamma_e * params.loss_branching * bloch_pe(params, n)
        mismatch = to_hz(transition_mismatch(n, params) + delta_l)
        rows.append((n, rate, approx, pe, pr, mismatch))
        log.info("N = %d: Gamma = %.6g 1/s", n, rate)
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(
        args.out / "loss_rates.csv",
        ["n", "gamma_per_s", "bloch_gamma_per_s", "p_e", "p_r", "mismatch_hz"],
        rows,
        sha,
    )
    rates = np.array([r[1] for r in rows])
    summary = _summary_base(resolved)
    summary.update(
        argmin_n=int(rows[int(np.argmin(rates))][0]),
        min_gamma_per_s=float(rates.min()),
        delta_l_hz=args.delta_l_hz,
    )
    write_json(args.out / "loss_rates_summary.json", summary)
    print(f"argmin N = {summary['argmin_n']}  Gamma_min = {summary['min_gamma_per_s']:.6g} 1/s")
    return EXIT_OK


def _table_for(resolved, run_cfg, args, path=None):
    if path is not None:
        table = load_rate_table(path, run_cfg.params)
        if table.n_max < run_cfg.n_cap or not np.array_equal(table.delta_l_grid, run_cfg.delta_l_grid()):
            raise ConfigError(f"rate table {path} does not cover this run's N cap and laser-shift grid")
        return table
    log.info("building rate table up to N = %d on %d grid points", run_cfg.n_cap, run_cfg.delta_l_grid().size)
    return build_rate_table(run_cfg.params, run_cfg.n_cap, run_cfg.delta_l_grid(), run_cfg.solver, args.threads)


def _series_rows(series):
    return zip(series.times, series.mean, series.var, series.fano)


def cmd_evolve(args):
    resolved = load_config(args.config, seed=args.seed)
    cfg = resolved.run
    sha = resolved.sha256()
    table = _table_for(resolved, cfg, args, args.rate_table)
    args.out.mkdir(parents=True, exist_ok=True)
    save_rate_table(table, args.out / "rate_table.json")
    ens = run_ensemble(cfg, table=table, threads=args.threads)
    s = ens.series
    write_csv(args.out / "evolution.csv", ["t_s", "mean_n", "var_n", "fano"], _series_rows(s), sha)
    if args.trajectories_csv:
        rows = (
            (rec.index, k, t, rec.n0 - k - 1)
            for rec in ens.records
            for k, t in enumerate(rec.event_times)
        )
        write_csv(args.out / "trajectories.csv", ["trajectory_id", "event_index", "t_s", "n_after"], rows, sha)

    var_min, t_min, i_min = s.min_variance()
    summary = _summary_base(resolved)
    summary.update(
        trajectories=s.trajectories,
        failures=s.failures,
        rate_table_sha256=table.content_hash(),
        min_var=var_min,
        t_min_s=t_min,
        mean_at_min_var=float(s.mean[i_min]),
        fano_at_min_var=float(s.fano[i_min]),
    )
    try:
        t_stab = stabilization_time(s, cfg.params.n_target, cfg.stabilization_eps)
    except HorizonTooShortError:
        summary["stabilization_time_s"] = None
        write_json(args.out / "summary.json", summary)
        raise
    i = int(np.searchsorted(s.times, t_stab))
    hist = histogram_at(ens.records, t_stab)
    write_csv(
        args.out / "histogram.csv",
        ["n", "p_empirical", "p_poisson"],
        zip(hist.n, hist.p_empirical, hist.p_poisson),
        sha,
    )
    summary.update(
        stabilization_time_s=t_stab,
        mean_at_stabilization=float(s.mean[i]),
        var_at_stabilization=float(s.var[i]),
        fano_at_stabilization=float(s.fano[i]),
    )
    write_json(args.out / "summary.json", summary)
    print(
        f"t_stab = {t_stab * 1e6:.1f} us  Fano = {summary['fano_at_stabilization']:.4g}  "
        f"min var = {var_min:.4g} at {t_min * 1e6:.1f} us"
    )
    return EXIT_OK


def cmd_sweep(args):
    resolved = load_config(args.config, seed=args.seed)
    sigmas = [hz(x) for x in args.sigmas_hz] if args.sigmas_hz else list(resolved.sweep_sigmas)
    if not sigmas:
        raise ConfigError("no noise levels: pass --sigmas-hz or set sweep.sigmas_hz")
    sha = resolved.sha256()
    points = noise_sweep(resolved.run, sigmas, threads=args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [(to_hz(p.sigma), p.min_var, p.t_min, p.fano_min) for p in points]
    write_csv(args.out / "sweep.csv", ["sigma_hz", "min_var", "t_min_s", "fano_min"], rows, sha)
    summary = _summary_base(resolved)
    summary["sweep"] = [
        {"sigma_hz": r[0], "min_var": r[1], "t_min_s": r[2], "fano_min": r[3], "failures": p.series.failures}
        for r, p in zip(rows, points)
    ]
    write_json(args.out / "sweep_summary.json", summary)
    for r in rows:
        print(f"sigma = {r[0]:.6g} Hz  min var = {r[1]:.4g} at {r[2] * 1e6:.1f} us  Fano = {r[3]:.4g}")
    return EXIT_OK


def cmd_validate(args):
    from .validation import run_all

    report = run_all(include_slow=not args.quick)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "validation.json", report)
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def cmd_dump_basis(args):
    basis = enumerate_basis(args.n, max_excitations=args.max_excitations)
    args.out.mkdir(parents=True, exist_ok=True)
    write_basis_csv(basis, args.out / "basis.csv")
    for mu in LEVELS:
        for nu in LEVELS:
            if mu != nu:
                op = collective_operator(basis, mu, nu)
                write_operator_csv(op, args.out / f"{op.label}.csv")
    print(f"{len(basis)} states written to {args.out}")
    return EXIT_OK


COMMANDS = {
    "loss-rates": cmd_loss_rates,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "dump-basis": cmd_dump_basis,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, HorizonTooShortError, SolverError, ResourceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
