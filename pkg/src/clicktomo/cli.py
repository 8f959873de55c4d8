"""Command-line interface: ``clicktomo {simulate,reconstruct,report,sweep,wigner}``.

Exit codes: 0 success, 2 usage or configuration error, 3 file I/O error,
4 invalid input data, 5 solver did not converge (outputs are still written),
6 invalid POVM input (well-formed JSON whose matrix is not a valid POVM;
a file that is not JSON at all is a usage error).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .click_statistics import (
    build_outcome_matrix,
    match_probes,
    read_counts_csv,
    write_counts_csv,
)
from .config import ConfigError, RunConfig, load_config, with_overrides
from .detector_simulator import ArrayDetectorModel, simulate_counts, true_povm, tune_model
from .exceptions import PovmError, TomographyError
from .figures_of_merit import merit_report, propagate_uncertainty
from .povm_solver import PovmMatrix, read_povm_json, reconstruct, sweep_smoothing, write_povm_json
from .probe_states import (
    build_probe_matrix,
    sufficient_truncation,
    default_probe_ladder,
    read_probes_csv,
    write_probes_csv,
)
from .wigner import povm_wigner

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NOT_CONVERGED = 5
EXIT_BAD_POVM = 6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _metadata(cfg: RunConfig, command: str) -> dict:
    meta = {
        "tool": "clicktomo",
        "version": __version__,
        "command": command,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
    }
    if cfg.metadata:
        meta["user"] = cfg.metadata
    return meta


def _comment(cfg: RunConfig, command: str) -> str:
    return f"clicktomo {__version__} command={command} config_sha256={cfg.digest()} seed={cfg.seed}"


def _config(args, overrides: dict) -> RunConfig:
    try:
        cfg = load_config(args.config)
        return with_overrides(cfg, **overrides)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from None
    except (ConfigError, TomographyError) as exc:
        raise CliError(f"configuration error: {exc}", EXIT_USAGE) from None


def _solver_overrides(args) -> dict:
    return {
        "solver.epsilon": getattr(args, "epsilon", None),
        "solver.max_iterations": getattr(args, "max_iterations", None),
        "solver.method": getattr(args, "method", None),
        "solver.residual": getattr(args, "residual", None),
        "truncation_sigma": getattr(args, "truncation_sigma", None),
    }


def _read_inputs(args, cfg: RunConfig):
    """Counts, probes in count order, outcome matrix and probe matrix."""
    try:
        counts = read_counts_csv(args.counts)
        probes = read_probes_csv(args.probes, cfg.calibration)
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}", EXIT_IO) from None
    except TomographyError as exc:
        raise CliError(f"invalid input: {exc}", EXIT_DATA) from None
    try:
        probes = match_probes(counts, probes)
        P = build_outcome_matrix(counts)
        m = sufficient_truncation(max(p.mean_photon for p in probes), cfg.truncation_sigma)
        F = build_probe_matrix(probes, m)
    except TomographyError as exc:
        raise CliError(f"invalid input: {exc}", EXIT_DATA) from None
    return counts, probes, P, F


def _read_povm(path) -> PovmMatrix:
    try:
        povm = read_povm_json(path)
    except OSError as exc:
        raise CliError(f"cannot read POVM: {exc}", EXIT_IO) from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        # not JSON at all: the caller passed the wrong file
        raise CliError(f"{path} is not a JSON document: {exc}", EXIT_USAGE) from None
    except TomographyError as exc:
        raise CliError(f"invalid POVM file {path}: {exc}", EXIT_BAD_POVM) from None
    try:
        povm.check()
    except PovmError as exc:
        raise CliError(f"invalid POVM file {path}: {exc}", EXIT_BAD_POVM) from None
    return povm


def _writing(fn, *a, **kw):
    try:
        fn(*a, **kw)
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_IO) from None


def cmd_simulate(args) -> int:
    cfg = _config(args, {
        "seed": args.seed,
        "simulator.n_pixels": args.pixels,
        "simulator.efficiency": args.efficiency,
        "simulator.dark_prob": args.dark_prob,
        "simulator.xtalk_prob": args.xtalk_prob,
        "simulator.target_dark": args.target_dark,
        "simulator.target_xtalk": args.target_xtalk,
        "simulator.n_probes": args.n_probes,
        "simulator.trials_per_probe": args.trials,
    })
    sim = cfg.simulator
    try:
        if sim.target_dark is not None or sim.target_xtalk is not None:
            model = tune_model(
                efficiency=sim.efficiency,
                target_dark=sim.target_dark or 0.0,
                target_xtalk=sim.target_xtalk or 0.0,
                n_pixels=sim.n_pixels,
            )
        else:
            model = ArrayDetectorModel(sim.n_pixels, sim.efficiency, sim.dark_prob, sim.xtalk_prob)
        probes = default_probe_ladder(sim.n_probes)
        counts = simulate_counts(model, probes, sim.trials_per_probe, cfg.seed)
    except (TomographyError, ValueError) as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_USAGE) from None
    note = _comment(cfg, "simulate")
    _writing(write_counts_csv, args.counts_out, counts, comment=note)
    _writing(write_probes_csv, args.probes_out, probes, comment=note)
    if args.truth_out:
        m = sufficient_truncation(max(p.mean_photon for p in probes), cfg.truncation_sigma)
        meta = _metadata(cfg, "simulate")
        meta["model"] = {
            "n_pixels": model.n_pixels,
            "efficiency": model.efficiency,
            "dark_prob": model.dark_prob,
            "xtalk_prob": model.xtalk_prob,
        }
        _writing(write_povm_json, args.truth_out, true_povm(model, m), metadata=meta)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args, _solver_overrides(args))
    _, _, P, F = _read_inputs(args, cfg)
    povm, diag = reconstruct(P, F, cfg.solver)
    meta = _metadata(cfg, "reconstruct")
    _writing(write_povm_json, args.out, povm, epsilon=cfg.solver.epsilon,
             diagnostics=diag, metadata=meta)
    if not diag.converged:
        print(f"warning: solver did not converge after {diag.iterations_used} iterations",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_report(args) -> int:
    if args.mc is not None and args.mc < -1:
        raise CliError(f"--mc must be >= 0, got {args.mc}", EXIT_USAGE)
    overrides = _solver_overrides(args)
    mc_flag = args.mc if args.mc is not None and args.mc > 0 else None
    overrides.update({"mc.samples": mc_flag, "seed": args.seed,
                      "mc.amplitude_rel_sigma": args.amplitude_sigma})
    cfg = _config(args, overrides)
    povm = _read_povm(args.povm)
    try:
        with open(args.povm, encoding="utf-8") as fh:
            stored_eps = json.load(fh).get("epsilon")
    except (OSError, ValueError):
        stored_eps = None
    # no flag or --mc 0: central values only; bare --mc: samples from the config
    n_mc = 0 if args.mc is None or args.mc == 0 else cfg.mc.samples
    try:
        if n_mc > 0:
            if not (args.counts and args.probes):
                raise CliError("--mc needs --counts and --probes", EXIT_USAGE)
            counts, probes, _, _ = _read_inputs(args, cfg)
            report = propagate_uncertainty(
                counts, probes,
                amplitude_rel_sigma=cfg.mc.amplitude_rel_sigma,
                n_samples=n_mc,
                config=cfg.solver,
                seed=cfg.seed,
                truncation_sigma=cfg.truncation_sigma,
                correlated=cfg.mc.correlated,
                max_workers=args.threads,
            )
            # central values always describe the POVM being reported
            central = merit_report(povm)
            report.efficiency = central.efficiency
            report.dark_prob = central.dark_prob
            report.xtalk_prob = central.xtalk_prob
        else:
            report = merit_report(povm)
        report.epsilon = stored_eps if stored_eps is not None else cfg.solver.epsilon
    except CliError:
        raise
    except TomographyError as exc:
        raise CliError(f"cannot evaluate figures of merit: {exc}", EXIT_DATA) from None
    doc = report.to_dict()
    doc["metadata"] = _metadata(cfg, "report")
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        _writing(Path(args.out).write_text, text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if report.excluded_samples:
        print(f"warning: {report.excluded_samples} Monte-Carlo samples did not converge",
              file=sys.stderr)
    return EXIT_OK


def _eps_grid(args) -> list[float]:
    if args.eps is not None:
        try:
            grid = [float(v) for v in args.eps.split(",") if v.strip()]
        except ValueError:
            raise CliError(f"--eps must be a comma-separated list, got {args.eps!r}", EXIT_USAGE) from None
        if not grid:
            raise CliError("--eps needs at least one smoothing weight", EXIT_USAGE)
        return grid
    lo, hi, n = args.eps_log
    if not (0 < lo <= hi <= 1) or int(n) < 1:
        raise CliError("--eps-log needs 0 < LO <= HI <= 1 and N >= 1", EXIT_USAGE)
    return [float(v) for v in np.logspace(np.log10(lo), np.log10(hi), int(n))]


def cmd_sweep(args) -> int:
    cfg = _config(args, _solver_overrides(args))
    grid = _eps_grid(args)
    if any(not 0 <= e <= 1 for e in grid):
        raise CliError("smoothing weights must lie in [0, 1]", EXIT_USAGE)
    _, _, P, F = _read_inputs(args, cfg)
    i, n = args.target
    if not (0 <= i < F.truncation_dim and 0 <= n < P.n_outcomes):
        raise CliError(f"--target {i} {n} is outside the POVM", EXIT_USAGE)
    rows = sweep_smoothing(P, F, grid, target=(i, n), config=cfg.solver, max_workers=args.threads)

    def write(path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {_comment(cfg, 'sweep')} target={i},{n}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", f"theta_{i}_{n}"])
            for eps, val in rows:
                w.writerow([repr(eps), repr(val)])

    _writing(write, args.out)
    return EXIT_OK


def cmd_wigner(args) -> int:
    cfg = _config(args, {})
    povm = _read_povm(args.povm)
    if not 0 <= args.outcome < povm.n_outcomes:
        raise CliError(f"--outcome must lie in [0, {povm.n_outcomes - 1}]", EXIT_USAGE)
    if args.extent <= 0 or args.resolution < 2:
        raise CliError("--extent must be > 0 and --resolution >= 2", EXIT_USAGE)
    grid = povm_wigner(povm.column(args.outcome), args.extent, args.resolution)
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    meta = _metadata(cfg, "wigner")
    meta["outcome"] = args.outcome
    if fmt == "json":
        _writing(grid.write_json, args.out, metadata=meta)
    else:
        _writing(grid.write_csv, args.out, comment=f"{_comment(cfg, 'wigner')} outcome={args.outcome}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clicktomo",
        description="Detector tomography for click-detector arrays.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for sweeps and Monte Carlo (default: CPU count)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--epsilon", type=float, help="smoothing weight in [0, 1]")
    solver.add_argument("--max-iterations", type=int)
    solver.add_argument("--method", choices=["interior_point", "projected_gradient"])
    solver.add_argument("--residual", choices=["frobenius", "squared"])
    solver.add_argument("--truncation-sigma", type=float, help="photon-number truncation rule")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--counts", required=True, help="threshold counts CSV")
    inputs.add_argument("--probes", required=True, help="probe calibration CSV")

    p = sub.add_parser("simulate", parents=[common], help="simulate counts from a synthetic array")
    p.add_argument("--counts-out", required=True)
    p.add_argument("--probes-out", required=True)
    p.add_argument("--truth-out", help="also write the exact POVM as JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--pixels", type=int)
    p.add_argument("--efficiency", type=float)
    p.add_argument("--dark-prob", type=float, help="per-pixel dark-click probability")
    p.add_argument("--xtalk-prob", type=float, help="pairwise cross-talk probability")
    p.add_argument("--target-dark", type=float, help="tune the model to this dark-count read-off")
    p.add_argument("--target-xtalk", type=float, help="tune the model to this cross-talk read-off")
    p.add_argument("--n-probes", type=int)
    p.add_argument("--trials", type=int, help="trials per probe")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[common, solver, inputs], help="reconstruct the POVM")
    p.add_argument("--out", required=True, help="POVM JSON output")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("report", parents=[common, solver], help="figures of merit as JSON")
    p.add_argument("--povm", required=True)
    p.add_argument("--mc", type=int, nargs="?", const=-1, metavar="N",
                   help="run N Monte-Carlo samples for uncertainties (bare flag: config "
                        "value, default 100; 0 or absent: none)")
    p.add_argument("--amplitude-sigma", type=float, help="relative probe amplitude uncertainty")
    p.add_argument("--seed", type=int)
    p.add_argument("--counts", help="threshold counts CSV (needed with --mc)")
    p.add_argument("--probes", help="probe calibration CSV (needed with --mc)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", parents=[common, solver, inputs],
                       help="track one POVM element over smoothing weights")
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--eps", help="comma-separated smoothing weights")
    grid.add_argument("--eps-log", nargs=3, type=float, metavar=("LO", "HI", "N"),
                      default=(1e-3, 1.0, 13), help="log-spaced grid (default 1e-3 1 13)")
    p.add_argument("--target", nargs=2, type=int, default=(0, 1), metavar=("I", "N"),
                   help="POVM element (photon number, outcome); default 0 1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wigner", parents=[common], help="tabulate a POVM element's Wigner function")
    p.add_argument("--povm", required=True)
    p.add_argument("--outcome", type=int, required=True)
    p.add_argument("--extent", type=float, default=4.0)
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_wigner)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("clicktomo: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"clicktomo: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
