"""Command-line front end.

Subcommands: ``init-config`` (write a commented default configuration),
``run`` (advance the coupled system and emit diagnostics + checkpoints),
``verify-inequalities`` (frequency-shell inequality sweep) and
``diagnose`` (recompute the instantaneous diagnostics of a checkpoint).

Exit codes: 0 success, 2 configuration error, 3 numerical abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import besov_lab, diagnostics, parallel
from .checkpoint import CheckpointError, read_checkpoint
from .config import ConfigError, load_config, write_default_config
from .stepping import NumericalAbort, run_simulation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsfp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init-config", help="write a commented default config")
    p_init.add_argument("path", type=Path)
    p_init.add_argument("--force", action="store_true", help="overwrite an existing file")

    p_run = sub.add_parser("run", help="run a simulation from a config")
    p_run.add_argument("--config", type=Path, required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads for per-point kernels (default: hardware)")
    p_run.add_argument("--output", type=Path, default=None, help="override output directory")

    p_ver = sub.add_parser("verify-inequalities", help="run the inequality sweep")
    p_ver.add_argument("--config", type=Path, required=True)
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--threads", type=int, default=None)
    p_ver.add_argument("--output", type=Path, default=None)
    p_ver.add_argument("--nx", type=int, default=64,
                       help="lab grid resolution (doubled for the refinement check)")

    p_diag = sub.add_parser("diagnose", help="recompute diagnostics from a checkpoint")
    p_diag.add_argument("checkpoint", type=Path)
    p_diag.add_argument("--threads", type=int, default=None)
    return ap


def _set_threads(n) -> None:
    parallel.set_threads(n if n is not None else parallel.hardware_threads())


def cmd_init_config(args) -> int:
    write_default_config(args.path, force=args.force)
    print(f"wrote {args.path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    _set_threads(args.threads)
    out_dir = Path(args.output) if args.output else Path(cfg.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "diagnostics.csv"

    params = cfg.model_params()
    init = cfg.initial_state(seed=args.seed)
    stepper = cfg.stepper()
    try:
        final, records = run_simulation(
            params, init, stepper,
            pcfg=cfg.picard(), solver=cfg.mode,
            checkpoint_dir=out_dir, checkpoint_every=cfg.checkpoint_every)
    except NumericalAbort as err:
        diagnostics.write_records_csv(csv_path, err.records)
        print(f"numerical abort: {err}", file=sys.stderr)
        print(f"partial diagnostics flushed to {csv_path}", file=sys.stderr)
        return EXIT_NUMERICAL
    diagnostics.write_records_csv(csv_path, records)
    diagnostics.write_records_json(out_dir / "diagnostics.json", records)
    print(f"completed t = {final.t:g} in {len(records)} records -> {csv_path}")
    return EXIT_OK


def cmd_verify_inequalities(args) -> int:
    cfg = load_config(args.config)
    _set_threads(args.threads)
    out_dir = Path(args.output) if args.output else Path(cfg.directory)
    out_dir.mkdir(parents=True, exist_ok=True)

    seed = cfg.seed if args.seed is None else args.seed
    family = besov_lab.standard_family(seed=seed)
    from .spectral2d import GridSpec2D

    grid = GridSpec2D(args.nx)
    report = besov_lab.run_inequality_sweep(grid, family)
    refined = besov_lab.run_inequality_sweep(GridSpec2D(2 * grid.nx), family)
    shifts = {f"{fn}@r={r:g}": abs(refined.suprema[(fn, r)] - v) / v
              for (fn, r), v in report.suprema.items()}
    besov_lab.write_report_csv(out_dir / "inequalities.csv", report)
    besov_lab.write_report_json(out_dir / "inequalities.json", report,
                                extra={"refined_grid_nx": refined.grid_nx,
                                       "sup_shift_on_refinement": shifts})
    worst = max(shifts.values())
    print(f"swept {len(family)} members on {grid.nx}^2 and {2 * grid.nx}^2; "
          f"max supremum shift {worst:.3%} -> {out_dir / 'inequalities.csv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    state, params = read_checkpoint(args.checkpoint)
    _set_threads(args.threads)
    mon = diagnostics.MonitorConfig(p=params.p, q=params.q, alpha=params.alpha)
    rec = diagnostics.compute_record(state, params, mon)
    for name in diagnostics.CSV_FIELDS:
        print(f"{name} = {getattr(rec, name):.17g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "init-config": cmd_init_config,
        "run": cmd_run,
        "verify-inequalities": cmd_verify_inequalities,
        "diagnose": cmd_diagnose,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as err:
        print(f"checkpoint error: {err}", file=sys.stderr)
        return EXIT_IO
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
