"""Command line entry point.

gridstates <experiment> [--config FILE] [flags]

Flags override config-file keys; everything lands in an ExperimentConfig.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed --audit convergence check.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .experiments import (
    EXPERIMENTS,
    AuditError,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    write_outputs,
)

_HELP = {
    "table1": "analytic peak-distribution optima per round count",
    "fig2_sweep": "effective squeezing vs input squeezing (plus Wigner dumps)",
    "fig4_noise": "single-channel noise sweeps with and without postselection",
    "fig5_shift_error": "logical shift-error probability vs input squeezing",
    "fig6_vacuum": "double-pass protocol on vacuum (grid states without squeezing)",
    "fig7_realistic": "experimental noise presets across rounds and inputs",
    "prepare": "prepare one logical state; dump FOMs, Wigner and density matrix",
}

# rough wall-clock guidance printed before long runs (single core)
_ESTIMATES = {
    "fig4_noise": "full N=2,3 sweep across 4 channels: roughly 30-60 min",
    "fig7_realistic": "both presets, N=1..3, 3 inputs: roughly 20-40 min",
    "fig2_sweep": "N=4 points take a few minutes each at 20+ dB",
    "fig5_shift_error": "N=4 points take a few minutes each at 20+ dB",
    "fig6_vacuum": "N=4 double pass takes a few minutes",
}


def _add_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="flat key=value config file")
    sp.add_argument("--out", help="output directory (default 'out')")
    sp.add_argument("--n", help="single round count N")
    sp.add_argument("--n-list", dest="n_list", help="comma list of round counts")
    sp.add_argument("--input-db", dest="input_db", help="input squeezing in dB")
    sp.add_argument(
        "--input-db-list", dest="input_db_list", help="comma list of input squeezings"
    )
    sp.add_argument("--lattice", help="square | rect:C | hex")
    sp.add_argument("--c0", help="logical zero coefficient as RE,IM")
    sp.add_argument("--c1", help="logical one coefficient as RE,IM")
    sp.add_argument("--preset", help="trapped_ion | microwave_cavity")
    sp.add_argument("--channel", help="restrict noise sweep to one channel kind")
    sp.add_argument("--gamma-t", dest="gamma_t", help="single dimensionless rate gamma*T")
    sp.add_argument("--points", help="sweep resolution")
    sp.add_argument("--fock-dim", dest="fock_dim", help="override the Fock cutoff")
    sp.add_argument("--jobs", help="worker processes for sweep points")
    sp.add_argument("--seed", help="recorded in metadata (all paths are deterministic)")
    sp.add_argument(
        "--postselect", action="store_const", const="true", help="project the qubit on the expected state"
    )
    sp.add_argument(
        "--long", action="store_const", const="true", help="enable minutes-long cells such as N=4"
    )
    sp.add_argument(
        "--audit",
        action="store_const",
        const="true",
        help="re-run a probe point at doubled Fock dim; exit 4 if FOMs move >= 1e-3",
    )
    sp.add_argument(
        "--no-figures", dest="no_figures", action="store_const", const="true", help="skip PNG rendering"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridstates",
        description="Grid-state preparation experiments: tables, sweeps, state dumps.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for exp in EXPERIMENTS:
        sp = sub.add_parser(exp, help=_HELP[exp])
        _add_flags(sp)
    return parser


_OVERRIDE_KEYS = (
    "out",
    "n",
    "n_list",
    "input_db",
    "input_db_list",
    "lattice",
    "c0",
    "c1",
    "preset",
    "channel",
    "gamma_t",
    "points",
    "fock_dim",
    "jobs",
    "seed",
    "postselect",
    "long",
    "audit",
    "no_figures",
)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in _OVERRIDE_KEYS}
    try:
        cfg = ExperimentConfig.resolve(args.experiment, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.get("long") and args.experiment in _ESTIMATES:
        print(f"note: {_ESTIMATES[args.experiment]}", file=sys.stderr)
    try:
        table, extras = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 4
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    paths = write_outputs(
        cfg, table, extras, cfg.get("out", "out"), figures=not cfg.get("no_figures")
    )
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
