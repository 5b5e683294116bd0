"""Command-line entry point.

    cvmd <case1|case2|case3|check> --config FILE [--seed N] [--steps N] [--out DIR]

Exit status: 0 on success, 1 when an invariant fails, 2 for configuration
errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..core import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2
MOMENTUM_TOL = 1e-10


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvmd", description="Control-volume MD budgets and pressures.")
    p.add_argument("case", choices=("case1", "case2", "case3", "check"))
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    return p


def _progress(quiet):
    if quiet:
        return None

    def report(*args):
        if len(args) == 3:
            k, n, tot = args
            print(f"  member {k + 1}: step {n}/{tot}", file=sys.stderr, flush=True)
        else:
            n, tot = args
            print(f"  step {n}/{tot}", file=sys.stderr, flush=True)

    return report


def build_config(args) -> RunConfig:
    overrides = {k: getattr(args, k) for k in ("seed", "steps") if getattr(args, k) is not None}
    if args.config is None:
        if args.case != "check":
            raise ConfigError(f"{args.case} needs --config")
        return RunConfig().with_overrides(**overrides)
    if not args.config.is_file():
        raise ConfigError(f"configuration file not found: {args.config}")
    return load_config(args.config, **overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    prog = _progress(args.quiet)
    try:
        if args.case == "case1":
            from .case1 import run_case1
            res = run_case1(cfg, args.out, progress=prog)
            print(f"mass violations {res.mass_violations}")
            print(f"momentum residual ratio {res.momentum_ratio}")
            print(f"energy residual ratio cv {res.energy_ratio_cv:.4e} pooled "
                  f"{res.energy_ratio_pooled:.4e}")
            return EXIT_OK if res.invariants_ok else EXIT_INVARIANT
        if args.case == "case2":
            from .case2 import run_case2
            res = run_case2(cfg, args.out, progress=prog)
            f = res.final
            print(f"CV     kappa {f['kappa_cv']:.6f} sigma {f['sigma_cv']:.6f} Pi {f['pi_cv']:.6f}")
            print(f"virial kappa {f['kappa_vir']:.6f} sigma {f['sigma_vir']:.6f} Pi {f['pi_vir']:.6f}")
            print(f"PD(Pi) {res.pd_total:.4f}%")
            return EXIT_OK if res.initial_sigma_vir == 0.0 else EXIT_INVARIANT
        if args.case == "case3":
            from .case3 import run_case3
            res = run_case3(cfg, args.out, progress=prog)
            for t in res.velocity:
                print(f"t={t:g}: velocity RMS deviation {res.velocity_rms(t):.4f}")
            print(f"whole-liquid balance residual {res.balance_residual_max:.3e}")
            return EXIT_OK if res.balance_residual_max <= MOMENTUM_TOL else EXIT_INVARIANT
        from .checks import run_check
        results = run_check(cfg)
        return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
