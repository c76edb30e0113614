"""Command-line interface.

Subcommands:
  run    one scenario / policy over a seed list
  bench  the full scenario x policy grid
  sweep  a beta or M hyperparameter sweep

Exit codes: 0 success, 1 configuration error, 2 runtime contract violation.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError, ContractViolation
from .harness import (
    BETA_GRID,
    M_GRID,
    POLICY_NAMES,
    RunConfig,
    emit_results,
    emit_sweep,
    manifest_for,
    run_bench,
    run_config,
    run_sweep,
)


class _Parser(argparse.ArgumentParser):
    """argparse maps its own errors to exit 2; we reserve 2 for runtime
    contract violations, so CLI mistakes raise ConfigurationError instead."""

    def error(self, message):
        raise ConfigurationError(message)


def _seed_list(text: str) -> tuple:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad seed list {text!r}: {exc}") from exc
    if not seeds:
        raise ConfigurationError("seed list must be non-empty")
    return seeds


def _value_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad value list {text!r}: {exc}") from exc


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scenario", default="S1",
                   help="S1..S4 or a scenario definition file")
    p.add_argument("--policy", default="lucb", choices=POLICY_NAMES)
    p.add_argument("--T", type=int, default=100_000, help="episode horizon")
    p.add_argument("--M", type=int, default=5, help="channels selected per round")
    p.add_argument("--d", type=int, default=8, help="context dimension")
    p.add_argument("--seeds", type=_seed_list, default=(1, 2, 3, 4, 5),
                   help="comma-separated seed list")
    p.add_argument("--feedback", default="full", choices=("full", "bandit"))
    p.add_argument("--beta", type=float, default=1.0,
                   help="linear policy exploration weight")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="neural policy exploration weight")
    p.add_argument("--depth", type=int, default=2, help="network layer count")
    p.add_argument("--width", type=int, default=16, help="network hidden width")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.005, help="optimizer learning rate")
    p.add_argument("--buffer", type=int, default=4096, help="replay buffer capacity")
    p.add_argument("--target-mode", default="observed", choices=("literal", "observed"),
                   dest="target_mode")
    p.add_argument("--index-mode", default="literal", choices=("literal", "composite"),
                   dest="index_mode")
    p.add_argument("--host", default="none", choices=("none", "rca"),
                   help="run a contextual policy under block-epoch scheduling")
    p.add_argument("--lexp", type=float, default=2.0,
                   help="cycle-index exploration scale")
    p.add_argument("--per-arm", action="store_true", dest="per_arm",
                   help="independent model per channel instead of one shared")
    p.add_argument("--mirror-inputs", action="store_true", dest="mirror_inputs",
                   help="feed duplicated context halves to the network")
    p.add_argument("--out", default="results", help="output directory")


def _config_from(args) -> RunConfig:
    return RunConfig(
        scenario=args.scenario, policy=args.policy, T=args.T, M=args.M, d=args.d,
        seeds=args.seeds, feedback=args.feedback, beta=args.beta, gamma=args.gamma,
        depth=args.depth, width=args.width, dropout=args.dropout, lr=args.lr,
        buffer=args.buffer, target_mode=args.target_mode, index_mode=args.index_mode,
        host=args.host, lexp=args.lexp, per_arm=args.per_arm,
        mirror_inputs=args.mirror_inputs,
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="mpbandits",
                     description="Restless channel-allocation bandit benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one scenario/policy over the seed list")
    _add_common(p_run)

    p_bench = sub.add_parser("bench", help="full scenario x policy grid")
    _add_common(p_bench)
    p_bench.add_argument("--scenarios", default="S1,S2,S3,S4",
                         help="comma-separated scenario subset")
    p_bench.add_argument("--policies", default=",".join(POLICY_NAMES),
                         help="comma-separated policy subset")
    p_bench.add_argument("--variants", action="store_true",
                         help="also run rca-hosted literal/composite contextual rows")

    p_sweep = sub.add_parser("sweep", help="hyperparameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=("beta", "M"))
    p_sweep.add_argument("--values", type=_value_list, default=None,
                         help="comma-separated sweep values")
    return parser


def _cmd_run(args) -> int:
    cfg = _config_from(args)
    results = run_config(cfg)
    paths = emit_results(results, args.out, manifest_for(cfg))
    for res in results:
        print(f"{res.scenario} {res.policy} seed={res.seed} "
              f"final_regret={res.series.final_regret:.4f} "
              f"final_normalized={res.series.final_normalized:.4f}")
    print(f"wrote {paths['results']}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _config_from(args)
    scenarios = tuple(s for s in args.scenarios.split(",") if s)
    policies = tuple(p for p in args.policies.split(",") if p)
    for p in policies:
        if p not in POLICY_NAMES:
            raise ConfigurationError(f"unknown policy {p!r} in --policies")
    results = run_bench(cfg, scenarios=scenarios, policies=policies,
                        variants=args.variants)
    extra = {"grid": {"scenarios": list(scenarios), "policies": list(policies),
                      "variants": args.variants}}
    paths = emit_results(results, args.out, manifest_for(cfg, extra))
    print(f"{len(results)} episodes -> {paths['results']}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from(args)
    values = args.values
    if values is None:
        values = BETA_GRID if args.axis == "beta" else M_GRID
    if args.axis == "M":
        values = tuple(int(v) for v in values)
    rows, summary = run_sweep(cfg, args.axis, values)
    paths = emit_sweep(rows, summary, args.out)
    for row in summary:
        print(f"{args.axis}={row['value']} "
              f"mean_final_normalized={row['mean_final_normalized_regret']:.4f}")
    print(f"wrote {paths['sweep']}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_sweep(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
