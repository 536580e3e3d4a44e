"""Command-line front end: run Monte Carlo experiments or parameter sweeps
over a channel file, emitting a delimited summary table, per-cell trial
records, and machine-readable reports with full reproducibility metadata.

Exit codes: 0 ok, 2 config error, 3 validation error, 4 audit or bound
assertion failure.
"""

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .channel import channel_digest, derive_constants, load_channel
from .errors import (
    AuditViolation,
    ChannelInvalid,
    ConfigParse,
    InfiniteC2,
    NotBinaryInput,
    ParameterDomain,
    SchemeChannelMismatch,
    SimulationError,
)
from .schemes import SCHEME_IDS, make_scheme
from .session import SessionConfig, monte_carlo

SUMMARY_COLUMNS = ("M", "epsilon", "scheme", "mean_tau", "stderr_tau",
                   "empirical_pe", "theorem1_bound", "asymptotic_target",
                   "audit_pass_rate", "capped", "seed")


@dataclass
class ExperimentConfig:
    channel_path: Path
    schemes: list
    messages: list
    epsilons: list
    trials: int
    seed: int
    out_dir: Path
    audit: bool
    sweep: str | None


def build_parser():
    p = argparse.ArgumentParser(
        prog="ejsim",
        description="Variable-length feedback-coding simulator over discrete "
                    "memoryless channels")
    p.add_argument("--channel", required=True, help="channel spec file (JSON)")
    p.add_argument("--scheme", required=True,
                   help="comma-separated scheme ids: " + ", ".join(SCHEME_IDS))
    p.add_argument("--messages", required=True,
                   help="comma-separated message-set sizes")
    p.add_argument("--epsilon", required=True,
                   help="comma-separated target error probabilities")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--audit", action="store_true",
                   help="audit every trace against the per-step guarantees")
    p.add_argument("--sweep", choices=("epsilon", "M"),
                   help="emit a sweep table along the given axis")
    p.add_argument("--out", default="results", help="output directory")
    return p


def parse_config(argv) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    try:
        schemes = [s.strip() for s in args.scheme.split(",") if s.strip()]
        messages = [int(v) for v in args.messages.split(",") if v.strip()]
        epsilons = [float(v) for v in args.epsilon.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigParse(f"bad list argument: {e}") from e
    if not schemes or not messages or not epsilons:
        raise ConfigParse("scheme, messages and epsilon lists must be nonempty")
    for s in schemes:
        if s not in SCHEME_IDS:
            raise ConfigParse(f"unknown scheme id {s!r}")
    for m in messages:
        if m < 2:
            raise ConfigParse("message-set sizes must be >= 2")
    for e in epsilons:
        if not 0 < e < 1:
            raise ConfigParse("epsilon values must lie in (0, 1)")
    if args.trials < 1:
        raise ConfigParse("trials must be >= 1")
    return ExperimentConfig(channel_path=Path(args.channel), schemes=schemes,
                            messages=messages, epsilons=epsilons,
                            trials=args.trials, seed=args.seed,
                            out_dir=Path(args.out), audit=args.audit,
                            sweep=args.sweep)


def _cell_seed(master: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _preamble(ch, cfg):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return [f"# generated: {stamp}",
            f"# version: {__version__}",
            f"# channel: {channel_digest(ch)}",
            f"# master_seed: {cfg.seed}"]


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every (scheme, M, epsilon) cell; write summary, per-cell records,
    and JSON reports.  Returns the number of summary rows written."""
    ch = load_channel(cfg.channel_path)
    consts = derive_constants(ch)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    cells_dir = cfg.out_dir / "cells"
    cells_dir.mkdir(exist_ok=True)

    rows = []
    reports = []
    index = 0
    for scheme_id in cfg.schemes:
        scheme = make_scheme(scheme_id, ch, consts)
        for m in cfg.messages:
            for eps in cfg.epsilons:
                seed = _cell_seed(cfg.seed, index)
                index += 1
                run_cfg = SessionConfig(num_messages=m, epsilon=eps,
                                        scheme=scheme_id, seed=seed,
                                        audit=cfg.audit)
                report = monte_carlo(run_cfg, ch, consts, cfg.trials,
                                     scheme=scheme, keep_traces=True)
                traces = report.traces
                cell_name = f"{scheme_id}_M{m}_eps{eps:g}"
                with open(cells_dir / f"{cell_name}.csv", "w") as f:
                    f.write("trial,stopping_time,decoded,true_message,"
                            "correct,capped,final_max_posterior\n")
                    for i, tr in enumerate(traces):
                        f.write(f"{i},{tr.stopping_time},{tr.decoded},"
                                f"{tr.true_message},{int(tr.correct)},"
                                f"{int(tr.capped)},{tr.final_max_posterior:.12g}\n")
                rows.append((m, eps, scheme_id, report.mean_tau, report.stderr_tau,
                             report.empirical_pe, report.theorem1_bound,
                             report.asymptotic_target, report.audit_pass_rate,
                             report.capped_trials, seed))
                reports.append(report)

    with open(cfg.out_dir / "summary.csv", "w") as f:
        for line in _preamble(ch, cfg):
            f.write(line + "\n")
        f.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")
    with open(cfg.out_dir / "reports.jsonl", "w") as f:
        for report in reports:
            f.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")

    if cfg.sweep:
        write_sweep(cfg, ch, consts, rows)
    return len(rows)


def write_sweep(cfg: ExperimentConfig, ch, consts, rows):
    """Sweep table along one axis, with the analytic reliability frontier
    columns appended for external plotting."""
    axis_values = cfg.epsilons if cfg.sweep == "epsilon" else cfg.messages
    if len(axis_values) < 2:
        raise ParameterDomain(f"a sweep along {cfg.sweep} needs at least two values")
    if cfg.sweep == "epsilon" and len(cfg.messages) != 1:
        raise ConfigParse("an epsilon sweep needs a single message-set size")
    if cfg.sweep == "M" and len(cfg.epsilons) != 1:
        raise ConfigParse("an M sweep needs a single epsilon")
    if len(cfg.schemes) != 1:
        raise ConfigParse("a sweep needs a single scheme")

    c = consts.capacity
    c1 = consts.c1
    with open(cfg.out_dir / "sweep.csv", "w") as f:
        for line in _preamble(ch, cfg):
            f.write(line + "\n")
        f.write("axis,value,mean_tau,stderr_tau,empirical_pe,neglog2_eps,"
                "ratio_to_target,rate_proxy,frontier_exponent\n")
        for (m, eps, scheme_id, mean_tau, stderr_tau, pe,
             _thm, target, _rate, _capped, _seed) in rows:
            value = eps if cfg.sweep == "epsilon" else m
            rate = math.log2(m) / mean_tau if mean_tau > 0 else math.inf
            frontier = max(0.0, c1 * (1.0 - rate / c))
            f.write(",".join(_fmt(v) for v in (
                cfg.sweep, value, mean_tau, stderr_tau, pe,
                math.log2(1.0 / eps), mean_tau / target, rate, frontier)) + "\n")


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigParse as e:
        print(f"ejsim: config error: {e}", file=sys.stderr)
        return 2
    try:
        run_experiment(cfg)
    except ConfigParse as e:
        print(f"ejsim: config error: {e}", file=sys.stderr)
        return 2
    except (ChannelInvalid, SchemeChannelMismatch, NotBinaryInput,
            InfiniteC2, ParameterDomain) as e:
        print(f"ejsim: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except AuditViolation as e:
        print(f"ejsim: audit failure: {e}", file=sys.stderr)
        return 4
    except SimulationError as e:
        print(f"ejsim: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    return 0


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
