"""Command-line front end: ``dhtlearn {check,source-sets,simulate,analyze}``.

Exit codes: 0 success / all conditions pass, 1 semantic failure (a condition
fails, an empty source set, no convergence), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import graph as G
from .analysis import DEFAULT_EPSILON, convergence_time, decay_rate, export_trace, load_trace
from .config import ParseError, config_from_dict, load_experiment, parse_seed_range
from .engine import precondition_report, run_batch
from .exceptions import DHTError, InvariantViolation, NumericDegeneracyError
from .model import hypothesis_pairs, source_set

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _fmt_set(s) -> str:
    return "{" + ", ".join(str(x) for x in sorted(s)) + "}"


def cmd_check(args) -> int:
    exp = load_experiment(args.config)
    cfg = exp.config
    report = precondition_report(cfg)
    labels = cfg.model.hypotheses.labels
    print(f"rule: {cfg.rule}  agents: {cfg.n}  hypotheses: {cfg.m}  f: {cfg.f}")
    d = G.diameter(cfg.graph)
    print(f"diameter: {'unbounded' if d is None else d}")
    print(report.format(labels))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_source_sets(args) -> int:
    cfg = load_experiment(args.config).config
    labels = cfg.model.hypotheses.labels
    rows = []
    for p, q in hypothesis_pairs(cfg.m):
        S = source_set(cfg.model, p, q)
        rows.append((f"({labels[p]}, {labels[q]})", _fmt_set(S), "ok" if S else "EMPTY"))
    w0 = max(len("pair"), *(len(r[0]) for r in rows))
    w1 = max(len("source set"), *(len(r[1]) for r in rows))
    print(f"{'pair':<{w0}}  {'source set':<{w1}}  status")
    for a, b, c in rows:
        print(f"{a:<{w0}}  {b:<{w1}}  {c}")
    return EXIT_OK if all(r[2] == "ok" for r in rows) else EXIT_FAIL


def _fixed(x: float) -> str:
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _output_path(template: str, seed: int, sweep: bool) -> Path:
    if "{seed}" in template:
        return Path(template.format(seed=seed))
    path = Path(template)
    if sweep:
        return path.with_name(f"{path.stem}_seed{seed}{path.suffix}")
    return path


def cmd_simulate(args) -> int:
    exp = load_experiment(args.config)
    cfg = exp.config
    changes = {}
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.thin is not None:
        changes["thin"] = args.thin
    if args.checked is not None:
        changes["checked_mode"] = args.checked
    seeds = exp.seeds
    if args.seed is not None and args.seeds is not None:
        raise _Usage("--seed and --seeds are mutually exclusive")
    if args.seed is not None:
        seeds = [args.seed]
    elif args.seeds is not None:
        seeds = parse_seed_range(args.seeds)
    try:
        cfg = cfg.replace(seed=seeds[0], **changes)
    except DHTError as exc:
        raise _Usage(str(exc)) from None
    fmt = args.format or exp.output_format
    template = args.output or exp.output_path or f"trace.{fmt}"
    sweep = len(seeds) > 1

    report = precondition_report(cfg)
    if not report.passed:
        names = sorted({c.name for c in report.failures()})
        print(f"warning: preconditions fail ({', '.join(names)}); running anyway", file=sys.stderr)
    traces = run_batch(cfg, seeds, max_workers=args.jobs)
    for seed, trace in zip(seeds, traces):
        path = _output_path(template, seed, sweep)
        export_trace(trace, path, fmt)
        summary = convergence_time(trace, DEFAULT_EPSILON)
        net = summary.network_time
        print(f"seed {seed}: wrote {path} (network convergence at eps={DEFAULT_EPSILON}: "
              f"{'none' if net is None else f't={net}'})")
    return EXIT_OK


def _parse_window(text: Optional[str]):
    if text is None:
        return None
    try:
        a, b = text.split(":", 1)
        return int(a), int(b)
    except ValueError:
        raise _Usage(f"invalid window {text!r}; expected t0:t1") from None


def cmd_analyze(args) -> int:
    if not 0.0 < args.epsilon < 1.0:
        raise _Usage("--epsilon must lie in (0, 1)")
    trace = load_trace(args.trace, truth=args.truth)
    window = _parse_window(args.window)
    model = None
    if trace.config_doc:
        model = config_from_dict(trace.config_doc).model
    labels = trace.labels
    summary = convergence_time(trace, args.epsilon)
    print(f"trace: {args.trace}")
    if trace.fingerprint:
        print(f"fingerprint: {trace.fingerprint}")
    print(f"horizon: {trace.horizon}  true hypothesis: {labels[trace.true_index]}  epsilon: {args.epsilon:g}")
    print("convergence (first sustained t with mu(true) >= 1 - epsilon):")
    for agent, t in summary.agent_times.items():
        print(f"  agent {agent}: {'none' if t is None else t}")
    net = summary.network_time
    print(f"network convergence time: {'none' if net is None else net}")
    print("decay of beliefs on false hypotheses (nats/step):")
    for theta in range(trace.m):
        if theta == trace.true_index:
            continue
        for agent in trace.regular:
            est = decay_rate(trace, agent, theta, window, model)
            ref = "n/a" if est.reference_bound is None else _fixed(-est.reference_bound)
            print(f"  {labels[theta]} agent {agent} window [{est.window[0]}, {est.window[1]}]: "
                  f"local {_fixed(est.local_slope)}  actual {_fixed(est.actual_slope)}  reference {ref}")
    return EXIT_OK if summary.converged else EXIT_FAIL


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed {text!r} must lie in [0, 2**64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhtlearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check the learning preconditions of an experiment")
    p.add_argument("config")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("source-sets", help="print the source set of every hypothesis pair")
    p.add_argument("config")
    p.set_defaults(func=cmd_source_sets)

    p = sub.add_parser("simulate", help="run the experiment and write trace files")
    p.add_argument("config")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--seeds", help="seed sweep, 'a..b' inclusive or 'a,b,c'")
    p.add_argument("-T", "--horizon", type=_positive_int)
    p.add_argument("-o", "--output", help="output path; '{seed}' is replaced per seed")
    p.add_argument("--format", choices=("csv", "jsonl"))
    p.add_argument("--thin", type=_positive_int, help="record every k-th step")
    p.add_argument("--checked", dest="checked", action="store_true", default=None,
                   help="assert live invariants every round")
    p.add_argument("--unchecked", dest="checked", action="store_false")
    p.add_argument("-j", "--jobs", type=_positive_int, default=1, help="worker processes for sweeps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="summarize convergence and decay rates of a trace")
    p.add_argument("trace")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--window", help="t0:t1 regression window (default T/4:T)")
    p.add_argument("--truth", help="true hypothesis label (CSV traces only)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (_Usage, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation, NumericDegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except DHTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
