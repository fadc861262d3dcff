"""Command-line driver.

Subcommands:
  exec     run one QIR file on a simulator backend and print the histogram
  graph    execute a task graph described in JSON
  ghz-qpd  run the wire-cut GHZ estimation, optionally many times

Exit codes are stable for scripting: 0 success, 1 execution failure,
2 usage or input-parse error. All randomness flows from --seed (default 0),
so identical invocations produce byte-identical stdout.
"""

from __future__ import annotations

import argparse
import graphlib
import json
import sys
from pathlib import Path

from .qir import (
    QirLoweringError,
    QirParseError,
    find_kernel_file,
    lower_to_circuit,
    output_positions,
    parse_qir,
)
from .qpd import validate_run, write_validation_csv
from .runtime import (
    GraphSpecError,
    HostDevice,
    QpuDevice,
    Runtime,
    TaskState,
    parse_graph_spec,
)
from .simulator import (
    ProbDist,
    ShotHistogram,
    format_histogram,
    format_probabilities,
    marginalize,
    marginalize_counts,
    run_trajectory,
    sample_shots,
    simulate,
)

ACCELERATORS = ("statevector", "trajectory")


def _nonneg_int(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {n}")
    return n


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtask", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_exec = sub.add_parser("exec", help="run a QIR file and print its histogram")
    p_exec.add_argument("file", help=".ll file (falls back to the shipped kernels)")
    p_exec.add_argument("-a", "--accelerator", choices=ACCELERATORS, default="statevector")
    p_exec.add_argument("-s", "--shots", type=_nonneg_int, default=1024)
    p_exec.add_argument("--seed", type=int, default=0)
    p_exec.add_argument(
        "--probs", action="store_true", help="print the exact distribution instead of sampling"
    )
    p_exec.set_defaults(func=cmd_exec)

    p_graph = sub.add_parser("graph", help="execute a JSON task graph")
    p_graph.add_argument("file", help="graph JSON file")
    p_graph.add_argument("--policy", choices=("default", "roundrobin"), default=None)
    p_graph.add_argument("--seed", type=int, default=None)
    p_graph.set_defaults(func=cmd_graph)

    p_qpd = sub.add_parser("ghz-qpd", help="wire-cut GHZ estimation of the Z-string mean")
    p_qpd.add_argument("--shots", type=_nonneg_int, default=1024)
    p_qpd.add_argument("--reps", type=_positive_int, default=1)
    p_qpd.add_argument("--devices", type=_positive_int, default=4)
    p_qpd.add_argument("--mode", choices=("exact", "sampled"), default="sampled")
    p_qpd.add_argument("--seed", type=int, default=0)
    p_qpd.add_argument("--csv", default=None, help="write per-repetition values to this path")
    p_qpd.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=True)
    p_qpd.set_defaults(func=cmd_ghz_qpd)

    return parser


def cmd_exec(args) -> int:
    text = find_kernel_file(args.file).read_text()
    prog = parse_qir(text)
    circuit = lower_to_circuit(prog)
    positions = output_positions(prog)

    if args.accelerator == "statevector":
        _, dist = simulate(circuit)
        if positions is not None:
            dist = marginalize(dist, positions)
        if args.probs:
            print(format_probabilities(dist))
            return 0
        hist = sample_shots(dist, args.shots, args.seed)
    else:
        hist = run_trajectory(circuit, args.shots, args.seed)
        if positions is not None:
            hist = marginalize_counts(hist, positions)
        if args.probs:
            print("error: --probs requires the statevector accelerator", file=sys.stderr)
            return 2
    if args.shots == 0:
        print("note: 0 shots requested; use --probs for the exact distribution", file=sys.stderr)
    print(format_histogram(hist))
    return 0


def _summarize(payload) -> str | None:
    if payload is None:
        return None
    if isinstance(payload, ShotHistogram):
        body = ",".join(f"{k}:{payload.counts[k]}" for k in sorted(payload.counts))
        return f"counts {body} shots={payload.shots}"
    if isinstance(payload, ProbDist):
        body = ",".join(
            f"{k}:{payload.probabilities[k]:.12g}" for k in sorted(payload.probabilities)
        )
        return f"probs {body}"
    text = repr(payload)
    return text if len(text) <= 72 else text[:69] + "..."


def cmd_graph(args) -> int:
    spec = parse_graph_spec(Path(args.file).read_text())
    policy = args.policy if args.policy is not None else spec.policy
    seed = args.seed if args.seed is not None else spec.seed

    # creation must follow dependencies; printing keeps the file's order
    order = graphlib.TopologicalSorter(
        {t.name: set(t.depends) for t in spec.tasks}
    ).static_order()
    by_name = {t.name: t for t in spec.tasks}

    runtime = Runtime()
    next_id = 0
    for _ in range(spec.qpu):
        runtime.register_device(QpuDevice(next_id))
        next_id += 1
    for _ in range(spec.host):
        runtime.register_device(HostDevice(next_id))
        next_id += 1
    runtime.register_host_kernel("noop", lambda params, deps: None)

    try:
        graph = runtime.create_graph(seed=seed)
        ids: dict[str, int] = {}
        for name in order:
            entry = by_name[name]
            ids[name] = graph.create_task(
                entry.name,
                entry.kernel,
                deps=[ids[d] for d in entry.depends],
                device_req=entry.device,
            )
        handle = runtime.submit(graph, policy=policy, sync=True)
        results = runtime.wait(handle)
    finally:
        runtime.shutdown()

    failed = False
    for entry in spec.tasks:
        result = results[ids[entry.name]]
        device = "-" if result.device_id is None else str(result.device_id)
        print(f"{entry.name} {device} {result.status.value}")
        if result.status is TaskState.FAILED:
            failed = True
            print(f"  error: {result.error}")
        else:
            summary = _summarize(result.payload)
            if summary:
                print(f"  {summary}")
    return 1 if failed else 0


def cmd_ghz_qpd(args) -> int:
    estimate = validate_run(
        reps=args.reps,
        shots=args.shots,
        seed=args.seed,
        devices=args.devices,
        mode=args.mode,
        dedup=args.dedup,
    )
    print(f"estimate {estimate.mean:.9f}")
    print(f"std {estimate.std:.9g}")
    if args.csv:
        write_validation_csv(args.csv, estimate)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (
        QirParseError,
        QirLoweringError,
        GraphSpecError,
        graphlib.CycleError,
        json.JSONDecodeError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
