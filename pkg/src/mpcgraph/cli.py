"""mpcgraph command line: generate workloads and run them against the oracles."""

from __future__ import annotations

import argparse
import sys

from .harness import DEFAULT_MODE, KINDS, MODES, RunConfig, WorkloadError, generate, load_workload, run
from .mpc_engine import IDEALIZED, STRICT


def _params(pairs: list[str]) -> dict:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise WorkloadError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpcgraph", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a workload and verify queries")
    r.add_argument("--workload", required=True)
    r.add_argument("--phi", type=float, default=0.5)
    r.add_argument("--accounting", choices=(IDEALIZED, STRICT), default=IDEALIZED)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--kappa", type=float)
    r.add_argument("--oracle", choices=("on", "off"), default="on")
    r.add_argument("--report", help="write JSON lines here")
    r.add_argument("--k-max", type=int, help="override the batch-size bound")
    r.add_argument("--local-memory", type=int, help="override s (words per machine)")
    r.add_argument("--c-total", type=float, default=64.0)

    g = sub.add_parser("generate", help="write a deterministic workload file")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--batches", type=int, default=10)
    g.add_argument("--batch-size", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mode", choices=MODES, help="defaults per kind: "
                   + ", ".join(f"{k}->{v}" for k, v in DEFAULT_MODE.items()))
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    g.add_argument("-o", "--output", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            wl = generate(args.kind, args.n, _params(args.param), args.seed, batches=args.batches,
                          batch_size=args.batch_size, mode=args.mode)
            with open(args.output, "w") as fh:
                fh.write(wl.dumps())
            return 0
        wl = load_workload(args.workload)
        config = RunConfig(phi=args.phi, accounting=args.accounting, seed=args.seed, epsilon=args.epsilon,
                           alpha=args.alpha, kappa=args.kappa, oracle=args.oracle == "on", k_max=args.k_max,
                           c_total=args.c_total, local_memory=args.local_memory)
        report = run(wl, config)
    except (WorkloadError, OSError, ValueError) as exc:
        print(f"mpcgraph: error: {exc}", file=sys.stderr)
        return 2
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.jsonl())
    sys.stdout.write(report.table())
    if report.error:
        print(f"accounting violation: {report.error['primitive']}: {report.error['detail']} "
              f"(batch {report.error['batch_index']})", file=sys.stderr)
        return 3
    if not report.ok:
        print("oracle failure budget exceeded", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
