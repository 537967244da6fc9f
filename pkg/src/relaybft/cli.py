"""Command-line front door.

Subcommands: ``simulate`` (one seeded round), ``sweep`` (full tolerance
grid for one system size), ``boundary`` (ensured boundary for one F),
``table`` (regression table with extrapolation), ``equations``
(closed-form bounds), ``crossval`` (equation vs table vs brute force) and
``figure1`` (the worst-case 3-hop round trip).  Runs are reproducible:
identical arguments produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from . import analytics, simnet, tolerance
from .topology import RelayPolicy, f_max

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUSED = 3


def _policy(args: argparse.Namespace) -> RelayPolicy:
    return RelayPolicy(args.policy, args.max_hops)


def _mode(text: str) -> tolerance.Mode:
    if text == "consensus":
        return tolerance.Consensus()
    if text.startswith("delivery:"):
        return tolerance.Delivery(int(text.split(":", 1)[1]))
    raise argparse.ArgumentTypeError("mode must be 'consensus' or 'delivery:<group size>'")


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def _random_scenario(n: int, F: int, f: int, seed: int) -> simnet.FaultScenario:
    rng = random.Random(seed ^ 0x5CE9A710)
    faulty = rng.sample(range(1, n + 1), F)
    links = rng.sample(tolerance.link_list(n), f)
    return simnet.FaultScenario(
        n=n,
        strategies=tuple((pid, simnet.Crash()) for pid in sorted(faulty)),
        faulty_links=frozenset(links),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.scenario:
        scenario = simnet.FaultScenario.from_text(Path(args.scenario).read_text())
    else:
        scenario = _random_scenario(args.n, args.faulty_processes, args.faulty_links, args.seed)
    report = simnet.run_round(scenario, simnet.TimingConfig(), _policy(args), args.seed)
    print(report.summary_row())
    _write(args.out, report.to_text())
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    records = tolerance.sweep(
        args.n, _policy(args), mode=args.mode, budget=args.budget, jobs=args.jobs
    )
    lines = [tolerance.RECORD_HEADER] + [r.row() for r in records]
    text = "\n".join(lines) + "\n"
    _write(args.out, text)
    if not args.out:
        print(text, end="")
    else:
        ensured = {
            F: max(
                (r.faulty_link_count for r in records
                 if r.faulty_process_count == F and r.region == "ensured"),
                default=-1,
            )
            for F in sorted({r.faulty_process_count for r in records})
        }
        print(f"n={args.n}: {len(records)} records -> {args.out}; ensured boundaries {ensured}")
    return EXIT_OK


def cmd_boundary(args: argparse.Namespace) -> int:
    value = tolerance.ensured_boundary(
        args.n, args.faulty_processes, _policy(args), mode=args.mode,
        budget=args.budget, jobs=args.jobs,
    )
    print(f"n={args.n} F={args.faulty_processes} ensured_boundary={value}")
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    table = analytics.extend_table(analytics.baseline_table(), args.up_to_n)
    text = table.rows_text()
    _write(args.out, text)
    print(text, end="")
    return EXIT_OK


def cmd_equations(args: argparse.Namespace) -> int:
    bounds = [analytics.equation_bound(args.n, F) for F in range(f_max(args.n) + 1)]
    lines = ["n\tF\ttolerated_f"] + [
        f"{args.n}\t{F}\t{b}" for F, b in enumerate(bounds)
    ]
    text = "\n".join(lines) + "\n"
    _write(args.out, text)
    print(f"n={args.n} bounds per F: " + "/".join(str(b) for b in bounds))
    return EXIT_OK


def cmd_crossval(args: argparse.Namespace) -> int:
    ns = tuple(range(args.n_min, args.n_max + 1))
    rows = analytics.cross_validate(ns, _policy(args), budget=args.budget, jobs=args.jobs)
    text = "\n".join([analytics.CROSSCHECK_HEADER] + [r.row() for r in rows]) + "\n"
    _write(args.out, text)
    print(text, end="")
    return EXIT_OK


def cmd_figure1(args: argparse.Namespace) -> int:
    scenario, timing = simnet.worst_case_figure1(args.n)
    report = simnet.run_round(scenario, timing, _policy(args), args.seed)
    print(report.summary_row())
    for pr in report.processes:
        print(
            f"  process {pr.pid}: decided={pr.decided} time={pr.decision_time} "
            f"value={(pr.decision_value or '-')[:16]}"
        )
    _write(args.out, report.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaybft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_n: bool = True) -> None:
        if needs_n:
            p.add_argument("--n", type=int, required=True, help="system size")
        p.add_argument("--policy", choices=("strict", "relaxed"), default="strict")
        p.add_argument("--max-hops", type=int, choices=(1, 2, 3), default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--budget", type=int, default=None,
                       help="refuse runs whose scenario space exceeds this count")
        p.add_argument("--jobs", type=int, default=None, help="worker threads for sweeps")
        p.add_argument("--out", type=str, default=None, help="output file path")

    p = sub.add_parser("simulate", help="run one seeded round")
    common(p)
    p.add_argument("--faulty-processes", type=int, default=0)
    p.add_argument("--faulty-links", type=int, default=0)
    p.add_argument("--scenario", type=str, default=None, help="scenario file (overrides --n/F/f)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="tolerance records over the full (F, f) grid")
    common(p)
    p.add_argument("--mode", type=_mode, default=tolerance.Consensus())
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("boundary", help="largest f with ensured solvability")
    common(p)
    p.add_argument("--faulty-processes", type=int, required=True)
    p.add_argument("--mode", type=_mode, default=tolerance.Consensus())
    p.set_defaults(fn=cmd_boundary)

    p = sub.add_parser("table", help="regression table with extrapolated cells")
    common(p, needs_n=False)
    p.add_argument("--up-to-n", type=int, default=11)
    p.set_defaults(fn=cmd_table)

    p = sub.add_parser("equations", help="closed-form tolerated-f bounds")
    common(p)
    p.set_defaults(fn=cmd_equations)

    p = sub.add_parser("crossval", help="equation vs table vs brute force")
    common(p, needs_n=False)
    p.add_argument("--n-min", type=int, default=3)
    p.add_argument("--n-max", type=int, default=11)
    p.set_defaults(fn=cmd_crossval)

    p = sub.add_parser("figure1", help="worst-case 3-hop round-trip scenario")
    common(p)
    p.set_defaults(fn=cmd_figure1)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except tolerance.BudgetExceededError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValueError, KeyError, simnet.ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
