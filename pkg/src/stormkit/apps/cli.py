"""Command-line harness.

    stormkit forks run [--config PATH] [--seed N] [--ticks N] [--trace PATH]
    stormkit queens run [--n N] [--config PATH] [--seed N] [--messages N] [--trace PATH]
    stormkit router serve [--host HOST] [--port PORT]
    stormkit trace show PATH [--agent NAME] [--kind KIND]

Exit status: 0 when the run reached its goal, 2 when a tick or message
limit ended it, 1 on a fault. Run subcommands are deterministic by
default; --free-running drives components with threads instead of the
seeded scheduler.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import StormkitError
from .trace import TraceWriter, show_trace

EXIT_GOAL = 0
EXIT_FAULT = 1
EXIT_LIMIT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stormkit",
                                     description="agent framework demos and services")
    sub = parser.add_subparsers(dest="command", required=True)

    forks = sub.add_parser("forks", help="forklift grid-world demo")
    forks_sub = forks.add_subparsers(dest="action", required=True)
    forks_run = forks_sub.add_parser("run", help="run the scenario to completion")
    _run_flags(forks_run)
    forks_run.add_argument("--ticks", type=int, default=None, help="tick limit")

    queens = sub.add_parser("queens", help="distributed n-queens demo")
    queens_sub = queens.add_subparsers(dest="action", required=True)
    queens_run = queens_sub.add_parser("run", help="run the board to quiescence")
    _run_flags(queens_run)
    queens_run.add_argument("--n", type=int, default=None, help="board size")
    queens_run.add_argument("--messages", type=int, default=None,
                            help="routed message cap")

    router = sub.add_parser("router", help="the message router service")
    router_sub = router.add_subparsers(dest="action", required=True)
    serve = router_sub.add_parser("serve", help="listen on a framed TCP endpoint")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)

    trace = sub.add_parser("trace", help="inspect run traces")
    trace_sub = trace.add_subparsers(dest="action", required=True)
    show = trace_sub.add_parser("show", help="print (filtered) trace lines")
    show.add_argument("path")
    show.add_argument("--agent", default=None)
    show.add_argument("--kind", default=None)

    return parser


def _run_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--seed", type=int, default=None, help="scheduler seed")
    cmd.add_argument("--config", default=None, help="scenario file")
    cmd.add_argument("--trace", default=None, help="trace output path")
    cmd.add_argument("--deterministic", dest="deterministic", action="store_true",
                     default=True, help="seeded scheduler (default)")
    cmd.add_argument("--free-running", dest="deterministic", action="store_false",
                     help="drive components with threads")


def _tracer(path: str | None) -> TraceWriter | None:
    return TraceWriter(path) if path else None


def _finish(report, tracer: TraceWriter | None, trace_path: str | None) -> int:
    if tracer is not None:
        tracer.close()
        report.trace_path = trace_path
    print(f"outcome: {report.outcome}  ticks: {report.ticks}  "
          f"messages: {report.messages}" + (f"  {report.detail}" if report.detail else ""))
    if report.outcome == "solved":
        if report.placement:
            rows = [str(report.placement[c]) for c in sorted(report.placement)]
            print("placement:", " ".join(rows))
        if report.snapshot:
            print(report.snapshot)
        return EXIT_GOAL
    if report.outcome in ("tick-limit", "message-limit", "unsolvable"):
        return EXIT_LIMIT
    return EXIT_FAULT


def cmd_forks_run(args) -> int:
    from .config import default_forks_path, load_forks_config
    from .forks import run_forks

    config = load_forks_config(args.config or default_forks_path())
    if args.ticks is not None:
        config.ticks = args.ticks
    tracer = _tracer(args.trace)
    report = run_forks(config, seed=args.seed,
                       tracer=tracer, free_running=not args.deterministic)
    return _finish(report, tracer, args.trace)


def cmd_queens_run(args) -> int:
    from .config import load_queens_config
    from .queens import run_queens

    settings = {"n": 8, "seed": 1, "message_cap": 10_000}
    if args.config:
        settings.update(load_queens_config(args.config))
    if args.n is not None:
        settings["n"] = args.n
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.messages is not None:
        settings["message_cap"] = args.messages
    tracer = _tracer(args.trace)
    report = run_queens(settings["n"], seed=settings["seed"],
                        message_cap=settings["message_cap"], tracer=tracer,
                        free_running=not args.deterministic)
    return _finish(report, tracer, args.trace)


def cmd_router_serve(args) -> int:
    from ..comms import RouterService, router_address

    host, port = router_address()
    if args.host is not None:
        host = args.host
    if args.port is not None:
        port = args.port
    service = RouterService(host=host, port=port)
    print(f"router listening on {service.address[0]}:{service.address[1]}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.stop()
    return EXIT_GOAL


def cmd_trace_show(args) -> int:
    shown = show_trace(args.path, agent=args.agent, kind=args.kind)
    print(f"({shown} lines)", file=sys.stderr)
    return EXIT_GOAL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "forks":
            return cmd_forks_run(args)
        if args.command == "queens":
            return cmd_queens_run(args)
        if args.command == "router":
            return cmd_router_serve(args)
        if args.command == "trace":
            return cmd_trace_show(args)
    except StormkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
