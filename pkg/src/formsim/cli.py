"""Command-line entry points: run, serve, replay."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .runtime import replay as replay_run
from .runtime import run as offline_run
from .scenario import bundled_scenario_path
from .server import serve as serve_run


def _scenario_arg(value: str) -> str:
    """Accept a path or the name of a bundled scenario."""
    if value.endswith(".json"):
        return value
    return str(bundled_scenario_path(value))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="formsim",
        description="Gesture-steerable multi-UAV formation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario offline")
    p_run.add_argument("scenario", type=_scenario_arg,
                       help="scenario file or bundled name (e.g. powerline)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None, help="directory for metrics/events/commands")
    p_run.add_argument("--duration", type=float, default=None, help="override duration [s]")

    p_serve = sub.add_parser("serve", help="run live with a telemetry/command endpoint")
    p_serve.add_argument("scenario", type=_scenario_arg)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--rtf", type=float, default=1.0,
                         help="real-time factor; 0 = as fast as possible")
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--duration", type=float, default=None)
    p_serve.add_argument("--out", default=None)

    p_replay = sub.add_parser("replay", help="re-run a scenario against a recorded command log")
    p_replay.add_argument("scenario", type=_scenario_arg)
    p_replay.add_argument("commands", help="commands.json recorded by a previous run")
    p_replay.add_argument("--seed", type=int, default=None)
    p_replay.add_argument("--out", default=None)
    p_replay.add_argument("--duration", type=float, default=None)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        summary, _ = offline_run(
            args.scenario, seed=args.seed, duration=args.duration, out_dir=args.out
        )
    elif args.command == "serve":
        summary = serve_run(
            args.scenario, host=args.host, port=args.port, rtf=args.rtf,
            seed=args.seed, duration=args.duration, out_dir=args.out,
        )
    else:
        summary, _ = replay_run(
            args.scenario, args.commands, seed=args.seed,
            duration=args.duration, out_dir=args.out,
        )
    json.dump(summary.to_json(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
