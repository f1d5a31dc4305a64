"""Command-line entry points: plan, bench, place, serve.

Exit codes: 0 success, 2 no route, 64 usage, 65 bad input, 69 provider
failure, 70 internal error. Benchmark runs exit 0 even when criteria fail;
the report is the product.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from . import commands as cmd
from . import evaluation as ev
from . import placement as pl
from .fields import NoPath, build_cost_field, plan_astar
from .llm import ProviderError, load_provider_profiles
from .mapping import MapError, parse_map, render_ascii
from .service import (InterpretationFailed, MissionStore, create_app,
                      effective_map, interpret_deterministic)

EX_OK = 0
EX_NOPATH = 2
EX_USAGE = 64
EX_INPUT = 65
EX_PROVIDER = 69
EX_INTERNAL = 70


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EX_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dronenav",
                     description="grid mission planning, benchmarking, "
                                 "placement analysis and serving")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="plan a mission from a map file")
    p_plan.add_argument("--map", required=True, help="map JSON file")
    p_plan.add_argument("--context", action="append", default=[],
                        metavar="UTTERANCE",
                        help="situational description, repeatable; applied "
                             "with the deterministic interpreter")
    p_plan.add_argument("--ascii", action="store_true",
                        help="also print the grid with the path overlaid")

    p_bench = sub.add_parser("bench", help="run the evaluation protocol")
    p_bench.add_argument("--providers", required=True,
                         help="provider config JSON file")
    p_bench.add_argument("--scenario", required=True,
                         help="'appendix' for the built-in 20x20 scenario, or "
                              "seed:W:H:N for a generated one (replace the "
                              "word seed with an integer to vary placement)")
    group = p_bench.add_mutually_exclusive_group()
    group.add_argument("--replay", metavar="DIR",
                       help="judge recorded transcripts instead of calling "
                            "providers")
    group.add_argument("--record", metavar="DIR",
                       help="record transcripts for later replay")
    p_bench.add_argument("--out", default=".", metavar="DIR",
                         help="directory for report.md and report.json")
    p_bench.add_argument("--overrides", metavar="FILE",
                         help="human-override file applied after judging")

    p_place = sub.add_parser("place", help="edge/cloud placement analysis")
    p_place.add_argument("--config", metavar="FILE",
                         help="placement config YAML (defaults to the "
                              "packaged illustrative config)")
    p_place.add_argument("--out", metavar="DIR",
                         help="also write placement.md and placement.json")
    p_place.add_argument("--format", choices=("markdown", "json"),
                         default="markdown", help="stdout format")

    p_serve = sub.add_parser("serve", help="run the mission HTTP service")
    p_serve.add_argument("--addr", metavar="HOST:PORT",
                         default=os.environ.get("DRONENAV_ADDR",
                                                "127.0.0.1:8008"))
    p_serve.add_argument("--providers", metavar="FILE",
                         default=os.environ.get("DRONENAV_PROVIDERS"),
                         help="provider config enabling the llm interpreter")
    p_serve.add_argument("--journal", metavar="FILE",
                         default=os.environ.get("DRONENAV_JOURNAL"),
                         help="append-only journal for crash recovery")
    p_serve.add_argument("--ui", metavar="DIR",
                         default=os.environ.get("DRONENAV_UI"),
                         help="serve a built operator console from this "
                              "directory")
    return parser


def _cmd_plan(args) -> int:
    grid = parse_map(Path(args.map).read_text())
    zones = []
    for utterance in args.context:
        zones.extend(interpret_deterministic(
            utterance, effective_map(grid, zones)))
    field = build_cost_field(grid, zones)
    path = plan_astar(field, grid.start, grid.end)
    seq = cmd.compile_commands(path)

    print(f"cost: {path.total_cost:g}")
    print(f"waypoints ({len(path)}): " + ", ".join(str(c) for c in path.waypoints))
    if args.ascii:
        print(render_ascii(effective_map(grid, zones), path))
    print("commands:")
    print(cmd.command_text(seq))
    print("narration:")
    print(cmd.narrate(seq, path))
    return EX_OK


def _parse_scenario_spec(spec: str) -> ev.Scenario:
    if spec == "appendix":
        return ev.load_reference_scenario()
    parts = spec.split(":")
    if len(parts) != 4:
        raise ValueError(f"scenario spec {spec!r} is neither 'appendix' "
                         "nor seed:W:H:N")
    seed = 0 if parts[0] == "seed" else int(parts[0])
    width, height, n_obstacles = (int(p) for p in parts[1:])
    return ev.generate_scenario(seed, width, height, n_obstacles)


def _cmd_bench(args) -> int:
    profiles = load_provider_profiles(args.providers)
    scenario = _parse_scenario_spec(args.scenario)
    overrides = ev.load_overrides(args.overrides) if args.overrides else None
    report = ev.run_benchmark(
        profiles, scenario, replay_dir=args.replay, record_dir=args.record,
        overrides=overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(ev.emit_report(report, "markdown"))
    (out / "report.json").write_text(ev.emit_report(report, "json") + "\n")
    print(ev.emit_report(report, "markdown"))
    return EX_OK


def default_placement_config() -> Path:
    return Path(str(resources.files("dronenav") / "data" / "placement_default.yaml"))


def _cmd_place(args) -> int:
    config = Path(args.config) if args.config else default_placement_config()
    models, tasks, topo = pl.load_config(config)
    report = pl.assign(models, tasks, topo)
    print(pl.emit_placement_report(report, args.format))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "placement.md").write_text(pl.emit_placement_report(report, "markdown"))
        (out / "placement.json").write_text(
            pl.emit_placement_report(report, "json") + "\n")
    return EX_OK


def _cmd_serve(args) -> int:
    import uvicorn

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        print(f"bad --addr {args.addr!r}, expected HOST:PORT", file=sys.stderr)
        return EX_USAGE

    session_factory = None
    if args.providers:
        from .llm import ChatSession, HttpChatProvider
        profiles = load_provider_profiles(args.providers)
        profile = profiles[0]

        def session_factory():
            return ChatSession(profile, HttpChatProvider(profile))

    store = MissionStore(journal_path=args.journal)
    app = create_app(store, llm_session_factory=session_factory,
                     static_dir=args.ui)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return EX_OK


_HANDLERS = {"plan": _cmd_plan, "bench": _cmd_bench,
             "place": _cmd_place, "serve": _cmd_serve}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EX_USAGE
    try:
        return _HANDLERS[args.command](args)
    except NoPath as exc:
        print(f"no route: {exc}", file=sys.stderr)
        return EX_NOPATH
    except (MapError, FileNotFoundError, ValueError, ev.PlacementExhausted,
            InterpretationFailed) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EX_INPUT
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EX_PROVIDER
    except KeyboardInterrupt:
        return EX_INTERNAL
    except Exception as exc:  # last resort; keep the exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
