"""Command line entry points: run, serve, replay, metrics, gen-corpus."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

from .corpusgen import generate_corpus, write_corpus
from .errors import CrewsimError
from .orchestrator import (
    SessionConfig,
    compute_metrics,
    read_log,
    replay,
    run_headless,
    write_log,
)
from .world import load_map_file


def data_path(name: str) -> str:
    """Filesystem path of a bundled scenario asset."""
    return str(resources.files("crewsim.data").joinpath(name))


def _add_session_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--map", default=data_path("demo_map.json"), help="map JSON file")
    parser.add_argument(
        "--corpus", default=data_path("demo_corpus.jsonl"), help="training corpus JSONL"
    )
    parser.add_argument(
        "--config", default=data_path("demo_scenario.json"), help="scenario config JSON"
    )
    parser.add_argument(
        "--addressing", choices=("explicit", "implicit"), default="explicit"
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="crewsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scripted session headless")
    _add_session_args(run_p)
    run_p.add_argument("--script", required=True, help="JSON script of timed utterances")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", required=True, help="output log JSONL path")
    run_p.add_argument("--dm", choices=("auto", "wizard-replay"), default="auto")

    serve_p = sub.add_parser("serve", help="serve a live session over WebSocket")
    _add_session_args(serve_p)
    serve_p.add_argument("--port", type=int, default=8750)
    serve_p.add_argument("--dm", choices=("auto", "wizard"), default="auto")

    replay_p = sub.add_parser("replay", help="re-emit a session log as console frames")
    replay_p.add_argument("log", help="session log JSONL")

    metrics_p = sub.add_parser("metrics", help="compute measures from a session log")
    metrics_p.add_argument("log", help="session log JSONL")

    gen_p = sub.add_parser("gen-corpus", help="generate the training corpus for a map")
    gen_p.add_argument("--map", default=data_path("demo_map.json"))
    gen_p.add_argument(
        "--config", default=data_path("demo_scenario.json"),
        help="scenario config supplying the robot roster",
    )
    gen_p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except CrewsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "run":
        with open(args.script, encoding="utf-8") as fh:
            script = json.load(fh)
        config = SessionConfig(
            map_path=args.map,
            corpus_path=args.corpus,
            scenario_path=args.config,
            seed=args.seed,
            dm_mode="wizard" if args.dm == "wizard-replay" else "auto",
            addressing_mode=args.addressing,
        )
        records, metrics = run_headless(config, script)
        write_log(records, args.out)
        print(json.dumps(metrics.to_dict(), indent=2))
        return 0
    if args.command == "serve":
        from .server import serve

        config = SessionConfig(
            map_path=args.map,
            corpus_path=args.corpus,
            scenario_path=args.config,
            dm_mode=args.dm,
            addressing_mode=args.addressing,
            port=args.port,
        )
        print(f"serving on ws://127.0.0.1:{args.port}/ws")
        serve(config)
        return 0
    if args.command == "replay":
        for frame in replay(read_log(args.log)):
            print(json.dumps(frame, separators=(",", ":")))
        return 0
    if args.command == "metrics":
        metrics = compute_metrics(read_log(args.log))
        print(json.dumps(metrics.to_dict(), indent=2))
        return 0
    if args.command == "gen-corpus":
        world = load_map_file(args.map)
        with open(args.config, encoding="utf-8") as fh:
            scenario = json.load(fh)
        pairs = generate_corpus(world, scenario.get("robots", []))
        write_corpus(pairs, args.out)
        print(f"wrote {len(pairs)} pairs to {args.out}")
        return 0
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
