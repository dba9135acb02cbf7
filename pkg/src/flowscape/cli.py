"""Command-line entry point.

Exit codes: 0 success, 2 configuration/usage error, 3 packet-source error,
4 asset-library error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .assets import ensure_default_assets
from .audio import AssetError
from .engine import ConfigError, EngineConfig, LiveEngine, load_config_file, run_offline
from .metrics import ConfusionCounts, format_table, score, score_run
from .packets import SourceError, open_live_source, open_pcap_source, HomeNets
from .rules import load_rules
from .trafficgen import SCENARIOS, ScenarioSpec, SpecError, write_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOURCE = 3
EXIT_ASSETS = 4

log = logging.getLogger(__name__)


def _default_asset_dir() -> str:
    cache = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return str(ensure_default_assets(os.path.join(cache, "flowscape", "assets")))


def _build_config(args) -> EngineConfig:
    config = EngineConfig()
    if getattr(args, "config", None):
        config = load_config_file(args.config, base=config)
    overrides = {}
    if getattr(args, "home", None):
        nets = []
        for chunk in args.home:
            nets.extend(c for c in chunk.replace(",", " ").split() if c)
        overrides["home_networks"] = tuple(nets)
    if getattr(args, "window", None) is not None:
        overrides["window_period_s"] = args.window
    if getattr(args, "assets", None):
        overrides["asset_dir"] = args.assets
    if getattr(args, "logs", None):
        overrides["log_dir"] = args.logs
    if getattr(args, "listen", None):
        overrides["listen"] = args.listen
    return replace(config, **overrides)


def _cmd_render(args) -> int:
    config = _build_config(args)
    if args.render and not config.asset_dir:
        config = replace(config, asset_dir=_default_asset_dir())
    try:
        result = run_offline(args.pcap, config, wav_path=args.render,
                             log_dir=config.log_dir)
    except ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except AssetError as exc:
        print(f"asset error: {exc}", file=sys.stderr)
        return EXIT_ASSETS
    events = sum(len(r.events) for r in result.reports)
    print(f"windows={result.n_windows} events={events} malformed={result.malformed}"
          f" voices={len(result.voice_starts)}"
          + (f" wav_frames={result.wav_frames}" if args.render else ""))
    return EXIT_OK


def _cmd_monitor(args) -> int:
    config = _build_config(args)
    if not config.asset_dir and not args.no_audio:
        config = replace(config, asset_dir=_default_asset_dir())
    try:
        home = HomeNets(config.home_networks) if config.home_networks else None
        if home is None:
            raise ConfigError(["home_networks must not be empty (--home)"])
        if args.pcap:
            source = open_pcap_source(args.pcap, home)
            paced, live_drops = True, False
        elif args.iface:
            source = open_live_source(args.iface, home)
            paced, live_drops = False, True
        else:
            raise ConfigError(["monitor needs --iface or --pcap"])
        records = _summaries_to_records(source)
        engine = LiveEngine(config, records, live_drops=live_drops, paced=paced,
                            audio="null" if args.no_audio else "auto",
                            malformed_counter=lambda: source.malformed)
    except ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except AssetError as exc:
        print(f"asset error: {exc}", file=sys.stderr)
        return EXIT_ASSETS

    import signal
    import threading

    from .control import ControlServer

    engine.start()
    server = ControlServer(engine, config.listen, ui_dir=_find_ui_dir())
    server.start()
    print(f"monitoring; control plane at http://{server.address[0]}:{server.address[1]}/")

    stop_requested = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda *_args: stop_requested.set())
    try:
        while not stop_requested.wait(0.5):
            pass
    finally:
        # repeat ^C must not abort the drain
        for signum in (signal.SIGINT, signal.SIGTERM):
            signal.signal(signum, signal.SIG_IGN)
        server.stop()
        engine.stop()
    return EXIT_OK


def _summaries_to_records(source):
    from .packets import Protocol, REC_ICMP_ECHO, REC_TCP

    for pkt in source:
        proto = REC_ICMP_ECHO if pkt.protocol is Protocol.ICMP_ECHO else REC_TCP
        yield (pkt.timestamp_us, pkt.src_ip, pkt.dst_ip, proto, pkt.flags,
               pkt.src_port or 0, pkt.dst_port or 0)


def _find_ui_dir():
    candidates = [
        Path(__file__).resolve().parent.parent.parent / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ]
    for candidate in candidates:
        if candidate.is_dir():
            return str(candidate)
    return None


def _cmd_gen(args) -> int:
    spec = ScenarioSpec(
        kind=args.kind,
        seed=args.seed,
        duration_s=args.duration,
        window_period_s=args.window,
        ports=args.ports,
        open_ratio=args.open_ratio,
        packets=args.packets,
        sources=args.sources,
        connections=args.connections,
        scan_mode=args.mode,
        attacker=args.attacker,
        victim=args.victim,
        home_networks=tuple(args.home) if args.home else ("10.0.0.0/24",),
    )
    labels_path = args.labels or (str(Path(args.out).with_suffix("")) + ".labels.json")
    try:
        labels = write_scenario(spec, args.out, labels_path)
    except SpecError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {args.out} and {labels_path} ({labels['scenario']}, "
          f"{len(labels['windows'])} window(s))")
    return EXIT_OK


def _cmd_score(args) -> int:
    if args.counts:
        counts = ConfusionCounts(*args.counts)
    elif args.run:
        counts = ConfusionCounts()
        for events_path, labels_path in args.run:
            counts = counts + score_run(events_path, labels_path)
    else:
        print("score needs --counts or --run", file=sys.stderr)
        return EXIT_CONFIG
    print(f"TP={counts.tp} TN={counts.tn} FP={counts.fp} FN={counts.fn}")
    print(format_table(score(counts)))
    return EXIT_OK


def _cmd_validate_config(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"config error: no such file: {args.path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config_file(str(path))
    except ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    asset_ids = None
    if config.asset_dir:
        try:
            from .audio import AssetLibrary

            asset_ids = AssetLibrary(config.asset_dir).ids()
        except AssetError as exc:
            print(f"asset error: {exc}", file=sys.stderr)
            return EXIT_ASSETS
    ruleset, errors = load_rules(config.rules_text or None, asset_ids=asset_ids)
    if errors:
        for problem in errors:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    extras = []
    if config.home_networks:
        extras.append(f"home={','.join(config.home_networks)}")
    print(f"ok: {len(ruleset)} rules, window {config.window_period_s}s"
          + (" " + " ".join(extras) if extras else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowscape",
        description="Hear your network: TCP/ICMP header activity as a live soundscape.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--home", action="append",
                        help="home network CIDR (repeatable or comma-separated)")
    common.add_argument("--window", type=float, help="window period in seconds")
    common.add_argument("--config", help="config document (settings + rules)")
    common.add_argument("--assets", help="directory of WAV sound assets")
    common.add_argument("--logs", help="directory for ipflow/trafficflow/events logs")

    p = sub.add_parser("monitor", parents=[common],
                       help="live capture (or paced pcap replay) with audio and control plane")
    p.add_argument("--iface", help="interface to sniff (mirror/promiscuous)")
    p.add_argument("--pcap", help="replay a capture at its recorded pacing")
    p.add_argument("--listen", help="control plane bind, host:port (default 127.0.0.1:8710)")
    p.add_argument("--no-audio", action="store_true", help="run silent (logs/control only)")
    p.set_defaults(fn=_cmd_monitor)

    p = sub.add_parser("render", parents=[common],
                       help="process a pcap faster than real time; write logs and WAV")
    p.add_argument("--pcap", required=True)
    p.add_argument("--render", metavar="OUT_WAV", help="output WAV path")
    p.set_defaults(fn=_cmd_render)

    p = sub.add_parser("gen", help="generate a synthetic scenario pcap + label sidecar")
    p.add_argument("--kind", required=True, choices=SCENARIOS)
    p.add_argument("--out", required=True, help="output pcap path")
    p.add_argument("--labels", help="label sidecar path (default: <out>.labels.json)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--window", type=float, default=1.0)
    p.add_argument("--ports", type=int, default=400)
    p.add_argument("--open-ratio", dest="open_ratio", type=float, default=0.02)
    p.add_argument("--packets", type=int, default=1500)
    p.add_argument("--sources", type=int, default=700)
    p.add_argument("--connections", type=int, default=20)
    p.add_argument("--mode", choices=("half_open", "connect"), default="half_open")
    p.add_argument("--attacker", default="203.0.113.66")
    p.add_argument("--victim", default="10.0.0.7")
    p.add_argument("--home", action="append")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("score", help="detection metrics from confusion counts or event logs")
    p.add_argument("--counts", nargs=4, type=int, metavar=("TP", "TN", "FP", "FN"))
    p.add_argument("--run", nargs=2, action="append", metavar=("EVENTS_LOG", "LABELS_JSON"),
                   help="score one replay (repeatable; results aggregate)")
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("validate-config", help="check a config document; nonzero exit on errors")
    p.add_argument("path")
    p.set_defaults(fn=_cmd_validate_config)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
