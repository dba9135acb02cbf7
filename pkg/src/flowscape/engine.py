"""Engine wiring: configuration, the offline (pcap) pipeline, and the
threaded live pipeline.

Stages communicate only through immutable snapshots (records, window
snapshots, reports, plans); configuration changes are staged and swapped in
at window rotations so no window ever evaluates under mixed settings.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from . import fastpath
from .audio import AssetLibrary, Mixer, NullSink, open_sink, plan, write_wav
from .flowtable import WindowState
from .packets import HomeNets, SourceError
from .reports import LogWriter, WindowReport, build_report, flow_key_text
from .rules import RuleSet, evaluate_window, load_rules

log = logging.getLogger(__name__)

QUEUE_CAPACITY = 65536


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = [str(e) for e in errors]
        super().__init__("; ".join(self.errors))


# configuration keys accepted in the config document next to rule lines
_CONFIG_KEYS = {
    "window_period_s", "home_networks", "master_gain", "asset_dir",
    "log_dir", "ambient_sound", "listen",
}


@dataclass(frozen=True)
class EngineConfig:
    home_networks: tuple = ()
    window_period_s: float = 1.0
    master_gain: float = 1.0
    rules_text: str = ""
    asset_dir: Optional[str] = None
    log_dir: Optional[str] = None
    ambient_sound: Optional[str] = None
    listen: str = "127.0.0.1:8710"

    def validated(self, asset_ids=None) -> tuple[HomeNets, RuleSet]:
        """Home nets + rule set, or ConfigError carrying every problem."""
        errors = []
        home = None
        if self.window_period_s <= 0:
            errors.append("window_period_s must be positive")
        if not 0.0 <= self.master_gain <= 1.0:
            errors.append("master_gain must be within [0, 1]")
        if not self.home_networks:
            errors.append("home_networks must not be empty")
        else:
            try:
                home = HomeNets(self.home_networks)
            except ValueError as exc:
                errors.append(f"home_networks: {exc}")
        ruleset, rule_errors = load_rules(self.rules_text or None, asset_ids=asset_ids)
        errors.extend(str(e) for e in rule_errors)
        if self.ambient_sound and asset_ids is not None and self.ambient_sound not in asset_ids:
            errors.append(f"unknown ambient sound: {self.ambient_sound}")
        if errors:
            raise ConfigError(errors)
        return home, ruleset


def parse_config_text(text: str) -> tuple[dict, str]:
    """Split a config document into engine settings and the rule document.

    Engine settings are `key = value` lines with reserved keys; everything
    else (rules, feature declarations, comments) passes through to the rule
    grammar untouched.
    """
    settings: dict = {}
    doc_lines = []
    errors = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if sep and key in _CONFIG_KEYS:
            value = value.strip()
            try:
                if key == "window_period_s":
                    settings[key] = float(value)
                elif key == "master_gain":
                    settings[key] = float(value)
                elif key == "home_networks":
                    settings[key] = tuple(v for v in value.replace(",", " ").split() if v)
                else:
                    settings[key] = value
            except ValueError:
                errors.append(f"line {line_no}: bad value for {key}: {value!r}")
        else:
            doc_lines.append(line)
    if errors:
        raise ConfigError(errors)
    return settings, "\n".join(doc_lines)


def load_config_file(path: str, base: Optional[EngineConfig] = None) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        settings, rules_text = parse_config_text(fh.read())
    config = base or EngineConfig()
    if rules_text.strip():
        settings["rules_text"] = rules_text
    return replace(config, **settings)


# ---------------------------------------------------------------------------
# Windowing

def windows_from_records(records: Iterable, home: HomeNets, period_s: float,
                         malformed_counter: Optional[Callable[[], int]] = None):
    """Partition decoded records into window snapshots by timestamp.

    Window n covers [t0 + n*P, t0 + (n+1)*P) with t0 the first packet's
    timestamp. Gap windows with no packets still produce (empty) snapshots;
    the trailing partial window is flushed at end of stream.
    """
    period_us = max(1, round(period_s * 1_000_000))
    state = WindowState(home=home, window_period=period_s)
    boundary: Optional[int] = None
    attributed = 0

    def charge_malformed():
        nonlocal attributed
        if malformed_counter is not None:
            total = malformed_counter()
            state.malformed_count += total - attributed
            attributed = total

    for rec in records:
        ts = rec[0]
        if boundary is None:
            boundary = ts + period_us
        while ts >= boundary:
            charge_malformed()
            snapshot, state = state.rotate()
            yield snapshot
            boundary += period_us
        state.record_raw(rec)
    if boundary is not None:
        charge_malformed()
        snapshot, _ = state.rotate()
        yield snapshot


def window_outputs(snapshot, ruleset: RuleSet, master_gain: float,
                   ambient_sound: Optional[str] = None):
    """(report, playback plan) for one finished window."""
    tfc, ifc = snapshot.traffic_flow_count, snapshot.ip_flow_count
    views = [
        (key, ruleset.space.combine(counters, tfc, ifc))
        for key, counters in snapshot.sorted_ip_flows()
    ]
    events = evaluate_window(ruleset, views, snapshot.window_index, tfc, ifc)
    report = build_report(snapshot, events)
    playback = plan(events, ruleset, master_gain, snapshot.window_index,
                    snapshot.window_period, ambient_sound)
    return report, playback


# ---------------------------------------------------------------------------
# Offline pipeline

@dataclass
class OfflineResult:
    reports: list
    plans: list
    n_windows: int
    malformed: int
    voice_starts: list = field(default_factory=list)
    wav_frames: int = 0

    @property
    def drop_count(self) -> int:
        return 0  # offline reads never drop; field kept for parity with live stats


def run_offline(pcap_path: str, config: EngineConfig, wav_path: Optional[str] = None,
                log_dir: Optional[str] = None) -> OfflineResult:
    """Process a capture faster than real time: logs, reports and (optionally)
    a rendered WAV. Deterministic for fixed inputs."""
    asset_ids = None
    library = None
    if wav_path is not None:
        if not config.asset_dir:
            raise ConfigError(["asset_dir required to render audio"])
        library = AssetLibrary(config.asset_dir)
        asset_ids = library.ids()
    home, ruleset = config.validated(asset_ids=asset_ids)

    try:
        with open(pcap_path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise SourceError(f"cannot read pcap file {pcap_path}: {exc}") from exc

    scanner = fastpath.scan_pcap(data)
    writer = LogWriter(log_dir) if log_dir else None
    reports = []
    plans = []
    try:
        for snapshot in windows_from_records(
            scanner, home, config.window_period_s, lambda: scanner.malformed
        ):
            report, playback = window_outputs(
                snapshot, ruleset, config.master_gain, config.ambient_sound
            )
            reports.append(report)
            plans.append(playback)
            if writer is not None:
                writer.write_report(report)
    finally:
        if writer is not None:
            writer.close()

    result = OfflineResult(
        reports=reports,
        plans=plans,
        n_windows=len(reports),
        malformed=scanner.malformed,
    )
    if wav_path is not None and library is not None:
        mixer = Mixer(library)
        samples = mixer.render(plans, min_duration_s=len(reports) * config.window_period_s)
        write_wav(wav_path, samples)
        result.voice_starts = mixer.voice_starts
        result.wav_frames = len(samples)
    return result


# ---------------------------------------------------------------------------
# Live pipeline

@dataclass
class _Subscriber:
    q: "queue.Queue"
    overflowed: bool = False


class LiveEngine:
    """Capture, aggregation, audio, logging and control glued by queues.

    The aggregator thread owns the window state and the active config;
    control handlers only stage changes, which swap in at the next rotation.
    """

    def __init__(self, config: EngineConfig, records: Iterable, *,
                 live_drops: bool = False, paced: bool = False,
                 audio: str = "auto", clock=time.monotonic,
                 sleep=time.sleep, malformed_counter: Optional[Callable[[], int]] = None):
        self.library = None
        asset_ids = None
        if config.asset_dir:
            self.library = AssetLibrary(config.asset_dir)
            asset_ids = self.library.ids()
        self._home, self._ruleset = config.validated(asset_ids=asset_ids)
        self._asset_ids = asset_ids
        self.config = config
        self._records = records
        self._live_drops = live_drops
        self._paced = paced
        self._clock = clock
        self._sleep = sleep

        self._queue: "queue.Queue" = queue.Queue(maxsize=QUEUE_CAPACITY)
        self._log_queue: "queue.Queue" = queue.Queue(maxsize=1024)
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._staged: Optional[EngineConfig] = None
        self.config_version = 1
        self._applied_version = 1
        self.window_index = 0
        self.last_report: Optional[WindowReport] = None
        self.drop_count = 0
        self.malformed_count = 0
        self.log_drop_count = 0
        self._malformed_counter = malformed_counter
        self._drops_attributed = 0
        self._malformed_attributed = 0
        self._running = False
        self._threads: list[threading.Thread] = []
        self._writer = LogWriter(config.log_dir) if config.log_dir else None
        if self.library is not None:
            mixer = Mixer(self.library)
            self.sink = open_sink(mixer, prefer_device=(audio == "auto"))
        else:
            self.sink = NullSink()

    # -- threads

    def start(self) -> None:
        self._running = True
        self._threads = [
            threading.Thread(target=self._capture_loop, name="capture", daemon=True),
            threading.Thread(target=self._aggregate_loop, name="aggregate", daemon=True),
            threading.Thread(target=self._log_loop, name="logwriter", daemon=True),
        ]
        for t in self._threads:
            t.start()

    def stop(self, timeout: float = 5.0) -> None:
        self._running = False
        for t in self._threads:
            t.join(timeout=timeout)
        # the shutdown rotation may land after the writer thread exits
        while self._writer is not None and not self._log_queue.empty():
            self._writer.write_report(self._log_queue.get_nowait())
        if self._writer is not None:
            self._writer.close()
        self.sink.close()

    def _capture_loop(self) -> None:
        last_ts = None
        for rec in self._records:
            if not self._running:
                break
            if self._paced and last_ts is not None:
                delta = (rec[0] - last_ts) / 1_000_000
                if delta > 0:
                    self._sleep(min(delta, 5.0))
            last_ts = rec[0]
            if self._live_drops:
                try:
                    self._queue.put_nowait(rec)
                except queue.Full:
                    self.drop_count += 1
            else:
                while self._running:
                    try:
                        self._queue.put(rec, timeout=0.2)
                        break
                    except queue.Full:
                        continue

    def _aggregate_loop(self) -> None:
        state = WindowState(home=self._home, window_period=self.config.window_period_s)
        deadline = self._clock() + self.config.window_period_s
        while self._running:
            timeout = deadline - self._clock()
            if timeout <= 0:
                state = self._rotate(state)
                deadline += self.config.window_period_s
                continue
            try:
                rec = self._queue.get(timeout=min(timeout, 0.25))
            except queue.Empty:
                continue
            state.record_raw(rec)
        self._rotate(state)  # flush the partial window on shutdown

    def _rotate(self, state: WindowState) -> WindowState:
        if self._malformed_counter is not None:
            self.malformed_count = self._malformed_counter()
        state.dropped_count = self.drop_count - self._drops_attributed
        state.malformed_count = self.malformed_count - self._malformed_attributed
        self._drops_attributed = self.drop_count
        self._malformed_attributed = self.malformed_count
        snapshot, fresh = state.rotate()
        report, playback = window_outputs(
            snapshot, self._ruleset, self.config.master_gain, self.config.ambient_sound
        )
        self.sink.play_plan(playback)
        self.last_report = report
        self.window_index = snapshot.window_index + 1
        try:
            self._log_queue.put_nowait(report)
        except queue.Full:
            self.log_drop_count += 1
        self._publish(report)
        with self._lock:
            if self._staged is not None:
                self._apply_config(self._staged)
                self._staged = None
                self._applied_version = self.config_version
        fresh.window_period = self.config.window_period_s
        return fresh

    def _apply_config(self, staged: EngineConfig) -> None:
        home, ruleset = staged.validated(asset_ids=self._asset_ids)
        self._home, self._ruleset = home, ruleset
        self.config = staged

    def _log_loop(self) -> None:
        while self._running or not self._log_queue.empty():
            try:
                report = self._log_queue.get(timeout=0.2)
            except queue.Empty:
                continue
            if self._writer is not None:
                self._writer.write_report(report)

    # -- control surface

    def get_state(self) -> dict:
        report = self.last_report
        return {
            "window_index": self.window_index,
            "window_period_s": self.config.window_period_s,
            "traffic_flow_count": report.traffic_flow_count if report else 0,
            "ip_flow_count": report.ip_flow_count if report else 0,
            "last_sounds": list(report.triggered_sound_ids) if report else [],
            "last_window": report.window_index if report else None,
            "drop_count": self.drop_count,
            "malformed_count": self.malformed_count,
            "log_degraded": bool(self._writer and self._writer.degraded),
            "config_version": self.config_version,
            "applied_version": self._applied_version,
            "kernel": fastpath.KERNEL,
            "audio_sink": getattr(self.sink, "name", "null"),
            "master_gain": self.config.master_gain,
        }

    def get_config(self) -> dict:
        cfg = self._staged if self._staged is not None else self.config
        _home, ruleset = cfg.validated(asset_ids=self._asset_ids)
        return {
            "version": self.config_version,
            "window_period_s": cfg.window_period_s,
            "home_networks": list(cfg.home_networks),
            "master_gain": cfg.master_gain,
            "ambient_sound": cfg.ambient_sound,
            "rules": ruleset.to_text(),
            "assets": sorted(self._asset_ids) if self._asset_ids else [],
        }

    def stage_config(self, patch: dict) -> dict:
        """Validate and stage a partial config; applies at the next rotation.

        The whole payload is rejected on any error (no partial application).
        Concurrent stagings serialize; the last accepted one wins.
        """
        allowed = {"window_period_s", "home_networks", "master_gain", "rules",
                   "ambient_sound", "gains", "mutes", "unmutes", "assignments",
                   "enables", "disables"}
        unknown = set(patch) - allowed
        if unknown:
            raise ConfigError([f"unknown config key: {k}" for k in sorted(unknown)])
        with self._lock:
            base = self._staged if self._staged is not None else self.config
            changes = {}
            if "window_period_s" in patch:
                changes["window_period_s"] = float(patch["window_period_s"])
            if "master_gain" in patch:
                changes["master_gain"] = float(patch["master_gain"])
            if "home_networks" in patch:
                changes["home_networks"] = tuple(patch["home_networks"])
            if "ambient_sound" in patch:
                changes["ambient_sound"] = patch["ambient_sound"] or None
            if "rules" in patch:
                changes["rules_text"] = patch["rules"]
            candidate = replace(base, **changes)
            _home, ruleset = candidate.validated(asset_ids=self._asset_ids)  # raises ConfigError
            ruleset = self._apply_rule_tweaks(ruleset, patch)
            candidate = replace(candidate, rules_text=ruleset.to_text())
            candidate.validated(asset_ids=self._asset_ids)
            self._staged = candidate
            self.config_version += 1
            return {
                "version": self.config_version,
                "activation_window": self.window_index + 1,
            }

    def _apply_rule_tweaks(self, ruleset: RuleSet, patch: dict) -> RuleSet:
        try:
            for rule_id, gain in (patch.get("gains") or {}).items():
                ruleset = ruleset.set_gain(rule_id, float(gain))
            for rule_id in patch.get("mutes") or []:
                ruleset = ruleset.set_muted(rule_id, True)
            for rule_id in patch.get("unmutes") or []:
                ruleset = ruleset.set_muted(rule_id, False)
            for rule_id in patch.get("disables") or []:
                ruleset = ruleset.set_enabled(rule_id, False)
            for rule_id in patch.get("enables") or []:
                ruleset = ruleset.set_enabled(rule_id, True)
            for rule_id, sound_id in (patch.get("assignments") or {}).items():
                ruleset = ruleset.assign_sound(rule_id, sound_id, asset_ids=self._asset_ids)
        except (KeyError, ValueError) as exc:
            raise ConfigError([str(exc)])
        return ruleset

    # -- event stream fan-out

    def subscribe(self, maxsize: int = 64) -> _Subscriber:
        sub = _Subscriber(q=queue.Queue(maxsize=maxsize))
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def _publish(self, report: WindowReport) -> None:
        frame = report_stream_frame(report, self._ruleset)
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            try:
                sub.q.put_nowait(frame)
            except queue.Full:
                # slow subscriber: cut it loose rather than backpressure
                sub.overflowed = True


def report_stream_frame(report: WindowReport, ruleset: RuleSet) -> dict:
    """Event-stream summary of one window, with per-event headline features
    (the features each rule's condition references)."""
    events = []
    for ev in report.events:
        rule = ruleset.get(ev.rule_id)
        refs = sorted(rule.references()) if rule else []
        events.append({
            "rule": ev.rule_id,
            "sound": ev.sound_id,
            "category": ev.category,
            "flow": flow_key_text(ev.ip_flow_key),
            "features": {name: ev.features.get(name, 0) for name in refs},
        })
    return {
        "window": report.window_index,
        "start_us": report.start_us,
        "events": events,
        "sounds": list(report.triggered_sound_ids),
        "stats": report.stats,
    }
