"""Per-window reports and the three log files.

Flow logs are space-delimited text with self-describing header comments;
the event log is one JSON record per line. Rows are canonically sorted so
identical inputs reproduce byte-identical logs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

from .flowtable import PTYPE_NAMES, WindowSnapshot
from .packets import REC_ICMP_ECHO, format_ip
from .rules import EventInstance

log = logging.getLogger(__name__)

COUNTER_COLUMNS = tuple(f"{name}_{d}" for name in PTYPE_NAMES for d in ("in", "out"))

_PROTO_NAMES = {0: "TCP", REC_ICMP_ECHO: "ICMP"}


def flow_key_text(key) -> str:
    if key is None:
        return "-"
    return f"{format_ip(key.ip_a)}~{format_ip(key.ip_b)}~{_PROTO_NAMES[key.protocol]}"


@dataclass(frozen=True)
class WindowReport:
    """Everything produced at one window boundary."""

    window_index: int
    start_us: Optional[int]
    window_period: float
    ip_flow_rows: tuple       # (ordinal, IpFlowKey, counters) canonical order
    traffic_flow_rows: tuple  # (ordinal, FlowKey, counters)
    events: tuple             # EventInstance, canonical order
    triggered_sound_ids: tuple
    stats: dict

    @property
    def ip_flow_count(self) -> int:
        return self.stats["ip_flows"]

    @property
    def traffic_flow_count(self) -> int:
        return self.stats["traffic_flows"]


def build_report(snapshot: WindowSnapshot, events: list) -> WindowReport:
    ip_rows = tuple(
        (i + 1, key, counters)
        for i, (key, counters) in enumerate(snapshot.sorted_ip_flows())
    )
    traffic_rows = tuple(
        (i + 1, key, counters)
        for i, (key, counters) in enumerate(snapshot.sorted_traffic_flows())
    )
    return WindowReport(
        window_index=snapshot.window_index,
        start_us=snapshot.start_us,
        window_period=snapshot.window_period,
        ip_flow_rows=ip_rows,
        traffic_flow_rows=traffic_rows,
        events=tuple(events),
        triggered_sound_ids=tuple(sorted({ev.sound_id for ev in events})),
        stats={
            "traffic_flows": snapshot.traffic_flow_count,
            "ip_flows": snapshot.ip_flow_count,
            "malformed": snapshot.malformed_count,
            "dropped": snapshot.dropped_count,
            "transit": snapshot.transit_count,
        },
    )


_COUNTER_HEADER = " ".join(COUNTER_COLUMNS)
_FILE_HEADERS = {
    "ipflow.log": ("# flowscape ip flow log\n"
                   f"# columns: window flow host_a host_b {_COUNTER_HEADER}\n"),
    "trafficflow.log": ("# flowscape traffic flow log\n"
                        f"# columns: window flow host_a host_b port_a port_b {_COUNTER_HEADER}\n"),
    "events.log": "",
}

DEFAULT_ROTATE_BYTES = 64 * 1024 * 1024


class LogWriter:
    """Single-writer sink for the three log files under one directory.

    Files rotate by size, but only between windows: a file that crossed the
    limit is renamed aside (ipflow.log.1, .2, ...) before the next window's
    rows, so every file holds whole windows.
    """

    def __init__(self, directory: str, rotate_bytes: int = DEFAULT_ROTATE_BYTES):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.rotate_bytes = rotate_bytes
        self.degraded = False
        self._files: dict[str, Optional[TextIO]] = {name: None for name in _FILE_HEADERS}
        self._rotations: dict[str, int] = {name: 0 for name in _FILE_HEADERS}
        try:
            for name in _FILE_HEADERS:
                self._open(name)
        except OSError as exc:
            log.error("log directory unusable (%s); logging degraded", exc)
            self.degraded = True

    def _open(self, name: str) -> TextIO:
        fh = open(self.directory / name, "w", encoding="utf-8")
        fh.write(_FILE_HEADERS[name])
        self._files[name] = fh
        return fh

    def _handle(self, name: str) -> TextIO:
        fh = self._files[name]
        if fh is None:
            raise OSError(f"{name} unavailable")
        return fh

    def _rotate_if_large(self, name: str) -> None:
        fh = self._files[name]
        if fh is None or fh.tell() < self.rotate_bytes:
            return
        fh.close()
        self._rotations[name] += 1
        (self.directory / name).rename(self.directory / f"{name}.{self._rotations[name]}")
        self._open(name)

    def write_report(self, report: WindowReport) -> None:
        try:
            for name in _FILE_HEADERS:
                self._rotate_if_large(name)
            self._write_flow_logs(report)
            self._write_event_log(report)
        except OSError as exc:
            if not self.degraded:
                log.error("log write failed (%s); logging degraded", exc)
            self.degraded = True

    def _boundary_line(self, report: WindowReport) -> str:
        s = report.stats
        start = report.start_us if report.start_us is not None else "-"
        return (
            f"# window {report.window_index} start_us={start}"
            f" traffic_flows={s['traffic_flows']} ip_flows={s['ip_flows']}"
            f" malformed={s['malformed']} dropped={s['dropped']} transit={s['transit']}\n"
        )

    def _write_flow_logs(self, report: WindowReport) -> None:
        ip = self._handle("ipflow.log")
        traffic = self._handle("trafficflow.log")
        boundary = self._boundary_line(report)
        ip.write(boundary)
        for ordinal, key, counters in report.ip_flow_rows:
            ip.write(
                f"{report.window_index} {ordinal} {format_ip(key.ip_a)} {format_ip(key.ip_b)} "
                + " ".join(map(str, counters)) + "\n"
            )
        traffic.write(boundary)
        for ordinal, key, counters in report.traffic_flow_rows:
            traffic.write(
                f"{report.window_index} {ordinal} {format_ip(key.ip_a)} {format_ip(key.ip_b)} "
                f"{key.port_a} {key.port_b} " + " ".join(map(str, counters)) + "\n"
            )
        ip.flush()
        traffic.flush()

    def _write_event_log(self, report: WindowReport) -> None:
        events = self._handle("events.log")
        for ev in report.events:
            events.write(event_record_json(ev) + "\n")
        events.flush()

    def close(self) -> None:
        for fh in self._files.values():
            if fh is not None:
                fh.close()


def event_record_json(ev: EventInstance) -> str:
    record = {
        "window": ev.window_index,
        "rule": ev.rule_id,
        "sound": ev.sound_id,
        "category": ev.category,
        "flow": flow_key_text(ev.ip_flow_key),
        "features": ev.features,
    }
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Reading logs back (verification, scoring, replay)

def read_ip_flow_log(path: str):
    """Yield (window_index, stats, rows) per window from an ip flow log.

    rows are (ordinal, host_a, host_b, counters tuple). The protocol of each
    flow is recoverable from its counters: only ICMP flows count ICMP_ECHO.
    """
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# window "):
                if current is not None:
                    yield current
                parts = line.split()
                window_index = int(parts[2])
                stats = {}
                for part in parts[3:]:
                    name, _, value = part.partition("=")
                    stats[name] = None if value == "-" else int(value)
                current = (window_index, stats, [])
            elif line.startswith("#") or not line:
                continue
            else:
                parts = line.split()
                window_index, ordinal = int(parts[0]), int(parts[1])
                host_a, host_b = parts[2], parts[3]
                counters = tuple(int(x) for x in parts[4:])
                current[2].append((ordinal, host_a, host_b, counters))
    if current is not None:
        yield current


def read_event_log(path: str) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                records.append(json.loads(line))
    return records
