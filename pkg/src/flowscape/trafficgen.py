"""Synthetic traffic scenarios: normal browsing plus the seven attack
behaviours used to exercise the engine (ping, four scan types, SYN flood,
spoofed DDoS). Output is a standard Ethernet pcap plus a label sidecar for
automatic scoring. Seeded specs reproduce byte-identical captures.
"""

from __future__ import annotations

import json
import math
import random
import struct
from dataclasses import dataclass, field
from typing import Iterable

from .packets import parse_ip, write_pcap

SCENARIOS = (
    "NORMAL", "PING", "SYN_SCAN", "FIN_SCAN", "XMAS_SCAN", "NULL_SCAN",
    "SYN_FLOOD", "DDOS_SPOOFED",
)

# flag bytes
F_FIN, F_SYN, F_RST, F_PSH, F_ACK, F_URG = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20

BASE_TS_US = 1_700_000_000_000_000
_MAC_A = bytes.fromhex("020000000001")
_MAC_B = bytes.fromhex("020000000002")


class SpecError(ValueError):
    """Invalid scenario parameters."""


@dataclass
class ScenarioSpec:
    kind: str
    attacker: str = "203.0.113.66"
    victim: str = "10.0.0.7"
    home_networks: tuple = ("10.0.0.0/24",)
    duration_s: float = 1.0
    seed: int = 1
    window_period_s: float = 1.0
    # intensity knobs (which ones apply depends on kind)
    ports: int = 400
    open_ratio: float = 0.02
    packets: int = 1500
    backlog: int = 100
    sources: int = 700
    packets_per_source: int = 2
    connections: int = 20
    servers: int = 4
    scan_mode: str = "half_open"  # SYN_SCAN: "half_open" or "connect"

    def validate(self) -> None:
        if self.kind not in SCENARIOS:
            raise SpecError(f"unknown scenario kind: {self.kind}")
        if not 0.0 <= self.open_ratio <= 1.0:
            raise SpecError("open_ratio must be within [0, 1]")
        if self.duration_s <= 0:
            raise SpecError("duration_s must be positive")
        if self.scan_mode not in ("half_open", "connect"):
            raise SpecError(f"unknown scan mode: {self.scan_mode}")
        if min(self.ports, self.packets, self.sources, self.connections, self.servers) < 1:
            raise SpecError("intensity parameters must be at least 1")


# --- frame building ---------------------------------------------------------

def _checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f">{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _ipv4(src: bytes, dst: bytes, proto: int, payload: bytes, ident: int) -> bytes:
    header = struct.pack(">BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), ident & 0xFFFF,
                         0, 64, proto, 0, src, dst)
    header = header[:10] + struct.pack(">H", _checksum(header)) + header[12:]
    return header + payload


def tcp_frame(src: str, dst: str, sport: int, dport: int, flags: int,
              seq: int = 0, ident: int = 0) -> bytes:
    s, d = parse_ip(src), parse_ip(dst)
    tcp = struct.pack(">HHIIBBHHH", sport, dport, seq, 0, 5 << 4, flags, 8192, 0, 0)
    pseudo = s + d + struct.pack(">BBH", 0, 6, len(tcp))
    tcp = tcp[:16] + struct.pack(">H", _checksum(pseudo + tcp)) + tcp[18:]
    return _MAC_A + _MAC_B + b"\x08\x00" + _ipv4(s, d, 6, tcp, ident)


def icmp_echo_frame(src: str, dst: str, icmp_type: int, ident: int, seq: int) -> bytes:
    s, d = parse_ip(src), parse_ip(dst)
    icmp = struct.pack(">BBHHH", icmp_type, 0, 0, ident, seq)
    icmp = icmp[:2] + struct.pack(">H", _checksum(icmp)) + icmp[4:]
    return _MAC_A + _MAC_B + b"\x08\x00" + _ipv4(s, d, 1, icmp, seq)


# --- scenarios ---------------------------------------------------------------

def _offsets(rng: random.Random, count: int, duration_s: float) -> list:
    """Packet exchange start times: jittered uniform spread, leaving headroom
    for multi-step exchanges at the window tail."""
    span_us = int(duration_s * 1_000_000 * 0.9)
    step = span_us / max(count, 1)
    starts = sorted(
        int(i * step + rng.uniform(0, step * 0.8)) for i in range(count)
    )
    return starts


def _gen_normal(spec: ScenarioSpec, rng: random.Random) -> list:
    client = "10.0.0.20"
    servers = [f"198.51.100.{10 + i}" for i in range(spec.servers)]
    frames = []
    starts = _offsets(rng, spec.connections, spec.duration_s)
    for i, t0 in enumerate(starts):
        server = servers[i % len(servers)]
        sport = 41000 + i
        dport = 443 if i % 2 else 80
        steps = [
            (client, server, sport, dport, F_SYN),
            (server, client, dport, sport, F_SYN | F_ACK),
            (client, server, sport, dport, F_ACK),
            (client, server, sport, dport, F_PSH | F_ACK),
            (server, client, dport, sport, F_ACK),
            (server, client, dport, sport, F_PSH | F_ACK),
            (client, server, sport, dport, F_ACK),
            (client, server, sport, dport, F_FIN | F_ACK),
            (server, client, dport, sport, F_FIN | F_ACK),
            (client, server, sport, dport, F_ACK),
        ]
        for j, (s, d, sp, dp, flags) in enumerate(steps):
            frames.append((BASE_TS_US + t0 + j * 150, tcp_frame(s, d, sp, dp, flags, ident=i * 16 + j)))
    return frames


def _gen_ping(spec: ScenarioSpec, rng: random.Random) -> list:
    frames = []
    count = max(4, min(spec.packets, 50))
    for i, t0 in enumerate(_offsets(rng, count, spec.duration_s)):
        frames.append((BASE_TS_US + t0, icmp_echo_frame(spec.attacker, spec.victim, 8, 77, i)))
        frames.append((BASE_TS_US + t0 + 120, icmp_echo_frame(spec.victim, spec.attacker, 0, 77, i)))
    return frames


def _scan_ports(spec: ScenarioSpec, rng: random.Random) -> tuple[list, set]:
    ports = list(range(1, spec.ports + 1))
    open_count = round(spec.ports * spec.open_ratio)
    open_ports = set(rng.sample(ports, open_count)) if open_count else set()
    return ports, open_ports


def _gen_syn_scan(spec: ScenarioSpec, rng: random.Random) -> list:
    ports, open_ports = _scan_ports(spec, rng)
    frames = []
    starts = _offsets(rng, len(ports), spec.duration_s)
    for i, (port, t0) in enumerate(zip(ports, starts)):
        sport = 40000 + i
        ts = BASE_TS_US + t0
        frames.append((ts, tcp_frame(spec.attacker, spec.victim, sport, port, F_SYN, ident=i)))
        if port in open_ports:
            frames.append((ts + 100, tcp_frame(spec.victim, spec.attacker, port, sport, F_SYN | F_ACK)))
            if spec.scan_mode == "half_open":
                frames.append((ts + 200, tcp_frame(spec.attacker, spec.victim, sport, port, F_RST)))
            else:  # full connect: confirm, then tear down
                frames.append((ts + 200, tcp_frame(spec.attacker, spec.victim, sport, port, F_ACK)))
                frames.append((ts + 300, tcp_frame(spec.attacker, spec.victim, sport, port, F_FIN)))
        else:
            frames.append((ts + 100, tcp_frame(spec.victim, spec.attacker, port, sport, F_RST | F_ACK)))
    return frames


def _gen_probe_scan(spec: ScenarioSpec, rng: random.Random, flags: int) -> list:
    # FIN / Xmas / NULL probes: closed ports answer RST+ACK, open ports stay quiet
    ports, open_ports = _scan_ports(spec, rng)
    frames = []
    starts = _offsets(rng, len(ports), spec.duration_s)
    for i, (port, t0) in enumerate(zip(ports, starts)):
        sport = 40000 + i
        ts = BASE_TS_US + t0
        frames.append((ts, tcp_frame(spec.attacker, spec.victim, sport, port, flags, ident=i)))
        if port not in open_ports:
            frames.append((ts + 100, tcp_frame(spec.victim, spec.attacker, port, sport, F_RST | F_ACK)))
    return frames


def _gen_syn_flood(spec: ScenarioSpec, rng: random.Random) -> list:
    frames = []
    starts = _offsets(rng, spec.packets, spec.duration_s)
    answered = 0
    for i, t0 in enumerate(starts):
        sport = rng.randint(1024, 65535)
        ts = BASE_TS_US + t0
        frames.append((ts, tcp_frame(spec.attacker, spec.victim, sport, 80, F_SYN, seq=i, ident=i)))
        if answered < spec.backlog:
            # half-open queue still has room: victim answers
            frames.append((ts + 90, tcp_frame(spec.victim, spec.attacker, 80, sport, F_SYN | F_ACK)))
            answered += 1
    return frames


def _gen_ddos(spec: ScenarioSpec, rng: random.Random) -> list:
    if spec.sources < 2:
        raise SpecError("DDOS_SPOOFED needs at least 2 spoofed sources")
    frames = []
    total = spec.sources * spec.packets_per_source
    starts = _offsets(rng, total, spec.duration_s)
    idx = 0
    for s in range(spec.sources):
        # spoofed addresses spread over many /24s
        src = f"198.{18 + (s // 250) % 80}.{(s // 50) % 250}.{2 + s % 250}"
        sport = 30000 + (s % 30000)
        for _ in range(spec.packets_per_source):
            frames.append((BASE_TS_US + starts[idx],
                           tcp_frame(src, spec.victim, sport, 80, F_SYN, ident=idx)))
            idx += 1
    return frames


_GENERATORS = {
    "NORMAL": _gen_normal,
    "PING": _gen_ping,
    "SYN_SCAN": _gen_syn_scan,
    "FIN_SCAN": lambda spec, rng: _gen_probe_scan(spec, rng, F_FIN),
    "XMAS_SCAN": lambda spec, rng: _gen_probe_scan(spec, rng, F_URG | F_PSH | F_FIN),
    "NULL_SCAN": lambda spec, rng: _gen_probe_scan(spec, rng, 0),
    "SYN_FLOOD": _gen_syn_flood,
    "DDOS_SPOOFED": _gen_ddos,
}


def generate(spec: ScenarioSpec) -> tuple[list, dict]:
    """(frames, labels) for one scenario; frames are (ts_us, bytes) sorted."""
    spec.validate()
    rng = random.Random(spec.seed)
    frames = _GENERATORS[spec.kind](spec, rng)
    frames.sort(key=lambda item: item[0])
    n_windows = max(1, math.ceil(
        (frames[-1][0] - frames[0][0] + 1) / (spec.window_period_s * 1_000_000)
    )) if frames else 0
    attack = spec.kind != "NORMAL"
    labels = {
        "scenario": spec.kind,
        "seed": spec.seed,
        "home_networks": list(spec.home_networks),
        "window_period_s": spec.window_period_s,
        "attack": attack,
        "windows": [{"index": i, "attack": attack} for i in range(n_windows)],
    }
    return frames, labels


def write_scenario(spec: ScenarioSpec, pcap_path: str, labels_path: str) -> dict:
    frames, labels = generate(spec)
    write_pcap(pcap_path, frames)
    with open(labels_path, "w", encoding="utf-8") as fh:
        json.dump(labels, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return labels
