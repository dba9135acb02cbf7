"""Windowed flow tables.

Two aggregation levels are kept per time window: traffic flows (host pair +
ports + protocol) and IP flows (host pair + protocol only). Each holds one
counter per packet type and direction; counters reset at every window
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .packets import ACK, FIN, PSH, RST, SYN, URG, HomeNets, PacketSummary, Protocol, REC_ICMP_ECHO, REC_TCP

# Packet-type taxonomy, canonical order. This order is what the flow logs
# document in their header line; downstream feature names build on it.
PTYPE_NAMES = (
    "SYN", "SYN_ACK", "ACK", "FIN", "FIN_ACK", "RST", "RST_ACK",
    "PSH", "PSH_ACK", "URG", "NULL", "XMAS", "LAND", "OTHER", "ICMP_ECHO",
)
(
    PT_SYN, PT_SYN_ACK, PT_ACK, PT_FIN, PT_FIN_ACK, PT_RST, PT_RST_ACK,
    PT_PSH, PT_PSH_ACK, PT_URG, PT_NULL, PT_XMAS, PT_LAND, PT_OTHER, PT_ICMP,
) = range(15)
N_PTYPES = 15
IN, OUT = 0, 1
N_COUNTERS = N_PTYPES * 2

_EXACT_SETS = {
    0: PT_NULL,
    SYN: PT_SYN,
    SYN | ACK: PT_SYN_ACK,
    ACK: PT_ACK,
    FIN: PT_FIN,
    FIN | ACK: PT_FIN_ACK,
    RST: PT_RST,
    RST | ACK: PT_RST_ACK,
    PSH: PT_PSH,
    PSH | ACK: PT_PSH_ACK,
    URG | PSH | FIN: PT_XMAS,
}

# 64-entry lookup: exact flag sets first, any other URG-bearing set is URG,
# the rest are OTHER. LAND and ICMP are resolved before this table applies.
PTYPE_BY_FLAGS = tuple(
    _EXACT_SETS.get(f, PT_URG if f & URG else PT_OTHER) for f in range(64)
)


def packet_type_of(flags: int, is_land: bool, protocol: Protocol) -> int:
    """Packet type of a frame; LAND (src = dst) beats everything else."""
    if is_land:
        return PT_LAND
    if protocol is Protocol.ICMP_ECHO:
        return PT_ICMP
    return PTYPE_BY_FLAGS[flags & 0x3F]


class FlowKey(NamedTuple):
    ip_a: bytes
    ip_b: bytes
    port_a: int
    port_b: int
    protocol: int  # REC_TCP / REC_ICMP_ECHO


class IpFlowKey(NamedTuple):
    ip_a: bytes
    ip_b: bytes
    protocol: int


def _orientation(src_home: bool, dst_home: bool, src: bytes, dst: bytes) -> tuple[int, bool, bool]:
    """(bucket, swap, transit) for a (src, dst) host pair.

    Key orientation: ip_a is the home endpoint when exactly one side is
    home, otherwise the lexicographically smaller address. swap=True means
    ip_a is the destination side. TRANSIT and intra-home packets land in the
    incoming bucket.
    """
    if dst_home and src_home:
        return IN, dst < src, False
    if dst_home:
        return IN, True, False
    if src_home:
        return OUT, False, False
    return IN, dst < src, True


@dataclass
class WindowState:
    """Mutable per-window aggregation state. Single writer only."""

    home: HomeNets
    window_index: int = 0
    window_period: float = 1.0
    start_us: Optional[int] = None
    traffic_flows: dict = field(default_factory=dict)  # FlowKey -> list[int] of 30 counters
    ip_flows: dict = field(default_factory=dict)       # IpFlowKey -> list[int]
    malformed_count: int = 0
    dropped_count: int = 0
    transit_count: int = 0

    def __post_init__(self):
        self._pair_memo: dict = {}

    @property
    def traffic_flow_count(self) -> int:
        return len(self.traffic_flows)

    @property
    def ip_flow_count(self) -> int:
        return len(self.ip_flows)

    def record(self, pkt: PacketSummary) -> None:
        """Attribute one admitted packet to both flow tables."""
        proto = REC_ICMP_ECHO if pkt.protocol is Protocol.ICMP_ECHO else REC_TCP
        self.record_raw(
            (pkt.timestamp_us, pkt.src_ip, pkt.dst_ip, proto, pkt.flags,
             pkt.src_port or 0, pkt.dst_port or 0)
        )

    def record_raw(self, rec: tuple) -> None:
        """Hot-path entry taking a decoded record tuple.

        Orientation per (src, dst) pair is memoised for the window, so the
        steady-state per-packet work is two counter bumps.
        """
        ts_us, src, dst, proto, flags, sport, dport = rec
        plan = self._pair_memo.get((src, dst))
        if plan is None:
            plan = _orientation(self.home.contains(src), self.home.contains(dst), src, dst)
            self._pair_memo[(src, dst)] = plan
        bucket, swap, transit = plan
        if transit:
            self.transit_count += 1
        if swap:
            a_ip, b_ip, a_port, b_port = dst, src, dport, sport
        else:
            a_ip, b_ip, a_port, b_port = src, dst, sport, dport
        if src == dst:
            ptype = PT_LAND
        elif proto == REC_ICMP_ECHO:
            ptype = PT_ICMP
        else:
            ptype = PTYPE_BY_FLAGS[flags]
        idx = ptype * 2 + bucket
        flows = self.traffic_flows
        key = FlowKey(a_ip, b_ip, a_port, b_port, proto)
        counters = flows.get(key)
        if counters is None:
            flows[key] = counters = [0] * N_COUNTERS
        counters[idx] += 1
        flows = self.ip_flows
        ikey = IpFlowKey(a_ip, b_ip, proto)
        counters = flows.get(ikey)
        if counters is None:
            flows[ikey] = counters = [0] * N_COUNTERS
        counters[idx] += 1
        if self.start_us is None or ts_us < self.start_us:
            self.start_us = ts_us

    def rotate(self) -> tuple["WindowSnapshot", "WindowState"]:
        """Freeze this window and hand back an empty successor."""
        snapshot = WindowSnapshot(
            window_index=self.window_index,
            window_period=self.window_period,
            start_us=self.start_us,
            traffic_flows={k: tuple(v) for k, v in self.traffic_flows.items()},
            ip_flows={k: tuple(v) for k, v in self.ip_flows.items()},
            malformed_count=self.malformed_count,
            dropped_count=self.dropped_count,
            transit_count=self.transit_count,
        )
        fresh = WindowState(
            home=self.home,
            window_index=self.window_index + 1,
            window_period=self.window_period,
        )
        return snapshot, fresh


@dataclass(frozen=True)
class WindowSnapshot:
    """Immutable view of one finished window."""

    window_index: int
    window_period: float
    start_us: Optional[int]
    traffic_flows: dict  # FlowKey -> tuple of 30 counts
    ip_flows: dict       # IpFlowKey -> tuple of 30 counts
    malformed_count: int
    dropped_count: int
    transit_count: int

    @property
    def traffic_flow_count(self) -> int:
        return len(self.traffic_flows)

    @property
    def ip_flow_count(self) -> int:
        return len(self.ip_flows)

    def sorted_ip_flows(self) -> list:
        return sorted(self.ip_flows.items())

    def sorted_traffic_flows(self) -> list:
        return sorted(self.traffic_flows.items())
