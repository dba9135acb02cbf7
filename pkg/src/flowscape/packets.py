"""Packet acquisition and header decode.

Frames come from a pcap file, a live interface, or an in-memory synthetic
stream. Everything that is not TCP or ICMP echo is dropped at this layer;
survivors are decoded into PacketSummary values. Only Ethernet link-level
framing is supported.
"""

from __future__ import annotations

import ipaddress
import socket
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

# TCP flag bits (wire order, low 6 bits of the flag byte)
FIN = 0x01
SYN = 0x02
RST = 0x04
PSH = 0x08
ACK = 0x10
URG = 0x20
FLAG_MASK = 0x3F

FLAG_NAMES = {FIN: "FIN", SYN: "SYN", RST: "RST", PSH: "PSH", ACK: "ACK", URG: "URG"}

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD

# wire-format protocol numbers handled by the filter
IPPROTO_TCP = 6
IPPROTO_ICMP = 1
IPPROTO_ICMPV6 = 58

# IPv6 extension headers we walk through looking for the payload protocol
_IPV6_EXT_HEADERS = {0, 43, 44, 50, 51, 60, 135}


class Protocol(Enum):
    TCP = "TCP"
    ICMP_ECHO = "ICMP_ECHO"


class Direction(Enum):
    INCOMING = "INCOMING"
    OUTGOING = "OUTGOING"
    TRANSIT = "TRANSIT"


class SourceError(Exception):
    """Raised when a packet source cannot be opened or is unusable."""


def flags_to_names(flags: int) -> set[str]:
    return {name for bit, name in FLAG_NAMES.items() if flags & bit}


def names_to_flags(names: Iterable[str]) -> int:
    lookup = {name: bit for bit, name in FLAG_NAMES.items()}
    value = 0
    for name in names:
        value |= lookup[name.upper()]
    return value


@dataclass(frozen=True)
class PacketSummary:
    """Decoded header facts of one captured frame.

    Ports are None for ICMP echo. flags holds the low six TCP flag bits.
    """

    timestamp_us: int
    src_ip: bytes  # packed network-order address, 4 or 16 bytes
    dst_ip: bytes
    protocol: Protocol
    flags: int = 0
    src_port: Optional[int] = None
    dst_port: Optional[int] = None
    direction: Direction = Direction.TRANSIT

    @property
    def is_land(self) -> bool:
        return self.src_ip == self.dst_ip

    @property
    def flag_names(self) -> set[str]:
        return flags_to_names(self.flags)

    def src_text(self) -> str:
        return format_ip(self.src_ip)

    def dst_text(self) -> str:
        return format_ip(self.dst_ip)


def format_ip(packed: bytes) -> str:
    family = socket.AF_INET if len(packed) == 4 else socket.AF_INET6
    return socket.inet_ntop(family, packed)


def parse_ip(text: str) -> bytes:
    return ipaddress.ip_address(text).packed


class HomeNets:
    """Configured CIDR blocks that define the incoming/outgoing boundary."""

    def __init__(self, cidrs: Iterable[str]):
        self._nets4: list[tuple[int, int]] = []  # (netaddr, mask) as ints
        self._nets6: list[tuple[int, int]] = []
        self.cidrs = [str(ipaddress.ip_network(c, strict=False)) for c in cidrs]
        if not self.cidrs:
            raise ValueError("home_networks must not be empty")
        for c in self.cidrs:
            net = ipaddress.ip_network(c, strict=False)
            netaddr = int(net.network_address)
            mask = int(net.netmask)
            if net.version == 4:
                self._nets4.append((netaddr, mask))
            else:
                self._nets6.append((netaddr, mask))

    def contains(self, packed: bytes) -> bool:
        value = int.from_bytes(packed, "big")
        nets = self._nets4 if len(packed) == 4 else self._nets6
        for netaddr, mask in nets:
            if value & mask == netaddr:
                return True
        return False


def classify_direction(src_ip: bytes, dst_ip: bytes, home: HomeNets) -> Direction:
    """Direction of a packet relative to the home networks.

    Intra-home traffic counts as INCOMING (it is still monitored on the
    destination side); traffic touching no home network is TRANSIT.
    """
    src_home = home.contains(src_ip)
    dst_home = home.contains(dst_ip)
    if dst_home:
        return Direction.INCOMING
    if src_home:
        return Direction.OUTGOING
    return Direction.TRANSIT


# ---------------------------------------------------------------------------
# Frame decode (pure-Python twin of the Cython kernel)

# decoded record layout shared with flowscape._kernel:
#   (ts_us, src: bytes, dst: bytes, proto: int, flags: int, sport: int, dport: int)
# proto is 0 for TCP, 1 for ICMP echo; ports are 0 for ICMP.
REC_TCP = 0
REC_ICMP_ECHO = 1


def decode_frame(buf: bytes, ts_us: int = 0):
    """Decode one Ethernet frame into a record tuple.

    Returns None for frames the filter rejects (non-IP, non-TCP/ICMP-echo,
    IP fragments past the first). Raises ValueError on truncated headers so
    callers can count malformed frames.
    """
    if len(buf) < 14:
        raise ValueError("short ethernet header")
    ethertype = (buf[12] << 8) | buf[13]
    if ethertype == ETHERTYPE_IPV4:
        return _decode_ipv4(buf, 14, ts_us)
    if ethertype == ETHERTYPE_IPV6:
        return _decode_ipv6(buf, 14, ts_us)
    return None


def _decode_ipv4(buf: bytes, off: int, ts_us: int):
    if len(buf) < off + 20:
        raise ValueError("short ipv4 header")
    vhl = buf[off]
    if vhl >> 4 != 4:
        raise ValueError("bad ipv4 version")
    ihl = (vhl & 0x0F) * 4
    if ihl < 20 or len(buf) < off + ihl:
        raise ValueError("bad ipv4 ihl")
    frag = ((buf[off + 6] & 0x1F) << 8) | buf[off + 7]
    proto = buf[off + 9]
    src = buf[off + 12 : off + 16]
    dst = buf[off + 16 : off + 20]
    payload = off + ihl
    if frag != 0:
        return None  # later fragment: no transport header to read
    if proto == IPPROTO_TCP:
        return _decode_tcp(buf, payload, ts_us, src, dst)
    if proto == IPPROTO_ICMP:
        if len(buf) < payload + 4:
            raise ValueError("short icmp header")
        icmp_type = buf[payload]
        if icmp_type in (8, 0):
            return (ts_us, src, dst, REC_ICMP_ECHO, 0, 0, 0)
        return None
    return None


def _decode_ipv6(buf: bytes, off: int, ts_us: int):
    if len(buf) < off + 40:
        raise ValueError("short ipv6 header")
    if buf[off] >> 4 != 6:
        raise ValueError("bad ipv6 version")
    nxt = buf[off + 6]
    src = buf[off + 8 : off + 24]
    dst = buf[off + 24 : off + 40]
    pos = off + 40
    # walk extension headers until a terminal protocol
    while nxt in _IPV6_EXT_HEADERS:
        if len(buf) < pos + 8:
            raise ValueError("short ipv6 extension header")
        if nxt == 44:  # fragment header: only offset 0 carries the transport
            frag_off = ((buf[pos + 2] << 8) | buf[pos + 3]) >> 3
            nxt_here = buf[pos]
            if frag_off != 0:
                return None
            nxt = nxt_here
            pos += 8
            continue
        hdr_len = (buf[pos + 1] + 1) * 8
        nxt_here = buf[pos]
        if len(buf) < pos + hdr_len:
            raise ValueError("short ipv6 extension header")
        nxt = nxt_here
        pos += hdr_len
    if nxt == IPPROTO_TCP:
        return _decode_tcp(buf, pos, ts_us, src, dst)
    if nxt == IPPROTO_ICMPV6:
        if len(buf) < pos + 4:
            raise ValueError("short icmpv6 header")
        if buf[pos] in (128, 129):  # v6 echo request/reply
            return (ts_us, src, dst, REC_ICMP_ECHO, 0, 0, 0)
        return None
    return None


def _decode_tcp(buf: bytes, off: int, ts_us: int, src: bytes, dst: bytes):
    if len(buf) < off + 14:
        raise ValueError("short tcp header")
    sport = (buf[off] << 8) | buf[off + 1]
    dport = (buf[off + 2] << 8) | buf[off + 3]
    flags = buf[off + 13] & FLAG_MASK
    return (ts_us, src, dst, REC_TCP, flags, sport, dport)


def summarize(record, home: HomeNets) -> PacketSummary:
    """Lift a decoded record tuple into a PacketSummary."""
    ts_us, src, dst, proto, flags, sport, dport = record
    if proto == REC_ICMP_ECHO:
        return PacketSummary(
            timestamp_us=ts_us,
            src_ip=src,
            dst_ip=dst,
            protocol=Protocol.ICMP_ECHO,
            direction=classify_direction(src, dst, home),
        )
    return PacketSummary(
        timestamp_us=ts_us,
        src_ip=src,
        dst_ip=dst,
        protocol=Protocol.TCP,
        flags=flags,
        src_port=sport,
        dst_port=dport,
        direction=classify_direction(src, dst, home),
    )


# ---------------------------------------------------------------------------
# PCAP container

PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
LINKTYPE_ETHERNET = 1


@dataclass
class PcapHeader:
    byte_order: str  # "<" or ">"
    ts_divisor: int  # 1 for microsecond captures, 1000 for nanosecond
    linktype: int


def read_pcap_header(data: bytes) -> PcapHeader:
    if len(data) < 24:
        raise SourceError("not a pcap file (truncated global header)")
    magic = struct.unpack("<I", data[:4])[0]
    for order in ("<", ">"):
        m = struct.unpack(order + "I", data[:4])[0]
        if m == PCAP_MAGIC_US:
            byte_order, divisor = order, 1
            break
        if m == PCAP_MAGIC_NS:
            byte_order, divisor = order, 1000
            break
    else:
        raise SourceError(f"not a pcap file (magic 0x{magic:08x})")
    linktype = struct.unpack(byte_order + "I", data[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise SourceError(f"unsupported pcap link type {linktype} (need Ethernet)")
    return PcapHeader(byte_order, divisor, linktype)


def iter_pcap_frames(data: bytes, header: PcapHeader) -> Iterator[tuple[int, bytes]]:
    """Yield (ts_us, frame bytes) for every record in the capture body."""
    unpack = struct.Struct(header.byte_order + "IIII").unpack_from
    pos = 24
    n = len(data)
    while pos + 16 <= n:
        ts_sec, ts_frac, incl, _orig = unpack(data, pos)
        pos += 16
        if pos + incl > n:
            raise ValueError("truncated pcap record")
        yield ts_sec * 1_000_000 + ts_frac // header.ts_divisor, data[pos : pos + incl]
        pos += incl
    if pos != n:
        raise ValueError("truncated pcap record header")


class PyPcapScanner:
    """Iterator over the admitted packets of a pcap byte string.

    Pure-Python twin of flowscape._kernel.PcapScanner: yields the shared
    record tuples and counts malformed frames on `.malformed`. Container
    damage (a truncated record) stops the scan at the bad record.
    """

    def __init__(self, data: bytes):
        self._data = data
        self._header = read_pcap_header(data)
        self._unpack = struct.Struct(self._header.byte_order + "IIII").unpack_from
        self._pos = 24
        self.malformed = 0

    def __iter__(self):
        return self

    def __next__(self):
        data = self._data
        n = len(data)
        divisor = self._header.ts_divisor
        while True:
            pos = self._pos
            if pos >= n:
                raise StopIteration
            if pos + 16 > n:
                self.malformed += 1
                self._pos = n
                raise StopIteration
            ts_sec, ts_frac, incl, _orig = self._unpack(data, pos)
            if pos + 16 + incl > n:
                self.malformed += 1
                self._pos = n
                raise StopIteration
            self._pos = pos + 16 + incl
            try:
                rec = decode_frame(data[pos + 16 : pos + 16 + incl], ts_sec * 1_000_000 + ts_frac // divisor)
            except ValueError:
                self.malformed += 1
                continue
            if rec is not None:
                return rec


def write_pcap(path: str, frames: Iterable[tuple[int, bytes]]) -> None:
    """Write (ts_us, frame) pairs as a microsecond libpcap file."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", PCAP_MAGIC_US, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET))
        for ts_us, frame in frames:
            fh.write(struct.pack("<IIII", ts_us // 1_000_000, ts_us % 1_000_000, len(frame), len(frame)))
            fh.write(frame)


# ---------------------------------------------------------------------------
# Sources

class SourceKind(Enum):
    LIVE = "LIVE"
    PCAP_FILE = "PCAP_FILE"
    SYNTHETIC = "SYNTHETIC"


@dataclass
class PacketSource:
    """One opened packet source; exactly one is active per engine."""

    kind: SourceKind
    home: HomeNets
    _iter: Iterator[PacketSummary] = field(repr=False, default=None)  # type: ignore[assignment]
    malformed: int = 0
    skipped: int = 0

    def __iter__(self) -> Iterator[PacketSummary]:
        return self._iter

    def next_packet(self) -> Optional[PacketSummary]:
        """Next admitted packet, or None at end of stream / shutdown."""
        try:
            return next(self._iter)
        except StopIteration:
            return None


def open_pcap_source(path: str, home: HomeNets) -> PacketSource:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise SourceError(f"cannot read pcap file {path}: {exc}") from exc
    read_pcap_header(data)  # validate eagerly so open fails, not iteration
    source = PacketSource(kind=SourceKind.PCAP_FILE, home=home)

    def gen() -> Iterator[PacketSummary]:
        from . import fastpath

        scanner = fastpath.scan_pcap(data)
        for rec in scanner:
            yield summarize(rec, home)
        source.malformed += scanner.malformed

    source._iter = gen()
    return source


def open_synthetic_source(packets: Iterable[PacketSummary], home: HomeNets) -> PacketSource:
    source = PacketSource(kind=SourceKind.SYNTHETIC, home=home)
    source._iter = iter(packets)
    return source


def open_live_source(interface: str, home: HomeNets) -> PacketSource:
    """Open an AF_PACKET capture on a promiscuous/mirror interface.

    Requires Linux and usually root; frames that fail to decode are counted
    and skipped, never fatal.
    """
    try:
        sock = socket.socket(socket.AF_PACKET, socket.SOCK_RAW, socket.htons(0x0003))
        sock.bind((interface, 0))
    except (OSError, AttributeError) as exc:
        raise SourceError(f"cannot open live capture on {interface}: {exc}") from exc
    source = PacketSource(kind=SourceKind.LIVE, home=home)

    def gen() -> Iterator[PacketSummary]:
        import time

        while True:
            try:
                frame = sock.recv(65535)
            except OSError:
                return  # socket closed on shutdown
            ts_us = time.time_ns() // 1000
            try:
                rec = decode_frame(frame, ts_us)
            except ValueError:
                source.malformed += 1
                continue
            if rec is None:
                source.skipped += 1
                continue
            yield summarize(rec, home)

    source._iter = gen()
    source._socket = sock  # type: ignore[attr-defined]
    return source
