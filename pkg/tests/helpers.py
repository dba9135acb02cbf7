"""Shared frame/pcap builders for the test suite.

Kept deliberately dumb: fixed-offset struct packing, independent of the
package's decoder, so decode tests have something to disagree with.
"""

import struct

from flowscape.packets import parse_ip


def ipv4_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += (header[i] << 8) | header[i + 1]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def tcp_frame(src: str, dst: str, sport: int, dport: int, flags: int,
              payload: bytes = b"") -> bytes:
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x00"
    tcp = struct.pack(">HHIIBBHHH", sport, dport, 0, 0, 5 << 4, flags, 8192, 0, 0) + payload
    total = 20 + len(tcp)
    ip = struct.pack(">BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, 6, 0,
                     parse_ip(src), parse_ip(dst))
    ip = ip[:10] + struct.pack(">H", ipv4_checksum(ip)) + ip[12:]
    return eth + ip + tcp


def icmp_frame(src: str, dst: str, icmp_type: int = 8, ident: int = 1, seq: int = 1) -> bytes:
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x00"
    icmp = struct.pack(">BBHHH", icmp_type, 0, 0, ident, seq)
    total = 20 + len(icmp)
    ip = struct.pack(">BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, 1, 0,
                     parse_ip(src), parse_ip(dst))
    ip = ip[:10] + struct.pack(">H", ipv4_checksum(ip)) + ip[12:]
    return eth + ip + icmp


def tcp6_frame(src: str, dst: str, sport: int, dport: int, flags: int,
               ext_headers: int = 0) -> bytes:
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x86\xdd"
    tcp = struct.pack(">HHIIBBHHH", sport, dport, 0, 0, 5 << 4, flags, 8192, 0, 0)
    chain = b""
    nxt = 6
    for _ in range(ext_headers):
        chain = struct.pack(">BB6x", nxt, 0) + chain
        nxt = 0  # hop-by-hop
    ip6 = struct.pack(">IHBB16s16s", 6 << 28, len(chain) + len(tcp), nxt, 64,
                      parse_ip(src), parse_ip(dst))
    return eth + ip6 + chain + tcp


def arp_frame() -> bytes:
    return b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x06" + b"\x00" * 28


def udp_frame(src: str, dst: str) -> bytes:
    eth = b"\x02\x00\x00\x00\x00\x02" + b"\x02\x00\x00\x00\x00\x01" + b"\x08\x00"
    udp = struct.pack(">HHHH", 5000, 53, 8, 0)
    ip = struct.pack(">BBHHHBBH4s4s", 0x45, 0, 20 + len(udp), 0, 0, 64, 17, 0,
                     parse_ip(src), parse_ip(dst))
    ip = ip[:10] + struct.pack(">H", ipv4_checksum(ip)) + ip[12:]
    return eth + ip + udp


def pcap_bytes(frames, nanosecond: bool = False) -> bytes:
    """frames: iterable of (ts_us, frame). Builds a µs or ns pcap blob."""
    magic = 0xA1B23C4D if nanosecond else 0xA1B2C3D4
    out = [struct.pack("<IHHiIII", magic, 2, 4, 0, 0, 65535, 1)]
    for ts_us, frame in frames:
        if nanosecond:
            sec, frac = ts_us // 1_000_000, (ts_us % 1_000_000) * 1000
        else:
            sec, frac = ts_us // 1_000_000, ts_us % 1_000_000
        out.append(struct.pack("<IIII", sec, frac, len(frame), len(frame)))
        out.append(frame)
    return b"".join(out)
