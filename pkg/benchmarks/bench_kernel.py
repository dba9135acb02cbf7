#!/usr/bin/env python3
"""Compare the compiled packet-decode kernel against the pure-Python twin.

Builds an in-memory capture of mixed TCP/ICMP traffic, then times three
passes: pure decode, compiled decode, and compiled decode + windowed flow
aggregation (the full offline hot path).

    python3 benchmarks/bench_kernel.py [--packets 300000]
"""

import argparse
import random
import struct
import time

from flowscape import fastpath
from flowscape.engine import windows_from_records
from flowscape.packets import HomeNets
from flowscape.trafficgen import icmp_echo_frame, tcp_frame


def build_capture(n_packets: int, seed: int = 1) -> bytes:
    rng = random.Random(seed)
    homes = [f"10.0.0.{i}" for i in range(1, 30)]
    remotes = [f"203.0.113.{i}" for i in range(1, 120)]
    flags_pool = (0x02, 0x12, 0x10, 0x18, 0x11, 0x04, 0x14)
    chunks = [struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1)]
    ts = 1_700_000_000_000_000
    for i in range(n_packets):
        ts += rng.randint(5, 40)
        if rng.random() < 0.03:
            frame = icmp_echo_frame(rng.choice(remotes), rng.choice(homes), 8, 1, i & 0xFFFF)
        elif rng.random() < 0.5:
            frame = tcp_frame(rng.choice(remotes), rng.choice(homes),
                              rng.randint(1024, 65535), rng.choice((80, 443, 22)),
                              rng.choice(flags_pool), ident=i)
        else:
            frame = tcp_frame(rng.choice(homes), rng.choice(remotes),
                              rng.randint(1024, 65535), rng.choice((80, 443, 22)),
                              rng.choice(flags_pool), ident=i)
        chunks.append(struct.pack("<IIII", ts // 1_000_000, ts % 1_000_000,
                                  len(frame), len(frame)))
        chunks.append(frame)
    return b"".join(chunks)


def timed(label, fn):
    start = time.perf_counter()
    count = fn()
    elapsed = time.perf_counter() - start
    print(f"{label:<28} {count:>9} pkts  {elapsed:7.3f} s  {count / elapsed / 1e6:6.2f} Mpkt/s")
    return elapsed


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--packets", type=int, default=300_000)
    args = parser.parse_args()

    print(f"building capture of {args.packets} packets...")
    data = build_capture(args.packets)
    print(f"capture size: {len(data) / 1e6:.1f} MB; compiled kernel available: "
          f"{fastpath.KERNEL == 'cython'}")

    def pure_scan():
        return sum(1 for _ in fastpath.scan_pcap_pure(data))

    def kernel_scan():
        return sum(1 for _ in fastpath.scan_pcap(data))

    home = HomeNets(["10.0.0.0/24"])

    def full_pipeline():
        scanner = fastpath.scan_pcap(data)
        total = 0
        for snapshot in windows_from_records(scanner, home, 1.0):
            total += sum(sum(c) for c in snapshot.ip_flows.values())
        return total

    t_pure = timed("pure-python decode", pure_scan)
    if fastpath.KERNEL == "cython":
        t_kern = timed("compiled decode", kernel_scan)
        print(f"decode speedup: {t_pure / t_kern:.1f}x")
    timed("decode + flow aggregation", full_pipeline)


if __name__ == "__main__":
    main()
