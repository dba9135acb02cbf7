"""Selects the packet-decode kernel at import time.

The compiled Cython kernel is preferred; the pure-Python scanner in
packets.py is a drop-in twin. Set FLOWSCAPE_PURE=1 to force the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from .packets import PyPcapScanner

KERNEL = "python"
_kernel_scanner = None

if not os.environ.get("FLOWSCAPE_PURE"):
    try:
        from . import _kernel  # type: ignore[attr-defined]

        _kernel_scanner = _kernel.PcapScanner
        KERNEL = "cython"
    except ImportError:
        pass


def scan_pcap(data: bytes):
    """Iterator of decoded record tuples over a pcap byte string.

    The returned object exposes `.malformed` (frames skipped for truncated
    headers) once iteration finishes.
    """
    if _kernel_scanner is not None:
        return _kernel_scanner(data)
    return PyPcapScanner(data)


def scan_pcap_pure(data: bytes):
    """Always the pure-Python scanner, regardless of kernel availability."""
    return PyPcapScanner(data)
