# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled packet-decode kernel.

Behaviour-identical to packets.PyPcapScanner (the pure-Python twin): walks
pcap records, decodes Ethernet/IPv4/IPv6/TCP/ICMP-echo headers, yields the
shared record tuples and counts malformed frames. The parity tests in
tests/test_packets.py hold both implementations together.
"""

from .packets import read_pcap_header

DEF ETH_IPV4 = 0x0800
DEF ETH_IPV6 = 0x86DD

# outcome codes for one record attempt
DEF R_RECORD = 1
DEF R_SKIP = 0
DEF R_MALFORMED = -1


cdef class PcapScanner:
    cdef bytes _data
    cdef const unsigned char* _buf
    cdef Py_ssize_t _pos, _n
    cdef bint _swapped
    cdef long long _ts_div
    cdef public long malformed

    # per-record decode results
    cdef long long _ts
    cdef Py_ssize_t _src_off, _dst_off, _addr_len
    cdef int _proto, _flags, _sport, _dport

    def __init__(self, bytes data):
        header = read_pcap_header(data)  # validates magic and link type
        self._data = data
        self._buf = data
        self._n = len(data)
        self._pos = 24
        self._swapped = header.byte_order == ">"
        self._ts_div = header.ts_divisor
        self.malformed = 0

    def __iter__(self):
        return self

    cdef unsigned int _u32(self, Py_ssize_t off):
        cdef const unsigned char* b = self._buf + off
        if self._swapped:
            return (b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3]
        return b[0] | (b[1] << 8) | (b[2] << 16) | (b[3] << 24)

    def __next__(self):
        cdef Py_ssize_t pos, frame_end
        cdef unsigned int ts_sec, ts_frac, incl
        cdef int outcome
        while True:
            pos = self._pos
            if pos >= self._n:
                raise StopIteration
            if pos + 16 > self._n:
                self.malformed += 1
                self._pos = self._n
                raise StopIteration
            ts_sec = self._u32(pos)
            ts_frac = self._u32(pos + 4)
            incl = self._u32(pos + 8)
            if pos + 16 + <Py_ssize_t>incl > self._n:
                self.malformed += 1
                self._pos = self._n
                raise StopIteration
            self._pos = pos + 16 + <Py_ssize_t>incl
            self._ts = (<long long>ts_sec) * 1000000 + (<long long>ts_frac) // self._ts_div
            outcome = self._decode(pos + 16, <Py_ssize_t>incl)
            if outcome == R_MALFORMED:
                self.malformed += 1
                continue
            if outcome == R_SKIP:
                continue
            return (
                self._ts,
                self._data[self._src_off : self._src_off + self._addr_len],
                self._data[self._dst_off : self._dst_off + self._addr_len],
                self._proto,
                self._flags,
                self._sport,
                self._dport,
            )

    cdef int _decode(self, Py_ssize_t off, Py_ssize_t frame_len):
        cdef const unsigned char* b = self._buf
        cdef Py_ssize_t end = off + frame_len
        cdef int ethertype
        if frame_len < 14:
            return R_MALFORMED
        ethertype = (b[off + 12] << 8) | b[off + 13]
        if ethertype == ETH_IPV4:
            return self._decode_ipv4(off + 14, end)
        if ethertype == ETH_IPV6:
            return self._decode_ipv6(off + 14, end)
        return R_SKIP

    cdef int _decode_ipv4(self, Py_ssize_t off, Py_ssize_t end):
        cdef const unsigned char* b = self._buf
        cdef int vhl, ihl, frag, proto
        if off + 20 > end:
            return R_MALFORMED
        vhl = b[off]
        if vhl >> 4 != 4:
            return R_MALFORMED
        ihl = (vhl & 0x0F) * 4
        if ihl < 20 or off + ihl > end:
            return R_MALFORMED
        frag = ((b[off + 6] & 0x1F) << 8) | b[off + 7]
        proto = b[off + 9]
        self._src_off = off + 12
        self._dst_off = off + 16
        self._addr_len = 4
        if frag != 0:
            return R_SKIP
        if proto == 6:
            return self._decode_tcp(off + ihl, end)
        if proto == 1:
            if off + ihl + 4 > end:
                return R_MALFORMED
            if b[off + ihl] == 8 or b[off + ihl] == 0:
                self._proto = 1
                self._flags = 0
                self._sport = 0
                self._dport = 0
                return R_RECORD
            return R_SKIP
        return R_SKIP

    cdef int _decode_ipv6(self, Py_ssize_t off, Py_ssize_t end):
        cdef const unsigned char* b = self._buf
        cdef int nxt, hdr_len, frag_off
        cdef Py_ssize_t pos
        if off + 40 > end:
            return R_MALFORMED
        if b[off] >> 4 != 6:
            return R_MALFORMED
        nxt = b[off + 6]
        self._src_off = off + 8
        self._dst_off = off + 24
        self._addr_len = 16
        pos = off + 40
        while nxt == 0 or nxt == 43 or nxt == 44 or nxt == 50 or nxt == 51 or nxt == 60 or nxt == 135:
            if pos + 8 > end:
                return R_MALFORMED
            if nxt == 44:
                frag_off = (((b[pos + 2] << 8) | b[pos + 3]) >> 3)
                nxt = b[pos]
                if frag_off != 0:
                    return R_SKIP
                pos += 8
                continue
            hdr_len = (b[pos + 1] + 1) * 8
            if pos + hdr_len > end:
                return R_MALFORMED
            nxt = b[pos]
            pos += hdr_len
        if nxt == 6:
            return self._decode_tcp(pos, end)
        if nxt == 58:
            if pos + 4 > end:
                return R_MALFORMED
            if b[pos] == 128 or b[pos] == 129:
                self._proto = 1
                self._flags = 0
                self._sport = 0
                self._dport = 0
                return R_RECORD
            return R_SKIP
        return R_SKIP

    cdef int _decode_tcp(self, Py_ssize_t off, Py_ssize_t end):
        cdef const unsigned char* b = self._buf
        if off + 14 > end:
            return R_MALFORMED
        self._sport = (b[off] << 8) | b[off + 1]
        self._dport = (b[off + 2] << 8) | b[off + 3]
        self._flags = b[off + 13] & 0x3F
        self._proto = 0
        return R_RECORD
