"""Frame and varint codec with exact encoded byte sizes.

Packets in the simulator carry frame objects plus a wire size; the byte
codec exists so sizes are grounded in a real encoding and round-trip
tested, not estimated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Tuple

VARINT_MAX = (1 << 62) - 1

# Short header flags byte is modeled as 3 bytes of header framing plus an
# 8-byte connection ID and a 4-byte packet number, with 16 bytes of AEAD
# expansion.  Constant so goodput arithmetic is reproducible.
HEADER_BYTES = 3 + 8 + 4
AEAD_EXPANSION = 16
PACKET_OVERHEAD = HEADER_BYTES + AEAD_EXPANSION

FRAME_ACK = 0x02
FRAME_STREAM = 0x08  # base type, OFF|LEN|FIN bits below
FRAME_MAX_DATA = 0x10
FRAME_MAX_STREAM_DATA = 0x11
FRAME_NEW_CONNECTION_ID = 0x18
FRAME_PATH_CHALLENGE = 0x1A
FRAME_PATH_RESPONSE = 0x1B
FRAME_CONNECTION_CLOSE = 0x1C
# Experimental one-byte code for the path-aware ACK so its minimal frame is
# exactly one varint larger than a minimal ACK.
FRAME_ACK_MP = 0x20
FRAME_ACK_FREQUENCY = 0xAF  # two-byte varint on the wire

ACK_DELAY_EXPONENT = 3


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


def varint_size(value: int) -> int:
    """Length in bytes of the variable-length encoding of value."""
    if value < 0 or value > VARINT_MAX:
        raise EncodeError(f"varint out of range: {value}")
    if value < 0x40:
        return 1
    if value < 0x4000:
        return 2
    if value < 0x40000000:
        return 4
    return 8


def varint_encode(value: int) -> bytes:
    """Encode an integer with the two-bit length prefix scheme."""
    size = varint_size(value)
    if size == 1:
        return struct.pack(">B", value)
    if size == 2:
        return struct.pack(">H", value | 0x4000)
    if size == 4:
        return struct.pack(">I", value | 0x80000000)
    return struct.pack(">Q", value | 0xC000000000000000)


def varint_decode(data: bytes, offset: int = 0) -> Tuple[int, int]:
    """Decode a varint at offset.

    Returns:
        (value, bytes consumed)
    """
    if offset >= len(data):
        raise DecodeError("varint: empty input")
    prefix = data[offset] >> 6
    size = 1 << prefix
    if offset + size > len(data):
        raise DecodeError("varint: truncated")
    if size == 1:
        return data[offset] & 0x3F, 1
    if size == 2:
        return struct.unpack_from(">H", data, offset)[0] & 0x3FFF, 2
    if size == 4:
        return struct.unpack_from(">I", data, offset)[0] & 0x3FFFFFFF, 4
    return struct.unpack_from(">Q", data, offset)[0] & 0x3FFFFFFFFFFFFFFF, 8


# Frames.  Ranges in ACK frames are (lo, hi) inclusive, sorted descending
# by hi, pairwise disjoint and non-adjacent (gap encoding needs >= 2).


@dataclass(frozen=True)
class AckFrame:
    largest: int
    ack_delay_us: int
    ranges: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class AckMpFrame:
    path_id: int
    largest: int
    ack_delay_us: int
    ranges: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class StreamFrame:
    stream_id: int
    offset: int
    length: int
    fin: bool = False
    retrans: bool = False  # bookkeeping only, not on the wire


@dataclass(frozen=True)
class MaxDataFrame:
    limit: int


@dataclass(frozen=True)
class MaxStreamDataFrame:
    stream_id: int
    limit: int


@dataclass(frozen=True)
class NewConnectionIdFrame:
    seq: int
    cid: bytes = field(default=b"\x00" * 8)
    retire_prior_to: int = 0


@dataclass(frozen=True)
class PathChallengeFrame:
    data: bytes


@dataclass(frozen=True)
class PathResponseFrame:
    data: bytes


@dataclass(frozen=True)
class AckFrequencyFrame:
    packet_threshold: int
    max_ack_delay_us: int
    ignore_reorder: bool


@dataclass(frozen=True)
class ConnectionCloseFrame:
    error_code: int = 0


ACK_FRAMES = (AckFrame, AckMpFrame)
NON_ELICITING = (AckFrame, AckMpFrame, ConnectionCloseFrame)


def is_ack_eliciting(frame) -> bool:
    return not isinstance(frame, NON_ELICITING)


def _ack_body_size(largest: int, ack_delay_us: int, ranges) -> int:
    size = varint_size(largest)
    size += varint_size(ack_delay_us >> ACK_DELAY_EXPONENT)
    size += varint_size(len(ranges) - 1)
    size += varint_size(ranges[0][1] - ranges[0][0])
    prev_lo = ranges[0][0]
    for lo, hi in ranges[1:]:
        size += varint_size(prev_lo - hi - 2)
        size += varint_size(hi - lo)
        prev_lo = lo
    return size


def encoded_size(frame) -> int:
    """Exact number of bytes the frame occupies on the wire."""
    if isinstance(frame, AckFrame):
        return 1 + _ack_body_size(frame.largest, frame.ack_delay_us, frame.ranges)
    if isinstance(frame, AckMpFrame):
        return (
            1
            + varint_size(frame.path_id)
            + _ack_body_size(frame.largest, frame.ack_delay_us, frame.ranges)
        )
    if isinstance(frame, StreamFrame):
        # OFF and LEN bits always set
        return (
            1
            + varint_size(frame.stream_id)
            + varint_size(frame.offset)
            + varint_size(frame.length)
            + frame.length
        )
    if isinstance(frame, MaxDataFrame):
        return 1 + varint_size(frame.limit)
    if isinstance(frame, MaxStreamDataFrame):
        return 1 + varint_size(frame.stream_id) + varint_size(frame.limit)
    if isinstance(frame, NewConnectionIdFrame):
        # seq, retire_prior_to, length byte, cid, 16-byte reset token
        return (
            1
            + varint_size(frame.seq)
            + varint_size(frame.retire_prior_to)
            + 1
            + len(frame.cid)
            + 16
        )
    if isinstance(frame, (PathChallengeFrame, PathResponseFrame)):
        return 1 + 8
    if isinstance(frame, AckFrequencyFrame):
        return (
            varint_size(FRAME_ACK_FREQUENCY)
            + varint_size(frame.packet_threshold)
            + varint_size(frame.max_ack_delay_us)
            + 1
        )
    if isinstance(frame, ConnectionCloseFrame):
        # error code + frame type 0 + empty reason
        return 1 + varint_size(frame.error_code) + 1 + 1
    raise EncodeError(f"unknown frame: {frame!r}")


def _check_ranges(frame) -> None:
    ranges = frame.ranges
    if not ranges:
        raise EncodeError("ack frame needs at least one range")
    if frame.largest != ranges[0][1]:
        raise EncodeError("largest must equal the top range's hi")
    prev_lo = None
    for lo, hi in ranges:
        if lo > hi or lo < 0:
            raise EncodeError(f"bad range ({lo}, {hi})")
        if prev_lo is not None and hi > prev_lo - 2:
            raise EncodeError("ranges must descend with gap >= 2")
        prev_lo = lo


def _encode_ack_body(out: bytearray, largest, ack_delay_us, ranges) -> None:
    out += varint_encode(largest)
    out += varint_encode(ack_delay_us >> ACK_DELAY_EXPONENT)
    out += varint_encode(len(ranges) - 1)
    out += varint_encode(ranges[0][1] - ranges[0][0])
    prev_lo = ranges[0][0]
    for lo, hi in ranges[1:]:
        out += varint_encode(prev_lo - hi - 2)
        out += varint_encode(hi - lo)
        prev_lo = lo


def encode_frame(frame) -> bytes:
    out = bytearray()
    if isinstance(frame, AckFrame):
        _check_ranges(frame)
        out += varint_encode(FRAME_ACK)
        _encode_ack_body(out, frame.largest, frame.ack_delay_us, frame.ranges)
    elif isinstance(frame, AckMpFrame):
        _check_ranges(frame)
        out += varint_encode(FRAME_ACK_MP)
        out += varint_encode(frame.path_id)
        _encode_ack_body(out, frame.largest, frame.ack_delay_us, frame.ranges)
    elif isinstance(frame, StreamFrame):
        type_byte = FRAME_STREAM | 0x04 | 0x02 | (0x01 if frame.fin else 0)
        out.append(type_byte)
        out += varint_encode(frame.stream_id)
        out += varint_encode(frame.offset)
        out += varint_encode(frame.length)
        out += bytes(frame.length)  # payload content is not simulated
    elif isinstance(frame, MaxDataFrame):
        out += varint_encode(FRAME_MAX_DATA)
        out += varint_encode(frame.limit)
    elif isinstance(frame, MaxStreamDataFrame):
        out += varint_encode(FRAME_MAX_STREAM_DATA)
        out += varint_encode(frame.stream_id)
        out += varint_encode(frame.limit)
    elif isinstance(frame, NewConnectionIdFrame):
        out += varint_encode(FRAME_NEW_CONNECTION_ID)
        out += varint_encode(frame.seq)
        out += varint_encode(frame.retire_prior_to)
        out.append(len(frame.cid))
        out += frame.cid
        out += bytes(16)
    elif isinstance(frame, PathChallengeFrame):
        if len(frame.data) != 8:
            raise EncodeError("challenge payload must be 8 bytes")
        out += varint_encode(FRAME_PATH_CHALLENGE)
        out += frame.data
    elif isinstance(frame, PathResponseFrame):
        if len(frame.data) != 8:
            raise EncodeError("response payload must be 8 bytes")
        out += varint_encode(FRAME_PATH_RESPONSE)
        out += frame.data
    elif isinstance(frame, AckFrequencyFrame):
        out += varint_encode(FRAME_ACK_FREQUENCY)
        out += varint_encode(frame.packet_threshold)
        out += varint_encode(frame.max_ack_delay_us)
        out.append(1 if frame.ignore_reorder else 0)
    elif isinstance(frame, ConnectionCloseFrame):
        out += varint_encode(FRAME_CONNECTION_CLOSE)
        out += varint_encode(frame.error_code)
        out += varint_encode(0)
        out += varint_encode(0)
    else:
        raise EncodeError(f"unknown frame: {frame!r}")
    return bytes(out)


def _decode_ack_body(data: bytes, pos: int):
    largest, n = varint_decode(data, pos)
    pos += n
    delay, n = varint_decode(data, pos)
    pos += n
    count, n = varint_decode(data, pos)
    pos += n
    first_len, n = varint_decode(data, pos)
    pos += n
    ranges = [(largest - first_len, largest)]
    prev_lo = largest - first_len
    for _ in range(count):
        gap, n = varint_decode(data, pos)
        pos += n
        rlen, n = varint_decode(data, pos)
        pos += n
        hi = prev_lo - gap - 2
        lo = hi - rlen
        if lo < 0:
            raise DecodeError("ack range below zero")
        ranges.append((lo, hi))
        prev_lo = lo
    return largest, delay << ACK_DELAY_EXPONENT, tuple(ranges), pos


def decode_frame(data: bytes, offset: int = 0):
    """Decode one frame.

    Returns:
        (frame, bytes consumed)
    """
    ftype, n = varint_decode(data, offset)
    pos = offset + n
    if ftype == FRAME_ACK:
        largest, delay_us, ranges, pos = _decode_ack_body(data, pos)
        return AckFrame(largest, delay_us, ranges), pos - offset
    if ftype == FRAME_ACK_MP:
        path_id, n = varint_decode(data, pos)
        pos += n
        largest, delay_us, ranges, pos = _decode_ack_body(data, pos)
        return AckMpFrame(path_id, largest, delay_us, ranges), pos - offset
    if FRAME_STREAM <= ftype <= FRAME_STREAM | 0x07:
        if not ftype & 0x04 or not ftype & 0x02:
            raise DecodeError("stream frames are encoded with OFF and LEN set")
        stream_id, n = varint_decode(data, pos)
        pos += n
        off, n = varint_decode(data, pos)
        pos += n
        length, n = varint_decode(data, pos)
        pos += n
        if pos + length > len(data):
            raise DecodeError("stream frame: truncated payload")
        pos += length
        return StreamFrame(stream_id, off, length, bool(ftype & 0x01)), pos - offset
    if ftype == FRAME_MAX_DATA:
        limit, n = varint_decode(data, pos)
        return MaxDataFrame(limit), pos + n - offset
    if ftype == FRAME_MAX_STREAM_DATA:
        stream_id, n = varint_decode(data, pos)
        pos += n
        limit, n = varint_decode(data, pos)
        pos += n
        return MaxStreamDataFrame(stream_id, limit), pos - offset
    if ftype == FRAME_NEW_CONNECTION_ID:
        seq, n = varint_decode(data, pos)
        pos += n
        retire, n = varint_decode(data, pos)
        pos += n
        if pos >= len(data):
            raise DecodeError("new_connection_id: truncated")
        cid_len = data[pos]
        pos += 1
        if pos + cid_len + 16 > len(data):
            raise DecodeError("new_connection_id: truncated")
        cid = data[pos : pos + cid_len]
        pos += cid_len + 16
        return NewConnectionIdFrame(seq, cid, retire), pos - offset
    if ftype in (FRAME_PATH_CHALLENGE, FRAME_PATH_RESPONSE):
        if pos + 8 > len(data):
            raise DecodeError("path frame: truncated")
        payload = data[pos : pos + 8]
        cls = PathChallengeFrame if ftype == FRAME_PATH_CHALLENGE else PathResponseFrame
        return cls(payload), pos + 8 - offset
    if ftype == FRAME_ACK_FREQUENCY:
        thresh, n = varint_decode(data, pos)
        pos += n
        delay, n = varint_decode(data, pos)
        pos += n
        if pos >= len(data):
            raise DecodeError("ack_frequency: truncated")
        flag = data[pos]
        pos += 1
        return AckFrequencyFrame(thresh, delay, bool(flag)), pos - offset
    if ftype == FRAME_CONNECTION_CLOSE:
        code, n = varint_decode(data, pos)
        pos += n
        _, n = varint_decode(data, pos)
        pos += n
        reason_len, n = varint_decode(data, pos)
        pos += n + reason_len
        return ConnectionCloseFrame(code), pos - offset
    raise DecodeError(f"unknown frame type 0x{ftype:x}")


def packet_wire_size(frames) -> int:
    """Wire size of a short-header packet carrying the given frames."""
    return PACKET_OVERHEAD + sum(encoded_size(f) for f in frames)
