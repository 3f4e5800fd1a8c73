"""Digital payload path: text framing, Gray-mapped QAM, closed-form BER.

Constellations are square and normalized to unit mean power (QPSK +-1/sqrt(2),
16-QAM {+-1,+-3}/sqrt(10), 64-QAM {+-1..+-7}/sqrt(42)). The first half of a
symbol's bits selects the I level MSB-first, the second half the Q level.
"""
from __future__ import annotations

import math
import struct
import zlib
from enum import IntEnum

import numpy as np

from .errors import FrameCorrupt

FRAME_OVERHEAD = 6  # u16 length + u32 crc, big-endian


class Modulation(IntEnum):
    QPSK = 0
    QAM16 = 1
    QAM64 = 2


BITS_PER_SYMBOL = {Modulation.QPSK: 2, Modulation.QAM16: 4, Modulation.QAM64: 6}
_AXIS_NORM = {Modulation.QPSK: math.sqrt(2), Modulation.QAM16: math.sqrt(10),
              Modulation.QAM64: math.sqrt(42)}


def _gray_levels(bits_per_axis: int):
    """Axis levels indexed by the MSB-first bit pattern of that axis.

    Pattern p maps to level (max - 2*i) where i is p's position in the
    binary-reflected Gray sequence, so 0 -> most positive and adjacent
    levels always differ in exactly one bit.
    """
    n = 1 << bits_per_axis
    levels = np.empty(n)
    for i in range(n):
        pattern = i ^ (i >> 1)  # Gray code of sequence index i
        levels[pattern] = (n - 1) - 2 * i
    return levels


_LEVELS = {m: _gray_levels(BITS_PER_SYMBOL[m] // 2) for m in Modulation}


def qam_modulate(bits: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Map bits to unit-power Gray QAM symbols, zero-padding to a boundary."""
    bits = np.asarray(bits, dtype=np.uint8)
    bps = BITS_PER_SYMBOL[modulation]
    if len(bits) % bps:
        bits = np.concatenate([bits, np.zeros(bps - len(bits) % bps, dtype=np.uint8)])
    half = bps // 2
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(half - 1, -1, -1)
    i_pat = groups[:, :half] @ weights
    q_pat = groups[:, half:] @ weights
    levels = _LEVELS[modulation]
    return (levels[i_pat] + 1j * levels[q_pat]) / _AXIS_NORM[modulation]


def _slice_axis(values: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Nearest-level decision per axis; exact ties pick the smaller pattern."""
    half = BITS_PER_SYMBOL[modulation] // 2
    levels = _LEVELS[modulation]  # indexed by bit pattern
    # distance matrix ordered by pattern, so argmin's first-hit rule
    # resolves ties toward the lexicographically smaller bit pattern
    d = np.abs(values[:, None] - levels[None, :])
    return np.argmin(d, axis=1)


def qam_demodulate(symbols: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Hard minimum-distance demapping back to bits."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    bps = BITS_PER_SYMBOL[modulation]
    half = bps // 2
    scale = _AXIS_NORM[modulation]
    i_pat = _slice_axis(symbols.real * scale, modulation)
    q_pat = _slice_axis(symbols.imag * scale, modulation)
    shifts = np.arange(half - 1, -1, -1)
    out = np.empty((len(symbols), bps), dtype=np.uint8)
    out[:, :half] = (i_pat[:, None] >> shifts) & 1
    out[:, half:] = (q_pat[:, None] >> shifts) & 1
    return out.ravel()


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    usable = len(bits) - len(bits) % 8
    return np.packbits(bits[:usable]).tobytes()


def frame_text(payload: bytes) -> np.ndarray:
    """Serialize payload as [len:u16be][payload][crc32:u32be] and emit bits.

    The CRC-32 (the zlib polynomial) covers the length field and payload.
    """
    if len(payload) > 0xFFFF:
        raise ValueError("payload exceeds 16-bit length field")
    body = struct.pack("!H", len(payload)) + payload
    frame = body + struct.pack("!I", zlib.crc32(body))
    return bytes_to_bits(frame)


def unframe_text(bits: np.ndarray) -> bytes:
    """Parse a framed payload; raises FrameCorrupt on any integrity failure."""
    data = bits_to_bytes(bits)
    if len(data) < FRAME_OVERHEAD:
        raise FrameCorrupt("frame shorter than header+crc")
    (length,) = struct.unpack("!H", data[:2])
    end = 2 + length
    if len(data) < end + 4:
        raise FrameCorrupt("frame truncated")
    body, (crc,) = data[:end], struct.unpack("!I", data[end:end + 4])
    if zlib.crc32(body) != crc:
        raise FrameCorrupt("crc32 mismatch")
    return body[2:]


def frame_num_symbols(payload_len: int, modulation: Modulation) -> int:
    """QAM symbols needed to carry a framed payload of payload_len bytes."""
    bits = 8 * (payload_len + FRAME_OVERHEAD)
    bps = BITS_PER_SYMBOL[modulation]
    return (bits + bps - 1) // bps


def qpsk_ber_theory(ebn0_db: float) -> float:
    """Gray-QPSK bit error rate over AWGN: Q(sqrt(2 Eb/N0))."""
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return 0.5 * math.erfc(math.sqrt(ebn0))
