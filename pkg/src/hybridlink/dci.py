"""Extended downlink control record: bit packing, CRC protection, blind decode.

A control codeword is 72 bits: a 56-bit body packed MSB-first in field order
(resource_type 1, rb_start 8, rb_count 8, modulation 2, payload_len 16,
gain_q 16, reserved 5) followed by CRC-16/CCITT-FALSE over the 7 body bytes.
The control region holds four fixed candidate positions that the receiver
tests independently (blind decoding, no count header).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digipath import Modulation
from .errors import CrcMismatch, FieldRangeError, TooManyDcis
from .grid import ResourceType

BODY_BITS = 56
CRC_BITS = 16
DCI_BITS = BODY_BITS + CRC_BITS
MAX_DCIS = 4
GAIN_SCALE = 1024

_FIELD_WIDTHS = (1, 8, 8, 2, 16, 16, 5)  # reserved last, always zero


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection or xorout."""
    crc = init
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
    return crc


@dataclass
class Dci:
    """Control record describing where and how one payload is mapped."""

    resource_type: ResourceType
    rb_start: int
    rb_count: int
    modulation: Modulation = Modulation.QPSK
    payload_len: int = 0  # complex symbols (semantic) or payload bytes (digital)
    gain_q: int = 0       # round(gain*1024), 0 = not applicable

    def fields(self) -> tuple[int, ...]:
        return (int(self.resource_type), self.rb_start, self.rb_count,
                int(self.modulation), self.payload_len, self.gain_q, 0)


def quantize_gain(gain: float) -> int:
    """Quantize a positive normalization gain to the 16-bit control field."""
    if gain <= 0:
        raise FieldRangeError("gain must be positive")
    return int(min(max(round(gain * GAIN_SCALE), 1), 0xFFFF))


def dequantize_gain(gain_q: int) -> float:
    return gain_q / GAIN_SCALE


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return (value >> np.arange(width - 1, -1, -1)) & 1


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def encode_dci(dci: Dci) -> np.ndarray:
    """Pack the record into 72 bits (56-bit body + CRC-16)."""
    body = np.empty(BODY_BITS, dtype=np.uint8)
    pos = 0
    for value, width in zip(dci.fields(), _FIELD_WIDTHS):
        if not 0 <= value < (1 << width):
            raise FieldRangeError(f"value {value} exceeds {width}-bit field")
        body[pos:pos + width] = _int_to_bits(value, width)
        pos += width
    crc = crc16_ccitt(np.packbits(body).tobytes())
    return np.concatenate([body, _int_to_bits(crc, CRC_BITS).astype(np.uint8)])


def decode_dci(bits: np.ndarray) -> Dci:
    """Verify the CRC, then unpack; reserved bits are ignored."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (DCI_BITS,):
        raise FieldRangeError(f"codeword must be {DCI_BITS} bits")
    body = bits[:BODY_BITS]
    if crc16_ccitt(np.packbits(body).tobytes()) != _bits_to_int(bits[BODY_BITS:]):
        raise CrcMismatch("control codeword failed CRC")
    values = []
    pos = 0
    for width in _FIELD_WIDTHS:
        values.append(_bits_to_int(body[pos:pos + width]))
        pos += width
    if values[3] > max(Modulation):
        raise FieldRangeError(f"modulation code {values[3]} undefined")
    return Dci(ResourceType(values[0]), values[1], values[2],
               Modulation(values[3]), values[4], values[5])


def pack_control_region(dcis: list[Dci], region_bits: int) -> np.ndarray:
    """Lay codewords into fixed candidate positions; the rest stays zero."""
    n_positions = min(MAX_DCIS, region_bits // DCI_BITS)
    if len(dcis) > n_positions:
        raise TooManyDcis(f"{len(dcis)} codewords > {n_positions} positions")
    region = np.zeros(region_bits, dtype=np.uint8)
    for i, dci in enumerate(dcis):
        region[i * DCI_BITS:(i + 1) * DCI_BITS] = encode_dci(dci)
    return region


def unpack_control_region_positions(bits: np.ndarray) -> list[tuple[int, Dci]]:
    """Blind-decode every candidate position; yields (position, record) pairs."""
    bits = np.asarray(bits, dtype=np.uint8)
    n_positions = min(MAX_DCIS, len(bits) // DCI_BITS)
    found = []
    for i in range(n_positions):
        try:
            found.append((i, decode_dci(bits[i * DCI_BITS:(i + 1) * DCI_BITS])))
        except (CrcMismatch, FieldRangeError):
            continue
    return found


def unpack_control_region(bits: np.ndarray) -> list[Dci]:
    """Valid codewords in candidate-position order; invalid ones are skipped."""
    return [dci for _, dci in unpack_control_region_positions(bits)]
