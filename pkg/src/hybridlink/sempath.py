"""Analog semantic path: real code vector <-> power-normalized constellation.

Adjacent elements of the flattened code vector become the real and imaginary
parts of one constellation point; the whole block is then scaled so its mean
per-symbol power is exactly one. The scale travels to the receiver in the
control record so the inverse can undo it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGain


@dataclass
class SemanticVector:
    """Flattened analog code from a semantic codec plus its scaling state."""

    values: np.ndarray
    gain: float = 1.0
    shape_meta: dict = field(default_factory=dict)


def pack_and_normalize(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Pair reals into complex symbols and scale to unit mean power.

    Odd-length input is padded with one trailing zero. Returns the scaled
    symbols and the gain g = sqrt(k / sum|s|^2) that was applied; an all-zero
    input keeps g = 1 by convention.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if len(v) % 2:
        v = np.concatenate([v, [0.0]])
    symbols = v[0::2] + 1j * v[1::2]
    energy = float(np.sum(np.abs(symbols) ** 2))
    if energy == 0.0:
        return symbols, 1.0
    gain = math.sqrt(len(symbols) / energy)
    return symbols * gain, gain


def denormalize_and_unpack(symbols: np.ndarray, gain: float,
                           original_len: int) -> np.ndarray:
    """Invert pack_and_normalize: rescale and interleave back to reals."""
    if gain <= 0:
        raise InvalidGain("normalization gain must be positive")
    s = np.asarray(symbols, dtype=np.complex128).ravel() / gain
    out = np.empty(2 * len(s))
    out[0::2] = s.real
    out[1::2] = s.imag
    if original_len > len(out):
        raise ValueError("original_len exceeds unpacked capacity")
    return out[:original_len]
