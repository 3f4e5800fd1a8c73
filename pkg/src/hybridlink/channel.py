"""Simulated impairments between transmit and receive sample streams."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modem import SampleStream

FADING_NONE = "none"
FADING_FLAT_RAYLEIGH = "flat_rayleigh"


@dataclass(frozen=True)
class ChannelSpec:
    """Deterministic channel description: same (spec, input) -> same output.

    snr_db is defined against the mean power of the actual (faded) signal
    samples, so sparse and dense payload mixes are treated uniformly;
    math.inf disables noise. Fading draws one complex gain h ~ CN(0,1) per
    burst. delay_samples zeros are prepended before anything else.
    """

    snr_db: float = math.inf
    fading: str = FADING_NONE
    delay_samples: int = 0
    seed: int = 0
    fading_seed: int | None = None

    def __post_init__(self):
        if self.fading not in (FADING_NONE, FADING_FLAT_RAYLEIGH):
            raise ValueError(f"unknown fading model {self.fading!r}")
        if self.delay_samples < 0:
            raise ValueError("delay_samples must be >= 0")


def apply(stream: SampleStream, spec: ChannelSpec) -> SampleStream:
    """Run the stream through delay, block fading and AWGN, in that order."""
    x = np.concatenate([np.zeros(spec.delay_samples, dtype=np.complex128),
                        stream.samples.astype(np.complex128)])
    if spec.fading == FADING_FLAT_RAYLEIGH:
        fseed = spec.seed if spec.fading_seed is None else spec.fading_seed
        frng = np.random.default_rng(fseed)
        h = (frng.standard_normal() + 1j * frng.standard_normal()) / math.sqrt(2)
        x = x * h
    if not (math.isinf(spec.snr_db) and spec.snr_db > 0):
        # power measured on the faded signal itself, not the delay padding
        p_sig = float(np.mean(np.abs(x[spec.delay_samples:]) ** 2))
        sigma2 = p_sig / 10.0 ** (spec.snr_db / 10.0)
        if sigma2 > 0.0:
            rng = np.random.default_rng(spec.seed)
            noise = rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x))
            x = x + noise * math.sqrt(sigma2 / 2.0)
    return SampleStream(x, stream.sample_rate_hint)
