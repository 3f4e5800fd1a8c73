"""OFDM modem: sync sequence, unitary (de)modulation, pilots, equalization.

Transform convention is unitary (1/sqrt(N) both ways) so per-RE power passes
through unchanged. Used subcarriers sit DC-centered in the transform, with
the DC bin itself left empty. Symbol 0 of every slot carries the BPSK sync
sequence on the central 127 subcarriers; symbol 1 carries a known QPSK pilot
sequence from a seeded 16-bit LFSR.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digipath import Modulation, qam_modulate
from .errors import SyncNotFound, TruncatedStream, ZeroChannel
from .grid import (CONTROL_SYMBOL, PILOT_SYMBOL, SYNC_SYMBOL, GridConfig,
                   ResourceGrid)

PSS_LEN = 127
DEFAULT_PEAK_THRESHOLD = 4.0
# fraction of the global peak within which an earlier peak still wins; keeps
# the lock on the first slot when later slots repeat the same sync symbol
PEAK_TIE_WINDOW = 0.1


@dataclass(frozen=True)
class PssConfig:
    n_id2: int = 0

    def __post_init__(self):
        if self.n_id2 not in (0, 1, 2):
            raise ValueError("n_id2 must be 0, 1 or 2")


@dataclass
class SampleStream:
    """Complex baseband samples; rate hint is informational only."""

    samples: np.ndarray
    sample_rate_hint: float = 0.0

    def __len__(self) -> int:
        return len(self.samples)


def generate_pss(cfg: PssConfig) -> np.ndarray:
    """BPSK m-sequence d(n) = 1 - 2*x((n + 43*n_id2) mod 127).

    x satisfies x(i+7) = (x(i+4) + x(i)) mod 2 with x(0..6) = 0,1,1,0,1,1,1,
    so the three identities are cyclic shifts of one maximal-length sequence.
    """
    x = np.empty(PSS_LEN, dtype=np.int64)
    x[:7] = [0, 1, 1, 0, 1, 1, 1]
    for i in range(PSS_LEN - 7):
        x[i + 7] = (x[i + 4] + x[i]) % 2
    n = np.arange(PSS_LEN)
    return 1.0 - 2.0 * x[(n + 43 * cfg.n_id2) % PSS_LEN]


def subcarrier_bins(config: GridConfig) -> np.ndarray:
    """Transform bin index for each used subcarrier, ascending in frequency.

    The lower half occupies negative-frequency bins, the upper half bins
    1..half; bin 0 (DC) stays empty.
    """
    if config.used_subcarriers >= config.fft_size:
        raise ValueError("need a spare DC bin: used_subcarriers < fft_size")
    half = config.used_subcarriers // 2
    return np.concatenate([np.arange(config.fft_size - half, config.fft_size),
                           np.arange(1, half + 1)])


def pss_subcarriers(config: GridConfig) -> np.ndarray:
    """Used-subcarrier indices of the centered 127-wide sync band."""
    start = (config.used_subcarriers - PSS_LEN) // 2
    return np.arange(start, start + PSS_LEN)


def insert_pss(grid: ResourceGrid, cfg: PssConfig) -> ResourceGrid:
    """Write the sync sequence into symbol 0 of every slot."""
    seq = generate_pss(cfg)
    sc = pss_subcarriers(grid.config)
    for slot in range(grid.n_slots):
        row = grid.slot_symbol(slot, SYNC_SYMBOL)
        row[:] = 0.0
        row[sc] = seq
    return grid


def _prbs_bits(seed: int, n: int) -> np.ndarray:
    """Fibonacci LFSR x^16+x^14+x^13+x^11+1 seeded with a nonzero state."""
    state = seed & 0xFFFF
    if state == 0:
        raise ValueError("pilot seed must be nonzero in its low 16 bits")
    out = np.empty(n, dtype=np.uint8)
    for i in range(n):
        out[i] = state & 1
        fb = (state ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1
        state = (state >> 1) | (fb << 15)
    return out


def pilot_symbols(config: GridConfig, pilot_seed: int, n_slots: int,
                  first_slot: int = 0) -> np.ndarray:
    """Known QPSK pilot rows for slots [first_slot, first_slot+n_slots).

    One PRBS stream runs across the burst, so a receiver can regenerate any
    slot's pilots from the seed and the slot index alone.
    """
    total = first_slot + n_slots
    bits = _prbs_bits(pilot_seed, 2 * config.used_subcarriers * total)
    rows = qam_modulate(bits, Modulation.QPSK).reshape(total, config.used_subcarriers)
    return rows[first_slot:]


def insert_pilots(grid: ResourceGrid, pilot_seed: int) -> ResourceGrid:
    pilots = pilot_symbols(grid.config, pilot_seed, grid.n_slots)
    for slot in range(grid.n_slots):
        grid.slot_symbol(slot, PILOT_SYMBOL)[:] = pilots[slot]
    return grid


def ofdm_modulate(grid: ResourceGrid) -> SampleStream:
    """Unitary IFFT per symbol with cyclic prefix, concatenated slot-major."""
    cfg = grid.config
    bins = np.zeros((grid.n_symbols, cfg.fft_size), dtype=np.complex128)
    bins[:, subcarrier_bins(cfg)] = grid.cells
    body = np.fft.ifft(bins, axis=1) * np.sqrt(cfg.fft_size)
    with_cp = np.concatenate([body[:, cfg.fft_size - cfg.cp_len:], body], axis=1)
    return SampleStream(with_cp.ravel())


def ofdm_demodulate(stream: SampleStream, offset: int, n_slots: int,
                    config: GridConfig) -> ResourceGrid:
    """Strip prefixes and apply the unitary forward transform from offset."""
    n_symbols = n_slots * config.symbols_per_slot
    need = offset + n_symbols * config.symbol_samples
    if offset < 0 or need > len(stream.samples):
        raise TruncatedStream(f"need {need} samples, have {len(stream.samples)}")
    t = stream.samples[offset:need].reshape(n_symbols, config.symbol_samples)
    spectra = np.fft.fft(t[:, config.cp_len:], axis=1) / np.sqrt(config.fft_size)
    grid = ResourceGrid(config, n_slots)
    grid.cells[:] = spectra[:, subcarrier_bins(config)]
    return grid


def pss_time_reference(config: GridConfig, cfg: PssConfig) -> np.ndarray:
    """Time-domain sync symbol (prefix included) used for correlation."""
    ref_grid = ResourceGrid(config, 1)
    insert_pss(ref_grid, cfg)
    samples = ofdm_modulate(ref_grid).samples
    return samples[:config.symbol_samples]


def detect_pss(stream: SampleStream, config: GridConfig, cfg: PssConfig = PssConfig(),
               threshold: float = DEFAULT_PEAK_THRESHOLD) -> int:
    """Timing offset of the burst start by cross-correlation.

    Correlates against the full prefix+body sync symbol and returns the
    earliest offset whose peak is within PEAK_TIE_WINDOW of the maximum.
    Raises SyncNotFound when the peak-to-average ratio (peak magnitude over
    RMS correlation magnitude) stays below the threshold.
    """
    ref = pss_time_reference(config, cfg)
    if len(stream.samples) < config.slot_samples:
        raise TruncatedStream("stream shorter than one slot")
    corr = np.abs(np.correlate(stream.samples, ref, mode="valid"))
    rms = np.sqrt(np.mean(corr ** 2))
    if rms == 0.0 or corr.max() / rms < threshold:
        raise SyncNotFound("correlation peak below threshold")
    winners = np.flatnonzero(corr >= (1.0 - PEAK_TIE_WINDOW) * corr.max())
    return int(winners[0])


def equalize(grid_rx: ResourceGrid, pilot_seed: int,
             per_subcarrier: bool = False, first_slot: int = 0) -> ResourceGrid:
    """Least-squares pilot equalization, held constant across each slot.

    The default fits one complex gain per slot to the whole pilot row (the
    channel model is flat per burst, so averaging suppresses estimator
    noise); per_subcarrier=True instead divides by the raw per-bin estimate
    H(k) = Y(k)/X(k). Control and data symbols (2..) are corrected; sync and
    pilot rows pass through untouched.
    """
    cfg = grid_rx.config
    pilots = pilot_symbols(cfg, pilot_seed, grid_rx.n_slots, first_slot)
    out = grid_rx.copy()
    for slot in range(grid_rx.n_slots):
        rx_pilot = grid_rx.slot_symbol(slot, PILOT_SYMBOL)
        if per_subcarrier:
            h = rx_pilot / pilots[slot]
            if np.any(h == 0):
                bad = np.flatnonzero(h == 0)
                raise ZeroChannel(f"zero estimate at subcarriers {bad[:8].tolist()}")
        else:
            h = np.mean(rx_pilot * np.conj(pilots[slot]))  # pilots are unit power
            if h == 0:
                raise ZeroChannel(f"zero slot-average estimate in slot {slot}")
        base = slot * cfg.symbols_per_slot
        out.cells[base + CONTROL_SYMBOL:base + cfg.symbols_per_slot] /= h
    return out


def save_iq(stream: SampleStream, path) -> None:
    """Write little-endian interleaved float32 I/Q pairs (raw SDR format)."""
    inter = np.empty(2 * len(stream.samples), dtype="<f4")
    inter[0::2] = stream.samples.real
    inter[1::2] = stream.samples.imag
    inter.tofile(path)


def load_iq(path) -> SampleStream:
    inter = np.fromfile(path, dtype="<f4")
    if len(inter) % 2:
        raise ValueError("IQ file must hold an even number of float32 values")
    return SampleStream(inter[0::2].astype(np.float64)
                        + 1j * inter[1::2].astype(np.float64))
