"""Resource grid model: RB partitioning and payload symbol (de)mapping.

The grid is a slot-structured frequency x time array of complex resource
elements. Each slot reserves symbol 0 for the sync sequence, symbol 1 for
pilots and symbol 2 for the control region; symbols 3.. carry payload data.
Allocations are granted in whole resource blocks (12 subcarriers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import CapacityExceeded, InvalidRequest, PayloadOverflow

RB_SUBCARRIERS = 12
#: slot symbols reserved for sync / pilots / control, in that order
SYNC_SYMBOL = 0
PILOT_SYMBOL = 1
CONTROL_SYMBOL = 2
FIRST_DATA_SYMBOL = 3
MAX_REQUESTS = 4


class ResourceType(IntEnum):
    NON_SEMANTIC = 0
    SEMANTIC = 1


@dataclass(frozen=True)
class GridConfig:
    """OFDM numerology for one carrier.

    Defaults are 5G-shaped but small enough for fast simulation:
    256-point transform, 240 used subcarriers (20 RBs), 32-sample CP,
    14 symbols per slot.
    """

    fft_size: int = 256
    used_subcarriers: int = 240
    cp_len: int = 32
    symbols_per_slot: int = 14

    def __post_init__(self):
        if self.fft_size < 1 or self.used_subcarriers < 1:
            raise ValueError("fft_size and used_subcarriers must be positive")
        if self.used_subcarriers > self.fft_size:
            raise ValueError("used_subcarriers must not exceed fft_size")
        if self.used_subcarriers % RB_SUBCARRIERS != 0:
            raise ValueError("used_subcarriers must be a multiple of 12")
        if not 0 <= self.cp_len < self.fft_size:
            raise ValueError("cp_len must be in [0, fft_size)")
        if self.symbols_per_slot < 4:
            raise ValueError("need at least 4 symbols per slot (sync+pilot+control+data)")

    @property
    def n_rbs(self) -> int:
        return self.used_subcarriers // RB_SUBCARRIERS

    @property
    def data_symbols_per_slot(self) -> int:
        return self.symbols_per_slot - FIRST_DATA_SYMBOL

    @property
    def symbol_samples(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def slot_samples(self) -> int:
        return self.symbols_per_slot * self.symbol_samples


@dataclass(frozen=True)
class RbAllocation:
    """A contiguous RB range granted to one payload for the whole burst."""

    rb_start: int
    rb_count: int
    resource_type: ResourceType
    payload_id: int = 0

    def subcarriers(self) -> np.ndarray:
        return np.arange(self.rb_start * RB_SUBCARRIERS,
                         (self.rb_start + self.rb_count) * RB_SUBCARRIERS)


@dataclass(frozen=True)
class AllocationRequest:
    resource_type: ResourceType
    n_symbols_needed: int


@dataclass
class AllocationPlan:
    allocations: list[RbAllocation]
    slots_needed: list[int]
    n_slots: int


class ResourceGrid:
    """Complex resource elements indexed [symbol][subcarrier] over a burst."""

    def __init__(self, config: GridConfig, n_slots: int = 1):
        if n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        self.config = config
        self.n_slots = n_slots
        self.cells = np.zeros(
            (n_slots * config.symbols_per_slot, config.used_subcarriers),
            dtype=np.complex128,
        )

    @property
    def n_symbols(self) -> int:
        return self.cells.shape[0]

    def copy(self) -> "ResourceGrid":
        out = ResourceGrid(self.config, self.n_slots)
        out.cells = self.cells.copy()
        return out

    def slot_symbol(self, slot: int, symbol: int) -> np.ndarray:
        """View of one OFDM symbol row within a slot."""
        return self.cells[slot * self.config.symbols_per_slot + symbol]


def allocation_capacity(config: GridConfig, alloc: RbAllocation, n_slots: int) -> int:
    """Complex symbols the allocation's data region holds across the burst."""
    return n_slots * config.data_symbols_per_slot * alloc.rb_count * RB_SUBCARRIERS


def _split_rbs(requests: list[AllocationRequest], n_rbs: int) -> list[int]:
    # Equal split between the semantic and non-semantic classes when both are
    # present (any leftover RB goes to the semantic side), then equal within a
    # class with the remainder to the earliest payload of that class.
    sem = [i for i, r in enumerate(requests) if r.resource_type == ResourceType.SEMANTIC]
    non = [i for i, r in enumerate(requests) if r.resource_type == ResourceType.NON_SEMANTIC]
    counts = [0] * len(requests)

    def share(indices: list[int], total: int):
        base, rem = divmod(total, len(indices))
        for j, i in enumerate(indices):
            counts[i] = base + (1 if j < rem else 0)

    if sem and non:
        non_total = n_rbs // 2
        share(sem, n_rbs - non_total)
        share(non, non_total)
    else:
        share(sem or non, n_rbs)
    return counts


def allocate(requests: list[AllocationRequest], config: GridConfig) -> AllocationPlan:
    """Grant RB ranges first-fit in request order and size the burst.

    Resource split policy: semantic and non-semantic classes share the RBs
    equally when both are present; a lone class (or payload) takes everything.
    The burst spans enough slots for the largest payload; the frequency
    partition is identical in every slot.
    """
    if not requests:
        raise InvalidRequest("no payloads requested")
    if len(requests) > MAX_REQUESTS:
        raise InvalidRequest(f"at most {MAX_REQUESTS} payloads per burst")
    for r in requests:
        if r.n_symbols_needed < 1:
            raise InvalidRequest("n_symbols_needed must be >= 1")

    counts = _split_rbs(requests, config.n_rbs)
    if any(c < 1 for c in counts):
        raise CapacityExceeded(
            f"{len(requests)} payloads cannot each get an RB out of {config.n_rbs}")

    allocations = []
    slots_needed = []
    rb_next = 0
    for i, (req, rb_count) in enumerate(zip(requests, counts)):
        allocations.append(RbAllocation(rb_next, rb_count, req.resource_type, payload_id=i))
        per_slot = config.data_symbols_per_slot * rb_count * RB_SUBCARRIERS
        slots_needed.append(math.ceil(req.n_symbols_needed / per_slot))
        rb_next += rb_count
    assert rb_next <= config.n_rbs
    return AllocationPlan(allocations, slots_needed, max(slots_needed))


def _traversal(grid: ResourceGrid, alloc: RbAllocation, n: int):
    """(row, col) arrays for the first n data REs of the allocation.

    Order is slot-major, then data-symbol index, then subcarrier ascending.
    """
    cfg = grid.config
    sc = alloc.subcarriers()
    rows_per_slot = np.arange(FIRST_DATA_SYMBOL, cfg.symbols_per_slot)
    rows = (np.arange(grid.n_slots)[:, None] * cfg.symbols_per_slot + rows_per_slot).ravel()
    idx = np.arange(n)
    return rows[idx // len(sc)], sc[idx % len(sc)]


def map_payload(grid: ResourceGrid, alloc: RbAllocation, symbols: np.ndarray) -> ResourceGrid:
    """Write payload symbols into the allocation's data region, in place."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    cap = allocation_capacity(grid.config, alloc, grid.n_slots)
    if len(symbols) > cap:
        raise PayloadOverflow(f"{len(symbols)} symbols > capacity {cap}")
    if len(symbols) == 0:
        return grid
    rows, cols = _traversal(grid, alloc, len(symbols))
    grid.cells[rows, cols] = symbols
    return grid


def demap_payload(grid: ResourceGrid, alloc: RbAllocation, n_symbols: int) -> np.ndarray:
    """Read back n_symbols in the exact inverse order of map_payload."""
    cap = allocation_capacity(grid.config, alloc, grid.n_slots)
    if n_symbols > cap:
        raise PayloadOverflow(f"{n_symbols} symbols > capacity {cap}")
    if n_symbols == 0:
        return np.zeros(0, dtype=np.complex128)
    rows, cols = _traversal(grid, alloc, n_symbols)
    return grid.cells[rows, cols].copy()
