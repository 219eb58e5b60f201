"""Cycle-addressed output-stationary systolic GEMM with fault events.

The array tiles the output matrix; each processing element owns one
output element per tile and accumulates one product per cycle into a
32-bit register.  Signed int8 operands are routed through the unsigned
multiplier in sign-magnitude form (magnitude 128 saturates to 127).

The fault-free result is computed from the variant's product table;
an injected event is resolved through the schedule to a single MAC
unit and k-step, re-evaluated bit-accurately there, and its effect is
carried into the owning output element.  In this dataflow one
multiplier fault perturbs at most one output element, and an
accumulator flip stays resident from its cycle until the tile's
accumulator retires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .multipliers import (
    MultiplierKind,
    Signal,
    multiply_signed,
    signed_product_table,
)

ACC_BITS = 32


class Dataflow(Enum):
    OUTPUT_STATIONARY = "output_stationary"


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 8
    cols: int = 8
    dataflow: Dataflow = Dataflow.OUTPUT_STATIONARY
    accumulator_width: int = ACC_BITS

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array dims must be >= 1: {self.rows}x{self.cols}")
        if self.accumulator_width != ACC_BITS:
            raise ValueError("only 32-bit accumulators are modeled")


@dataclass(frozen=True)
class MacState:
    """Snapshot of one processing element's accumulator."""

    accumulator: int
    position: tuple[int, int]


@dataclass(frozen=True)
class GemmSchedule:
    """Deterministic (tile, k-step) -> global cycle mapping.

    Tiles sweep the output row-major; each tile spends K cycles, one
    k-step per cycle, so ``total_cycles == tiles_m * tiles_n * K``.
    """

    m: int
    k: int
    n: int
    config: ArrayConfig

    @property
    def tiles_m(self) -> int:
        return math.ceil(self.m / self.config.rows)

    @property
    def tiles_n(self) -> int:
        return math.ceil(self.n / self.config.cols)

    @property
    def total_cycles(self) -> int:
        return self.tiles_m * self.tiles_n * self.k

    def cycle_of(self, tile_i: int, tile_j: int, k_step: int) -> int:
        return (tile_i * self.tiles_n + tile_j) * self.k + k_step

    def decode(self, cycle: int) -> tuple[int, int, int]:
        """Global cycle -> (tile_i, tile_j, k_step)."""
        if not 0 <= cycle < self.total_cycles:
            raise ValueError(f"cycle {cycle} outside 0..{self.total_cycles - 1}")
        tile, k_step = divmod(cycle, self.k)
        tile_i, tile_j = divmod(tile, self.tiles_n)
        return tile_i, tile_j, k_step

    def output_of(self, tile_i: int, tile_j: int, row: int, col: int):
        """Output element owned by PE (row, col) in a tile, or None if
        the PE falls in the zero-padded fringe of an edge tile."""
        m = tile_i * self.config.rows + row
        n = tile_j * self.config.cols + col
        if m >= self.m or n >= self.n:
            return None
        return m, n


def schedule(dims: tuple[int, int, int], cfg: ArrayConfig) -> GemmSchedule:
    """Build the cycle map for an (M, K, N) GEMM on the given array."""
    m, k, n = dims
    if m < 1 or k < 1 or n < 1:
        raise ValueError(f"GEMM dims must be >= 1: {dims}")
    return GemmSchedule(m=m, k=k, n=n, config=cfg)


@dataclass
class GemmFaultReport:
    """What happened to each injected event during one gemm run."""

    detected: bool = False
    applied: list = field(default_factory=list)
    no_effect: list = field(default_factory=list)     # struck a padded PE position
    inapplicable: list = field(default_factory=list)  # signal absent in this variant


def _wrap32(x: int) -> int:
    return ((int(x) + (1 << 31)) % (1 << 32)) - (1 << 31)


def _flip32(value: int, bit: int) -> int:
    return _wrap32((value & 0xFFFFFFFF) ^ (1 << bit))


def _check_int8(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {mat.shape}")
    if mat.dtype != np.int8:
        if np.any(mat < -128) or np.any(mat > 127):
            raise ValueError(f"{name} entries outside int8 range")
        mat = mat.astype(np.int8)
    return mat


def gemm_with_report(A, B, cfg: ArrayConfig, kind: MultiplierKind, events=()):
    """Run an int8 GEMM through the array; returns (int32 matrix, report).

    Events fire when their (unit, cycle) matches the schedule.  A
    multiplier-internal event re-evaluates that single product through
    the bit-accurate scalar path; an accumulator event flips the
    addressed bit of the owning PE's register right after the cycle's
    update, and the flip persists until the tile retires.
    """
    A = _check_int8(A, "A")
    B = _check_int8(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"inner dimensions disagree: {A.shape} x {B.shape}")

    sched = schedule((A.shape[0], A.shape[1], B.shape[1]), cfg)
    table = signed_product_table(kind)
    idx_a = A.astype(np.int64) + 128
    idx_b = B.astype(np.int64) + 128

    # fault-free accumulation: gather per-cycle products from the
    # variant table in row chunks, wrap to the 32-bit register width
    M, K = A.shape
    N = B.shape[1]
    out = np.empty((M, N), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, K * N))
    for m0 in range(0, M, chunk):
        block = table[idx_a[m0:m0 + chunk, :, None], idx_b[None, :, :]]
        out[m0:m0 + chunk] = block.sum(axis=1, dtype=np.int64)
    out = ((out + (1 << 31)) % (1 << 32)) - (1 << 31)

    report = GemmFaultReport()
    for event in events:
        site = event.site
        if not (0 <= site.row < cfg.rows and 0 <= site.col < cfg.cols):
            raise ValueError(f"event addresses nonexistent unit mac[{site.row}][{site.col}]")
        tile_i, tile_j, k_step = sched.decode(event.cycle)
        pos = sched.output_of(tile_i, tile_j, site.row, site.col)
        if pos is None:
            report.no_effect.append(event)
            continue
        m, n = pos
        a = int(A[m, k_step])
        b = int(B[k_step, n])
        golden_product = int(table[a + 128, b + 128])
        if site.signal is Signal.ACCUMULATOR:
            # accumulator value just after this cycle's MAC update
            prefix = int(table[idx_a[m, : k_step + 1], idx_b[: k_step + 1, n]].sum())
            state = MacState(accumulator=_wrap32(prefix), position=(site.row, site.col))
            delta = _flip32(state.accumulator, site.bit_index) - state.accumulator
            out[m, n] = _wrap32(int(out[m, n]) + delta)
            report.applied.append(event)
        else:
            outcome = multiply_signed(kind, a, b, [site])
            if outcome.inapplicable:
                report.inapplicable.append(event)
                continue
            out[m, n] = _wrap32(int(out[m, n]) + outcome.product - golden_product)
            report.detected = report.detected or outcome.detected
            report.applied.append(event)
    return out.astype(np.int32), report


def gemm(A, B, cfg: ArrayConfig, kind: MultiplierKind, events=()) -> np.ndarray:
    """Tiled int8 GEMM -> int32, with optional scheduled fault events."""
    out, _ = gemm_with_report(A, B, cfg, kind, events)
    return out
