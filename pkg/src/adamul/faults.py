"""Fault-site catalogs, statistical sample sizing and campaign drawing.

A fault site is one injectable signal bit inside one MAC unit of the
array; an event pairs a site with the global cycle at which the
transient flip occurs.  Sites are enumerated in a fixed documented
order (row-major over units, catalog order over signals, ascending bit
index) so campaigns reproduce exactly from their seed.

Draws use numpy's PCG64 generator: for ``n`` injections the site
indices are drawn first (``integers(0, len(sites), size=n)``), then
the cycle offsets (``integers(0, len(cycles), size=n)``).  Pairs are
zipped in order, one event per injection run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from .multipliers import MultiplierKind, Signal
from .systolic import ArrayConfig


@dataclass(frozen=True)
class FaultSite:
    """One injectable signal bit of one MAC unit.

    ``shared`` marks signals consumed identically by both copies of a
    duplicated computation (shifted operands, lookahead carries): a
    fault there is undetectable by construction.
    """

    row: int
    col: int
    signal: Signal
    bit_index: int
    shared: bool = False

    @property
    def unit_path(self) -> str:
        return f"mac[{self.row}][{self.col}]"

    @property
    def label(self) -> str:
        return f"{self.unit_path}/{self.signal.value}[{self.bit_index}]"


@dataclass(frozen=True)
class FaultEvent:
    """A single transient bit-flip: one site at one global cycle."""

    site: FaultSite
    cycle: int

    def __post_init__(self):
        if self.cycle < 0:
            raise ValueError(f"cycle must be non-negative: {self.cycle}")


class CampaignScope(Enum):
    SINGLE_MULTIPLY = "single_multiply"
    GEMM = "gemm"
    DNN_INFERENCE = "dnn_inference"


@dataclass(frozen=True)
class Campaign:
    """Injection-campaign parameters; results are a pure function of
    (seed, config, model, dataset slice)."""

    seed: int
    n_injections: int
    scope: CampaignScope
    kind: MultiplierKind
    enforce_confidence: bool = False
    confidence: float = 0.95
    margin: float = 0.01
    p: float = 0.5

    def __post_init__(self):
        if self.n_injections < 1:
            raise ValueError("n_injections must be positive")

    def required_injections(self, population: Optional[int]) -> int:
        return sample_size(population, self.confidence, self.margin, self.p)

    def check_confidence(self, population: Optional[int]) -> None:
        """Raise when confidence enforcement is on and n is too small."""
        if self.enforce_confidence:
            needed = self.required_injections(population)
            if self.n_injections < needed:
                raise ValueError(
                    f"{self.n_injections} injections < required sample size {needed} "
                    f"for {self.confidence:.0%} confidence / {self.margin:.2%} margin"
                )


# per-unit signal catalogs, in enumeration order; (signal, bits, shared)
def _bits_of(signal: Signal) -> range:
    from .multipliers import CARRY_LOW, SIGNAL_WIDTHS

    if signal is Signal.CARRY:
        return range(CARRY_LOW, CARRY_LOW + SIGNAL_WIDTHS[signal])
    if signal is Signal.SUM_DUPLICATE:
        from .multipliers import DUPLICATE_BITS

        return DUPLICATE_BITS
    return range(SIGNAL_WIDTHS[signal])


_UNIT_CATALOG: dict[MultiplierKind, tuple[tuple[Signal, bool], ...]] = {
    # exact multiplier is behavioral: faults modeled at output-bit
    # granularity plus the accumulator register
    MultiplierKind.EXACT: (
        (Signal.PRODUCT, False),
        (Signal.ACCUMULATOR, False),
    ),
    # replica outputs double as the voter inputs; the voted register
    # is the retirement point, so no separate accumulator sites
    MultiplierKind.TMR_EXACT: (
        (Signal.REPLICA_PRODUCT_0, False),
        (Signal.REPLICA_PRODUCT_1, False),
        (Signal.REPLICA_PRODUCT_2, False),
    ),
    MultiplierKind.MITCHELL: (
        (Signal.FRAC_A, True),
        (Signal.FRAC_B, True),
        (Signal.SUM_PRIMARY, False),
        (Signal.CARRY, True),
        (Signal.K_OUT, False),
        (Signal.PRODUCT, False),
        (Signal.ACCUMULATOR, False),
    ),
    MultiplierKind.ADAM: (
        (Signal.FRAC_A, True),
        (Signal.FRAC_B, True),
        (Signal.SUM_PRIMARY, False),
        (Signal.SUM_DUPLICATE, False),
        (Signal.CARRY, True),
        (Signal.K_REPLICA_0, False),
        (Signal.K_REPLICA_1, False),
        (Signal.K_REPLICA_2, False),
        (Signal.PRODUCT, False),
        (Signal.ACCUMULATOR, False),
    ),
}
_UNIT_CATALOG[MultiplierKind.MITCHELL_TRUNC] = _UNIT_CATALOG[MultiplierKind.MITCHELL]

# per-unit site counts implied by the catalog above; pinned in tests
UNIT_SITE_COUNTS = {
    MultiplierKind.EXACT: 48,
    MultiplierKind.TMR_EXACT: 48,
    MultiplierKind.MITCHELL: 80,
    MultiplierKind.MITCHELL_TRUNC: 80,
    MultiplierKind.ADAM: 91,
}


def enumerate_sites(kind: MultiplierKind, array: ArrayConfig) -> list[FaultSite]:
    """All injectable sites of an array of ``kind`` MAC units.

    Ordering is deterministic: units row-major, then catalog signal
    order, then ascending bit index.
    """
    sites = []
    catalog = _UNIT_CATALOG[kind]
    for row in range(array.rows):
        for col in range(array.cols):
            for signal, shared in catalog:
                for bit in _bits_of(signal):
                    sites.append(FaultSite(row=row, col=col, signal=signal,
                                           bit_index=bit, shared=shared))
    return sites


def sample_size(population: Optional[int], confidence: float, margin: float, p: float) -> int:
    """Number of injections for a target confidence and error margin.

    Finite population: ``ceil(N / (1 + e^2 (N-1) / (t^2 p (1-p))))``
    with t the two-sided normal quantile of the confidence level.
    Infinite population (None or math.inf): ``ceil(t^2 p (1-p) / e^2)``.
    """
    if not 0 < margin < 1:
        raise ValueError(f"margin must be in (0, 1): {margin}")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1): {p}")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must be in (0, 1): {confidence}")
    t = NormalDist().inv_cdf((1 + confidence) / 2)
    base = t * t * p * (1 - p) / (margin * margin)
    if population is None or population == math.inf:
        return math.ceil(base)
    if population < 1:
        raise ValueError(f"population must be positive: {population}")
    n = population / (1 + (margin * margin) * (population - 1) / (t * t * p * (1 - p)))
    return math.ceil(n)


def draw_events(campaign: Campaign, sites: Sequence[FaultSite], cycles: range) -> list[FaultEvent]:
    """Draw the campaign's events uniformly over site x cycle.

    Reproducible from the seed; same seed, sites and cycles give the
    identical event list.
    """
    if not sites:
        raise ValueError("site catalog is empty")
    if len(cycles) == 0:
        raise ValueError("cycle range is empty")
    rng = np.random.Generator(np.random.PCG64(campaign.seed))
    site_idx = rng.integers(0, len(sites), size=campaign.n_injections)
    cycle_idx = rng.integers(0, len(cycles), size=campaign.n_injections)
    return [FaultEvent(site=sites[int(s)], cycle=int(cycles[int(c)]))
            for s, c in zip(site_idx, cycle_idx)]
