"""Adaptive 7-bit fraction adder with LOD-dependent slice duplication.

The fraction adder is a carry-lookahead design.  Depending on the
characteristic (k) of the larger operand, the slices left idle by
fraction truncation recompute the top sum bits a second time; the two
copies are compared and any mismatching bit is forced to zero through
an AND gate, so a transient fault in a duplicated slice is both
detected and mitigated.  The separate 3-bit characteristic adder is
triplicated with a bitwise majority voter.

Duplicate slices consume the *shared* lookahead carries: a fault on a
carry line corrupts both copies identically and is undetectable by
design.  Fault sites on shared signals are flagged accordingly in the
site catalog (see ``adamul.faults``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .logmul import FRAC_BITS, FRAC_MASK

K_BITS = 3                      # characteristic adder input width
K_SUM_BITS = K_BITS + 1         # its output width


class TapUnit(Enum):
    """Addressable sub-units of the adaptive adder."""

    PRIMARY_SLICE = "primary_slice"
    DUPLICATE_SLICE = "duplicate_slice"
    K_REPLICA_0 = "k_replica_0"
    K_REPLICA_1 = "k_replica_1"
    K_REPLICA_2 = "k_replica_2"


K_REPLICA_UNITS = (TapUnit.K_REPLICA_0, TapUnit.K_REPLICA_1, TapUnit.K_REPLICA_2)


@dataclass(frozen=True)
class AdderTap:
    """One injectable signal: a sum-output bit of one adder sub-unit."""

    unit: TapUnit
    bit_index: int

    def __post_init__(self):
        width = K_SUM_BITS if self.unit in K_REPLICA_UNITS else FRAC_BITS
        if not 0 <= self.bit_index < width:
            raise ValueError(f"bit_index {self.bit_index} outside {self.unit.value} width {width}")


@dataclass(frozen=True)
class ProtectionCase:
    """Slice-duplication plan selected from the larger operand's k.

    ``dropped_lsbs`` low fraction bits carry no information (they are
    zeroed by truncation or by normalization of small operands), which
    frees adder slices to recompute ``protected_msbs`` high sum bits.
    """

    max_k: int
    dropped_lsbs: int
    protected_msbs: int

    @property
    def protected_bits(self) -> tuple[int, ...]:
        """Sum-bit positions computed twice, highest first."""
        return tuple(range(FRAC_BITS - 1, FRAC_BITS - 1 - self.protected_msbs, -1))


# max_k -> (dropped_lsbs, protected_msbs).  For max_k <= 3 every bit that
# can be non-zero after normalization is covered (full coverage); max_k = 0
# means both fractions are identically zero and nothing needs duplication.
_CASE_TABLE = {
    7: (2, 2),
    6: (1, 2),
    5: (0, 2),
    4: (0, 3),
    3: (0, 3),
    2: (0, 2),
    1: (0, 1),
    0: (0, 0),
}


def select_case(k1: int, k2: int) -> ProtectionCase:
    """Pick the duplication plan for a pair of characteristics."""
    if not (0 <= k1 < 8 and 0 <= k2 < 8):
        raise ValueError(f"k out of range 0..7: ({k1}, {k2})")
    max_k = max(k1, k2)
    dropped, protected = _CASE_TABLE[max_k]
    return ProtectionCase(max_k=max_k, dropped_lsbs=dropped, protected_msbs=protected)


@dataclass(frozen=True)
class ClaSlice:
    """Per-bit signals of one partial full adder."""

    propagate: int
    generate: int
    carry_in: int
    sum_bit: int


def _lookahead_carries(fa: int, fb: int) -> list[int]:
    """Carries c[0..7] of the 7-bit lookahead network (c[0] = 0)."""
    carries = [0] * (FRAC_BITS + 1)
    for i in range(FRAC_BITS):
        p = ((fa >> i) ^ (fb >> i)) & 1
        g = (fa >> i) & (fb >> i) & 1
        carries[i + 1] = g | (p & carries[i])
    return carries


def cla_add(fa: int, fb: int) -> tuple[int, bool, tuple[ClaSlice, ...]]:
    """Plain 7-bit carry-lookahead addition.

    Returns ``(sum, carry_out, slices)`` where slices expose each
    partial full adder's propagate/generate/carry-in/sum for
    fault-site addressing.  sum + 128*carry_out == fa + fb.
    """
    if not (0 <= fa <= FRAC_MASK and 0 <= fb <= FRAC_MASK):
        raise ValueError(f"fraction out of range 0..{FRAC_MASK}: ({fa}, {fb})")
    carries = _lookahead_carries(fa, fb)
    slices = []
    total = 0
    for i in range(FRAC_BITS):
        p = ((fa >> i) ^ (fb >> i)) & 1
        g = (fa >> i) & (fb >> i) & 1
        s = p ^ carries[i]
        total |= s << i
        slices.append(ClaSlice(propagate=p, generate=g, carry_in=carries[i], sum_bit=s))
    return total, bool(carries[FRAC_BITS]), tuple(slices)


@dataclass(frozen=True)
class FractionSumResult:
    """Outcome of a protected fraction addition."""

    sum: int
    carry: bool
    detect_flags: frozenset[int] = field(default_factory=frozenset)
    inapplicable: tuple[AdderTap, ...] = ()

    @property
    def mitigated(self) -> bool:
        return bool(self.detect_flags)


def protected_add(
    fa: int,
    fb: int,
    case: ProtectionCase,
    faults: Iterable[AdderTap] = (),
    carry_flips: Iterable[int] = (),
) -> FractionSumResult:
    """Fraction addition with duplicated MSB slices and AND mitigation.

    The primary lookahead chain computes the full 7-bit sum.  For each
    bit in ``case.protected_bits`` a duplicate slice recomputes the sum
    bit off the shared carries; the output bit is the AND of the two
    copies, so a mismatch both raises a detect flag and forces the bit
    to zero.  The carry-out is taken from the primary chain.

    ``faults`` flip the addressed sum signal for this evaluation only.
    A duplicate-slice tap whose bit is not protected under the active
    case is recorded as inapplicable and not applied.  ``carry_flips``
    flip shared lookahead carry lines c1..c7 (7 = the carry-out); both
    copies see the corrupted carry, so these are undetectable.
    """
    if not (0 <= fa <= FRAC_MASK and 0 <= fb <= FRAC_MASK):
        raise ValueError(f"fraction out of range 0..{FRAC_MASK}: ({fa}, {fb})")

    carries = _lookahead_carries(fa, fb)
    for ci in carry_flips:
        if not 1 <= ci <= FRAC_BITS:
            raise ValueError(f"carry index out of range 1..{FRAC_BITS}: {ci}")
        carries[ci] ^= 1

    primary_flips = 0
    duplicate_flips = 0
    inapplicable = []
    protected = case.protected_bits
    for tap in faults:
        if tap.unit is TapUnit.PRIMARY_SLICE:
            primary_flips ^= 1 << tap.bit_index
        elif tap.unit is TapUnit.DUPLICATE_SLICE:
            if tap.bit_index in protected:
                duplicate_flips ^= 1 << tap.bit_index
            else:
                inapplicable.append(tap)
        else:
            raise ValueError(f"tap {tap.unit.value} does not address the fraction adder")

    out = 0
    flags = set()
    for i in range(FRAC_BITS):
        p = ((fa >> i) ^ (fb >> i)) & 1
        primary = p ^ carries[i] ^ ((primary_flips >> i) & 1)
        if i in protected:
            duplicate = p ^ carries[i] ^ ((duplicate_flips >> i) & 1)
            out |= (primary & duplicate) << i
            if primary != duplicate:
                flags.add(i)
        else:
            out |= primary << i

    return FractionSumResult(
        sum=out,
        carry=bool(carries[FRAC_BITS]),
        detect_flags=frozenset(flags),
        inapplicable=tuple(inapplicable),
    )


def majority3(a: int, b: int, c: int) -> int:
    """Bitwise majority of three equal-width words."""
    return (a & b) | (a & c) | (b & c)


def _ripple_add3(ka: int, kb: int) -> int:
    """One 3-bit ripple adder replica, 4-bit output."""
    carry = 0
    out = 0
    for i in range(K_BITS):
        ai = (ka >> i) & 1
        bi = (kb >> i) & 1
        out |= (ai ^ bi ^ carry) << i
        carry = (ai & bi) | (carry & (ai ^ bi))
    return out | (carry << K_BITS)


def k_add_tmr(k1: int, k2: int, faults: Iterable[AdderTap] = ()) -> int:
    """Characteristic addition through three voted adder replicas.

    Each replica independently computes k1 + k2; ``faults`` flip the
    addressed output bit of the named replica.  The bitwise majority
    masks any single-replica fault.
    """
    if not (0 <= k1 < 8 and 0 <= k2 < 8):
        raise ValueError(f"k out of range 0..7: ({k1}, {k2})")
    replicas = [_ripple_add3(k1, k2) for _ in range(3)]
    for tap in faults:
        if tap.unit not in K_REPLICA_UNITS:
            raise ValueError(f"tap {tap.unit.value} does not address a k-adder replica")
        replicas[K_REPLICA_UNITS.index(tap.unit)] ^= 1 << tap.bit_index
    return majority3(*replicas)
