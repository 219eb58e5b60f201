"""Complete 8x8 -> 16 multiplier variants behind one fault-injectable call.

Variants:

* ``EXACT``          behavioral integer product.
* ``TMR_EXACT``      three exact replicas with a bitwise majority voter.
* ``MITCHELL``       log-add-antilog pipeline, full 7-bit fractions.
* ``MITCHELL_TRUNC`` same pipeline with fractions truncated to 5 bits.
* ``ADAM``           truncated pipeline plus the adaptive protected
                     fraction adder and the voted characteristic adder.
                     Fault-free it is bit-identical to MITCHELL_TRUNC.

``multiply`` evaluates one variant with an optional set of single-bit
transient faults addressed by signal name; each fault lives for that
evaluation only.  ``product_table`` tabulates the fault-free variant
over the full input domain for vectorized workloads (tests check the
table against the scalar path exhaustively).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import logmul
from .adder import (
    AdderTap,
    FractionSumResult,
    TapUnit,
    k_add_tmr,
    majority3,
    protected_add,
    select_case,
)
from .logmul import FRAC_BITS

PRODUCT_BITS = 16
PRODUCT_MASK = (1 << PRODUCT_BITS) - 1


class MultiplierKind(Enum):
    EXACT = "exact"
    TMR_EXACT = "tmr_exact"
    MITCHELL = "mitchell"
    MITCHELL_TRUNC = "mitchell_trunc"
    ADAM = "adam"

    @classmethod
    def parse(cls, name: str) -> "MultiplierKind":
        key = name.strip().lower().replace("-", "_")
        aliases = {"tmr": cls.TMR_EXACT, "wallace": cls.EXACT}
        if key in aliases:
            return aliases[key]
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown multiplier kind: {name!r}")


class Signal(Enum):
    """Injectable signal groups inside a multiplier unit."""

    FRAC_A = "frac_a"                  # shifted operand a, 7 bits, shared
    FRAC_B = "frac_b"                  # shifted operand b, 7 bits, shared
    SUM_PRIMARY = "sum_primary"        # primary PFA sum outputs, 7 bits
    SUM_DUPLICATE = "sum_duplicate"    # duplicate PFA sum outputs, bits 4..6
    CARRY = "carry"                    # lookahead carries c1..c7, shared
    K_OUT = "k_out"                    # unprotected k-adder output, 4 bits
    K_REPLICA_0 = "k_replica_0"        # voted k-adder replicas, 4 bits each
    K_REPLICA_1 = "k_replica_1"
    K_REPLICA_2 = "k_replica_2"
    PRODUCT = "product"                # unsigned product output, 16 bits
    REPLICA_PRODUCT_0 = "replica_product_0"    # TMR replica outputs
    REPLICA_PRODUCT_1 = "replica_product_1"
    REPLICA_PRODUCT_2 = "replica_product_2"
    ACCUMULATOR = "accumulator"        # MAC accumulator, handled in systolic


_K_SIGNAL_TO_TAP = {
    Signal.K_REPLICA_0: TapUnit.K_REPLICA_0,
    Signal.K_REPLICA_1: TapUnit.K_REPLICA_1,
    Signal.K_REPLICA_2: TapUnit.K_REPLICA_2,
}

_REPLICA_PRODUCT_SIGNALS = (
    Signal.REPLICA_PRODUCT_0,
    Signal.REPLICA_PRODUCT_1,
    Signal.REPLICA_PRODUCT_2,
)

SIGNAL_WIDTHS = {
    Signal.FRAC_A: FRAC_BITS,
    Signal.FRAC_B: FRAC_BITS,
    Signal.SUM_PRIMARY: FRAC_BITS,
    Signal.SUM_DUPLICATE: 3,           # bits 4..6, the only slices ever duplicated
    Signal.CARRY: FRAC_BITS,           # indices 1..7 (7 = carry-out)
    Signal.K_OUT: 4,
    Signal.K_REPLICA_0: 4,
    Signal.K_REPLICA_1: 4,
    Signal.K_REPLICA_2: 4,
    Signal.PRODUCT: PRODUCT_BITS,
    Signal.REPLICA_PRODUCT_0: PRODUCT_BITS,
    Signal.REPLICA_PRODUCT_1: PRODUCT_BITS,
    Signal.REPLICA_PRODUCT_2: PRODUCT_BITS,
    Signal.ACCUMULATOR: 32,
}

# duplicate PFA slices only ever exist for the three highest sum bits
DUPLICATE_BITS = (4, 5, 6)

# lowest addressable lookahead carry (c0 is the constant-zero carry-in)
CARRY_LOW = 1


@dataclass(frozen=True)
class MultiplyOutcome:
    """Result of one multiplier evaluation."""

    product: int
    detected: bool = False
    detail: Optional[FractionSumResult] = None
    inapplicable: tuple = ()


def _as_site(fault):
    # accept a site-like (signal, bit_index) or unwrap a FaultEvent
    return getattr(fault, "site", fault)


def _split_faults(faults):
    """Group fault objects by signal as (bit_index, original) pairs."""
    by_signal: dict[Signal, list] = {}
    for fault in faults:
        site = _as_site(fault)
        sig = site.signal
        bit = site.bit_index
        width = SIGNAL_WIDTHS[sig]
        low = CARRY_LOW if sig is Signal.CARRY else 0
        if sig is Signal.SUM_DUPLICATE:
            if bit not in DUPLICATE_BITS:
                raise ValueError(f"no duplicate slice at bit {bit}")
        elif not low <= bit < (width + low if sig is Signal.CARRY else width):
            raise ValueError(f"bit {bit} outside {sig.value} width {width}")
        by_signal.setdefault(sig, []).append((bit, fault))
    return by_signal


def _bits(by_signal, sig) -> list[int]:
    return [bit for bit, _ in by_signal.get(sig, ())]


def _xor_bits(value: int, bits) -> int:
    for b in bits:
        value ^= 1 << b
    return value


def _plain_cla(fa: int, fb: int, carry_flips, sum_flips) -> tuple[int, bool]:
    carries = [0] * (FRAC_BITS + 1)
    for i in range(FRAC_BITS):
        p = ((fa >> i) ^ (fb >> i)) & 1
        g = (fa >> i) & (fb >> i) & 1
        carries[i + 1] = g | (p & carries[i])
    for ci in carry_flips:
        carries[ci] ^= 1
    total = 0
    for i in range(FRAC_BITS):
        total |= (((fa >> i) ^ (fb >> i) ^ carries[i]) & 1) << i
    return _xor_bits(total, sum_flips), bool(carries[FRAC_BITS])


def _mitchell_faulty(a: int, b: int, trunc: bool, protected: bool, by_signal) -> MultiplyOutcome:
    """Shared log-pipeline evaluation with faults applied along the way."""
    inapplicable = []
    za, k1 = logmul.lod(a)
    zb, k2 = logmul.lod(b)
    zero = za or zb

    fa = 0 if za else logmul.normalize(a, k1)
    fb = 0 if zb else logmul.normalize(b, k2)
    # strikes on the shifted-operand registers; bits dropped by
    # truncation feed nothing downstream, so flips there are masked
    fa = _xor_bits(fa, _bits(by_signal, Signal.FRAC_A))
    fb = _xor_bits(fb, _bits(by_signal, Signal.FRAC_B))
    if trunc:
        fa = logmul.truncate(fa)
        fb = logmul.truncate(fb)

    carry_flips = _bits(by_signal, Signal.CARRY)
    primary_taps = [AdderTap(TapUnit.PRIMARY_SLICE, i) for i in _bits(by_signal, Signal.SUM_PRIMARY)]

    detail = None
    detected = False
    if protected:
        case = select_case(k1, k2)
        dup_taps = []
        for bit, original in by_signal.get(Signal.SUM_DUPLICATE, ()):
            if bit in case.protected_bits:
                dup_taps.append(AdderTap(TapUnit.DUPLICATE_SLICE, bit))
            else:
                inapplicable.append(original)   # slice idle under this case
        for bit, original in by_signal.get(Signal.K_OUT, ()):
            inapplicable.append(original)       # the voted design has no single k output
        detail = protected_add(fa, fb, case, primary_taps + dup_taps, carry_flips)
        frac_sum, carry = detail.sum, detail.carry
        # the comparator fires even when the zero flag gates the output
        detected = detail.mitigated

        k_taps = []
        for sig, tap_unit in _K_SIGNAL_TO_TAP.items():
            k_taps.extend(AdderTap(tap_unit, bit) for bit in _bits(by_signal, sig))
        ksum = k_add_tmr(k1, k2, k_taps)
    else:
        for sig in (Signal.SUM_DUPLICATE, *_K_SIGNAL_TO_TAP):
            for _, original in by_signal.get(sig, ()):
                inapplicable.append(original)
        frac_sum, carry = _plain_cla(fa, fb, carry_flips, (t.bit_index for t in primary_taps))
        ksum = _xor_bits(k1 + k2, _bits(by_signal, Signal.K_OUT))

    if zero:
        # the lod zero flag bypasses the pipeline and forces a zero
        # product; only strikes on the output lines survive the gate
        product = 0
    else:
        # the antilog barrel shifter drives a 16-bit register: bits
        # pushed past bit 15 by a corrupted ksum are lost
        product = logmul.antilog(ksum, frac_sum, carry) & PRODUCT_MASK
    product = _xor_bits(product, _bits(by_signal, Signal.PRODUCT)) & PRODUCT_MASK
    return MultiplyOutcome(product=product, detected=detected, detail=detail,
                           inapplicable=tuple(inapplicable))


def multiply(kind: MultiplierKind, a: int, b: int, faults=()) -> MultiplyOutcome:
    """Evaluate one multiplier variant on unsigned 8-bit operands.

    ``faults`` is an iterable of fault sites (or events carrying one)
    addressing this unit's signals; each flips one bit for this
    evaluation only.  Faults addressing a signal the variant does not
    have are recorded in ``inapplicable`` and skipped.  Only ``ADAM``
    reports detection; TMR masks silently.
    """
    if not (0 <= a <= logmul.OPERAND_MAX and 0 <= b <= logmul.OPERAND_MAX):
        raise ValueError(f"operand out of range 0..{logmul.OPERAND_MAX}: ({a}, {b})")
    by_signal = _split_faults(faults)
    by_signal.pop(Signal.ACCUMULATOR, None)   # applied at the MAC level

    if kind is MultiplierKind.EXACT:
        inapplicable = tuple(orig for sig, entries in by_signal.items()
                             if sig is not Signal.PRODUCT for _, orig in entries)
        product = _xor_bits(a * b, _bits(by_signal, Signal.PRODUCT)) & PRODUCT_MASK
        return MultiplyOutcome(product=product, inapplicable=inapplicable)

    if kind is MultiplierKind.TMR_EXACT:
        inapplicable = tuple(orig for sig, entries in by_signal.items()
                             if sig not in _REPLICA_PRODUCT_SIGNALS for _, orig in entries)
        replicas = [
            _xor_bits(a * b, _bits(by_signal, sig)) & PRODUCT_MASK
            for sig in _REPLICA_PRODUCT_SIGNALS
        ]
        return MultiplyOutcome(product=majority3(*replicas), inapplicable=inapplicable)

    if kind is MultiplierKind.MITCHELL:
        return _mitchell_faulty(a, b, trunc=False, protected=False, by_signal=by_signal)
    if kind is MultiplierKind.MITCHELL_TRUNC:
        return _mitchell_faulty(a, b, trunc=True, protected=False, by_signal=by_signal)
    if kind is MultiplierKind.ADAM:
        return _mitchell_faulty(a, b, trunc=True, protected=True, by_signal=by_signal)
    raise ValueError(f"unknown kind: {kind}")


# ---------------------------------------------------------------------------
# fault-free lookup tables
# ---------------------------------------------------------------------------

_TABLE_CACHE: dict[MultiplierKind, np.ndarray] = {}
_SIGNED_CACHE: dict[MultiplierKind, np.ndarray] = {}


def product_table(kind: MultiplierKind) -> np.ndarray:
    """Fault-free products for all 256x256 unsigned pairs (int32).

    ``table[a, b] == multiply(kind, a, b).product``; the equality is
    asserted exhaustively in the test suite.
    """
    cached = _TABLE_CACHE.get(kind)
    if cached is None:
        ops = np.arange(256, dtype=np.int64)
        if kind in (MultiplierKind.EXACT, MultiplierKind.TMR_EXACT):
            table = np.outer(ops, ops)
        else:
            trunc = kind is not MultiplierKind.MITCHELL
            table = logmul.mitchell_mul_array(ops[:, None], ops[None, :], trunc=trunc)
        cached = np.ascontiguousarray(table.astype(np.int32))
        cached.setflags(write=False)
        _TABLE_CACHE[kind] = cached
    return cached


def signed_product_table(kind: MultiplierKind) -> np.ndarray:
    """Signed products over int8 x int8, indexed by ``value + 128``.

    Signs are handled outside the unsigned multiplier (sign-magnitude);
    magnitude 128 saturates to 127.
    """
    cached = _SIGNED_CACHE.get(kind)
    if cached is None:
        unsigned = product_table(kind)
        vals = np.arange(-128, 128, dtype=np.int64)
        mags = np.minimum(np.abs(vals), 127)
        signs = np.sign(vals)
        cached = (signs[:, None] * signs[None, :]) * unsigned[np.ix_(mags, mags)]
        cached = np.ascontiguousarray(cached.astype(np.int32))
        cached.setflags(write=False)
        _SIGNED_CACHE[kind] = cached
    return cached


def saturate_magnitude(v: int) -> int:
    """|v| for int8 v, saturating -128 to 127."""
    return min(abs(v), 127)


def multiply_signed(kind: MultiplierKind, a: int, b: int, faults=()) -> MultiplyOutcome:
    """Sign-magnitude wrapper used by the MAC model: int8 operands."""
    if not (-128 <= a <= 127 and -128 <= b <= 127):
        raise ValueError(f"int8 operand out of range: ({a}, {b})")
    out = multiply(kind, saturate_magnitude(a), saturate_magnitude(b), faults)
    sign = (1 if a > 0 else -1 if a < 0 else 0) * (1 if b > 0 else -1 if b < 0 else 0)
    return MultiplyOutcome(product=sign * out.product, detected=out.detected,
                           detail=out.detail, inapplicable=out.inapplicable)
