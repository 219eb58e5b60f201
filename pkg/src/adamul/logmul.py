"""Logarithmic multiplication primitives for unsigned 8-bit operands.

A product is estimated by detecting the leading one of each operand
(the characteristic k), aligning the remaining bits into a 7-bit
MSB-first fraction, adding characteristics and fractions separately,
and reconstructing via a shift (the antilogarithm).  The fraction may
optionally be truncated to its 5 most significant bits, which only
affects operands with k in {6, 7}.

Scalar functions operate on plain ints and are the bit-accurate
reference; the ``*_array`` variants are vectorized numpy equivalents
for exhaustive sweeps and GEMM-scale workloads.  Tests cross-check the
two paths over the full 256x256 input domain.
"""

from __future__ import annotations

import numpy as np

N_BITS = 8                # operand width
FRAC_BITS = 7             # fraction field width (n - 1)
TRUNC_KEEP = 5            # fraction bits kept after truncation
FRAC_MASK = (1 << FRAC_BITS) - 1
TRUNC_MASK = FRAC_MASK & ~((1 << (FRAC_BITS - TRUNC_KEEP)) - 1)   # 0b1111100
OPERAND_MAX = (1 << N_BITS) - 1
PRODUCT_MAX = OPERAND_MAX * OPERAND_MAX


def lod(a: int) -> tuple[bool, int]:
    """Leading-one detection.

    Returns ``(is_zero, k)`` where k is the index of the most
    significant set bit, i.e. 2**k <= a < 2**(k+1).  For a == 0 the
    zero flag is set and k is 0.
    """
    if not 0 <= a <= OPERAND_MAX:
        raise ValueError(f"operand out of range 0..{OPERAND_MAX}: {a}")
    if a == 0:
        return True, 0
    return False, a.bit_length() - 1


def normalize(a: int, k: int) -> int:
    """Align the leading one of ``a`` with the MSB and drop it.

    Returns the 7-bit fraction field (bit 6 carries weight 1/2).
    Undefined for a == 0; callers must gate on the lod zero flag.
    The round trip ``(128 + frac) >> (7 - k) == a`` is exact.
    """
    return (a << (FRAC_BITS - k)) & FRAC_MASK


def truncate(frac7: int) -> int:
    """Keep the 5 MSBs of the fraction field (zero the low 2 bits)."""
    return frac7 & TRUNC_MASK


def antilog(ksum: int, frac_sum: int, carry: bool) -> int:
    """Reconstruct the product from characteristic and fraction sums.

    ``frac_sum`` holds the low 7 bits of the fraction adder output and
    ``carry`` its carry-out.  The leading one lands at position
    ksum + carry; fraction bits shifted below the product LSB are
    dropped (floor), matching a shift-based hardware antilog stage.
    """
    p = ksum + (1 if carry else 0)
    return (((1 << FRAC_BITS) | frac_sum) << p) >> FRAC_BITS


def exact_mul(a: int, b: int) -> int:
    """Exact 8x8 -> 16 bit product (behavioral reference)."""
    return a * b


def mitchell_mul(a: int, b: int, trunc: bool = True) -> int:
    """Approximate product via log-add-antilog.

    With ``trunc`` set this is the fault-free output of the protected
    multiplier pipeline.  Never overshoots the exact product, and is
    exact whenever both fractions are zero (powers of two).
    """
    za, k1 = lod(a)
    zb, k2 = lod(b)
    if za or zb:
        return 0
    f1 = normalize(a, k1)
    f2 = normalize(b, k2)
    if trunc:
        f1 = truncate(f1)
        f2 = truncate(f2)
    s = f1 + f2
    return antilog(k1 + k2, s & FRAC_MASK, s > FRAC_MASK)


# ---------------------------------------------------------------------------
# vectorized path
# ---------------------------------------------------------------------------

# k = floor(log2(v)) for v in 1..255; index 0 unused (guarded by zero mask)
_K_TABLE = np.array([0] + [v.bit_length() - 1 for v in range(1, 256)], dtype=np.int32)


def lod_array(a):
    """Vectorized lod: returns (is_zero, k) arrays."""
    a = np.asarray(a, dtype=np.int32)
    return a == 0, _K_TABLE[a]


def mitchell_mul_array(a, b, trunc: bool = True):
    """Vectorized ``mitchell_mul`` over int arrays in 0..255."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    za, k1 = lod_array(a)
    zb, k2 = lod_array(b)
    k1 = k1.astype(np.int64)
    k2 = k2.astype(np.int64)
    f1 = (a << (FRAC_BITS - k1)) & FRAC_MASK
    f2 = (b << (FRAC_BITS - k2)) & FRAC_MASK
    if trunc:
        f1 &= TRUNC_MASK
        f2 &= TRUNC_MASK
    s = f1 + f2
    p = k1 + k2 + (s >> FRAC_BITS)
    out = (((1 << FRAC_BITS) | (s & FRAC_MASK)) << p) >> FRAC_BITS
    return np.where(za | zb, 0, out)
