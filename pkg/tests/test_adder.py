import pytest
from hypothesis import given
from hypothesis import strategies as st

from adamul.adder import (
    AdderTap,
    TapUnit,
    cla_add,
    k_add_tmr,
    majority3,
    protected_add,
    select_case,
)

frac = st.integers(min_value=0, max_value=127)
kval = st.integers(min_value=0, max_value=7)


# --- protection case table ---------------------------------------------------

@pytest.mark.parametrize("k1,k2,dropped,protected", [
    (7, 2, 2, 2),     # two LSBs discarded, two MSBs recomputed
    (2, 7, 2, 2),
    (6, 0, 1, 2),
    (5, 5, 0, 2),
    (4, 4, 0, 3),
    (3, 1, 0, 3),
    (2, 2, 0, 2),
    (1, 0, 0, 1),
])
def test_select_case_table(k1, k2, dropped, protected):
    case = select_case(k1, k2)
    assert case.max_k == max(k1, k2)
    assert case.dropped_lsbs == dropped
    assert case.protected_msbs == protected


def test_select_case_zero_is_fully_covered():
    # both operands are 1: fractions are identically zero, so zero
    # duplicated slices already cover every bit that can toggle
    case = select_case(0, 0)
    assert case.max_k == 0
    assert case.dropped_lsbs == 0
    assert case.protected_bits == ()


def test_protected_bits_are_top_slices():
    assert select_case(7, 0).protected_bits == (6, 5)
    assert select_case(4, 0).protected_bits == (6, 5, 4)
    assert select_case(3, 0).protected_bits == (6, 5, 4)
    assert select_case(1, 0).protected_bits == (6,)


# --- carry lookahead adder ---------------------------------------------------

def test_cla_add_examples():
    assert cla_add(0b1000000, 0b0100000)[:2] == (0b1100000, False)
    assert cla_add(0b1111100, 0b1111100)[:2] == (0b1111000, True)
    assert cla_add(0, 0)[:2] == (0, False)


@given(frac, frac)
def test_cla_add_is_addition(fa, fb):
    total, carry, slices = cla_add(fa, fb)
    assert total + 128 * int(carry) == fa + fb
    assert len(slices) == 7
    rebuilt = sum(s.sum_bit << i for i, s in enumerate(slices))
    assert rebuilt == total


def test_cla_slice_signals():
    _, _, slices = cla_add(0b0000001, 0b0000001)
    assert slices[0].propagate == 0 and slices[0].generate == 1
    assert slices[1].carry_in == 1 and slices[1].sum_bit == 1


# --- protected addition ------------------------------------------------------

def test_protected_add_carry_out_case():
    # 0.75 + 0.25 = 1.0: zero sum, carry out, nothing flagged
    case = select_case(5, 5)
    res = protected_add(0b1100000, 0b0100000, case)
    assert res.sum == 0 and res.carry is True
    assert res.detect_flags == frozenset() and not res.mitigated


def test_protected_add_flags_duplicate_flip():
    case = select_case(5, 5)
    fault = [AdderTap(TapUnit.DUPLICATE_SLICE, 6)]
    res = protected_add(0b1100000, 0b0100000, case, faults=fault)
    assert res.detect_flags == frozenset({6})
    assert res.mitigated
    assert (res.sum >> 6) & 1 == 0        # bit already 0, stays 0
    assert res.carry is True              # carry path untouched


def test_protected_add_primary_flip_on_zero_inputs():
    case = select_case(3, 3)
    res = protected_add(0, 0, case, faults=[AdderTap(TapUnit.PRIMARY_SLICE, 5)])
    assert res.detect_flags == frozenset({5})
    assert (res.sum >> 5) & 1 == 0        # AND(flipped 1, duplicate 0) = 0


def test_protected_add_inapplicable_duplicate():
    # max_k = 7 protects bits 6 and 5 only; a duplicate tap at bit 4
    # addresses a slice that is idle under this case
    case = select_case(7, 7)
    tap = AdderTap(TapUnit.DUPLICATE_SLICE, 4)
    res = protected_add(0b1010100, 0b0010100, case, faults=[tap])
    assert res.inapplicable == (tap,)
    assert res.detect_flags == frozenset()
    ref = cla_add(0b1010100, 0b0010100)
    assert (res.sum, res.carry) == (ref[0], ref[1])


def test_protected_add_transparency_exhaustive():
    # fault-free protected addition must match the plain adder for
    # every fraction pair under every protection case
    cases = [select_case(k, 0) for k in (7, 6, 5, 4, 3, 2, 1, 0)]
    for fa in range(128):
        for fb in range(128):
            expect_sum, expect_carry, _ = cla_add(fa, fb)
            for case in cases:
                res = protected_add(fa, fb, case)
                assert res.sum == expect_sum
                assert res.carry == expect_carry
                assert not res.detect_flags


def test_protected_add_shared_carry_fault_is_undetected():
    case = select_case(5, 5)
    res = protected_add(0b1100000, 0b0100000, case, carry_flips=[6])
    assert res.detect_flags == frozenset()   # both copies see the same carry
    ref = cla_add(0b1100000, 0b0100000)[0]
    assert res.sum != ref                    # but the sum is corrupted


def test_protected_add_rejects_k_tap():
    with pytest.raises(ValueError):
        protected_add(0, 0, select_case(5, 5), faults=[AdderTap(TapUnit.K_REPLICA_0, 1)])


def test_adder_tap_width_check():
    with pytest.raises(ValueError):
        AdderTap(TapUnit.PRIMARY_SLICE, 7)
    with pytest.raises(ValueError):
        AdderTap(TapUnit.K_REPLICA_1, 4)


# --- voted characteristic adder ----------------------------------------------

def test_k_add_examples():
    assert k_add_tmr(7, 7) == 14
    assert k_add_tmr(0, 0) == 0
    assert k_add_tmr(3, 4, faults=[AdderTap(TapUnit.K_REPLICA_1, 2)]) == 7


def test_k_add_tmr_masks_every_single_fault():
    # exhaustive: 64 operand pairs x 3 replicas x 4 output bits
    for k1 in range(8):
        for k2 in range(8):
            for unit in (TapUnit.K_REPLICA_0, TapUnit.K_REPLICA_1, TapUnit.K_REPLICA_2):
                for bit in range(4):
                    assert k_add_tmr(k1, k2, faults=[AdderTap(unit, bit)]) == k1 + k2


def test_k_add_double_fault_same_bit_escapes():
    # two replicas corrupted at the same bit defeat the voter: the
    # single-fault model is what the masking guarantee relies on
    faults = [AdderTap(TapUnit.K_REPLICA_0, 3), AdderTap(TapUnit.K_REPLICA_1, 3)]
    assert k_add_tmr(1, 1, faults=faults) != 2


# --- majority voter ----------------------------------------------------------

@given(st.integers(min_value=0, max_value=15), st.integers(min_value=0, max_value=15))
def test_majority_two_agree(x, y):
    assert majority3(x, x, y) == x
    assert majority3(x, y, x) == x
    assert majority3(y, x, x) == x


@given(st.integers(min_value=0, max_value=2 ** 16 - 1))
def test_majority_identity(x):
    assert majority3(x, x, x) == x


def test_majority_bitwise_examples():
    assert majority3(0b1010, 0b1010, 0b0101) == 0b1010
    assert majority3(0b1100, 0b1010, 0b1001) == 0b1000
