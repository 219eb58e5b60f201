import numpy as np
import pytest

from adamul.faults import FaultSite
from adamul.logmul import mitchell_mul
from adamul.multipliers import (
    MultiplierKind,
    Signal,
    multiply,
    multiply_signed,
    product_table,
    signed_product_table,
)

ALL_KINDS = list(MultiplierKind)


def site(signal, bit, row=0, col=0):
    return FaultSite(row=row, col=col, signal=signal, bit_index=bit)


def test_worked_pipeline_example():
    out = multiply(MultiplierKind.ADAM, 3, 5)
    assert out.product == 14
    assert not out.detected


def test_exact_output_bit_flip():
    out = multiply(MultiplierKind.EXACT, 255, 255, [site(Signal.PRODUCT, 15)])
    assert out.product == 65025 ^ (1 << 15) == 32257


def test_tmr_masks_single_replica_fault():
    out = multiply(MultiplierKind.TMR_EXACT, 255, 255, [site(Signal.REPLICA_PRODUCT_2, 15)])
    assert out.product == 65025
    assert not out.detected


def test_tmr_two_replica_fault_escapes():
    faults = [site(Signal.REPLICA_PRODUCT_0, 3), site(Signal.REPLICA_PRODUCT_1, 3)]
    assert multiply(MultiplierKind.TMR_EXACT, 9, 9, faults).product == 81 ^ 8


@pytest.mark.parametrize("kind,expect", [
    (MultiplierKind.EXACT, 65025),
    (MultiplierKind.TMR_EXACT, 65025),
    (MultiplierKind.MITCHELL, 65024),
    (MultiplierKind.MITCHELL_TRUNC, 63488),
    (MultiplierKind.ADAM, 63488),
])
def test_fault_free_255_squared(kind, expect):
    # mitchell values recomputed by the scalar pipeline oracle
    if kind in (MultiplierKind.MITCHELL, MultiplierKind.MITCHELL_TRUNC, MultiplierKind.ADAM):
        trunc = kind is not MultiplierKind.MITCHELL
        assert mitchell_mul(255, 255, trunc=trunc) == expect
    assert multiply(kind, 255, 255).product == expect


def test_adam_equals_mitchell_trunc_sampled():
    for a in range(0, 256, 7):
        for b in range(0, 256, 11):
            assert multiply(MultiplierKind.ADAM, a, b).product == \
                multiply(MultiplierKind.MITCHELL_TRUNC, a, b).product


def test_adam_detects_duplicate_slice_fault():
    # operands with k=7: case protects bits 6 and 5
    out = multiply(MultiplierKind.ADAM, 255, 255, [site(Signal.SUM_DUPLICATE, 6)])
    assert out.detected
    assert out.detail is not None and 6 in out.detail.detect_flags
    # mitigation zeroes the flagged bit of the fraction sum
    assert (out.detail.sum >> 6) & 1 == 0


def test_adam_duplicate_fault_on_idle_slice_is_inapplicable():
    # k=7 case only duplicates bits 6 and 5; bit 4 slice is idle
    fault = site(Signal.SUM_DUPLICATE, 4)
    out = multiply(MultiplierKind.ADAM, 255, 255, [fault])
    assert out.inapplicable == (fault,)
    assert out.product == 63488
    assert not out.detected


def test_adam_masks_k_replica_fault():
    golden = multiply(MultiplierKind.ADAM, 200, 100).product
    for sig in (Signal.K_REPLICA_0, Signal.K_REPLICA_1, Signal.K_REPLICA_2):
        for bit in range(4):
            out = multiply(MultiplierKind.ADAM, 200, 100, [site(sig, bit)])
            assert out.product == golden
            assert not out.detected


def test_mitchell_k_out_fault_is_catastrophic():
    golden = multiply(MultiplierKind.MITCHELL_TRUNC, 16, 16).product
    assert golden == 256
    out = multiply(MultiplierKind.MITCHELL_TRUNC, 16, 16, [site(Signal.K_OUT, 3)])
    assert out.product == 256 >> 8     # ksum 8 -> 0
    assert not out.detected


def test_shared_frac_fault_hits_both_copies_undetected():
    out = multiply(MultiplierKind.ADAM, 255, 255, [site(Signal.FRAC_A, 6)])
    assert not out.detected
    assert out.product != 63488


def test_truncated_wire_fault_is_masked():
    # bits 0..1 of the shifted operand feed nothing after truncation
    for bit in (0, 1):
        out = multiply(MultiplierKind.ADAM, 255, 255, [site(Signal.FRAC_A, bit)])
        assert out.product == 63488
        assert not out.detected
    # the untruncated pipeline does consume them
    out = multiply(MultiplierKind.MITCHELL, 255, 255, [site(Signal.FRAC_A, 0)])
    assert out.product != 65024


def test_zero_operand_forces_zero_product():
    out = multiply(MultiplierKind.ADAM, 0, 200, [site(Signal.SUM_PRIMARY, 3)])
    assert out.product == 0
    # only a strike on the output lines survives the zero gate
    out = multiply(MultiplierKind.ADAM, 0, 200, [site(Signal.PRODUCT, 3)])
    assert out.product == 8


def test_inapplicable_signals_recorded():
    fault = site(Signal.CARRY, 3)
    out = multiply(MultiplierKind.EXACT, 10, 10, [fault])
    assert out.product == 100
    assert out.inapplicable == (fault,)


def test_product_table_matches_scalar_exhaustive():
    for kind in ALL_KINDS:
        table = product_table(kind)
        assert table.shape == (256, 256)
        for a in range(256):
            expected_row = [multiply(kind, a, b).product for b in range(0, 256, 31)]
            assert list(table[a, ::31]) == expected_row
    # dense cross-check on one variant per family
    for kind in (MultiplierKind.ADAM, MultiplierKind.EXACT):
        table = product_table(kind)
        for a in range(0, 256, 3):
            for b in range(0, 256, 5):
                assert table[a, b] == multiply(kind, a, b).product


def test_signed_table_sign_magnitude():
    table = signed_product_table(MultiplierKind.EXACT)
    assert table[10 + 128, 10 + 128] == 100
    assert table[-10 + 128, 10 + 128] == -100
    assert table[-10 + 128, -10 + 128] == 100
    # magnitude 128 saturates to 127
    assert table[-128 + 128, 2 + 128] == -254
    assert table[0 + 128, -128 + 128] == 0


def test_multiply_signed_matches_table():
    table = signed_product_table(MultiplierKind.ADAM)
    rng = np.random.default_rng(7)
    for _ in range(500):
        a = int(rng.integers(-128, 128))
        b = int(rng.integers(-128, 128))
        assert multiply_signed(MultiplierKind.ADAM, a, b).product == table[a + 128, b + 128]


def test_kind_parsing():
    assert MultiplierKind.parse("adam") is MultiplierKind.ADAM
    assert MultiplierKind.parse("TMR") is MultiplierKind.TMR_EXACT
    assert MultiplierKind.parse("mitchell-trunc") is MultiplierKind.MITCHELL_TRUNC
    with pytest.raises(ValueError):
        MultiplierKind.parse("drum3")
