import numpy as np
import pytest

from adamul.faults import FaultEvent, FaultSite
from adamul.multipliers import MultiplierKind, Signal, multiply_signed
from adamul.systolic import ArrayConfig, Dataflow, gemm, gemm_with_report, schedule

CFG = ArrayConfig(rows=2, cols=2)


def _event(signal, bit, cycle, row=0, col=0):
    return FaultEvent(site=FaultSite(row=row, col=col, signal=signal, bit_index=bit),
                      cycle=cycle)


def test_array_config_validation():
    with pytest.raises(ValueError):
        ArrayConfig(rows=0, cols=4)
    with pytest.raises(ValueError):
        ArrayConfig(rows=1, cols=1, accumulator_width=16)
    assert CFG.dataflow is Dataflow.OUTPUT_STATIONARY


def test_identity_gemm():
    eye = np.eye(2, dtype=np.int8)
    M = np.array([[3, -4], [5, 6]], dtype=np.int8)
    assert (gemm(eye, M, CFG, MultiplierKind.EXACT) == M).all()


def test_random_exact_gemm_matches_matmul_oracle():
    rng = np.random.default_rng(42)
    for _ in range(25):
        m, k, n = rng.integers(1, 17, size=3)
        A = rng.integers(-128, 128, size=(m, k)).astype(np.int8)
        B = rng.integers(-128, 128, size=(k, n)).astype(np.int8)
        got = gemm(A, B, CFG, MultiplierKind.EXACT)
        # sign-magnitude saturation: |-128| multiplies as 127
        As = np.maximum(A.astype(np.int64), -127)
        Bs = np.maximum(B.astype(np.int64), -127)
        assert (got == As @ Bs).all()


def test_adam_gemm_matches_scalar_composition():
    rng = np.random.default_rng(3)
    A = rng.integers(-128, 128, size=(5, 9)).astype(np.int8)
    B = rng.integers(-128, 128, size=(9, 4)).astype(np.int8)
    got = gemm(A, B, CFG, MultiplierKind.ADAM)
    for m in range(5):
        for n in range(4):
            acc = sum(multiply_signed(MultiplierKind.ADAM, int(A[m, k]), int(B[k, n])).product
                      for k in range(9))
            assert got[m, n] == acc


def test_schedule_closed_form():
    sched = schedule((1, 4, 1), ArrayConfig(1, 1))
    assert sched.total_cycles == 4
    sched = schedule((5, 3, 7), ArrayConfig(2, 2))
    assert sched.total_cycles == 3 * 4 * 3   # ceil(5/2) * ceil(7/2) * K
    assert sched.tiles_m == 3 and sched.tiles_n == 4


def test_schedule_fixture_2x2():
    # frozen decode table for a 2x2 array on a 2x2x2 GEMM
    sched = schedule((2, 2, 2), CFG)
    assert sched.total_cycles == 2
    assert [sched.decode(c) for c in range(2)] == [(0, 0, 0), (0, 0, 1)]
    sched = schedule((3, 2, 3), CFG)
    assert sched.total_cycles == 8
    assert [sched.decode(c) for c in range(8)] == [
        (0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1),
        (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1),
    ]
    assert sched.cycle_of(1, 1, 0) == 6
    assert sched.output_of(1, 0, 0, 0) == (2, 0)
    assert sched.output_of(1, 0, 1, 0) is None   # padded fringe row


def test_dimension_mismatch_rejected():
    A = np.zeros((2, 3), dtype=np.int8)
    B = np.zeros((4, 2), dtype=np.int8)
    with pytest.raises(ValueError):
        gemm(A, B, CFG, MultiplierKind.EXACT)
    with pytest.raises(ValueError):
        gemm(np.zeros(3, dtype=np.int8), B, CFG, MultiplierKind.EXACT)


def test_value_range_checked():
    A = np.array([[300, 0]], dtype=np.int16)
    B = np.zeros((2, 1), dtype=np.int8)
    with pytest.raises(ValueError):
        gemm(A, B, CFG, MultiplierKind.EXACT)


def test_event_to_nonexistent_unit_rejected():
    A = np.ones((2, 2), dtype=np.int8)
    with pytest.raises(ValueError):
        gemm(A, A, CFG, MultiplierKind.EXACT, [_event(Signal.PRODUCT, 0, 0, row=5)])


def test_single_fault_perturbs_one_element():
    rng = np.random.default_rng(11)
    A = rng.integers(-100, 100, size=(6, 8)).astype(np.int8)
    B = rng.integers(-100, 100, size=(8, 6)).astype(np.int8)
    golden = gemm(A, B, CFG, MultiplierKind.EXACT)
    sched = schedule((6, 8, 6), CFG)
    ev = _event(Signal.ACCUMULATOR, 31, cycle=sched.cycle_of(1, 1, 3), row=1, col=0)
    faulty = gemm(A, B, CFG, MultiplierKind.EXACT, [ev])
    diff = faulty != golden
    assert diff.sum() == 1
    m, n = np.argwhere(diff)[0]
    assert (m, n) == (1 * 2 + 1, 1 * 2 + 0)


def test_accumulator_flip_value():
    # 1x1 array, K=3, all-ones operands: prefix after cycle 1 is 2
    cfg = ArrayConfig(1, 1)
    A = np.ones((1, 3), dtype=np.int8)
    B = np.ones((3, 1), dtype=np.int8)
    ev = _event(Signal.ACCUMULATOR, 4, cycle=1)
    out = gemm(A, B, cfg, MultiplierKind.EXACT, [ev])
    # stored 2 -> flip bit 4 -> 18, then one more accumulation: 19
    assert out[0, 0] == 19


def test_accumulator_sign_bit_flip_goes_negative():
    cfg = ArrayConfig(1, 1)
    A = np.full((1, 2), 10, dtype=np.int8)
    B = np.full((2, 1), 10, dtype=np.int8)
    ev = _event(Signal.ACCUMULATOR, 31, cycle=0)
    out = gemm(A, B, cfg, MultiplierKind.EXACT, [ev])
    assert out[0, 0] == 100 + 100 - 2 ** 31


def test_multiplier_fault_emits_detection_report():
    cfg = ArrayConfig(1, 1)
    A = np.array([[127]], dtype=np.int8)
    B = np.array([[127]], dtype=np.int8)
    ev = _event(Signal.SUM_DUPLICATE, 6, cycle=0)
    out, report = gemm_with_report(A, B, cfg, MultiplierKind.ADAM, [ev])
    assert report.detected
    assert report.applied == [ev]
    golden = gemm(A, B, cfg, MultiplierKind.ADAM)
    # mitigation zeroed a fraction bit: the product can only shrink
    assert out[0, 0] <= golden[0, 0]


def test_fault_on_padded_position_has_no_effect():
    A = np.ones((3, 2), dtype=np.int8)
    B = np.ones((2, 3), dtype=np.int8)
    golden = gemm(A, B, CFG, MultiplierKind.EXACT)
    # tile (1, 0) covers output rows 2..3, but row 3 does not exist
    sched = schedule((3, 2, 3), CFG)
    ev = _event(Signal.PRODUCT, 5, cycle=sched.cycle_of(1, 0, 0), row=1, col=0)
    faulty, report = gemm_with_report(A, B, CFG, MultiplierKind.EXACT, [ev])
    assert (faulty == golden).all()
    assert report.no_effect == [ev]


def test_inapplicable_signal_reported():
    A = np.ones((1, 1), dtype=np.int8)
    ev = _event(Signal.K_OUT, 0, cycle=0)
    out, report = gemm_with_report(A, A, ArrayConfig(1, 1), MultiplierKind.EXACT, [ev])
    assert report.inapplicable == [ev]
    assert out[0, 0] == 1
