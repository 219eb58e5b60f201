import numpy as np

from adamul.errors import HISTOGRAM_EDGES, error_report, mare_exhaustive
from adamul.multipliers import MultiplierKind


def brute_force_mare(kind, step=1):
    """Independent scalar-loop oracle over a strided operand grid."""
    from adamul.multipliers import multiply

    total = 0.0
    count = 0
    for a in range(1, 256, step):
        for b in range(1, 256, step):
            exact = a * b
            approx = multiply(kind, a, b).product
            total += abs(approx - exact) / exact
            count += 1
    return 100.0 * total / count


def test_exact_mare_is_zero():
    stats = mare_exhaustive(MultiplierKind.EXACT)
    assert stats.mare_percent == 0.0
    assert stats.max_relative_error_percent == 0.0
    assert stats.pair_count == 255 * 255


def test_adam_mare_in_reference_band():
    stats = mare_exhaustive(MultiplierKind.ADAM)
    assert 4.2 <= stats.mare_percent <= 5.2
    # signed mean error is negative: the pipeline never overshoots
    assert stats.mean_error < 0


def test_mare_matches_scalar_oracle_on_subgrid():
    # the vectorized sweep and a plain double loop agree on a 64x64 grid
    from adamul.multipliers import multiply, product_table

    table = product_table(MultiplierKind.ADAM)
    total = 0.0
    for a in range(1, 256, 4):
        for b in range(1, 256, 4):
            assert table[a, b] == multiply(MultiplierKind.ADAM, a, b).product
            total += abs(int(table[a, b]) - a * b) / (a * b)
    sub_mare = 100.0 * total / (64 * 64)
    assert abs(sub_mare - brute_force_mare(MultiplierKind.ADAM, step=4)) < 1e-12


def test_mitchell_trunc_stats_identical_to_adam():
    a = mare_exhaustive(MultiplierKind.ADAM)
    b = mare_exhaustive(MultiplierKind.MITCHELL_TRUNC)
    assert a.mare_percent == b.mare_percent
    assert a.max_relative_error_percent == b.max_relative_error_percent
    assert a.mean_error == b.mean_error


def test_truncation_only_costs_accuracy():
    plain = mare_exhaustive(MultiplierKind.MITCHELL)
    trunc = mare_exhaustive(MultiplierKind.ADAM)
    assert plain.mare_percent <= trunc.mare_percent


def test_truncation_loss_confined_to_big_operands():
    plain = mare_exhaustive(MultiplierKind.MITCHELL)
    trunc = mare_exhaustive(MultiplierKind.ADAM)
    for mk in range(6):
        assert trunc.per_case[mk].mare_percent == plain.per_case[mk].mare_percent
        assert trunc.per_case[mk].mean_error == plain.per_case[mk].mean_error
    for mk in (6, 7):
        assert trunc.per_case[mk].mare_percent > plain.per_case[mk].mare_percent


def test_per_case_counts_cover_domain():
    stats = mare_exhaustive(MultiplierKind.ADAM)
    assert sum(s.pair_count for s in stats.per_case.values()) == stats.pair_count
    # pairs with max_k = 7: at least one operand in 128..255
    assert stats.per_case[7].pair_count == 255 * 255 - 127 * 127


def test_per_case_mare_higher_for_truncated_cases():
    stats = mare_exhaustive(MultiplierKind.ADAM)
    low = max(stats.per_case[mk].mare_percent for mk in range(2, 6))
    assert stats.per_case[7].mare_percent > low
    assert stats.per_case[6].mare_percent > low


def test_include_zero_pairs_flag():
    excl = mare_exhaustive(MultiplierKind.ADAM)
    incl = mare_exhaustive(MultiplierKind.ADAM, include_zero_pairs=True)
    assert incl.pair_count == 65536
    # zero-error terms can only dilute the mean
    assert incl.mare_percent < excl.mare_percent
    assert incl.mare_percent * 65536 == excl.mare_percent * 65025


def test_histogram_totals():
    stats = mare_exhaustive(MultiplierKind.ADAM)
    assert len(stats.histogram) == len(HISTOGRAM_EDGES) - 1
    assert sum(stats.histogram) == stats.pair_count
    assert stats.max_relative_error_percent < HISTOGRAM_EDGES[-1]


def test_error_report_rows():
    rows = error_report([MultiplierKind.EXACT, MultiplierKind.ADAM])
    kinds = {r["kind"] for r in rows}
    assert kinds == {"exact", "adam", "mitchell"}   # ablation row always present
    all_rows = [r for r in rows if r["case"] == "all"]
    assert len(all_rows) == 3
    per_kind = [r for r in rows if r["kind"] == "adam"]
    assert len(per_kind) == 1 + 8
    for r in rows:
        assert set(r) == {"kind", "mare", "max_re", "mean_err", "case", "pair_count"}
