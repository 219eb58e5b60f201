"""Exhaustive arithmetic-error statistics for multiplier variants.

Accuracy is summarized as the mean absolute relative error (MARE) over
the full 256x256 operand domain.  Pairs whose exact product is zero
have no defined relative error and are excluded by default; with
``include_zero_pairs`` they are counted as zero-error terms instead
(both conventions are deliberately available, and the per-variant
acceptance band is wide enough to cover either).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logmul import lod
from .multipliers import MultiplierKind, product_table

# relative-error histogram bucket edges, in percent
HISTOGRAM_EDGES = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0, 100.0)


@dataclass(frozen=True)
class ErrorStats:
    """Error summary of one variant over (a slice of) the input domain."""

    mare_percent: float
    max_relative_error_percent: float
    mean_error: float
    pair_count: int
    histogram: tuple[int, ...] = ()
    per_case: dict[int, "ErrorStats"] = field(default_factory=dict)


_MAX_K_GRID = None


def _max_k_grid() -> np.ndarray:
    """max(k1, k2) for every non-zero operand pair; -1 where either is 0."""
    global _MAX_K_GRID
    if _MAX_K_GRID is None:
        ks = np.array([-1] + [lod(v)[1] for v in range(1, 256)], dtype=np.int32)
        grid = np.maximum(ks[:, None], ks[None, :])
        grid[0, :] = -1
        grid[:, 0] = -1
        _MAX_K_GRID = grid
    return _MAX_K_GRID


def _stats_from(abs_err, signed_err, exact, mask, with_hist=True) -> ErrorStats:
    count = int(mask.sum())
    if count == 0:
        return ErrorStats(0.0, 0.0, 0.0, 0, histogram=(0,) * (len(HISTOGRAM_EDGES) - 1))
    nonzero = mask & (exact != 0)
    rel = np.zeros(exact.shape)
    np.divide(abs_err, exact, out=rel, where=nonzero)
    rel_pct = 100.0 * rel
    hist = ()
    if with_hist:
        hist = tuple(int(c) for c in np.histogram(rel_pct[mask], bins=HISTOGRAM_EDGES)[0])
    return ErrorStats(
        mare_percent=float(rel_pct[mask].sum() / count),
        max_relative_error_percent=float(rel_pct[mask].max()),
        mean_error=float(signed_err[mask].mean()),
        pair_count=count,
        histogram=hist,
    )


def mare_exhaustive(kind: MultiplierKind, include_zero_pairs: bool = False) -> ErrorStats:
    """Sweep all 65,536 pairs and bucket them by protection case.

    ``per_case`` maps max(k1, k2) to the statistics of the pairs that
    select that case (zero-operand pairs belong to no case).
    """
    ops = np.arange(256, dtype=np.int64)
    exact = np.outer(ops, ops).astype(np.float64)
    approx = product_table(kind).astype(np.float64)
    signed_err = approx - exact
    abs_err = np.abs(signed_err)

    max_k = _max_k_grid()
    domain = np.ones_like(exact, dtype=bool) if include_zero_pairs else (max_k >= 0)
    stats = _stats_from(abs_err, signed_err, exact, domain)
    per_case = {}
    for mk in range(8):
        case_mask = max_k == mk
        per_case[mk] = _stats_from(abs_err, signed_err, exact, case_mask, with_hist=False)
    return ErrorStats(
        mare_percent=stats.mare_percent,
        max_relative_error_percent=stats.max_relative_error_percent,
        mean_error=stats.mean_error,
        pair_count=stats.pair_count,
        histogram=stats.histogram,
        per_case=per_case,
    )


def error_report(kinds, include_zero_pairs: bool = False) -> list[dict]:
    """Rows of error statistics, one per (kind, case) plus 'all' rows.

    The untruncated Mitchell row is always included as the truncation
    ablation.  Row schema: kind, mare, max_re, mean_err, case,
    pair_count.
    """
    kinds = list(kinds)
    if MultiplierKind.MITCHELL not in kinds:
        kinds.append(MultiplierKind.MITCHELL)
    rows = []
    for kind in kinds:
        stats = mare_exhaustive(kind, include_zero_pairs=include_zero_pairs)
        rows.append({
            "kind": kind.value,
            "mare": stats.mare_percent,
            "max_re": stats.max_relative_error_percent,
            "mean_err": stats.mean_error,
            "case": "all",
            "pair_count": stats.pair_count,
        })
        for mk, sub in sorted(stats.per_case.items()):
            rows.append({
                "kind": kind.value,
                "mare": sub.mare_percent,
                "max_re": sub.max_relative_error_percent,
                "mean_err": sub.mean_error,
                "case": f"max_k={mk}",
                "pair_count": sub.pair_count,
            })
    return rows
