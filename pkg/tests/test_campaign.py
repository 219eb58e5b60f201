import numpy as np
import pytest

from adamul import bundled
from adamul.campaign import (
    run_dnn_campaign,
    run_gemm_campaign,
    run_multiply_campaign,
)
from adamul.faults import Campaign, CampaignScope
from adamul.multipliers import MultiplierKind
from adamul.systolic import ArrayConfig


def _campaign(kind, scope, n=300, seed=5):
    return Campaign(seed=seed, n_injections=n, scope=scope, kind=kind)


def test_multiply_campaign_records():
    res = run_multiply_campaign(_campaign(MultiplierKind.ADAM, CampaignScope.SINGLE_MULTIPLY))
    assert len(res.records) == 300
    assert [r.run_id for r in res.records] == list(range(300))
    assert all(r.cycle == 0 for r in res.records)
    # adaptive multiplier detects some injected faults, and every
    # detected one is also recorded
    assert any(r.detected for r in res.records)
    rec = res.records[0].to_csv_row()
    assert set(rec) == {"run_id", "site", "cycle", "detected", "sdc_class",
                        "golden_top1", "faulty_top1"}
    assert rec["sdc_class"] in ("mismatch", "none")
    assert rec["golden_top1"] == ""


def test_multiply_campaign_exact_never_detects():
    res = run_multiply_campaign(_campaign(MultiplierKind.EXACT, CampaignScope.SINGLE_MULTIPLY))
    assert not any(r.detected for r in res.records)
    assert any(r.mismatch for r in res.records)


def test_gemm_campaign_tmr_masks_everything():
    res = run_gemm_campaign(_campaign(MultiplierKind.TMR_EXACT, CampaignScope.GEMM),
                            dims=(8, 8, 8), cfg=ArrayConfig(2, 2))
    assert all(not r.mismatch for r in res.records)
    assert res.summary()["mismatch_rate"] == 0.0


def test_gemm_campaign_reproducible():
    a = run_gemm_campaign(_campaign(MultiplierKind.ADAM, CampaignScope.GEMM),
                          dims=(6, 6, 6), cfg=ArrayConfig(2, 2))
    b = run_gemm_campaign(_campaign(MultiplierKind.ADAM, CampaignScope.GEMM),
                          dims=(6, 6, 6), cfg=ArrayConfig(2, 2))
    assert [r.to_csv_row() for r in a.records] == [r.to_csv_row() for r in b.records]


def test_confidence_enforcement_applies():
    camp = Campaign(seed=1, n_injections=10, scope=CampaignScope.GEMM,
                    kind=MultiplierKind.EXACT, enforce_confidence=True)
    with pytest.raises(ValueError, match="sample size"):
        run_gemm_campaign(camp, dims=(16, 16, 16), cfg=ArrayConfig(4, 4))


@pytest.fixture(scope="module")
def dnn_setup():
    graph = bundled.load_bundled_model()
    images, _ = bundled.load_bundled_test_set()
    return graph, images


def test_dnn_campaign_smoke(dnn_setup):
    graph, images = dnn_setup
    camp = _campaign(MultiplierKind.ADAM, CampaignScope.DNN_INFERENCE, n=150)
    res = run_dnn_campaign(graph, images, camp, cfg=ArrayConfig(4, 4), eval_images=32)
    assert len(res.records) == 150
    summary = res.summary()
    for key in ("vulnerability_sdc1", "vulnerability_sdc5",
                "vulnerability_sdc10", "vulnerability_sdc20",
                "detection_coverage", "required_sample_size"):
        assert key in summary
    rec = next(r for r in res.records)
    assert rec.golden_top1 is not None and rec.faulty_top1 is not None


def test_dnn_campaign_deterministic_and_pure(dnn_setup):
    graph, images = dnn_setup
    camp = _campaign(MultiplierKind.EXACT, CampaignScope.DNN_INFERENCE, n=100)
    rows = None
    for _ in range(2):
        res = run_dnn_campaign(graph, images, camp, cfg=ArrayConfig(4, 4), eval_images=16)
        got = [r.to_csv_row() for r in res.records]
        assert rows is None or rows == got
        rows = got


def test_dnn_campaign_tmr_is_invulnerable(dnn_setup):
    graph, images = dnn_setup
    camp = _campaign(MultiplierKind.TMR_EXACT, CampaignScope.DNN_INFERENCE, n=200)
    res = run_dnn_campaign(graph, images, camp, cfg=ArrayConfig(4, 4), eval_images=16)
    s = res.summary()
    assert s["mismatch_rate"] == 0.0
    assert s["vulnerability_sdc1"] == 0.0
    assert s["vulnerability_sdc5"] == 0.0


def test_dnn_campaign_empty_images_rejected(dnn_setup):
    graph, images = dnn_setup
    camp = _campaign(MultiplierKind.EXACT, CampaignScope.DNN_INFERENCE, n=10)
    with pytest.raises(ValueError, match="empty"):
        run_dnn_campaign(graph, images, camp, eval_images=0)
