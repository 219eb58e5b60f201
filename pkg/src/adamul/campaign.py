"""Injection-campaign execution over the three supported scopes.

Each injection run applies exactly one fault event to an otherwise
golden workload and records what became of it.  Runs are independent
and pure, so they may execute in a process pool; results are merged in
run-index order, making output identical for any worker count.

Workload randomness (operand draws for multiply/GEMM scopes, image
choice for the DNN scope) comes from the campaign's PCG64 stream
jumped 2^128 steps ahead of the event-drawing stream, so event and
workload draws are statistically independent yet both reproduce from
the one campaign seed.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nn
from .faults import Campaign, CampaignScope, draw_events, enumerate_sites
from .multipliers import MultiplierKind, multiply, product_table
from .systolic import ArrayConfig, gemm_with_report, schedule


@dataclass(frozen=True)
class InjectionRecord:
    """Outcome of one injection run."""

    run_id: int
    site_label: str
    cycle: int
    detected: bool
    mismatch: bool
    sdc: Optional[nn.SdcRecord] = None
    golden_top1: Optional[int] = None
    faulty_top1: Optional[int] = None

    def sdc_class(self) -> str:
        if self.sdc is None:
            return "mismatch" if self.mismatch else "none"
        names = [name for name in ("sdc1", "sdc5", "sdc10", "sdc20")
                 if getattr(self.sdc, name)]
        return "|".join(names) if names else "none"

    def to_csv_row(self) -> dict:
        return {
            "run_id": self.run_id,
            "site": self.site_label,
            "cycle": self.cycle,
            "detected": int(self.detected),
            "sdc_class": self.sdc_class(),
            "golden_top1": "" if self.golden_top1 is None else self.golden_top1,
            "faulty_top1": "" if self.faulty_top1 is None else self.faulty_top1,
        }


@dataclass
class CampaignResult:
    campaign: Campaign
    records: list[InjectionRecord]
    population: int

    def summary(self) -> dict:
        n = len(self.records)
        out = {
            "kind": self.campaign.kind.value,
            "scope": self.campaign.scope.value,
            "seed": self.campaign.seed,
            "n_injections": n,
            "site_cycle_population": self.population,
            "required_sample_size": self.campaign.required_injections(self.population),
            "detection_coverage": sum(r.detected for r in self.records) / n,
            "mismatch_rate": sum(r.mismatch for r in self.records) / n,
        }
        if self.campaign.scope is CampaignScope.DNN_INFERENCE:
            for name in ("sdc1", "sdc5", "sdc10", "sdc20"):
                count = sum(1 for r in self.records if r.sdc and getattr(r.sdc, name))
                out[f"vulnerability_{name}"] = count / n
        return out


def _workload_rng(campaign: Campaign) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(campaign.seed).jumped(1))


# ---------------------------------------------------------------------------
# single-multiply scope
# ---------------------------------------------------------------------------

def run_multiply_campaign(campaign: Campaign) -> CampaignResult:
    """Each run: one 8x8 multiply with one fault versus its golden value."""
    cfg = ArrayConfig(rows=1, cols=1)
    sites = enumerate_sites(campaign.kind, cfg)
    sites = [s for s in sites if s.signal.value != "accumulator"]   # no MAC here
    cycles = range(1)
    campaign.check_confidence(len(sites) * len(cycles))
    events = draw_events(campaign, sites, cycles)
    rng = _workload_rng(campaign)
    operands = rng.integers(0, 256, size=(campaign.n_injections, 2))
    table = product_table(campaign.kind)

    records = []
    for run_id, event in enumerate(events):
        a, b = int(operands[run_id, 0]), int(operands[run_id, 1])
        outcome = multiply(campaign.kind, a, b, [event])
        golden = int(table[a, b])
        records.append(InjectionRecord(
            run_id=run_id, site_label=event.site.label, cycle=event.cycle,
            detected=outcome.detected, mismatch=outcome.product != golden,
        ))
    return CampaignResult(campaign, records, len(sites) * len(cycles))


# ---------------------------------------------------------------------------
# GEMM scope
# ---------------------------------------------------------------------------

def run_gemm_campaign(campaign: Campaign, dims: tuple[int, int, int] = (16, 16, 16),
                      cfg: Optional[ArrayConfig] = None) -> CampaignResult:
    """Each run: one int8 GEMM with one fault versus the golden result."""
    cfg = cfg or ArrayConfig()
    m, k, n = dims
    sites = enumerate_sites(campaign.kind, cfg)
    cycles = range(schedule(dims, cfg).total_cycles)
    campaign.check_confidence(len(sites) * len(cycles))
    events = draw_events(campaign, sites, cycles)
    rng = _workload_rng(campaign)
    A = rng.integers(-128, 128, size=(m, k)).astype(np.int8)
    B = rng.integers(-128, 128, size=(k, n)).astype(np.int8)
    golden = gemm_with_report(A, B, cfg, campaign.kind)[0]

    records = []
    for run_id, event in enumerate(events):
        faulty, report = gemm_with_report(A, B, cfg, campaign.kind, [event])
        records.append(InjectionRecord(
            run_id=run_id, site_label=event.site.label, cycle=event.cycle,
            detected=report.detected, mismatch=bool((faulty != golden).any()),
        ))
    return CampaignResult(campaign, records, len(sites) * len(cycles))


# ---------------------------------------------------------------------------
# DNN-inference scope
# ---------------------------------------------------------------------------

class _DnnRunner:
    """Per-campaign state: golden outputs plus each GEMM layer's golden
    input activations, so a faulty run resumes at the faulted layer."""

    def __init__(self, graph: nn.ModelGraph, images, kind: MultiplierKind,
                 cfg: ArrayConfig):
        self.graph = graph
        self.kind = kind
        self.cfg = cfg
        self.steps = nn.inference_schedule(graph, cfg)
        self.captures: dict[int, np.ndarray] = {}
        x = np.stack([nn.prepare_input(graph, img) for img in np.asarray(images)])
        golden = nn._forward(graph, x, kind, cfg, {}, capture=self.captures)
        self.golden_probs = golden.probabilities

    def step_for_cycle(self, cycle: int) -> nn.GemmStep:
        for step in self.steps:
            if step.offset <= cycle < step.offset + step.cycles:
                return step
        total = self.steps[-1].offset + self.steps[-1].cycles
        raise ValueError(f"event cycle {cycle} outside inference window 0..{total - 1}")

    def run_one(self, run_id: int, event, image_idx: int) -> InjectionRecord:
        step = self.step_for_cycle(event.cycle)
        from .faults import FaultEvent

        local = FaultEvent(site=event.site, cycle=event.cycle - step.offset)
        x0 = self.captures[step.layer_index][image_idx:image_idx + 1]
        result = nn._forward(self.graph, x0, self.kind, self.cfg,
                             {step.layer_index: [local]}, start_layer=step.layer_index)
        faulty = result.probabilities[0]
        golden = self.golden_probs[image_idx]
        sdc = nn.classify_sdc(golden, faulty, run_id=run_id, detected=result.detected)
        return InjectionRecord(
            run_id=run_id, site_label=event.site.label, cycle=event.cycle,
            detected=result.detected,
            mismatch=bool(np.any(golden != faulty)),
            sdc=sdc,
            golden_top1=int(np.argmax(golden)),
            faulty_top1=int(np.argmax(faulty)),
        )


_WORKER_STATE: dict = {}


def _dnn_worker_init(runner: _DnnRunner):
    _WORKER_STATE["runner"] = runner


def _dnn_run_one(args):
    run_id, event, image_idx = args
    return _WORKER_STATE["runner"].run_one(run_id, event, image_idx)


def run_dnn_campaign(graph: nn.ModelGraph, images, campaign: Campaign,
                     cfg: Optional[ArrayConfig] = None, eval_images: int = 256,
                     threads: int = 1) -> CampaignResult:
    """Each run: one single-image inference with one fault event.

    The faulted image of each run is drawn from the first
    ``eval_images`` of ``images``; golden probability vectors are
    computed once per distinct image.
    """
    cfg = cfg or ArrayConfig()
    images = np.asarray(images)[:eval_images]
    if images.shape[0] == 0:
        raise ValueError("empty evaluation image set")
    sites = enumerate_sites(campaign.kind, cfg)
    total_cycles = nn.total_inference_cycles(graph, cfg)
    population = len(sites) * total_cycles
    campaign.check_confidence(population)
    events = draw_events(campaign, sites, range(total_cycles))
    rng = _workload_rng(campaign)
    image_idx = rng.integers(0, images.shape[0], size=campaign.n_injections)

    runner = _DnnRunner(graph, images, campaign.kind, cfg)
    jobs = [(run_id, event, int(image_idx[run_id]))
            for run_id, event in enumerate(events)]

    if threads <= 1:
        records = [runner.run_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(
            max_workers=threads,
            initializer=_dnn_worker_init,
            initargs=(runner,),
        ) as pool:
            chunk = max(1, len(jobs) // (threads * 8))
            records = list(pool.map(_dnn_run_one, jobs, chunksize=chunk))
    return CampaignResult(campaign, records, population)
