"""Command-line entry point.

Subcommands: mare, tradeoff, inject, sample-size, gemm, dnn-eval.
Reports land in --out (default ./adamul-out) as CSV records, JSON
summaries and gnuplot-style .dat scatter files, each embedding the
full run configuration and toolkit version.  On failure a
machine-readable JSON error is printed to stderr and the exit code is
nonzero (2 for usage/configuration problems, 1 for anything else).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, bundled, errors, nn
from .campaign import run_dnn_campaign, run_gemm_campaign, run_multiply_campaign
from .constants import (
    ADAM_PDP_SCATTER_PJ,
    ADAM_ROW,
    AREA_REDUCTION_CLAIM,
    EXACT_ROW,
    HW_ROWS,
    PDP_DISCREPANCY_NOTE,
    PDP_REDUCTION_CLAIM,
    SCATTER_REFERENCE,
    TMR_PDP_PJ,
    area_reduction_percent,
    pdp_reduction_percent,
)
from .faults import Campaign, CampaignScope, sample_size
from .multipliers import MultiplierKind
from .reports import (
    RunConfig,
    write_records_csv,
    write_scatter_dat,
    write_summary_json,
    write_table_csv,
)
from .systolic import ArrayConfig, gemm_with_report, schedule


class UsageError(ValueError):
    """Bad command-line arguments or configuration file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_kinds(text: str) -> list[MultiplierKind]:
    try:
        return [MultiplierKind.parse(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(str(e)) from e


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# mare
# ---------------------------------------------------------------------------

def cmd_mare(args) -> int:
    kinds = _parse_kinds(args.kinds)
    config = RunConfig(command="mare", params={
        "kinds": [k.value for k in kinds],
        "include_zero_pairs": args.include_zero_pairs,
    })
    rows = errors.error_report(kinds, include_zero_pairs=args.include_zero_pairs)
    for row in rows:
        row["source"] = "simulated"
    for hw in HW_ROWS:
        rows.append({
            "kind": hw.name, "mare": hw.mare_percent, "max_re": "", "mean_err": "",
            "case": "reference", "pair_count": "",
            "source": "constant, not simulated" if not hw.simulated else "reference constant",
        })
    out = _out_dir(args)
    csv_path = write_table_csv(out / "mare.csv", config,
                               ["kind", "mare", "max_re", "mean_err", "case",
                                "pair_count", "source"], rows)
    adam = next(r for r in rows if r["kind"] == "adam" and r["case"] == "all")
    summary = {
        "computed": {r["kind"]: r["mare"] for r in rows if r["case"] == "all"},
        "reference": {hw.name: hw.mare_percent for hw in HW_ROWS},
        "adam_within_reference_band": bool(abs(adam["mare"] - ADAM_ROW.mare_percent) <= 0.5),
    }
    write_summary_json(out / "mare.json", config, summary)
    print(f"wrote {csv_path}")
    for r in rows:
        if r["case"] in ("all", "reference"):
            mare = f"{r['mare']:.4f}" if isinstance(r["mare"], float) else r["mare"]
            print(f"  {r['kind']:<16} mare={mare:<8} [{r['source']}]")
    return 0


# ---------------------------------------------------------------------------
# tradeoff
# ---------------------------------------------------------------------------

def cmd_tradeoff(args) -> int:
    config = RunConfig(command="tradeoff", params={})
    area = area_reduction_percent()
    pdp = pdp_reduction_percent()
    if abs(area - AREA_REDUCTION_CLAIM) > 0.02 or abs(pdp - PDP_REDUCTION_CLAIM) > 0.02:
        raise RuntimeError(
            f"reference table no longer reproduces the published reductions: "
            f"area {area:.4f}% vs {AREA_REDUCTION_CLAIM}%, pdp {pdp:.4f}% vs {PDP_REDUCTION_CLAIM}%")
    out = _out_dir(args)
    summary = {
        "area_reduction_percent": area,
        "area_reduction_claim": AREA_REDUCTION_CLAIM,
        "pdp_reduction_percent": pdp,
        "pdp_reduction_claim": PDP_REDUCTION_CLAIM,
        "exact": {"area_um2": EXACT_ROW.area_um2, "pdp_pj": EXACT_ROW.pdp_pj},
        "adam": {"area_um2": ADAM_ROW.area_um2, "pdp_pj": ADAM_ROW.pdp_pj,
                 "pdp_scatter_pj": ADAM_PDP_SCATTER_PJ},
        "tmr": {"pdp_pj": TMR_PDP_PJ},
        "notes": [PDP_DISCREPANCY_NOTE],
    }
    write_summary_json(out / "tradeoff.json", config, summary)
    for bench, points in SCATTER_REFERENCE.items():
        write_scatter_dat(out / f"pdp_vulnerability_{bench}.dat", config,
                          ["pdp_pj", "vulnerability_pct", "label"],
                          [(pdp, vuln, label) for label, pdp, vuln in points],
                          notes=[PDP_DISCREPANCY_NOTE])
    print(f"area reduction: {area:.2f}% (claim {AREA_REDUCTION_CLAIM}%)")
    print(f"pdp reduction:  {pdp:.2f}% (claim {PDP_REDUCTION_CLAIM}%)")
    print(f"wrote {out / 'tradeoff.json'}")
    return 0


# ---------------------------------------------------------------------------
# sample-size
# ---------------------------------------------------------------------------

def cmd_sample_size(args) -> int:
    population = None
    if args.population not in (None, "inf", "infinite"):
        try:
            population = int(args.population)
        except ValueError as e:
            raise UsageError(f"population must be an integer or 'inf': {args.population}") from e
    try:
        n = sample_size(population, args.confidence, args.margin, args.p)
    except ValueError as e:
        raise UsageError(str(e)) from e
    print(n)
    return 0


# ---------------------------------------------------------------------------
# gemm
# ---------------------------------------------------------------------------

def cmd_gemm(args) -> int:
    kind = MultiplierKind.parse(args.kind)
    cfg = ArrayConfig(rows=args.rows, cols=args.cols)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    A = rng.integers(-128, 128, size=(args.m, args.k)).astype(np.int8)
    B = rng.integers(-128, 128, size=(args.k, args.n)).astype(np.int8)
    result, _ = gemm_with_report(A, B, cfg, kind)
    exact, _ = gemm_with_report(A, B, cfg, MultiplierKind.EXACT)
    sched = schedule((args.m, args.k, args.n), cfg)
    rel = np.abs(result - exact)[exact != 0] / np.abs(exact[exact != 0])
    config = RunConfig(command="gemm", seed=args.seed, params={
        "m": args.m, "k": args.k, "n": args.n, "kind": kind.value,
        "rows": args.rows, "cols": args.cols,
    })
    summary = {
        "dims": [args.m, args.k, args.n],
        "total_cycles": sched.total_cycles,
        "tiles": [sched.tiles_m, sched.tiles_n],
        "mean_abs_relative_error": float(rel.mean()) if rel.size else 0.0,
        "max_abs_relative_error": float(rel.max()) if rel.size else 0.0,
        "elements_equal_exact": int((result == exact).sum()),
        "elements_total": int(exact.size),
    }
    out = _out_dir(args)
    write_summary_json(out / "gemm.json", config, summary)
    print(f"{kind.value} gemm {args.m}x{args.k}x{args.n}: "
          f"{sched.total_cycles} cycles, mean |rel err| "
          f"{summary['mean_abs_relative_error']:.4%} vs exact")
    return 0


# ---------------------------------------------------------------------------
# inject
# ---------------------------------------------------------------------------

_INJECT_DEFAULTS = {
    "scope": "dnn_inference",
    "kinds": ["exact", "tmr_exact", "mitchell", "adam"],
    "seed": 1,
    "injections": 1000,
    "confidence": 0.95,
    "margin": 0.01,
    "p": 0.5,
    "enforce_confidence": False,
    "array": {"rows": 8, "cols": 8},
    "eval_images": 256,
    "gemm": {"m": 16, "k": 16, "n": 16},
}


def _load_inject_config(args) -> dict:
    cfg = dict(_INJECT_DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(user, dict):
            raise UsageError(f"{path}: top level must be a JSON object")
        unknown = set(user) - set(_INJECT_DEFAULTS)
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg.update(user)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.injections is not None:
        cfg["injections"] = args.injections
    if args.kinds is not None:
        cfg["kinds"] = [k.value for k in _parse_kinds(args.kinds)]

    try:
        scope = CampaignScope(cfg["scope"])
    except ValueError as e:
        raise UsageError(f"scope must be one of "
                         f"{[s.value for s in CampaignScope]}: {cfg['scope']!r}") from e
    cfg["scope"] = scope
    try:
        cfg["kinds"] = [MultiplierKind.parse(k) for k in cfg["kinds"]]
    except ValueError as e:
        raise UsageError(str(e)) from e
    array = cfg["array"]
    if not isinstance(array, dict) or not {"rows", "cols"} <= set(array):
        raise UsageError("array must be an object with rows and cols")
    if cfg["injections"] == "auto":
        cfg["injections"] = sample_size(None, cfg["confidence"], cfg["margin"], cfg["p"])
    if not isinstance(cfg["injections"], int) or cfg["injections"] < 1:
        raise UsageError(f"injections must be a positive integer or 'auto': {cfg['injections']!r}")
    return cfg


def cmd_inject(args) -> int:
    cfg = _load_inject_config(args)
    scope: CampaignScope = cfg["scope"]
    array = ArrayConfig(rows=int(cfg["array"]["rows"]), cols=int(cfg["array"]["cols"]))
    out = _out_dir(args)

    graph = images = None
    if scope is CampaignScope.DNN_INFERENCE:
        graph = bundled.load_bundled_model()
        images, _ = bundled.load_bundled_test_set()

    summaries = {}
    for kind in cfg["kinds"]:
        campaign = Campaign(
            seed=int(cfg["seed"]), n_injections=cfg["injections"], scope=scope,
            kind=kind, enforce_confidence=bool(cfg["enforce_confidence"]),
            confidence=float(cfg["confidence"]), margin=float(cfg["margin"]),
            p=float(cfg["p"]),
        )
        if scope is CampaignScope.DNN_INFERENCE:
            result = run_dnn_campaign(graph, images, campaign, cfg=array,
                                      eval_images=int(cfg["eval_images"]),
                                      threads=args.threads)
        elif scope is CampaignScope.GEMM:
            dims = (int(cfg["gemm"]["m"]), int(cfg["gemm"]["k"]), int(cfg["gemm"]["n"]))
            result = run_gemm_campaign(campaign, dims=dims, cfg=array)
        else:
            result = run_multiply_campaign(campaign)
        run_config = RunConfig(command="inject", seed=campaign.seed, params={
            "scope": scope.value, "kind": kind.value, "injections": campaign.n_injections,
            "array": {"rows": array.rows, "cols": array.cols},
            "eval_images": int(cfg["eval_images"]),
            "confidence": campaign.confidence, "margin": campaign.margin, "p": campaign.p,
        })
        write_records_csv(out / f"records_{kind.value}.csv", run_config,
                          (r.to_csv_row() for r in result.records))
        summaries[kind.value] = result.summary()
        line = (f"  {kind.value:<16} detection={summaries[kind.value]['detection_coverage']:.4f} "
                f"mismatch={summaries[kind.value]['mismatch_rate']:.4f}")
        if scope is CampaignScope.DNN_INFERENCE:
            line += f" sdc5={summaries[kind.value]['vulnerability_sdc5']:.4f}"
        print(line)

    run_config = RunConfig(command="inject", seed=int(cfg["seed"]), params={
        "scope": scope.value, "kinds": [k.value for k in cfg["kinds"]],
        "injections": cfg["injections"],
        "array": {"rows": array.rows, "cols": array.cols},
        "eval_images": int(cfg["eval_images"]),
    })
    write_summary_json(out / "inject_summary.json", run_config, {"campaigns": summaries})
    print(f"wrote {out / 'inject_summary.json'}")
    return 0


# ---------------------------------------------------------------------------
# dnn-eval
# ---------------------------------------------------------------------------

def cmd_dnn_eval(args) -> int:
    kinds = _parse_kinds(args.kinds)
    graph = bundled.load_bundled_model()
    images, labels = bundled.load_bundled_test_set()
    if args.images:
        images, labels = images[:args.images], labels[:args.images]
    config = RunConfig(command="dnn-eval", params={
        "kinds": [k.value for k in kinds], "images": int(images.shape[0]),
        "model": graph.name,
    })
    accuracies = {}
    for kind in kinds:
        accuracies[kind.value] = nn.evaluate_accuracy(graph, images, labels, kind)
        print(f"  {kind.value:<16} top-1 accuracy {accuracies[kind.value]:.2f}%")
    out = _out_dir(args)
    write_summary_json(out / "dnn_eval.json", config, {"accuracy_percent": accuracies})
    print(f"wrote {out / 'dnn_eval.json'}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="adamul", description=__doc__)
    parser.add_argument("--version", action="version", version=f"adamul {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mare", help="exhaustive arithmetic-error report")
    p.add_argument("--kinds", default="exact,mitchell,mitchell_trunc,adam")
    p.add_argument("--include-zero-pairs", action="store_true")
    p.add_argument("--out", default="adamul-out")
    p.set_defaults(func=cmd_mare)

    p = sub.add_parser("tradeoff", help="area/energy reduction report and scatter data")
    p.add_argument("--out", default="adamul-out")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("sample-size", help="statistical fault-injection sample size")
    p.add_argument("--population", default=None, help="population size or 'inf'")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--margin", type=float, default=0.01)
    p.add_argument("--p", type=float, default=0.5)
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("gemm", help="run one random GEMM through the array model")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--kind", default="adam")
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="adamul-out")
    p.set_defaults(func=cmd_gemm)

    p = sub.add_parser("inject", help="run a fault-injection campaign")
    p.add_argument("--config", default=None, help="JSON campaign configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--injections", type=int, default=None)
    p.add_argument("--kinds", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="adamul-out")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("dnn-eval", help="fault-free accuracy on the bundled model")
    p.add_argument("--kinds", default="exact,adam")
    p.add_argument("--images", type=int, default=None)
    p.add_argument("--out", default="adamul-out")
    p.set_defaults(func=cmd_dnn_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(json.dumps({"error": "usage", "message": str(e)}), file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, nn.ModelFormatError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    except Exception as e:   # anything unexpected still reports as JSON
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
