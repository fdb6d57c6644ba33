"""End-to-end orchestration: parse → mine → rank → splice → verify → export."""

from __future__ import annotations

import json
import logging
import resource
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

from . import equiv, inserter, policy
from .config import PipelineConfig
from .export import AcceptedInstance, BenchmarkBundle, export_bundle
from .graph import annotate, build_graph, sequential_cut
from .inserter import build_labels, default_gate_budget, plan_insertion
from .miner import ConeOfInfluence, extract_coi, select_rare, FilterConfig
from .netlist import Netlist, NetlistError, parse_file
from .policy import (
    HistoryRecord,
    PolicyNet,
    TrainConfig,
    featurize,
    history_append,
    history_load,
    load_weights,
    save_weights,
    score,
    stealth_proxy,
    rank,
)
from .scan import matching_nets
from .scoap import compute_scoap, rarity
from .templates import (
    CompileError,
    SEQUENTIAL_TRIGGERS,
    builtin_library,
    compile_template,
    load_library,
)

log = logging.getLogger(__name__)


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class RunResult:
    bundle_dir: str | None
    report: dict

    @property
    def accepted(self) -> int:
        return self.report["accepted_count"]


class _Stages:
    def __init__(self):
        self.rows: list[dict] = []

    def run(self, name: str, fn):
        t0 = time.perf_counter()
        out = fn()
        wall = time.perf_counter() - t0
        rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        self.rows.append(
            {"stage": name, "wall_s": round(wall, 4), "max_rss_kb": rss_kb}
        )
        return out


def _derive_seed(base: int, *parts: str) -> int:
    text = f"{base}|" + "|".join(parts)
    return zlib.crc32(text.encode("utf-8"))


def _load_analysis(cfg: PipelineConfig):
    """Shared front half: netlist, cut graph, scores, rarity table."""
    try:
        netlist = parse_file(cfg.netlist, cfg.fmt)
    except NetlistError as e:
        raise PipelineError("parse", str(e)) from e
    g = build_graph(netlist)
    cg = sequential_cut(g)
    annotate(cg, k=cfg.reconv_radius, reconv_nets=())
    scores = compute_scoap(cg)
    rt = rarity(scores, cfg.alpha)
    return netlist, cg, scores, rt


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """Run every stage; returns the bundle directory (None when nothing was
    accepted) plus a run report with per-candidate outcomes and stage
    accounting. Deterministic given the config's seeds."""
    stages = _Stages()
    report: dict = {
        "config": {
            "netlist": cfg.netlist,
            "alpha": cfg.alpha,
            "threshold_pct": cfg.threshold_pct,
            "seeds": {
                "mining": cfg.seed_mining,
                "templates": cfg.seed_templates,
                "splits": cfg.seed_splits,
            },
        },
        "candidates": [],
    }

    netlist, cg, scores, rt = stages.run(
        "parse_graph", lambda: _load_analysis(cfg)
    )
    del scores  # rarity table carries everything downstream

    filters = FilterConfig(
        min_cone_overlap=cfg.min_cone_overlap,
        min_branch_disjointness=cfg.min_branch_disjointness,
        max_fraction=cfg.max_fraction,
    )
    candidates = stages.run(
        "scoap_mining",
        lambda: select_rare(rt, cg, cfg.threshold_pct, filters),
    )
    cones = stages.run(
        "coi_extraction",
        lambda: [
            extract_coi(
                cg, c.net, (cfg.cone_max_nodes, cfg.cone_max_depth), rarity=rt
            )
            for c in candidates
        ],
    )

    library = (
        load_library(cfg.library_dir) if cfg.library_dir else builtin_library()
    )
    net = None
    if cfg.weights_file and Path(cfg.weights_file).exists():
        net = load_weights(cfg.weights_file)

    def build_ranked():
        entries = {}
        for coi in cones:
            for d in library:
                if d.trigger_family in SEQUENTIAL_TRIGGERS and not cfg.clock_net:
                    continue
                if (
                    coi.meta.reconv_descriptors["overlap_max"]
                    > d.params.reconv_tolerance
                ):
                    continue
                cid = f"{coi.cone_id}::{d.id}"
                fv = featurize(coi.meta, d)
                if net is not None:
                    s = score(net, fv)
                else:
                    proxy = stealth_proxy(coi.meta)
                    s = (proxy, proxy)
                entries[cid] = (s, fv, coi, d)
        order = rank(
            [(cid, e[0]) for cid, e in entries.items()], cfg.rank_weights
        )
        return [(cid, *entries[cid]) for cid in order[: cfg.candidate_budget]]

    ranked = stages.run("policy_ranking", build_ranked)

    budget = cfg.gate_budget or default_gate_budget(netlist)
    working = netlist.copy()
    accepted: list[AcceptedInstance] = []
    accepted_pairs = []
    used_nets: set[str] = set()
    history: list[HistoryRecord] = []

    def record(fv, outcome: str, meta, cid: str):
        history.append(
            HistoryRecord(
                features=tuple(fv.tolist()),
                outcome=outcome,
                stealth_label=stealth_proxy(meta),
                candidate_id=cid,
            )
        )

    def candidate_loop():
        nonlocal working
        for cid, _, fv, coi, d in ranked:
            if len(accepted) >= cfg.stop_after_accepts:
                break
            row = {"id": cid, "anchor": coi.anchor, "template": d.id}
            if coi.node_set & used_nets:
                row["outcome"] = "skipped_overlap"
                report["candidates"].append(row)
                continue
            seed = _derive_seed(cfg.seed_templates, coi.cone_id, d.id)
            row["seed"] = seed
            try:
                rw = compile_template(
                    d, coi, seed, cg,
                    clock_net=cfg.clock_net,
                    scan_patterns=cfg.scan_patterns,
                )
            except CompileError as e:
                row["outcome"] = "skipped_compile"
                row["detail"] = str(e)
                report["candidates"].append(row)
                continue
            plan = plan_insertion(
                working, coi, rw, budget, scan_patterns=cfg.scan_patterns
            )
            if not plan.all_passed():
                fails = plan.failures()
                if "budget" in fails:
                    outcome = "failed_budget"
                else:
                    outcome = "failed_scan"
                record(fv, outcome, coi.meta, cid)
                row["outcome"] = outcome
                row["detail"] = ";".join(fails)
                report["candidates"].append(row)
                continue
            trojan, _ = inserter.apply(working, plan, coi)
            constraints = [(rw.trigger_net, 0)] + [
                (s, 0) for s in matching_nets(trojan.nets, cfg.scan_patterns)
            ]
            try:
                miter = equiv.build_miter(
                    netlist, trojan, coi, constraints, unroll=cfg.unroll_cycles
                )
            except equiv.MiterError as e:
                raise PipelineError("verify", f"{cid}: {e}") from e
            try:
                verdict = equiv.check_exhaustive(miter, cfg.max_free_inputs)
            except equiv.InputSpaceExceeded:
                verdict = equiv.check_random(
                    miter,
                    cfg.random_vectors,
                    _derive_seed(cfg.seed_mining, coi.cone_id, d.id),
                )
            row["function_verdict"] = verdict.status
            if verdict.status == equiv.STATUS_MISMATCH:
                record(fv, "failed_equivalence", coi.meta, cid)
                row["outcome"] = "failed_equivalence"
                report["candidates"].append(row)
                continue  # keep prior working copy: automatic rollback
            scan_verdict = equiv.scan_integrity(
                netlist, trojan, cfg.scan_patterns
            )
            row["scan_verdict"] = scan_verdict.status
            if scan_verdict.status == equiv.STATUS_MISMATCH:
                record(fv, "failed_scan", coi.meta, cid)
                row["outcome"] = "failed_scan"
                report["candidates"].append(row)
                continue
            working = trojan
            record(fv, "accepted", coi.meta, cid)
            used_nets.update(coi.node_set)
            used_nets.update(rw.new_nets)
            accepted_pairs.append((coi, rw))
            accepted.append(
                AcceptedInstance(
                    cone_id=coi.cone_id,
                    anchor=coi.anchor,
                    template_id=d.id,
                    seed=seed,
                    meta=coi.meta,
                    verdicts={
                        "function": verdict.to_dict(),
                        "scan": scan_verdict.to_dict(),
                    },
                    gate_delta=plan.gate_delta,
                    trigger_net=rw.trigger_net,
                    victim_net=rw.victim_net,
                )
            )
            row["outcome"] = "accepted"
            report["candidates"].append(row)

    stages.run("insertion_checks", candidate_loop)

    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    bundle_dir = None
    if accepted:
        labels = build_labels(working, accepted_pairs)
        bundle = stages.run(
            "export",
            lambda: export_bundle(
                netlist,
                working,
                labels,
                accepted,
                str(out_root / "bundle"),
                split_ratios=cfg.split_ratios,
                split_seed=cfg.seed_splits,
            ),
        )
        bundle_dir = str(bundle.directory)
        positives = bundle.positive_nets()
        report["positive_fraction"] = len(positives) / len(working.nets)
    else:
        report["refusal"] = (
            f"no accepted instances out of {len(ranked)} ranked candidates; "
            "nothing to export"
        )

    report["accepted_count"] = len(accepted)
    report["ranked_candidates"] = len(ranked)
    report["gate_budget"] = budget

    if cfg.history_file and history:
        history_append(cfg.history_file, history)
        report["history_appended"] = len(history)
        outcomes = {r.outcome == "accepted" for r in history_load(cfg.history_file)}
        if cfg.weights_file and len(outcomes) == 2:
            try:
                trained = policy.train(
                    PolicyNet.init(cfg.seed_templates),
                    history_load(cfg.history_file),
                    TrainConfig(
                        learning_rate=cfg.train_lr,
                        epochs=cfg.train_epochs,
                        batch_size=cfg.train_batch,
                        seed=cfg.seed_templates,
                    ),
                )
                save_weights(trained, cfg.weights_file)
                report["policy_retrained"] = True
            except RuntimeError as e:
                report["policy_retrained"] = False
                report["policy_retrain_error"] = str(e)

    report["stages"] = stages.rows
    report_path = out_root / "report.json"
    report_path.write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    report["report_path"] = str(report_path)
    return RunResult(bundle_dir=bundle_dir, report=report)
