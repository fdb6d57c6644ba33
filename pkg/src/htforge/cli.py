"""Command-line entry points.

Subcommands mirror the pipeline stages: ``analyze`` (SCOAP CSV), ``heatmap``
(depth/rarity counts), ``mine`` (candidates + cone metadata), ``insert``
(splice the top candidate, unverified), ``verify`` (miter + scan checks for
a prior insertion), ``export`` (the full verified pipeline producing a
bundle), ``eval`` (score detector predictions against a bundle).

Exit codes: 0 success, 2 configuration error, 3 pipeline-stage error,
4 empty result.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import equiv, inserter
from .config import ConfigError, PipelineConfig, load_config
from .evaluate import PredictionError, score_predictions
from .export import ExportError, load_bundle
from .graph import annotate, build_graph, sequential_cut
from .miner import FilterConfig, candidates_csv, extract_coi, select_rare
from .netlist import NetlistError, parse_file, parse_structural_verilog, write_structural_verilog
from .pipeline import PipelineError, run_pipeline, _derive_seed
from .scan import matching_nets
from .scoap import compute_scoap, depth_rarity_histogram, heatmap_csv, rarity, scoap_csv
from .templates import CompileError, builtin_library, compile_template, load_library

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_EMPTY = 4


def _analysis(cfg: PipelineConfig):
    netlist = parse_file(cfg.netlist, cfg.fmt)
    g = build_graph(netlist)
    cg = sequential_cut(g)
    annotate(cg, k=cfg.reconv_radius, reconv_nets=())
    scores = compute_scoap(cg)
    rt = rarity(scores, cfg.alpha)
    return netlist, cg, scores, rt


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    _, cg, scores, rt = _analysis(cfg)
    out = _out_dir(cfg) / "scoap.csv"
    out.write_text(scoap_csv(cg, scores, rt), encoding="utf-8")
    print(f"wrote {out} ({len(scores.cc0)} nets)")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    cfg = load_config(args.config)
    _, cg, _, rt = _analysis(cfg)
    matrix = depth_rarity_histogram(cg, rt, (args.depth_bins, args.rarity_bins))
    out = _out_dir(cfg) / "heatmap.csv"
    out.write_text(heatmap_csv(matrix), encoding="utf-8")
    total = sum(sum(row) for row in matrix)
    print(f"wrote {out} (total count {total})")
    return EXIT_OK


def _mine(cfg: PipelineConfig):
    _, cg, _, rt = _analysis(cfg)
    filters = FilterConfig(
        min_cone_overlap=cfg.min_cone_overlap,
        min_branch_disjointness=cfg.min_branch_disjointness,
        max_fraction=cfg.max_fraction,
    )
    candidates = select_rare(rt, cg, cfg.threshold_pct, filters)
    cones = [
        extract_coi(cg, c.net, (cfg.cone_max_nodes, cfg.cone_max_depth), rarity=rt)
        for c in candidates
    ]
    return cg, rt, candidates, cones


def cmd_mine(args) -> int:
    cfg = load_config(args.config)
    _, _, candidates, cones = _mine(cfg)
    out = _out_dir(cfg)
    (out / "candidates.csv").write_text(candidates_csv(candidates), encoding="utf-8")
    cone_dir = out / "cones"
    cone_dir.mkdir(exist_ok=True)
    for coi in cones:
        payload = {
            "anchor": coi.anchor,
            "nodes": coi.nodes,
            "boundary_in": coi.boundary_in,
            "boundary_out": coi.boundary_out,
            "meta": coi.meta.to_dict(),
        }
        (cone_dir / f"{coi.cone_id}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    print(f"wrote {out / 'candidates.csv'} ({len(candidates)} candidates)")
    if not candidates:
        return EXIT_EMPTY
    return EXIT_OK


def cmd_insert(args) -> int:
    cfg = load_config(args.config)
    netlist, cg, _, rt = _analysis(cfg)
    _, _, candidates, cones = _mine(cfg)
    if not candidates:
        print("no candidates above the rarity threshold", file=sys.stderr)
        return EXIT_EMPTY
    library = load_library(cfg.library_dir) if cfg.library_dir else builtin_library()
    coi = cones[0]
    last_err = None
    for d in library:
        if d.trigger_family in ("SequenceFSM", "WatchdogTimer", "GlitchDetector") \
                and not cfg.clock_net:
            continue
        seed = _derive_seed(cfg.seed_templates, coi.cone_id, d.id)
        try:
            rw = compile_template(
                d, coi, seed, cg, clock_net=cfg.clock_net,
                scan_patterns=cfg.scan_patterns,
            )
        except CompileError as e:
            last_err = e
            continue
        budget = cfg.gate_budget or inserter.default_gate_budget(netlist)
        plan = inserter.plan_insertion(
            netlist, coi, rw, budget, scan_patterns=cfg.scan_patterns
        )
        if not plan.all_passed():
            last_err = RuntimeError(f"guardrails failed: {plan.failures()}")
            continue
        trojan, labels = inserter.apply(netlist, plan, coi)
        out = _out_dir(cfg)
        (out / "trojan.v").write_text(write_structural_verilog(trojan), encoding="utf-8")
        (out / "labels.csv").write_text(labels.to_csv(), encoding="utf-8")
        rep = {
            "anchor": coi.anchor,
            "cone_id": coi.cone_id,
            "template_id": d.id,
            "seed": seed,
            "trigger_net": rw.trigger_net,
            "victim_net": rw.victim_net,
            "gate_delta": plan.gate_delta,
            "guardrails": plan.guardrail_report,
            "boundary_in": coi.boundary_in,
            "boundary_out": coi.boundary_out,
        }
        (out / "insertion_report.json").write_text(
            json.dumps(rep, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"wrote {out / 'trojan.v'} (template {d.id}, anchor {coi.anchor})")
        return EXIT_OK
    print(f"no template fits the top cone: {last_err}", file=sys.stderr)
    return EXIT_EMPTY


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    netlist, cg, _, rt = _analysis(cfg)
    trojan = parse_structural_verilog(Path(args.trojan).read_text())
    rep = json.loads(Path(args.report).read_text())
    coi = extract_coi(
        cg, rep["anchor"], (cfg.cone_max_nodes, cfg.cone_max_depth), rarity=rt
    )
    constraints = [(rep["trigger_net"], 0)] + [
        (s, 0) for s in matching_nets(trojan.nets, cfg.scan_patterns)
    ]
    miter = equiv.build_miter(netlist, trojan, coi, constraints, cfg.unroll_cycles)
    try:
        verdict = equiv.check_exhaustive(miter, cfg.max_free_inputs)
    except equiv.InputSpaceExceeded:
        verdict = equiv.check_random(
            miter, cfg.random_vectors,
            _derive_seed(cfg.seed_mining, rep["anchor"], rep["template_id"]),
        )
    scan_verdict = equiv.scan_integrity(netlist, trojan, cfg.scan_patterns)
    out = {"function": verdict.to_dict(), "scan": scan_verdict.to_dict()}
    print(json.dumps(out, sort_keys=True, indent=2))
    ok = verdict.equivalent and scan_verdict.equivalent
    return EXIT_OK if ok else EXIT_STAGE


def cmd_export(args) -> int:
    cfg = load_config(args.config)
    result = run_pipeline(cfg)
    print(json.dumps(
        {
            "bundle": result.bundle_dir,
            "accepted": result.accepted,
            "report": result.report.get("report_path"),
        },
        indent=2,
    ))
    if result.bundle_dir is None:
        print(result.report.get("refusal", "empty result"), file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_eval(args) -> int:
    bundle = load_bundle(args.bundle)
    metrics = score_predictions(bundle, args.predictions, top_k=args.top_k)
    out = metrics.to_dict()
    if not args.full_sweep:
        out["sweep"] = out["sweep"][:10]
    print(json.dumps(out, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="htforge",
        description="Trojan-like, function-preserving benchmark synthesis "
        "for gate-level netlists",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("analyze", cmd_analyze, "write the per-net testability/rarity CSV"),
        ("heatmap", cmd_heatmap, "write the depth/rarity histogram CSV"),
        ("mine", cmd_mine, "write rare-net candidates and cone metadata"),
        ("insert", cmd_insert, "apply the best template to the top cone"),
        ("export", cmd_export, "run the full pipeline and export a bundle"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="TOML pipeline config")
        p.set_defaults(fn=fn)
        if name == "heatmap":
            p.add_argument("--depth-bins", type=int, default=16)
            p.add_argument("--rarity-bins", type=int, default=16)

    p = sub.add_parser("verify", help="check an insertion for function/scan safety")
    p.add_argument("--config", required=True)
    p.add_argument("--trojan", required=True, help="trojanized netlist (.v)")
    p.add_argument("--report", required=True, help="insertion_report.json from insert")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("eval", help="score detector predictions against a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--predictions", required=True, help="net,score CSV")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--full-sweep", action="store_true")
    p.set_defaults(fn=cmd_eval)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, NetlistError, ExportError, PredictionError,
            equiv.MiterError, CompileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
