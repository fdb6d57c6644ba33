"""Benchmark bundle assembly: netlists, labels, cone metadata, splits, manifest.

A bundle directory holds ``golden.v``, ``trojan.v``, ``labels.csv``,
``cones.json``, ``splits.json`` and ``manifest.json`` (SHA-256 digests of the
other files plus the tool version). Writing is atomic: files land in a
temporary sibling directory that is renamed into place on success. Bundles
carry no timestamps, so identical inputs produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .inserter import LABEL_PAYLOAD, LABEL_TRIGGER, LabelSet
from .miner import ConeMeta
from .netlist import Netlist, parse_structural_verilog, write_structural_verilog

BUNDLE_SCHEMA_VERSION = 1


class ExportError(Exception):
    pass


def make_splits(
    cone_ids: list[str],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> dict[str, list[str]]:
    """Disjoint train/val/test cover of the cone ids, deterministic in seed.

    Sizes are the rounded ratios with any remainder assigned to train.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(cone_ids)
    if n < 3:
        raise ValueError(f"need at least 3 cones for splits, got {n}")
    n_val = round(ratios[1] * n)
    n_test = round(ratios[2] * n)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError("rounded val/test sizes exceed the cone count")
    order = sorted(cone_ids)
    random.Random(seed).shuffle(order)
    return {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train : n_train + n_val]),
        "test": sorted(order[n_train + n_val :]),
    }


@dataclass
class AcceptedInstance:
    cone_id: str
    anchor: str
    template_id: str
    seed: int
    meta: ConeMeta
    verdicts: dict[str, dict]
    gate_delta: int
    trigger_net: str
    victim_net: str

    def to_dict(self) -> dict:
        return {
            "cone_id": self.cone_id,
            "anchor": self.anchor,
            "template_id": self.template_id,
            "seed": self.seed,
            "meta": self.meta.to_dict(),
            "verdicts": self.verdicts,
            "gate_delta": self.gate_delta,
            "trigger_net": self.trigger_net,
            "victim_net": self.victim_net,
        }


@dataclass
class BenchmarkBundle:
    directory: Path
    manifest: dict
    labels: dict[str, tuple[str, str]]  # net -> (label, cone_id)
    cones: dict[str, dict]
    splits: dict[str, list[str]]

    @property
    def golden_path(self) -> Path:
        return self.directory / "golden.v"

    @property
    def trojan_path(self) -> Path:
        return self.directory / "trojan.v"

    def positive_nets(self) -> set[str]:
        return {
            net
            for net, (label, _) in self.labels.items()
            if label in (LABEL_TRIGGER, LABEL_PAYLOAD)
        }

    def load_golden(self) -> Netlist:
        return parse_structural_verilog(self.golden_path.read_text())

    def load_trojan(self) -> Netlist:
        return parse_structural_verilog(self.trojan_path.read_text())


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def export_bundle(
    base: Netlist,
    trojan: Netlist,
    labels: LabelSet,
    instances: list[AcceptedInstance],
    out_dir: str,
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    split_seed: int = 0,
) -> BenchmarkBundle:
    """Write the bundle atomically and return the loaded view of it."""
    if not instances:
        raise ExportError("refusing to export an empty instance set")
    for inst in instances:
        for check, verdict in inst.verdicts.items():
            if not str(verdict.get("status", "")).startswith("equivalent"):
                raise ExportError(
                    f"instance {inst.cone_id} has a non-equivalent "
                    f"{check} verdict: {verdict.get('status')}"
                )
    missing = set(trojan.nets) - set(labels.labels)
    if missing:
        raise ExportError(f"labels missing for nets: {sorted(missing)[:5]}")

    cone_ids = [inst.cone_id for inst in instances]
    if len(cone_ids) >= 3:
        splits = make_splits(cone_ids, split_ratios, split_seed)
    else:
        # too few cones for a ratio split: everything trains
        splits = {"train": sorted(cone_ids), "val": [], "test": []}

    files = {
        "golden.v": write_structural_verilog(base),
        "trojan.v": write_structural_verilog(trojan),
        "labels.csv": labels.to_csv(),
        "cones.json": _json_text(
            {
                "schema_version": BUNDLE_SCHEMA_VERSION,
                "cones": {inst.cone_id: inst.to_dict() for inst in instances},
            }
        ),
        "splits.json": _json_text(
            {
                "schema_version": BUNDLE_SCHEMA_VERSION,
                "seed": split_seed,
                "ratios": list(split_ratios),
                **splits,
            }
        ),
    }
    manifest = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "tool": "htforge",
        "tool_version": __version__,
        "files": {
            name: {
                "sha256": _sha256_bytes(text.encode("utf-8")),
                "bytes": len(text.encode("utf-8")),
            }
            for name, text in files.items()
        },
    }
    files["manifest.json"] = _json_text(manifest)

    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        # only clobber something that is itself a bundle
        if not (out / "manifest.json").exists():
            raise ExportError(
                f"output directory {out} exists and is not a bundle; refusing"
            )
    tmp = out.with_name(out.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    for name, text in files.items():
        (tmp / name).write_text(text, encoding="utf-8", newline="\n")
    if out.exists():
        shutil.rmtree(out)
    os.replace(tmp, out)
    return load_bundle(str(out))


def load_bundle(directory: str, verify: bool = True) -> BenchmarkBundle:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    if verify:
        for name, info in manifest["files"].items():
            digest = _sha256_bytes((d / name).read_bytes())
            if digest != info["sha256"]:
                raise ExportError(f"digest mismatch for {name}")
    labels: dict[str, tuple[str, str]] = {}
    lines = (d / "labels.csv").read_text().splitlines()
    for line in lines[1:]:
        if not line:
            continue
        net, label, cone_id = line.split(",", 2)
        labels[net] = (label, cone_id)
    cones = json.loads((d / "cones.json").read_text())["cones"]
    splits_obj = json.loads((d / "splits.json").read_text())
    splits = {k: splits_obj[k] for k in ("train", "val", "test")}
    return BenchmarkBundle(
        directory=d, manifest=manifest, labels=labels, cones=cones, splits=splits
    )
