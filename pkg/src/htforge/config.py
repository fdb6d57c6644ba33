"""Pipeline configuration: TOML file plus environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .scan import DEFAULT_SCAN_PATTERNS

OUTPUT_DIR_ENV = "HTFORGE_OUTPUT_DIR"


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    # input
    netlist: str = ""
    fmt: str = "bench"
    clock_net: str | None = None
    # scoap
    alpha: float = 1.0
    # mining
    threshold_pct: float = 99.0
    min_cone_overlap: float = 0.25
    min_branch_disjointness: float = 0.5
    max_fraction: float = 0.001
    cone_max_nodes: int = 512
    cone_max_depth: int = 8
    reconv_radius: int = 4
    # templates
    library_dir: str | None = None
    # insertion
    gate_budget: int = 0  # 0 = max(32, 0.1% of cells)
    scan_patterns: tuple[str, ...] = DEFAULT_SCAN_PATTERNS
    # verify
    max_free_inputs: int = 20
    random_vectors: int = 10000
    unroll_cycles: int = 8
    # policy
    weights_file: str | None = None
    history_file: str | None = None
    rank_weights: tuple[float, float] = (0.5, 0.5)
    train_lr: float = 0.05
    train_epochs: int = 200
    train_batch: int = 16
    # run
    candidate_budget: int = 64
    stop_after_accepts: int = 4
    output_dir: str = "out"
    # seeds
    seed_mining: int = 1
    seed_templates: int = 2
    seed_splits: int = 3
    # export
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def validate(self) -> None:
        if not self.netlist:
            raise ConfigError("input.netlist is required")
        if not Path(self.netlist).exists():
            raise ConfigError(f"input netlist {self.netlist!r} does not exist")
        if self.fmt not in ("bench", "verilog"):
            raise ConfigError(f"input.format must be bench or verilog, not {self.fmt!r}")
        if not 0.5 <= self.alpha <= 1.0:
            raise ConfigError(f"scoap.alpha {self.alpha} outside [0.5, 1]")
        if not 0.0 <= self.threshold_pct < 100.0:
            raise ConfigError(
                f"mining.threshold_pct {self.threshold_pct} outside [0, 100)"
            )
        for name, v in (
            ("mining.min_cone_overlap", self.min_cone_overlap),
            ("mining.min_branch_disjointness", self.min_branch_disjointness),
        ):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} {v} outside [0, 1]")
        if self.cone_max_nodes < 1 or self.cone_max_depth < 1:
            raise ConfigError("mining.max_nodes and mining.max_depth must be positive")
        if self.reconv_radius < 1:
            raise ConfigError("mining.reconv_radius must be >= 1")
        if self.library_dir and not Path(self.library_dir).is_dir():
            raise ConfigError(f"templates.library_dir {self.library_dir!r} not found")
        if self.gate_budget < 0:
            raise ConfigError("insertion.gate_budget must be >= 0")
        if self.max_free_inputs < 1 or self.random_vectors < 1:
            raise ConfigError("verify limits must be positive")
        if self.unroll_cycles < 1:
            raise ConfigError("verify.unroll_cycles must be >= 1")
        w_a, w_s = self.rank_weights
        if w_a < 0 or w_s < 0 or w_a + w_s <= 0:
            raise ConfigError(f"policy.rank_weights {self.rank_weights} invalid")
        if self.candidate_budget < 1 or self.stop_after_accepts < 1:
            raise ConfigError("run.candidate_budget and stop_after_accepts must be >= 1")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ConfigError("export.split_ratios must be three positive numbers")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError("export.split_ratios must sum to 1")


def load_config(path: str) -> PipelineConfig:
    """Read a TOML config; unknown keys are rejected to catch typos."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path!r} not found") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path!r}: {e}") from e

    cfg = PipelineConfig()
    known = {
        ("input", "netlist"): ("netlist", str),
        ("input", "format"): ("fmt", str),
        ("input", "clock_net"): ("clock_net", str),
        ("scoap", "alpha"): ("alpha", float),
        ("mining", "threshold_pct"): ("threshold_pct", float),
        ("mining", "min_cone_overlap"): ("min_cone_overlap", float),
        ("mining", "min_branch_disjointness"): ("min_branch_disjointness", float),
        ("mining", "max_fraction"): ("max_fraction", float),
        ("mining", "max_nodes"): ("cone_max_nodes", int),
        ("mining", "max_depth"): ("cone_max_depth", int),
        ("mining", "reconv_radius"): ("reconv_radius", int),
        ("templates", "library_dir"): ("library_dir", str),
        ("insertion", "gate_budget"): ("gate_budget", int),
        ("insertion", "scan_patterns"): ("scan_patterns", tuple),
        ("verify", "max_free_inputs"): ("max_free_inputs", int),
        ("verify", "random_vectors"): ("random_vectors", int),
        ("verify", "unroll_cycles"): ("unroll_cycles", int),
        ("policy", "weights_file"): ("weights_file", str),
        ("policy", "history_file"): ("history_file", str),
        ("policy", "rank_weights"): ("rank_weights", tuple),
        ("policy", "train_lr"): ("train_lr", float),
        ("policy", "train_epochs"): ("train_epochs", int),
        ("policy", "train_batch"): ("train_batch", int),
        ("run", "candidate_budget"): ("candidate_budget", int),
        ("run", "stop_after_accepts"): ("stop_after_accepts", int),
        ("run", "output_dir"): ("output_dir", str),
        ("seeds", "mining"): ("seed_mining", int),
        ("seeds", "templates"): ("seed_templates", int),
        ("seeds", "splits"): ("seed_splits", int),
        ("export", "split_ratios"): ("split_ratios", tuple),
    }
    for section, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"top-level key {section!r} must be a table")
        for key, value in table.items():
            spec = known.get((section, key))
            if spec is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, conv = spec
            if conv is tuple:
                value = tuple(value)
            elif conv is float:
                value = float(value)
            elif conv is int:
                if not isinstance(value, int):
                    raise ConfigError(f"[{section}] {key} must be an integer")
            setattr(cfg, attr, value)
    if cfg.clock_net == "":
        cfg.clock_net = None
    if cfg.library_dir == "":
        cfg.library_dir = None
    if cfg.weights_file == "":
        cfg.weights_file = None
    if cfg.history_file == "":
        cfg.history_file = None
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        cfg.output_dir = env_out
    cfg.validate()
    return cfg
