"""Cone-bounded miter simulation and scan-structure integrity.

The miter materializes only logic inside the cone (plus any reserved-name
cells the mutation added there); everything feeding the cone from outside is
treated as a free input, which is the simulation analog of black-boxing the
rest of the design. Compare points are the cone's output boundary, and
constraint nets are pinned to constants in every simulated vector.
"""

from __future__ import annotations

from dataclasses import dataclass

from .miner import ConeOfInfluence
from .netlist import Netlist, PI_DRIVER
from .scan import DEFAULT_SCAN_PATTERNS, make_matcher
from .sim import (
    CompiledCone,
    compile_cells,
    exhaustive_streams,
    lane_assignment,
    random_streams,
    simulate,
)
from .templates import RESERVED_PREFIX

STATUS_EXHAUSTIVE = "equivalent_exhaustive"
STATUS_SAMPLED = "equivalent_sampled"
STATUS_MISMATCH = "mismatch"


class MiterError(Exception):
    pass


class InputSpaceExceeded(MiterError):
    """Free input count too large for exhaustive checking."""


@dataclass
class Verdict:
    status: str
    vectors_checked: int
    counterexample: dict | None = None
    note: str = ""
    seed: int | None = None
    unroll: int = 1

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "vectors_checked": self.vectors_checked,
            "counterexample": self.counterexample,
            "note": self.note,
            "seed": self.seed,
            "unroll": self.unroll,
        }

    @property
    def equivalent(self) -> bool:
        return self.status in (STATUS_EXHAUSTIVE, STATUS_SAMPLED)


@dataclass
class Miter:
    golden: CompiledCone
    mutated: CompiledCone
    shared_inputs: list[str]
    compare_points: list[str]
    constraints: list[tuple[str, int]]
    unroll: int


def _cone_closure(
    n: Netlist, coi: ConeOfInfluence, compare_points: list[str]
) -> list:
    """Cells computing the compare points, restricted to the cone.

    Walks drivers backward from the compare points; stops at the cone's
    input boundary and at any net outside the cone that is not rewrite-made
    (those become free inputs). CLK pins never extend the closure.
    """
    boundary_in = set(coi.boundary_in)
    cells = {}
    visited: set[str] = set()
    stack = sorted(compare_points, reverse=True)
    while stack:
        net = stack.pop()
        if net in visited:
            continue
        visited.add(net)
        if net in boundary_in:
            continue
        if net not in coi.node_set and not net.startswith(RESERVED_PREFIX):
            continue
        inst = n.drivers.get(net)
        if inst is None or inst == PI_DRIVER:
            continue
        cell = n.cells[inst]
        cells[inst] = cell
        for pin, src in cell.input_items():
            if pin == "CLK":
                continue
            if src not in visited:
                stack.append(src)
    return [cells[k] for k in sorted(cells)]


def build_miter(
    golden: Netlist,
    mutated: Netlist,
    coi: ConeOfInfluence,
    constraints: list[tuple[str, int]],
    unroll: int = 8,
) -> Miter:
    compare_points = list(coi.boundary_out)
    for cp in compare_points:
        if cp not in golden.nets or cp not in mutated.nets:
            raise MiterError(f"compare-point mismatch: {cp!r} missing")

    pinned = tuple(net for net, _ in constraints)
    g_cells = _cone_closure(golden, coi, compare_points)
    m_cells = _cone_closure(mutated, coi, compare_points)
    g_cone = compile_cells(g_cells, pinned=pinned)
    m_cone = compile_cells(m_cells, pinned=pinned)

    m_nets = (
        m_cone.computed
        | set(m_cone.inputs)
        | set(m_cone.state_nets)
        | set(pinned) & mutated.nets
    )
    for net, value in constraints:
        if net not in m_nets:
            raise MiterError(f"constraint on net not in cone: {net!r}")
        if value not in (0, 1):
            raise MiterError(f"constraint value for {net!r} must be 0 or 1")

    shared = sorted(set(g_cone.inputs) | set(m_cone.inputs))
    cycles = unroll if (g_cone.dffs or m_cone.dffs) else 1
    return Miter(
        golden=g_cone,
        mutated=m_cone,
        shared_inputs=shared,
        compare_points=compare_points,
        constraints=list(constraints),
        unroll=cycles,
    )


def _run_compare(m: Miter, streams, width: int):
    pins = dict(m.constraints)
    obs_g = [cp for cp in m.compare_points]
    golden_out = simulate(
        m.golden, streams, width, m.unroll, pinned=pins, observe=obs_g
    )
    mutated_out = simulate(
        m.mutated, streams, width, m.unroll, pinned=pins, observe=obs_g
    )
    return golden_out, mutated_out


def _first_mismatch(m: Miter, golden_out, mutated_out, streams, width):
    total = 0
    for cp in m.compare_points:
        for c in range(m.unroll):
            total |= golden_out[cp][c] ^ mutated_out[cp][c]
    if total == 0:
        return None
    lane = (total & -total).bit_length() - 1
    for c in range(m.unroll):
        for cp in m.compare_points:
            if (golden_out[cp][c] ^ mutated_out[cp][c]) >> lane & 1:
                return {
                    "inputs": lane_assignment(streams, m.unroll, lane),
                    "compare_point": cp,
                    "cycle": c,
                    "golden": (golden_out[cp][c] >> lane) & 1,
                    "mutated": (mutated_out[cp][c] >> lane) & 1,
                    "vector_index": lane,
                }
    raise AssertionError("mismatch lane vanished")


def check_exhaustive(m: Miter, max_free_inputs: int = 20) -> Verdict:
    """Simulate every assignment of the free inputs through both cones."""
    free = m.shared_inputs
    if len(free) > max_free_inputs:
        raise InputSpaceExceeded(
            f"{len(free)} free inputs exceed the exhaustive bound "
            f"{max_free_inputs}"
        )
    streams, width = exhaustive_streams(free, m.unroll)
    golden_out, mutated_out = _run_compare(m, streams, width)
    cex = _first_mismatch(m, golden_out, mutated_out, streams, width)
    if cex is None:
        return Verdict(STATUS_EXHAUSTIVE, vectors_checked=width, unroll=m.unroll)
    return Verdict(
        STATUS_MISMATCH, vectors_checked=width, counterexample=cex, unroll=m.unroll
    )


def check_random(m: Miter, n_vectors: int, seed: int) -> Verdict:
    """Sample uniform vectors; a clean pass is evidence, not proof."""
    if n_vectors < 1:
        raise ValueError("n_vectors must be >= 1")
    streams = random_streams(m.shared_inputs, m.unroll, n_vectors, seed)
    golden_out, mutated_out = _run_compare(m, streams, n_vectors)
    cex = _first_mismatch(m, golden_out, mutated_out, streams, n_vectors)
    if cex is None:
        note = (
            f"sampled {n_vectors} of 2^{len(m.shared_inputs)} assignments; "
            "equivalence not proven"
        )
        return Verdict(
            STATUS_SAMPLED,
            vectors_checked=n_vectors,
            note=note,
            seed=seed,
            unroll=m.unroll,
        )
    return Verdict(
        STATUS_MISMATCH,
        vectors_checked=n_vectors,
        counterexample=cex,
        seed=seed,
        unroll=m.unroll,
    )


def replay_counterexample(m: Miter, cex: dict):
    """Re-simulate one counterexample; returns per-compare-point bit streams."""
    streams = {net: list(vals) for net, vals in cex["inputs"].items()}
    pins = dict(m.constraints)
    obs = list(m.compare_points)
    g = simulate(m.golden, streams, 1, m.unroll, pinned=pins, observe=obs)
    t = simulate(m.mutated, streams, 1, m.unroll, pinned=pins, observe=obs)
    return g, t


def _scan_edges(n: Netlist, match) -> tuple[set[str], set[tuple]]:
    nets = {net for net in n.nets if match(net)}
    edges = set()
    for inst in n.cells:
        cell = n.cells[inst]
        out = cell.output_net()
        for idx, (pin, src) in enumerate(cell.input_items()):
            if match(src) or match(out):
                edges.add((src, out, inst, idx))
    return nets, edges


def scan_integrity(
    golden: Netlist, mutated: Netlist, scan_patterns=DEFAULT_SCAN_PATTERNS
) -> Verdict:
    """Compare the scan-matching subgraphs of both netlists by name."""
    match = make_matcher(scan_patterns)
    g_nets, g_edges = _scan_edges(golden, match)
    m_nets, m_edges = _scan_edges(mutated, match)
    if g_nets == m_nets and g_edges == m_edges:
        note = "scan subgraphs identical" if g_nets else "no scan nets; vacuously equal"
        return Verdict(STATUS_EXHAUSTIVE, vectors_checked=0, note=note)
    diff_edges = sorted(g_edges ^ m_edges)
    diff_nets = sorted(g_nets ^ m_nets)
    cex: dict = {}
    if diff_edges:
        src, out, inst, idx = diff_edges[0]
        cex["edge"] = {"from": src, "to": out, "instance": inst, "pin_index": idx}
        cex["present_in"] = "golden" if diff_edges[0] in g_edges else "mutated"
    if diff_nets:
        cex["net"] = diff_nets[0]
    return Verdict(STATUS_MISMATCH, vectors_checked=0, counterexample=cex)
