"""Rare-net candidate selection and cone-of-influence extraction."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .graph import CutGraph
from .scoap import RarityTable

FILTER_RECONV = "reconvergent_fanin"
FILTER_DISJOINT = "disjoint_branching"


@dataclass(frozen=True)
class FilterConfig:
    """Structural gates a percentile survivor must pass, plus a hard cap.

    ``max_fraction`` bounds the candidate list at ``max(1, floor(f*N))`` so
    candidate density stays in the sub-0.1% regime on large designs.
    """

    min_cone_overlap: float = 0.25
    min_branch_disjointness: float = 0.5
    max_fraction: float = 0.001


@dataclass(frozen=True)
class CandidateNet:
    net: str
    pct: float
    reasons: tuple[str, ...]


def select_rare(
    rt: RarityTable,
    cg: CutGraph,
    threshold_pct: float = 99.0,
    filters: FilterConfig | None = None,
) -> list[CandidateNet]:
    """Nets at or above the rarity percentile that look structurally stealthy.

    Result is sorted by descending percentile, ties broken by net name.
    """
    if not 0.0 <= threshold_pct < 100.0:
        raise ValueError(f"threshold_pct {threshold_pct} outside [0, 100)")
    if filters is None:
        filters = FilterConfig()
    out: list[CandidateNet] = []
    for net in sorted(rt.pct):
        pct = rt.pct[net]
        if pct < threshold_pct:
            continue
        sig = cg.reconv_signature(net)
        reasons = []
        if sig.overlap_max >= filters.min_cone_overlap:
            reasons.append(FILTER_RECONV)
        if sig.branch_disjointness >= filters.min_branch_disjointness:
            reasons.append(FILTER_DISJOINT)
        if reasons:
            out.append(CandidateNet(net=net, pct=pct, reasons=tuple(reasons)))
    out.sort(key=lambda c: (-c.pct, c.net))
    cap = max(1, int(filters.max_fraction * len(rt.pct)))
    return out[:cap]


def candidates_csv(candidates: list[CandidateNet]) -> str:
    lines = ["net,pct,filters_passed"]
    for c in candidates:
        lines.append(f"{c.net},{c.pct:.6f},{';'.join(c.reasons)}")
    return "\n".join(lines) + "\n"


@dataclass
class ConeMeta:
    size: int
    depth_to_interface: int
    depth_to_register: int
    reconv_descriptors: dict[str, float]
    rarity_stats: tuple[float, float, float] | None
    anchor_pct: float | None
    boundary_in_count: int
    boundary_out_count: int
    fan_stats: dict[str, float]
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "depth_to_interface": self.depth_to_interface,
            "depth_to_register": self.depth_to_register,
            "reconv_descriptors": self.reconv_descriptors,
            "rarity_stats": list(self.rarity_stats) if self.rarity_stats else None,
            "anchor_pct": self.anchor_pct,
            "boundary_in_count": self.boundary_in_count,
            "boundary_out_count": self.boundary_out_count,
            "fan_stats": self.fan_stats,
            "truncated": self.truncated,
        }


@dataclass
class ConeOfInfluence:
    anchor: str
    nodes: list[str]
    edges: list[tuple[str, str, str, int]]
    boundary_in: list[str]
    boundary_out: list[str]
    meta: ConeMeta
    node_set: set[str] = field(default_factory=set)

    @property
    def cone_id(self) -> str:
        return f"cone_{self.anchor}"


def extract_coi(
    cg: CutGraph,
    anchor: str,
    bounds: tuple[int, int] = (512, 8),
    rarity: RarityTable | None = None,
) -> ConeOfInfluence:
    """Register-bounded fan-in/fan-out cone around ``anchor``.

    Level-synchronous BFS alternating backward and forward, name-sorted per
    level, stopping at registers, design ports, the depth bound, or the node
    budget; truncation by budget is recorded in the metadata.
    """
    max_nodes, max_depth = bounds
    if max_nodes < 1 or max_depth < 1:
        raise ValueError("bounds must be positive")
    if anchor not in cg.attrs:
        raise ValueError(f"unknown anchor net {anchor!r}")

    sources = cg.sources()
    sinks = cg.sinks()
    nodes: set[str] = {anchor}
    level_of: dict[str, int] = {anchor: 0}
    truncated = False
    back_frontier = [anchor]
    fwd_frontier = [anchor]

    for depth in range(1, max_depth + 1):
        new_back: set[str] = set()
        if back_frontier:
            for v in back_frontier:
                if v != anchor and v in sources:
                    continue  # register/input boundary: do not cross
                for u, _, _ in cg.comb_in[v]:
                    if u not in nodes:
                        new_back.add(u)
        added_back = []
        for u in sorted(new_back):
            if len(nodes) >= max_nodes:
                truncated = True
                break
            nodes.add(u)
            level_of[u] = depth
            added_back.append(u)
        new_fwd: set[str] = set()
        if fwd_frontier:
            for v in fwd_frontier:
                if v != anchor and v in sinks:
                    continue
                for w, _, _ in cg.comb_out[v]:
                    if w not in nodes:
                        new_fwd.add(w)
        added_fwd = []
        for w in sorted(new_fwd):
            if len(nodes) >= max_nodes:
                truncated = True
                break
            nodes.add(w)
            level_of[w] = depth
            added_fwd.append(w)
        back_frontier = added_back
        fwd_frontier = added_fwd
        if not back_frontier and not fwd_frontier:
            break

    edges: list[tuple[str, str, str, int]] = []
    has_cone_in: set[str] = set()
    leaves_cone: set[str] = set()
    has_cone_out: set[str] = set()
    for v in sorted(nodes):
        for u, inst, pin in cg.comb_in[v]:
            if u in nodes:
                edges.append((u, v, inst, pin))
                has_cone_in.add(v)
        for w, _, _ in cg.comb_out[v]:
            if w in nodes:
                has_cone_out.add(v)
            else:
                leaves_cone.add(v)
    edges.sort()

    boundary_in = sorted(v for v in nodes if v not in has_cone_in)
    boundary_out = sorted(
        v
        for v in nodes
        if v in sinks or v in leaves_cone or v not in has_cone_out
    )

    interface = set(cg.graph.inputs) | set(cg.graph.outputs)
    registers = cg.pseudo_pis | cg.pseudo_pos
    d_int = min((level_of[v] for v in nodes if v in interface), default=-1)
    d_reg = min((level_of[v] for v in nodes if v in registers), default=-1)

    sigs = [cg.reconv_signature(v) for v in sorted(nodes)]
    reconv = {
        "overlap_max": max(s.overlap_max for s in sigs),
        "overlap_mean": sum(s.overlap_mean for s in sigs) / len(sigs),
        "disjointness_max": max(s.branch_disjointness for s in sigs),
        "disjointness_mean": sum(s.branch_disjointness for s in sigs) / len(sigs),
    }
    fanins = [cg.attrs[v].fanin for v in nodes]
    fanouts = [cg.attrs[v].fanout for v in nodes]
    fan_stats = {
        "fanin_mean": sum(fanins) / len(fanins),
        "fanin_max": float(max(fanins)),
        "fanout_mean": sum(fanouts) / len(fanouts),
        "fanout_max": float(max(fanouts)),
    }
    if rarity is not None:
        pcts = [rarity.pct[v] for v in nodes]
        stats = (min(pcts), float(statistics.median(pcts)), max(pcts))
        anchor_pct = rarity.pct[anchor]
    else:
        stats = None
        anchor_pct = None

    meta = ConeMeta(
        size=len(nodes),
        depth_to_interface=d_int,
        depth_to_register=d_reg,
        reconv_descriptors=reconv,
        rarity_stats=stats,
        anchor_pct=anchor_pct,
        boundary_in_count=len(boundary_in),
        boundary_out_count=len(boundary_out),
        fan_stats=fan_stats,
        truncated=truncated,
    )
    return ConeOfInfluence(
        anchor=anchor,
        nodes=sorted(nodes),
        edges=edges,
        boundary_in=boundary_in,
        boundary_out=boundary_out,
        meta=meta,
        node_set=set(nodes),
    )
