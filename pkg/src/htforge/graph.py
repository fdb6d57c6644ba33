"""Driver→load connectivity graph over nets, register cut, and node attributes.

Nodes are nets. For every cell input pin there is one edge from the net
feeding that pin to the cell's output net, tagged with the instance name and
pin index. The sequential cut removes edges that cross a flip-flop (edges
into a DFF-driven net): DFF Q nets become pseudo-inputs and DFF D nets
pseudo-outputs, leaving an acyclic combinational view.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .netlist import Netlist, PI_DRIVER


class GraphError(Exception):
    """Structural problem: combinational cycle, unknown net, and friends."""


@dataclass(frozen=True)
class ReconvSignature:
    """Local reconvergence summary at radius k.

    ``overlap_max``/``overlap_mean`` summarize the Jaccard overlap of the
    strict k-hop ancestor cones of each pair of in-edge sources.
    ``branch_disjointness`` is the fraction of fanout branch pairs whose
    k-hop forward cones do not intersect.
    """

    k: int
    overlap_max: float
    overlap_mean: float
    branch_disjointness: float


@dataclass
class NodeAttrs:
    gate_class: str
    fanin: int = 0
    fanout: int = 0
    depth: int = 0
    dist_to_po: int = -1
    dist_to_ff: int = -1
    reconv: ReconvSignature | None = None


# Caps keeping reconvergence signatures cheap on high-fanout nets; expansion
# order is name-sorted, so capping stays deterministic.
MAX_BRANCHES = 16
MAX_CONE_NODES = 341  # full 4-hop cone at arity 4: 1+4+16+64+256


@dataclass
class CircuitGraph:
    """Directed net-level connectivity with an edge→(instance, pin) map."""

    name: str = "graph"
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    attrs: dict[str, NodeAttrs] = field(default_factory=dict)
    in_edges: dict[str, list[tuple[str, str, int]]] = field(default_factory=dict)
    out_edges: dict[str, list[tuple[str, str, int]]] = field(default_factory=dict)
    edge_count: int = 0

    def add_node(self, net: str, gate_class: str = "PI") -> None:
        if net in self.attrs:
            raise GraphError(f"duplicate node {net!r}")
        self.attrs[net] = NodeAttrs(gate_class=gate_class)
        self.in_edges[net] = []
        self.out_edges[net] = []

    def add_edge(self, u: str, v: str, instance: str, pin_index: int) -> None:
        if u == v:
            raise GraphError(f"self-loop on {u!r}")
        if u not in self.attrs or v not in self.attrs:
            raise GraphError(f"edge references unknown net {u!r} or {v!r}")
        self.in_edges[v].append((u, instance, pin_index))
        self.out_edges[u].append((v, instance, pin_index))
        self.edge_count += 1

    def nodes(self) -> list[str]:
        return list(self.attrs)

    def driver_inputs(self, net: str) -> list[str]:
        """Input nets of the cell driving ``net``, in pin order."""
        return [u for u, _, _ in sorted(self.in_edges[net], key=lambda e: e[2])]


def build_graph(n: Netlist) -> CircuitGraph:
    """One node per net, one edge per cell input pin."""
    g = CircuitGraph(name=n.name, inputs=list(n.inputs), outputs=list(n.outputs))
    for net in sorted(n.nets):
        g.add_node(net, gate_class=n.driver_kind(net))
    for inst in sorted(n.cells):
        cell = n.cells[inst]
        out = cell.output_net()
        for idx, (_, src) in enumerate(cell.input_items()):
            g.add_edge(src, out, inst, idx)
    for net, a in g.attrs.items():
        a.fanin = len(g.in_edges[net])
        a.fanout = len(g.out_edges[net])
    return g


@dataclass
class CutGraph:
    """A CircuitGraph with flip-flop boundaries cut into pseudo-ports."""

    graph: CircuitGraph
    pseudo_pis: set[str]
    pseudo_pos: set[str]
    comb_in: dict[str, list[tuple[str, str, int]]]
    comb_out: dict[str, list[tuple[str, str, int]]]
    topo: list[str]
    k: int = 0
    _reconv_cache: dict[str, ReconvSignature] = field(default_factory=dict)

    @property
    def attrs(self) -> dict[str, NodeAttrs]:
        return self.graph.attrs

    def sources(self) -> set[str]:
        return set(self.graph.inputs) | self.pseudo_pis

    def sinks(self) -> set[str]:
        return set(self.graph.outputs) | self.pseudo_pos

    # -- reconvergence ------------------------------------------------------

    def _ancestors(self, net: str, hops: int) -> frozenset[str]:
        """Strict ancestor set of ``net`` within ``hops`` comb edges."""
        seen: set[str] = set()
        frontier = [net]
        for _ in range(hops):
            nxt: set[str] = set()
            for v in frontier:
                for u, _, _ in self.comb_in[v]:
                    if u not in seen and u != net:
                        nxt.add(u)
            nxt -= seen
            if not nxt:
                break
            for u in sorted(nxt):
                if len(seen) >= MAX_CONE_NODES:
                    break
                seen.add(u)
            if len(seen) >= MAX_CONE_NODES:
                break
            frontier = sorted(nxt)
        return frozenset(seen)

    def _forward_cone(self, net: str, hops: int) -> frozenset[str]:
        """Nets reachable from ``net`` within ``hops`` comb edges, inclusive."""
        seen: set[str] = {net}
        frontier = [net]
        for _ in range(hops - 1):
            nxt: set[str] = set()
            for u in frontier:
                for v, _, _ in self.comb_out[u]:
                    if v not in seen:
                        nxt.add(v)
            if not nxt:
                break
            for v in sorted(nxt):
                if len(seen) >= MAX_CONE_NODES:
                    break
                seen.add(v)
            if len(seen) >= MAX_CONE_NODES:
                break
            frontier = sorted(nxt)
        return frozenset(seen)

    def reconv_signature(self, net: str) -> ReconvSignature:
        sig = self._reconv_cache.get(net)
        if sig is not None:
            return sig
        k = self.k
        srcs = [u for u, _, _ in sorted(self.comb_in[net])]
        overlaps: list[float] = []
        cones = {u: self._ancestors(u, k) for u in set(srcs)}
        for i in range(len(srcs)):
            for j in range(i + 1, len(srcs)):
                a, b = cones[srcs[i]], cones[srcs[j]]
                union = len(a | b)
                overlaps.append(len(a & b) / union if union else 0.0)
        branches = sorted((v for v, _, _ in self.comb_out[net]))[:MAX_BRANCHES]
        fwd = {v: self._forward_cone(v, k) for v in set(branches)}
        disjoint = 0
        pairs = 0
        for i in range(len(branches)):
            for j in range(i + 1, len(branches)):
                pairs += 1
                if not (fwd[branches[i]] & fwd[branches[j]]):
                    disjoint += 1
        sig = ReconvSignature(
            k=k,
            overlap_max=max(overlaps) if overlaps else 0.0,
            overlap_mean=sum(overlaps) / len(overlaps) if overlaps else 0.0,
            branch_disjointness=disjoint / pairs if pairs else 0.0,
        )
        self._reconv_cache[net] = sig
        self.attrs[net].reconv = sig
        return sig


def _find_cycle(comb_in, candidates: set[str]) -> list[str]:
    """Return one cycle's node list among nodes that never became ready."""
    start = min(candidates)
    path = [start]
    index = {start: 0}
    cur = start
    while True:
        nxt = None
        for u, _, _ in sorted(comb_in[cur]):
            if u in candidates:
                nxt = u
                break
        assert nxt is not None, "stuck node without in-edge cannot be cyclic"
        if nxt in index:
            return list(reversed(path[index[nxt]:]))
        index[nxt] = len(path)
        path.append(nxt)
        cur = nxt


def sequential_cut(g: CircuitGraph) -> CutGraph:
    """Cut at flip-flops; raise GraphError if a combinational cycle remains."""
    pseudo_pis: set[str] = set()
    pseudo_pos: set[str] = set()
    comb_in: dict[str, list[tuple[str, str, int]]] = {}
    comb_out: dict[str, list[tuple[str, str, int]]] = {v: [] for v in g.attrs}
    for v, a in g.attrs.items():
        if a.gate_class == "DFF":
            pseudo_pis.add(v)
            comb_in[v] = []
            for u, inst, pin in g.in_edges[v]:
                if pin == 0:  # D pin
                    pseudo_pos.add(u)
        else:
            comb_in[v] = list(g.in_edges[v])
            for u, inst, pin in g.in_edges[v]:
                comb_out[u].append((v, inst, pin))

    # level-by-level Kahn, each wave name-sorted for a stable order
    pending = {v: len(es) for v, es in comb_in.items()}
    wave = sorted(v for v, c in pending.items() if c == 0)
    topo: list[str] = []
    while wave:
        topo.extend(wave)
        nxt = []
        for u in wave:
            for v, _, _ in comb_out[u]:
                pending[v] -= 1
                if pending[v] == 0:
                    nxt.append(v)
        wave = sorted(set(nxt))
    if len(topo) != len(g.attrs):
        stuck = {v for v, c in pending.items() if c > 0}
        cycle = _find_cycle(comb_in, stuck)
        raise GraphError(f"combinational cycle: {' -> '.join(cycle)}")
    return CutGraph(
        graph=g,
        pseudo_pis=pseudo_pis,
        pseudo_pos=pseudo_pos,
        comb_in=comb_in,
        comb_out=comb_out,
        topo=topo,
    )


def annotate(cg: CutGraph, k: int = 4, reconv_nets=None) -> CutGraph:
    """Fill NodeAttrs over the combinational view.

    depth is the longest distance from any (pseudo-)input; dist_to_po the
    shortest distance to any (pseudo-)output; dist_to_ff the shortest
    distance to a register boundary in either direction (-1 if none).
    Reconvergence signatures are computed for ``reconv_nets`` (all nets when
    None); any net left out is computed lazily via ``reconv_signature``.
    """
    cg.k = k
    g = cg.graph
    attrs = g.attrs
    for net, a in attrs.items():
        a.fanin = len(g.in_edges[net])
        a.fanout = len(g.out_edges[net])

    for v in cg.topo:
        ins = cg.comb_in[v]
        attrs[v].depth = (
            max(attrs[u].depth for u, _, _ in ins) + 1 if ins else 0
        )

    sinks = cg.sinks()
    for v in reversed(cg.topo):
        outs = cg.comb_out[v]
        if v in sinks:
            attrs[v].dist_to_po = 0
            continue
        best = -1
        for w, _, _ in outs:
            d = attrs[w].dist_to_po
            if d >= 0 and (best < 0 or d + 1 < best):
                best = d + 1
        attrs[v].dist_to_po = best

    # distance to register boundary: forward to a pseudo-PO, backward from a
    # pseudo-PI, whichever is closer
    fwd_ff = {v: (0 if v in cg.pseudo_pos else -1) for v in attrs}
    for v in reversed(cg.topo):
        if fwd_ff[v] == 0:
            continue
        best = -1
        for w, _, _ in cg.comb_out[v]:
            d = fwd_ff[w]
            if d >= 0 and (best < 0 or d + 1 < best):
                best = d + 1
        fwd_ff[v] = best
    bwd_ff = {v: (0 if v in cg.pseudo_pis else -1) for v in attrs}
    for v in cg.topo:
        if bwd_ff[v] == 0:
            continue
        best = -1
        for u, _, _ in cg.comb_in[v]:
            d = bwd_ff[u]
            if d >= 0 and (best < 0 or d + 1 < best):
                best = d + 1
        bwd_ff[v] = best
    for v in attrs:
        cands = [d for d in (fwd_ff[v], bwd_ff[v]) if d >= 0]
        attrs[v].dist_to_ff = min(cands) if cands else -1

    if reconv_nets is None:
        reconv_nets = cg.topo
    for net in reconv_nets:
        cg.reconv_signature(net)
    return cg


def dump_edges(g: CircuitGraph) -> str:
    """Edge-list text: ``u v instance pin_index`` per line, sorted."""
    rows = []
    for v, edges in g.in_edges.items():
        for u, inst, pin in edges:
            rows.append((u, v, inst, pin))
    rows.sort()
    return "".join(f"{u} {v} {inst} {pin}\n" for u, v, inst, pin in rows)


def dump_attrs_csv(cg: CutGraph) -> str:
    """Node-attribute CSV over the annotated cut graph."""
    lines = [
        "net,gate_class,fanin,fanout,depth,dist_to_po,dist_to_ff,"
        "overlap_max,overlap_mean,branch_disjointness"
    ]
    for net in sorted(cg.attrs):
        a = cg.attrs[net]
        sig = a.reconv or cg.reconv_signature(net)
        lines.append(
            f"{net},{a.gate_class},{a.fanin},{a.fanout},{a.depth},"
            f"{a.dist_to_po},{a.dist_to_ff},{sig.overlap_max:.6f},"
            f"{sig.overlap_mean:.6f},{sig.branch_disjointness:.6f}"
        )
    return "\n".join(lines) + "\n"
