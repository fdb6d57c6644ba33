"""Independent reference implementations used only to check the package.

Everything here works straight off the Netlist cell list with its own
bookkeeping: a fixpoint testability evaluator (no topological order) and a
numpy-based whole-design simulator. Neither touches htforge.graph,
htforge.scoap, or htforge.sim internals.
"""

from __future__ import annotations

import numpy as np

from htforge.netlist import Netlist, PI_DRIVER

INF = 10**12


def _expand_gates(n: Netlist):
    """Per-net gate list with MUX2 decomposed into INV/AND/AND/OR.

    Returns (gates, input_like, output_like): gates maps each driven net to
    (func, input nets); input-like nets are PIs and register outputs;
    output-like nets are POs and register D inputs.
    """
    gates: dict[str, tuple[str, list[str]]] = {}
    input_like = set(n.inputs)
    output_like = set(n.outputs)
    for cell in n.cells.values():
        kind = cell.kind.name
        pins = cell.pin_map()
        out = cell.output_net()
        if kind == "DFF":
            input_like.add(out)
            output_like.add(pins["D"])
            continue
        if kind == "MUX2":
            s, a, b = pins["S"], pins["A"], pins["B"]
            ns = f"@{cell.name}.ns"
            t0 = f"@{cell.name}.t0"
            t1 = f"@{cell.name}.t1"
            gates[ns] = ("INV", [s])
            gates[t0] = ("AND", [ns, a])
            gates[t1] = ("AND", [s, b])
            gates[out] = ("OR", [t0, t1])
            continue
        gates[out] = (kind, [net for _, net in cell.input_items()])
    return gates, input_like, output_like


def scoap_fixpoint(n: Netlist):
    """Naive testability evaluation by repeated sweeps until nothing changes.

    Returns (cc0, cc1, co) dicts covering the real nets of ``n``.
    """
    gates, input_like, output_like = _expand_gates(n)
    nets = set(n.nets) | set(gates)
    cc0 = {net: INF for net in nets}
    cc1 = {net: INF for net in nets}
    for net in input_like:
        cc0[net] = cc1[net] = 1

    def comb(func, ins):
        i0 = [cc0[x] for x in ins]
        i1 = [cc1[x] for x in ins]
        if any(v >= INF for v in i0 + i1):
            return INF, INF
        if func == "INV":
            return i1[0] + 1, i0[0] + 1
        if func == "BUF":
            return i0[0] + 1, i1[0] + 1
        if func == "AND":
            return min(i0) + 1, sum(i1) + 1
        if func == "NAND":
            return sum(i1) + 1, min(i0) + 1
        if func == "OR":
            return sum(i0) + 1, min(i1) + 1
        if func == "NOR":
            return min(i1) + 1, sum(i0) + 1
        if func in ("XOR", "XNOR"):
            even, odd = i0[0], i1[0]
            for z, o in zip(i0[1:], i1[1:]):
                even, odd = min(even + z, odd + o), min(odd + z, even + o)
            return (even, odd) if func == "XOR" else (odd, even)
        raise AssertionError(func)

    changed = True
    while changed:
        changed = False
        for out, (func, ins) in gates.items():
            if out in input_like:
                continue
            v0, v1 = comb(func, ins)
            if (v0, v1) != (cc0[out], cc1[out]):
                cc0[out], cc1[out] = v0, v1
                changed = True

    co = {net: INF for net in nets}
    for net in output_like:
        co[net] = 0
    loads: dict[str, list[tuple[str, int]]] = {}
    for out, (func, ins) in gates.items():
        for idx, x in enumerate(ins):
            loads.setdefault(x, []).append((out, idx))

    changed = True
    while changed:
        changed = False
        for net in nets:
            best = 0 if net in output_like else INF
            for out, idx in loads.get(net, ()):
                if co[out] >= INF:
                    continue
                func, ins = gates[out]
                sibs = [x for i, x in enumerate(ins) if i != idx]
                if func in ("INV", "BUF"):
                    c = co[out] + 1
                elif func in ("AND", "NAND"):
                    c = co[out] + sum(cc1[x] for x in sibs) + 1
                elif func in ("OR", "NOR"):
                    c = co[out] + sum(cc0[x] for x in sibs) + 1
                else:  # XOR / XNOR
                    c = co[out] + sum(min(cc0[x], cc1[x]) for x in sibs) + 1
                if any(cc1[x] >= INF or cc0[x] >= INF for x in sibs):
                    c = INF
                best = min(best, c)
            if best < co[net]:
                co[net] = best
                changed = True

    real = set(n.nets)
    return (
        {k: v for k, v in cc0.items() if k in real},
        {k: v for k, v in cc1.items() if k in real},
        {k: v for k, v in co.items() if k in real},
    )


def kahn_order(n: Netlist) -> list[str] | None:
    """Topological order of the combinational net graph, None on a cycle."""
    succ: dict[str, list[str]] = {net: [] for net in n.nets}
    indeg = {net: 0 for net in n.nets}
    for cell in n.cells.values():
        if cell.kind.name == "DFF":
            continue
        out = cell.output_net()
        for x in cell.input_nets():
            succ[x].append(out)
            indeg[out] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return order if len(order) == len(n.nets) else None


class DesignSim:
    """Whole-design cycle simulator over numpy bool lanes."""

    _FUNCS = {
        "INV": lambda v: ~v[0],
        "BUF": lambda v: v[0],
        "AND": lambda v: np.logical_and.reduce(v),
        "NAND": lambda v: ~np.logical_and.reduce(v),
        "OR": lambda v: np.logical_or.reduce(v),
        "NOR": lambda v: ~np.logical_or.reduce(v),
        "XOR": lambda v: np.logical_xor.reduce(v),
        "XNOR": lambda v: ~np.logical_xor.reduce(v),
        "MUX2": lambda v: np.where(v[0], v[2], v[1]),
    }

    def __init__(self, n: Netlist):
        self.n = n
        order = kahn_order(n)
        assert order is not None, "design has a combinational cycle"
        pos = {net: i for i, net in enumerate(order)}
        self.comb = sorted(
            (c for c in n.cells.values() if c.kind.name != "DFF"),
            key=lambda c: pos[c.output_net()],
        )
        self.dffs = sorted(
            (c for c in n.cells.values() if c.kind.name == "DFF"),
            key=lambda c: c.name,
        )

    def run(
        self,
        pi_streams: dict[str, np.ndarray],
        cycles: int,
        pinned: dict[str, int] | None = None,
    ) -> dict[str, list[np.ndarray]]:
        """Returns PO value arrays per cycle. Streams are bool arrays."""
        pins = pinned or {}
        widths = {len(v) for v in pi_streams.values()} or {1}
        width = widths.pop()
        state = {
            c.output_net(): np.zeros(width, dtype=bool) for c in self.dffs
        }
        outs: dict[str, list[np.ndarray]] = {po: [] for po in self.n.outputs}
        for cyc in range(cycles):
            vals: dict[str, np.ndarray] = {}
            for net in self.n.inputs:
                vals[net] = pi_streams[net]
            vals.update(state)
            for net, v in pins.items():
                vals[net] = np.full(width, bool(v))
            for cell in self.comb:
                ins = [vals[x] for x in cell.input_nets()]
                v = self._FUNCS[cell.kind.name](ins)
                out_net = cell.output_net()
                vals[out_net] = (
                    np.full(width, bool(pins[out_net]))
                    if out_net in pins
                    else v
                )
            for po in self.n.outputs:
                outs[po].append(vals[po].copy())
            nxt = {}
            for cell in self.dffs:
                pm = cell.pin_map()
                d = vals[pm["D"]]
                if "RN" in pm:
                    d = d & vals[pm["RN"]]
                q = cell.output_net()
                nxt[q] = (
                    np.full(width, bool(pins[q])) if q in pins else d.copy()
                )
            state = nxt
        return outs


def all_input_matrix(k: int) -> np.ndarray:
    """(2^k, k) bool matrix enumerating every assignment."""
    n = 1 << k
    idx = np.arange(n, dtype=np.uint32)
    return ((idx[:, None] >> np.arange(k, dtype=np.uint32)[None, :]) & 1).astype(bool)


def exhaustive_po_streams(
    n: Netlist, cycles: int = 1, pinned: dict[str, int] | None = None
) -> dict[str, list[np.ndarray]]:
    """PO streams for all PI assignments held constant over the cycles."""
    free = [p for p in n.inputs if not (pinned and p in pinned)]
    mat = all_input_matrix(len(free))
    streams = {net: mat[:, j] for j, net in enumerate(free)}
    for p in n.inputs:
        if pinned and p in pinned:
            streams[p] = np.full(mat.shape[0], bool(pinned[p]))
    return DesignSim(n).run(streams, cycles, pinned=pinned)
