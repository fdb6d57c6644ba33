"""Seeded circuit generators shared across the tests."""

from __future__ import annotations

import random

from htforge.graph import CircuitGraph
from htforge.netlist import Netlist, make_cell

C17_BENCH = """\
# c17
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""


def chain_netlist(length: int, kind: str = "INV", name: str = "chain") -> Netlist:
    """PI -> kind -> ... -> PO with ``length`` cells."""
    n = Netlist(name=name)
    n.add_input("n0")
    for i in range(length):
        n.add_cell(make_cell(f"u{i}", kind, [f"n{i}"], f"n{i+1}"))
    n.add_output(f"n{length}")
    n.validate()
    return n


def diamond_netlist() -> Netlist:
    """Classic reconvergent fan-out: one PI splits and re-merges."""
    n = Netlist(name="diamond")
    for p in ("a", "b"):
        n.add_input(p)
    n.add_cell(make_cell("u0", "INV", ["a"], "l"))
    n.add_cell(make_cell("u1", "AND", ["a", "b"], "r"))
    n.add_cell(make_cell("u2", "OR", ["l", "r"], "y"))
    n.add_output("y")
    n.validate()
    return n


def counter2_netlist() -> Netlist:
    """2-bit counter: 2 DFFs with INV/XOR feedback plus a clock."""
    n = Netlist(name="counter2")
    n.add_input("clk")
    n.add_cell(make_cell("inv0", "INV", ["q0"], "d0"))
    n.add_cell(make_cell("xor0", "XOR", ["q0", "q1"], "d1"))
    n.add_cell(make_cell("ff0", "DFF", ["d0", "clk"], "q0"))
    n.add_cell(make_cell("ff1", "DFF", ["d1", "clk"], "q1"))
    n.add_cell(make_cell("buf0", "BUF", ["q1"], "y"))
    n.add_output("y")
    n.validate()
    return n


_COMB_KINDS = ("INV", "BUF", "AND", "NAND", "OR", "NOR", "XOR", "XNOR", "MUX2")


def random_netlist(
    n_cells: int,
    seed: int,
    n_inputs: int = 6,
    p_dff: float = 0.0,
    name: str | None = None,
    with_scan: bool = False,
) -> Netlist:
    """Seeded random DAG circuit over the full cell vocabulary.

    Cells only read earlier nets, so the result is combinationally acyclic
    by construction. With ``p_dff`` some cells become registers clocked by a
    dedicated ``clk`` input.
    """
    rng = random.Random(seed)
    n = Netlist(name=name or f"rand{seed}")
    nets = []
    for i in range(n_inputs):
        net = f"pi{i}"
        n.add_input(net)
        nets.append(net)
    has_dff = p_dff > 0
    if has_dff:
        n.add_input("clk")
    if with_scan:
        n.add_input("scan_en")
        n.add_input("test_mode")
    for i in range(n_cells):
        out = f"w{i}"
        if has_dff and rng.random() < p_dff:
            d = rng.choice(nets)
            n.add_cell(make_cell(f"g{i}", "DFF", [d, "clk"], out))
        else:
            kind = rng.choice(_COMB_KINDS)
            if kind in ("INV", "BUF"):
                ins = [rng.choice(nets)]
            elif kind == "MUX2":
                ins = [rng.choice(nets) for _ in range(3)]
            elif kind in ("XOR", "XNOR"):
                ins = [rng.choice(nets) for _ in range(2)]
            else:
                ins = [rng.choice(nets) for _ in range(rng.randint(2, 4))]
            n.add_cell(make_cell(f"g{i}", kind, ins, out))
        nets.append(out)
    if with_scan:
        # a scan mux so the scan nets have sinks
        n.add_cell(make_cell("scanmux", "MUX2", ["scan_en", nets[-1], "test_mode"], "scan_out0"))
        n.add_output("scan_out0")
    # drain every sink net into the output list so nothing dangles
    driven_loads = set()
    for cell in n.cells.values():
        driven_loads.update(cell.input_nets())
    for net in nets:
        if net not in driven_loads:
            n.add_output(net)
    n.validate()
    return n


def clustered_netlist(
    n_clusters: int, seed: int, name: str | None = None
) -> Netlist:
    """Many small reconvergent motifs feeding shared mixing logic.

    Every cluster computes two functions of three locals that share one
    net and re-merge, which gives the merge net reconvergent fan-in; a
    fraction of cluster outputs pass through long XOR chains so rarity
    spreads out. Suitable as a mid-size mining target.
    """
    rng = random.Random(seed)
    n = Netlist(name=name or f"cluster{seed}")
    pis = []
    for i in range(max(8, n_clusters // 8)):
        net = f"pi{i}"
        n.add_input(net)
        pis.append(net)
    uid = 0

    def mint() -> str:
        nonlocal uid
        uid += 1
        return f"w{uid}"

    merges = []
    pool = list(pis)
    for c in range(n_clusters):
        a, b, d = (rng.choice(pool) for _ in range(3))
        left = mint()
        right = mint()
        merge = mint()
        n.add_cell(make_cell(f"c{c}_l", "AND", [a, b], left))
        n.add_cell(make_cell(f"c{c}_r", rng.choice(("OR", "NAND")), [b, d], right))
        n.add_cell(make_cell(f"c{c}_m", "XOR", [left, right], merge))
        deepen = mint()
        n.add_cell(make_cell(f"c{c}_d", "AND", [merge, rng.choice(pool)], deepen))
        merges.append(merge)
        pool.append(deepen)
        if len(pool) > 64:
            pool = pool[-64:]
    # XOR-chain a few merge nets so controllability accumulates
    cur = merges[0]
    for i, m in enumerate(merges[1 : max(2, n_clusters // 4)]):
        nxt = mint()
        n.add_cell(make_cell(f"mix{i}", "XOR", [cur, m], nxt))
        cur = nxt
    n.add_output(cur)
    driven_loads = set()
    for cell in n.cells.values():
        driven_loads.update(cell.input_nets())
    for net in sorted(n.nets):
        if net not in driven_loads and net not in n.outputs and net not in n.inputs:
            n.add_output(net)
    n.validate()
    return n


def ring_cone_graph() -> CircuitGraph:
    """The stylized two-ring cone: center fed by 6 inner nodes, each inner
    fed by two outer sources shared pairwise around the ring."""
    g = CircuitGraph(name="ring")
    outer = [f"o{i}" for i in range(6)]
    inner = [f"i{i}" for i in range(6)]
    for net in outer:
        g.add_node(net, "PI")
    for net in inner:
        g.add_node(net, "AND")
    g.add_node("center", "AND")
    g.inputs = list(outer)
    g.outputs = ["center"]
    for i in range(6):
        g.add_edge(inner[i], "center", "gc", i)
        g.add_edge(outer[i], inner[i], f"gi{i}", 0)
        g.add_edge(outer[(i + 1) % 6], inner[i], f"gi{i}", 1)
    for net, a in g.attrs.items():
        a.fanin = len(g.in_edges[net])
        a.fanout = len(g.out_edges[net])
    return g
