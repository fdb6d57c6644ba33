"""SCOAP testability scores and the rarity ranking built on them.

Standard combinational SCOAP: every net carries CC0/CC1 (effort to force it
to 0/1) and CO (effort to propagate it to an output). Inputs and register
outputs start at CC0=CC1=1; outputs and register inputs have CO=0. The
forward pass walks the combinational view in topological order, the backward
pass in reverse; multi-fanout nets take the cheapest branch. MUX2 cells are
scored through their AND/OR/INV decomposition. n-ary XOR/XNOR use a parity
min-cost fold, which for two inputs reduces to the usual pairwise mixed sums.

Rarity per net is ``max(CC0, CC1) + alpha * CO`` with alpha in [0.5, 1];
percentile ranks use average-rank tie handling so equal scores share a rank.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import CutGraph

SATURATION_CAP = 2**31 - 1


@dataclass
class ScoapScores:
    cc0: dict[str, int]
    cc1: dict[str, int]
    co: dict[str, int]
    saturated: bool = False


@dataclass
class RarityTable:
    alpha: float
    r: dict[str, float]
    pct: dict[str, float]


def _clamp(v: int, state: list[bool]) -> int:
    if v > SATURATION_CAP:
        state[0] = True
        return SATURATION_CAP
    return v


def _mux_forward(cc0, cc1, s, a, b):
    """Controllabilities of the virtual nets in MUX2 = OR(AND(~s,a), AND(s,b))."""
    ns0, ns1 = cc1[s] + 1, cc0[s] + 1
    t0_1 = ns1 + cc1[a] + 1
    t0_0 = min(ns0, cc0[a]) + 1
    t1_1 = cc1[s] + cc1[b] + 1
    t1_0 = min(cc0[s], cc0[b]) + 1
    y1 = min(t0_1, t1_1) + 1
    y0 = t0_0 + t1_0 + 1
    return (ns0, ns1), (t0_0, t0_1), (t1_0, t1_1), (y0, y1)


def compute_scoap(cg: CutGraph) -> ScoapScores:
    """Forward/backward SCOAP over the cut graph's combinational view."""
    cc0: dict[str, int] = {}
    cc1: dict[str, int] = {}
    sat = [False]
    sources = cg.sources()
    mux_cache: dict[str, tuple] = {}

    for v in cg.topo:
        ins = cg.comb_in[v]
        if not ins or v in sources:
            cc0[v] = cc1[v] = 1
            continue
        kind = cg.attrs[v].gate_class
        xs = [u for u, _, _ in sorted(ins, key=lambda e: e[2])]
        if kind == "INV":
            v0, v1 = cc1[xs[0]] + 1, cc0[xs[0]] + 1
        elif kind == "BUF":
            v0, v1 = cc0[xs[0]] + 1, cc1[xs[0]] + 1
        elif kind == "AND":
            v1 = sum(cc1[x] for x in xs) + 1
            v0 = min(cc0[x] for x in xs) + 1
        elif kind == "NAND":
            v0 = sum(cc1[x] for x in xs) + 1
            v1 = min(cc0[x] for x in xs) + 1
        elif kind == "OR":
            v0 = sum(cc0[x] for x in xs) + 1
            v1 = min(cc1[x] for x in xs) + 1
        elif kind == "NOR":
            v1 = sum(cc0[x] for x in xs) + 1
            v0 = min(cc1[x] for x in xs) + 1
        elif kind in ("XOR", "XNOR"):
            dp0, dp1 = cc0[xs[0]], cc1[xs[0]]
            for x in xs[1:]:
                dp0, dp1 = (
                    min(dp0 + cc0[x], dp1 + cc1[x]),
                    min(dp1 + cc0[x], dp0 + cc1[x]),
                )
            if kind == "XOR":
                v0, v1 = dp0 + 1, dp1 + 1
            else:
                v0, v1 = dp1 + 1, dp0 + 1
        elif kind == "MUX2":
            parts = _mux_forward(cc0, cc1, xs[0], xs[1], xs[2])
            mux_cache[v] = (xs, parts)
            v0, v1 = parts[3]
        else:
            raise ValueError(f"no SCOAP rule for gate class {kind!r} at {v!r}")
        cc0[v] = _clamp(v0, sat)
        cc1[v] = _clamp(v1, sat)

    co: dict[str, int] = {}
    sinks = cg.sinks()
    min_cc = lambda x: min(cc0[x], cc1[x])
    for v in reversed(cg.topo):
        if v in sinks:
            co[v] = 0
            continue
        best = None
        for y, _, pin in cg.comb_out[v]:
            kind = cg.attrs[y].gate_class
            xs = [u for u, _, _ in sorted(cg.comb_in[y], key=lambda e: e[2])]
            if kind in ("INV", "BUF"):
                c = co[y] + 1
            elif kind in ("AND", "NAND"):
                c = co[y] + sum(cc1[x] for i, x in enumerate(xs) if i != pin) + 1
            elif kind in ("OR", "NOR"):
                c = co[y] + sum(cc0[x] for i, x in enumerate(xs) if i != pin) + 1
            elif kind in ("XOR", "XNOR"):
                c = co[y] + sum(min_cc(x) for i, x in enumerate(xs) if i != pin) + 1
            elif kind == "MUX2":
                (s, a, b), (ns, t0, t1, _) = (
                    mux_cache[y][0],
                    mux_cache[y][1],
                )
                co_t0 = co[y] + t1[0] + 1
                co_t1 = co[y] + t0[0] + 1
                if pin == 1:  # A through AND(~s, a)
                    c = co_t0 + ns[1] + 1
                elif pin == 2:  # B through AND(s, b)
                    c = co_t1 + cc1[s] + 1
                else:  # S through the inverter or the B-side AND
                    c = min(co_t0 + cc1[a] + 1 + 1, co_t1 + cc1[b] + 1)
            else:
                raise ValueError(f"no SCOAP rule for gate class {kind!r} at {y!r}")
            if best is None or c < best:
                best = c
        if best is None:
            best = SATURATION_CAP
            sat[0] = True
        co[v] = _clamp(best, sat)

    return ScoapScores(cc0=cc0, cc1=cc1, co=co, saturated=sat[0])


def rarity(scores: ScoapScores, alpha: float = 1.0) -> RarityTable:
    """Combine controllability and observability into the rarity ranking."""
    if not 0.5 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0.5, 1]")
    r = {
        net: max(scores.cc0[net], scores.cc1[net]) + alpha * scores.co[net]
        for net in scores.cc0
    }
    pct = _percentiles(r)
    return RarityTable(alpha=alpha, r=r, pct=pct)


def _percentiles(r: dict[str, float]) -> dict[str, float]:
    n = len(r)
    if n == 0:
        return {}
    if n == 1:
        return {net: 100.0 for net in r}
    ordered = sorted(r.items(), key=lambda kv: (kv[1], kv[0]))
    pct: dict[str, float] = {}
    i = 0
    while i < n:
        j = i
        while j + 1 < n and ordered[j + 1][1] == ordered[i][1]:
            j += 1
        avg_rank = (i + j) / 2
        for k in range(i, j + 1):
            pct[ordered[k][0]] = avg_rank / (n - 1) * 100.0
        i = j + 1
    return pct


def scoap_csv(cg: CutGraph, scores: ScoapScores, rt: RarityTable) -> str:
    """Per-net CSV: ``net, cc0, cc1, co, r, pct, depth``."""
    lines = ["net,cc0,cc1,co,r,pct,depth"]
    for net in sorted(scores.cc0):
        lines.append(
            f"{net},{scores.cc0[net]},{scores.cc1[net]},{scores.co[net]},"
            f"{rt.r[net]:g},{rt.pct[net]:.6f},{cg.attrs[net].depth}"
        )
    return "\n".join(lines) + "\n"


def depth_rarity_histogram(
    cg: CutGraph, rt: RarityTable, bins: tuple[int, int] = (16, 16)
) -> list[list[int]]:
    """2-D counts over (depth bin, rarity-percentile bin).

    Depth bins are equal width over [0, max depth]; rarity bins equal width
    over [0, 100]. The matrix total equals the node count.
    """
    nd, nr = bins
    if nd < 1 or nr < 1:
        raise ValueError("bin counts must be positive")
    nets = list(rt.pct)
    if not nets:
        raise ValueError("empty graph")
    max_depth = max(cg.attrs[v].depth for v in nets)
    matrix = [[0] * nr for _ in range(nd)]
    for net in nets:
        d = cg.attrs[net].depth
        di = min(d * nd // (max_depth + 1), nd - 1)
        ri = min(int(rt.pct[net] / 100.0 * nr), nr - 1)
        matrix[di][ri] += 1
    return matrix


def heatmap_csv(matrix: list[list[int]]) -> str:
    lines = ["depth_bin,rarity_bin,count"]
    for di, row in enumerate(matrix):
        for ri, count in enumerate(row):
            lines.append(f"{di},{ri},{count}")
    return "\n".join(lines) + "\n"
