"""Two-valued, bit-parallel logic simulation.

Net values are arbitrary-precision ints used as lanes: bit i of a value is
the value of that net in vector i, so one pass evaluates every vector at
once. Flip-flops are cycle-based state elements (CLK pins are ignored,
every register updates once per cycle); an active-low RN pin gates the next
state with its AND. Registers start at 0.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .netlist import Cell


class SimError(Exception):
    pass


@dataclass
class CompiledCone:
    """A topologically ordered cell subset ready to simulate."""

    comb: list[Cell]
    dffs: list[Cell]
    inputs: list[str]  # free inputs: read but not computed, not state
    computed: set[str]
    state_nets: list[str]


def compile_cells(cells: list[Cell], pinned: tuple[str, ...] = ()) -> CompiledCone:
    comb = []
    dffs = []
    for c in cells:
        (dffs if c.kind.name == "DFF" else comb).append(c)
    computed = {c.output_net() for c in comb}
    state = sorted(c.output_net() for c in dffs)
    referenced: set[str] = set()
    for c in cells:
        for pin, net in c.input_items():
            if c.kind.name == "DFF" and pin == "CLK":
                continue
            referenced.add(net)
    free = sorted(
        referenced - computed - set(state) - set(pinned)
    )

    available = set(free) | set(state) | set(pinned)
    order: list[Cell] = []
    remaining = sorted(comb, key=lambda c: c.name)
    while remaining:
        progressed = []
        stuck = []
        for c in remaining:
            if all(net in available for net in c.input_nets()):
                progressed.append(c)
            else:
                stuck.append(c)
        if not progressed:
            names = ", ".join(c.name for c in stuck[:5])
            raise SimError(f"combinational cycle or dangling input near: {names}")
        for c in progressed:
            order.append(c)
            available.add(c.output_net())
        remaining = stuck
    return CompiledCone(
        comb=order, dffs=sorted(dffs, key=lambda c: c.name),
        inputs=free, computed=computed, state_nets=state,
    )


def _eval_cell(kind: str, ins: list[int], mask: int) -> int:
    if kind == "INV":
        return mask ^ ins[0]
    if kind == "BUF":
        return ins[0]
    if kind == "AND" or kind == "NAND":
        v = ins[0]
        for x in ins[1:]:
            v &= x
        return v if kind == "AND" else mask ^ v
    if kind == "OR" or kind == "NOR":
        v = ins[0]
        for x in ins[1:]:
            v |= x
        return v if kind == "OR" else mask ^ v
    if kind == "XOR" or kind == "XNOR":
        v = ins[0]
        for x in ins[1:]:
            v ^= x
        return v if kind == "XOR" else mask ^ v
    if kind == "MUX2":
        s, a, b = ins
        return ((mask ^ s) & a) | (s & b)
    raise SimError(f"cannot evaluate cell kind {kind!r}")


def simulate(
    cone: CompiledCone,
    streams: dict[str, list[int]],
    width: int,
    cycles: int,
    pinned: dict[str, int] | None = None,
    observe: list[str] | None = None,
) -> dict[str, list[int]]:
    """Run ``cycles`` steps over ``width`` parallel vectors.

    ``streams[net][cycle]`` gives the lane bits for a free input; pinned
    nets are forced to their constant each cycle, overriding any driver.
    Returns per-cycle lane values for the observed nets.
    """
    mask = (1 << width) - 1
    pins = {
        net: (mask if v else 0) for net, v in (pinned or {}).items()
    }
    if observe is None:
        observe = list(cone.computed)
    state = {q: 0 for q in cone.state_nets}
    out: dict[str, list[int]] = {net: [] for net in observe}

    for cyc in range(cycles):
        vals: dict[str, int] = {}
        for net in cone.inputs:
            try:
                vals[net] = streams[net][cyc] & mask
            except (KeyError, IndexError):
                raise SimError(f"no stream for free input {net!r} at cycle {cyc}")
        vals.update(state)
        vals.update(pins)
        for cell in cone.comb:
            v = _eval_cell(
                cell.kind.name, [vals[x] for x in cell.input_nets()], mask
            )
            o = cell.output_net()
            vals[o] = pins.get(o, v)
        for net in observe:
            if net not in vals:
                raise SimError(f"observed net {net!r} is not simulated")
            out[net].append(vals[net])
        nxt = {}
        for cell in cone.dffs:
            pm = cell.pin_map()
            d = vals.get(pm["D"])
            if d is None:
                raise SimError(f"DFF {cell.name} D net {pm['D']!r} unavailable")
            if "RN" in pm:
                d &= vals.get(pm["RN"], mask)
            q = cell.output_net()
            nxt[q] = pins.get(q, d)
        state.update(nxt)
    return out


def exhaustive_streams(inputs: list[str], cycles: int) -> tuple[dict[str, list[int]], int]:
    """Constant-held streams enumerating all 2^k assignments of ``inputs``.

    Input j's lane pattern alternates blocks of 2^j zeros and ones, so lane
    v carries assignment v in binary. Returns (streams, width).
    """
    k = len(inputs)
    width = 1 << k
    streams = {}
    for j, net in enumerate(inputs):
        block = 1 << j
        ones = ((1 << block) - 1) << block
        period = block * 2
        reps = width // period
        tile = ((1 << (period * reps)) - 1) // ((1 << period) - 1)
        streams[net] = [ones * tile] * cycles
    return streams, width


def random_streams(
    inputs: list[str], cycles: int, n_vectors: int, seed: int
) -> dict[str, list[int]]:
    """Per-cycle uniform lanes, deterministic in (inputs, cycles, n, seed)."""
    rng = random.Random(seed)
    return {
        net: [rng.getrandbits(n_vectors) for _ in range(cycles)]
        for net in inputs
    }


def lane_assignment(streams: dict[str, list[int]], cycles: int, lane: int) -> dict[str, list[int]]:
    """Extract one vector's per-cycle bits from lane ``lane``."""
    return {
        net: [(per_cycle[c] >> lane) & 1 for c in range(cycles)]
        for net, per_cycle in streams.items()
    }
