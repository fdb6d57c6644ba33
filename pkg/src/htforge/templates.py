"""Trigger/payload template library and its compilation into graph rewrites.

A template descriptor names a trigger family, a payload family, and concrete
parameters. Compiling one against a cone picks a victim net and tap nets
inside the cone and emits new cells implementing:

* a trigger network whose output is rarely 1 (inactive value 0), reading
  only tap nets (plus the design clock for sequential families), and
* a payload splice: the victim's driver is redirected onto a reserved-name
  net and a MUX2 re-drives the victim, selecting between that net (trigger
  inactive) and a shadow branch.

Every shadow branch recomputes the victim's own value (buffer chains,
double-XOR through a guard, and similar), so the splice is a pass-through
for *both* select values: the rewrite never alters user-visible function,
only the structural footprint mimics an active payload.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources

from .graph import CutGraph
from .miner import ConeOfInfluence
from .netlist import Cell, make_cell
from .scan import DEFAULT_SCAN_PATTERNS, make_matcher

RESERVED_PREFIX = "htx_"

TRIGGER_FAMILIES = (
    "SequenceFSM",
    "HammingProximity",
    "WatchdogTimer",
    "GlitchDetector",
    "HashCombo",
)
PAYLOAD_FAMILIES = (
    "PassThroughMux",
    "ShadowPath",
    "InertToggler",
    "GuardedOffset",
    "GuardedBitflip",
)
SEQUENTIAL_TRIGGERS = frozenset(
    {"SequenceFSM", "WatchdogTimer", "GlitchDetector"}
)
# payload families whose shadow branch reads a guard net twice
_TWO_LOAD_PAYLOADS = frozenset({"InertToggler", "GuardedOffset", "GuardedBitflip"})

LIBRARY_SCHEMA_VERSION = 1


class CompileError(Exception):
    """Template cannot be realized in the given cone."""


@dataclass(frozen=True)
class TemplateParams:
    tap_count: int
    local_depth: int
    fanout_growth_budget: int
    reconv_tolerance: float


@dataclass(frozen=True)
class TemplateDescriptor:
    id: str
    trigger_family: str
    payload_family: str
    params: TemplateParams

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "trigger_family": self.trigger_family,
            "payload_family": self.payload_family,
            "params": {
                "tap_count": self.params.tap_count,
                "local_depth": self.params.local_depth,
                "fanout_growth_budget": self.params.fanout_growth_budget,
                "reconv_tolerance": self.params.reconv_tolerance,
            },
        }


def validate_descriptor(d: TemplateDescriptor) -> list[str]:
    """Return violations by field name; empty list means valid."""
    v = []
    if not d.id:
        v.append("id: empty")
    if d.trigger_family not in TRIGGER_FAMILIES:
        v.append(f"trigger_family: unknown {d.trigger_family!r}")
    if d.payload_family not in PAYLOAD_FAMILIES:
        v.append(f"payload_family: unknown {d.payload_family!r}")
    p = d.params
    if not 2 <= p.tap_count <= 8:
        v.append(f"tap_count: {p.tap_count} outside 2..8")
    if not 1 <= p.local_depth <= 6:
        v.append(f"local_depth: {p.local_depth} outside 1..6")
    if not 1 <= p.fanout_growth_budget <= 4:
        v.append(f"fanout_growth_budget: {p.fanout_growth_budget} outside 1..4")
    if not 0.0 <= p.reconv_tolerance <= 1.0:
        v.append(f"reconv_tolerance: {p.reconv_tolerance} outside [0, 1]")
    return v


def validate_library(descriptors: list[TemplateDescriptor]) -> list[str]:
    violations = []
    seen = set()
    for d in descriptors:
        violations.extend(f"{d.id}: {msg}" for msg in validate_descriptor(d))
        if d.id in seen:
            violations.append(f"id: duplicate {d.id!r}")
        seen.add(d.id)
    return violations


def _descriptor_from_dict(obj: dict) -> TemplateDescriptor:
    p = obj["params"]
    return TemplateDescriptor(
        id=obj["id"],
        trigger_family=obj["trigger_family"],
        payload_family=obj["payload_family"],
        params=TemplateParams(
            tap_count=int(p["tap_count"]),
            local_depth=int(p["local_depth"]),
            fanout_growth_budget=int(p["fanout_growth_budget"]),
            reconv_tolerance=float(p["reconv_tolerance"]),
        ),
    )


def _load_descriptor_file(text: str, origin: str) -> list[TemplateDescriptor]:
    data = json.loads(text)
    if data.get("schema_version") != LIBRARY_SCHEMA_VERSION:
        raise ValueError(
            f"{origin}: schema_version must be {LIBRARY_SCHEMA_VERSION}"
        )
    return [_descriptor_from_dict(t) for t in data["templates"]]


def builtin_library() -> list[TemplateDescriptor]:
    """The packaged descriptor set; stable order, all valid."""
    text = (
        resources.files("htforge").joinpath("data/templates.json").read_text()
    )
    descriptors = _load_descriptor_file(text, "builtin templates.json")
    bad = validate_library(descriptors)
    if bad:
        raise ValueError(f"builtin library invalid: {bad}")
    return descriptors


def load_library(directory: str) -> list[TemplateDescriptor]:
    """Load descriptor JSON files from a directory (sorted file order)."""
    import pathlib

    descriptors = []
    for path in sorted(pathlib.Path(directory).glob("*.json")):
        descriptors.extend(_load_descriptor_file(path.read_text(), str(path)))
    bad = validate_library(descriptors)
    if bad:
        raise ValueError(f"template library invalid: {bad}")
    return descriptors


@dataclass
class GraphRewrite:
    """A compiled splice: new cells plus the victim redirection to apply."""

    template_id: str
    seed: int
    new_cells: list[Cell]
    new_nets: list[str]
    victim_net: str
    relocated_net: str  # reserved net that takes over the victim driver's output
    trigger_net: str
    taps: list[str]
    labels: dict[str, str]  # new net -> "trigger" | "payload"
    inactive_semantics: str

    @property
    def gate_delta(self) -> int:
        return len(self.new_cells)


class _Builder:
    def __init__(self, prefix: str, seed: int):
        self.prefix = prefix
        self.rng = random.Random(seed)
        self.cells: list[Cell] = []
        self.nets: list[str] = []
        self.labels: dict[str, str] = {}
        self._n = 0

    def mint(self, tag: str, role: str) -> str:
        name = f"{self.prefix}{tag}{self._n}"
        self._n += 1
        self.nets.append(name)
        self.labels[name] = role
        return name

    def cell(self, kind: str, ins: list[str], tag: str, role: str) -> str:
        out = self.mint(tag, role)
        inst = f"{self.prefix}g{len(self.cells)}"
        self.cells.append(make_cell(inst, kind, ins, out))
        return out

    def dff(self, d: str, clk: str, tag: str, role: str) -> str:
        out = self.mint(tag, role)
        inst = f"{self.prefix}g{len(self.cells)}"
        self.cells.append(make_cell(inst, "DFF", [d, clk], out))
        return out

    def and_tree(self, lits: list[str], tag: str, role: str) -> str:
        while len(lits) > 1:
            nxt = []
            for i in range(0, len(lits), 4):
                chunk = lits[i : i + 4]
                if len(chunk) == 1:
                    nxt.append(chunk[0])
                else:
                    nxt.append(self.cell("AND", chunk, tag, role))
            lits = nxt
        return lits[0]

    def comparator(self, taps: list[str], pattern: int, tag: str) -> str:
        """1 iff the taps spell ``pattern`` (bit i = taps[i])."""
        lits = []
        for i, t in enumerate(taps):
            if (pattern >> i) & 1:
                lits.append(t)
            else:
                lits.append(self.cell("INV", [t], tag, "trigger"))
        return self.and_tree(lits, tag, "trigger")

    def nonzero_pattern(self, bits: int) -> int:
        return self.rng.randrange(1, 1 << bits)


def _build_trigger(
    b: _Builder, family: str, taps: list[str], clock_net: str | None
) -> str:
    if family in SEQUENTIAL_TRIGGERS and clock_net is None:
        raise CompileError(f"{family} needs a clock net and none is configured")

    if family == "HammingProximity":
        return b.comparator(taps, b.nonzero_pattern(len(taps)), "t")

    if family == "HashCombo":
        folded = []
        i = 0
        while i + 1 < len(taps):
            folded.append(b.cell("XOR", [taps[i], taps[i + 1]], "h", "trigger"))
            i += 2
        if i < len(taps):
            folded.append(taps[i])
        return b.comparator(folded, b.nonzero_pattern(len(folded)), "t")

    if family == "GlitchDetector":
        x = taps[0]
        prev = b.dff(x, clock_net, "prev", "trigger")
        edge = b.cell(
            "AND", [x, b.cell("INV", [prev], "np", "trigger")], "edge", "trigger"
        )
        if len(taps) > 1:
            ctx = b.comparator(taps[1:], b.nonzero_pattern(len(taps) - 1), "c")
            return b.cell("AND", [edge, ctx], "t", "trigger")
        return edge

    if family == "WatchdogTimer":
        event = b.comparator(taps, b.nonzero_pattern(len(taps)), "e")
        quiet = b.cell("INV", [event], "q", "trigger")
        c0 = b.mint("cnt", "trigger")
        c1 = b.mint("cnt", "trigger")
        c2 = b.mint("cnt", "trigger")
        n0 = b.cell("INV", [c0], "n", "trigger")
        n1 = b.cell("XOR", [c1, c0], "n", "trigger")
        carry = b.cell("AND", [c1, c0], "cy", "trigger")
        n2 = b.cell("XOR", [c2, carry], "n", "trigger")
        for c, n in ((c0, n0), (c1, n1), (c2, n2)):
            d = b.cell("AND", [quiet, n], "d", "trigger")
            inst = f"{b.prefix}g{len(b.cells)}"
            b.cells.append(make_cell(inst, "DFF", [d, clock_net], c))
        return b.and_tree([c0, c1, c2], "t", "trigger")

    if family == "SequenceFSM":
        half = max(1, len(taps) // 2)
        m1 = b.comparator(taps[:half], b.nonzero_pattern(half), "m1")
        m2 = b.comparator(taps[half:], b.nonzero_pattern(len(taps) - half), "m2")
        s0 = b.mint("st", "trigger")
        s1 = b.mint("st", "trigger")
        ns0 = b.cell(
            "AND",
            [m1, b.cell("INV", [s1], "i", "trigger"), b.cell("INV", [s0], "i", "trigger")],
            "ns",
            "trigger",
        )
        ns1 = b.cell(
            "AND", [m2, s0, b.cell("INV", [s1], "i", "trigger")], "ns", "trigger"
        )
        for s, ns in ((s0, ns0), (s1, ns1)):
            inst = f"{b.prefix}g{len(b.cells)}"
            b.cells.append(make_cell(inst, "DFF", [ns, clock_net], s))
        return b.cell(
            "AND", [s1, b.cell("INV", [s0], "i", "trigger")], "t", "trigger"
        )

    raise CompileError(f"unknown trigger family {family!r}")


def _build_shadow(b: _Builder, family: str, src: str, guard: str, depth: int) -> str:
    if family == "PassThroughMux":
        return b.cell("BUF", [src], "sh", "payload")
    if family == "ShadowPath":
        pairs = depth // 2
        cur = src
        if pairs == 0:
            return b.cell("BUF", [src], "sh", "payload")
        for _ in range(pairs * 2):
            cur = b.cell("INV", [cur], "sh", "payload")
        return cur
    if family == "InertToggler":
        zero = b.cell("XOR", [guard, guard], "z", "payload")
        return b.cell("XOR", [src, zero], "sh", "payload")
    if family == "GuardedBitflip":
        x1 = b.cell("XOR", [src, guard], "sh", "payload")
        return b.cell("XOR", [x1, guard], "sh", "payload")
    if family == "GuardedOffset":
        x1 = b.cell("XNOR", [src, guard], "sh", "payload")
        return b.cell("XNOR", [x1, guard], "sh", "payload")
    raise CompileError(f"unknown payload family {family!r}")


def _descendants(cg: CutGraph, net: str) -> set[str]:
    seen = {net}
    stack = [net]
    while stack:
        u = stack.pop()
        for v, _, _ in cg.comb_out[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def compile_template(
    d: TemplateDescriptor,
    coi: ConeOfInfluence,
    seed: int,
    cg: CutGraph,
    clock_net: str | None = None,
    scan_patterns=DEFAULT_SCAN_PATTERNS,
) -> GraphRewrite:
    """Compile a descriptor against a cone into a concrete rewrite.

    Deterministic in (descriptor, cone, seed). The graph is needed to keep
    tap choices acyclic (no tap may be a descendant of the victim) and to
    identify spliceable drivers.
    """
    bad = validate_descriptor(d)
    if bad:
        raise CompileError(f"invalid descriptor: {bad}")
    p = d.params
    if d.payload_family in _TWO_LOAD_PAYLOADS and p.local_depth < 2:
        raise CompileError(
            f"payload {d.payload_family} needs local_depth >= 2"
        )
    is_scan = make_matcher(scan_patterns)

    def tappable(net: str) -> bool:
        return (
            not is_scan(net)
            and net != clock_net
            and not net.startswith(RESERVED_PREFIX)
        )

    pool = [n for n in coi.nodes if tappable(n)]
    if len(pool) - 1 < p.tap_count:  # victim itself is never a tap
        raise CompileError(
            f"cone too small: {len(pool)} tappable nets for "
            f"tap_count={p.tap_count}"
        )

    attrs = cg.attrs

    def spliceable(net: str) -> bool:
        return (
            tappable(net)
            and attrs[net].gate_class not in ("PI", "DFF")
            and net not in cg.pseudo_pis
        )

    victim_order = [coi.anchor] if spliceable(coi.anchor) else []
    victim_order += [n for n in coi.nodes if n != coi.anchor and spliceable(n)]
    if not victim_order:
        raise CompileError("no splice point: no cell-driven net in cone")

    victim = None
    taps: list[str] = []
    guard = None
    rng = random.Random(seed)
    for cand in victim_order:
        blocked = _descendants(cg, cand)
        avail = [n for n in pool if n not in blocked]
        if len(avail) < p.tap_count:
            continue
        victim = cand
        chosen = list(avail)
        rng.shuffle(chosen)
        taps = sorted(chosen[: p.tap_count])
        rest = chosen[p.tap_count :]
        guard = rest[0] if rest else taps[0]
        break
    if victim is None:
        raise CompileError(
            f"no splice point with {p.tap_count} non-downstream taps"
        )

    prefix = f"{RESERVED_PREFIX}{coi.anchor}_"
    b = _Builder(prefix, seed)
    trigger_net = _build_trigger(b, d.trigger_family, taps, clock_net)

    relocated = b.mint("orig", "payload")
    shadow = _build_shadow(b, d.payload_family, relocated, guard, p.local_depth)
    mux_inst = f"{prefix}g{len(b.cells)}"
    b.cells.append(
        make_cell(mux_inst, "MUX2", [trigger_net, relocated, shadow], victim)
    )

    new_nets = set(b.nets)
    loads: dict[str, int] = {}
    for cell in b.cells:
        for pin, net in cell.input_items():
            if pin == "CLK" or net in new_nets:
                continue
            loads[net] = loads.get(net, 0) + 1
    over = {n: c for n, c in loads.items() if c > p.fanout_growth_budget}
    if over:
        raise CompileError(
            f"fanout growth budget {p.fanout_growth_budget} exceeded on {over}"
        )

    return GraphRewrite(
        template_id=d.id,
        seed=seed,
        new_cells=b.cells,
        new_nets=list(b.nets),
        victim_net=victim,
        relocated_net=relocated,
        trigger_net=trigger_net,
        taps=taps,
        labels=b.labels,
        inactive_semantics=(
            f"when {trigger_net}=0 the splice mux selects {relocated}, the "
            f"relocated driver of {victim}; both branches recompute the same value"
        ),
    )
