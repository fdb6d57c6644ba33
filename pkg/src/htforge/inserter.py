"""Guarded application of compiled rewrites onto a netlist, with labels.

plan_insertion evaluates every static guardrail and produces an applicable
plan only when all of them pass; apply is copy-on-write and returns the
trojanized netlist together with a per-net label partition; rollback is the
exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .miner import ConeOfInfluence
from .netlist import Cell, Netlist, PI_DRIVER, NetlistError
from .scan import DEFAULT_SCAN_PATTERNS, make_matcher
from .templates import GraphRewrite, RESERVED_PREFIX

LABEL_CLEAN = "clean"
LABEL_TRIGGER = "trigger"
LABEL_PAYLOAD = "payload"
LABEL_CONTEXT = "coi_context"


class InsertionError(Exception):
    pass


@dataclass
class InsertionPlan:
    rewrite: GraphRewrite
    cone_id: str
    guardrail_report: dict[str, dict]
    gate_delta: int
    applied: bool = False

    def all_passed(self) -> bool:
        return all(entry["passed"] for entry in self.guardrail_report.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.guardrail_report.items() if not v["passed"]]


@dataclass
class LabelSet:
    labels: dict[str, str]
    cones: dict[str, list[str]] = field(default_factory=dict)

    def to_csv(self) -> str:
        owner: dict[str, str] = {}
        for cone_id, members in self.cones.items():
            for net in members:
                owner[net] = cone_id
        lines = ["net,label,cone_id"]
        for net in sorted(self.labels):
            label = self.labels[net]
            cid = owner.get(net, "") if label != LABEL_CLEAN else ""
            lines.append(f"{net},{label},{cid}")
        return "\n".join(lines) + "\n"


def default_gate_budget(n: Netlist) -> int:
    return max(32, len(n.cells) // 1000)


def _comb_fanout_index(n: Netlist) -> dict[str, list[str]]:
    """net -> nets it combinationally feeds (DFF cells break the path)."""
    adj: dict[str, list[str]] = {}
    for cell in n.cells.values():
        if cell.kind.name == "DFF":
            continue
        out = cell.output_net()
        for net in cell.input_nets():
            adj.setdefault(net, []).append(out)
    return adj


def plan_insertion(
    n: Netlist,
    coi: ConeOfInfluence,
    rw: GraphRewrite,
    budget: int,
    scan_patterns=DEFAULT_SCAN_PATTERNS,
) -> InsertionPlan:
    """Evaluate the static guardrails for splicing ``rw`` into ``n``."""
    report: dict[str, dict] = {}
    is_scan = make_matcher(scan_patterns)
    new_net_set = set(rw.new_nets)

    def entry(name: str, passed: bool, detail: str) -> None:
        report[name] = {"passed": passed, "detail": detail}

    victim_ok = (
        rw.victim_net in n.nets
        and n.drivers.get(rw.victim_net) not in (None, PI_DRIVER)
        and rw.victim_net not in n.inputs
    )
    outputs_ok = all(
        c.output_net() in new_net_set or c.output_net() == rw.victim_net
        for c in rw.new_cells
    )
    entry(
        "interface",
        victim_ok and outputs_ok,
        "PI/PO lists untouched; victim is cell-driven"
        if victim_ok and outputs_ok
        else f"victim {rw.victim_net!r} not spliceable or rewrite drives foreign nets",
    )

    touched = set()
    for c in rw.new_cells:
        touched.add(c.output_net())
        touched.update(c.input_nets())
    scan_hits = sorted(net for net in touched if is_scan(net))
    entry(
        "scan",
        not scan_hits,
        "no scan/test net referenced" if not scan_hits else f"touches {scan_hits}",
    )

    delta = len(rw.new_cells)
    entry(
        "budget",
        delta <= budget,
        f"gate_delta {delta} within budget {budget}"
        if delta <= budget
        else f"gate_delta {delta} exceeds budget {budget}",
    )

    collisions = sorted(net for net in new_net_set if net in n.nets)
    dup_insts = sorted(c.name for c in rw.new_cells if c.name in n.cells)
    victim_drivers = [
        c.name for c in rw.new_cells if c.output_net() == rw.victim_net
    ]
    seen_out: set[str] = set()
    double_out = []
    for c in rw.new_cells:
        if c.output_net() in seen_out:
            double_out.append(c.output_net())
        seen_out.add(c.output_net())
    one_driver_ok = (
        not collisions
        and not dup_insts
        and not double_out
        and len(victim_drivers) == 1
        and rw.relocated_net in new_net_set
    )
    entry(
        "one_driver",
        one_driver_ok,
        "splice preserves single-driver invariant"
        if one_driver_ok
        else f"collisions={collisions} dup_inst={dup_insts} "
        f"double_out={double_out} victim_drivers={victim_drivers}",
    )

    # No existing net read by the rewrite may sit downstream of the victim,
    # otherwise the splice would close a combinational loop.
    reads = {
        net
        for c in rw.new_cells
        for pin, net in c.input_items()
        if pin != "CLK" and net not in new_net_set
    }
    adj = _comb_fanout_index(n)
    reachable: set[str] = set()
    stack = [rw.victim_net]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in reachable:
                reachable.add(v)
                stack.append(v)
    loops = sorted(reads & reachable)
    entry(
        "acyclic",
        not loops,
        "no tap downstream of victim"
        if not loops
        else f"taps downstream of victim: {loops}",
    )

    return InsertionPlan(
        rewrite=rw,
        cone_id=coi.cone_id,
        guardrail_report=report,
        gate_delta=delta,
    )


def apply(n: Netlist, plan: InsertionPlan, coi: ConeOfInfluence | None = None):
    """Apply a fully-passed plan copy-on-write.

    Returns (trojanized netlist, LabelSet). The input netlist is untouched.
    """
    if not plan.all_passed():
        raise InsertionError(f"guardrails failed: {plan.failures()}")
    rw = plan.rewrite
    t = n.copy()
    driver_inst = t.drivers[rw.victim_net]
    old_driver = t.cells[driver_inst]
    out_pin = old_driver.kind.output_pin()
    moved = Cell(
        old_driver.name,
        old_driver.kind,
        tuple(
            (pin, rw.relocated_net if pin == out_pin else net)
            for pin, net in old_driver.pins
        ),
    )
    t.replace_cell(moved)
    for cell in rw.new_cells:
        t.add_cell(cell)
    try:
        t.validate()
    except NetlistError as e:
        raise InsertionError(f"post-apply invariant violation: {e}") from e

    labels = {net: LABEL_CLEAN for net in t.nets}
    members: list[str] = []
    if coi is not None:
        for net in coi.nodes:
            labels[net] = LABEL_CONTEXT
            members.append(net)
    for net, role in rw.labels.items():
        labels[net] = role
        members.append(net)
    cones = {plan.cone_id: sorted(set(members))}
    plan.applied = True
    return t, LabelSet(labels=labels, cones=cones)


def rollback(n: Netlist, plan: InsertionPlan) -> Netlist:
    """Undo a previously applied plan on its working copy."""
    if not plan.applied:
        raise InsertionError("plan was not applied")
    rw = plan.rewrite
    t = n.copy()
    for cell in rw.new_cells:
        t.remove_cell(cell.name)
    driver_inst = t.drivers.get(rw.relocated_net)
    if driver_inst is None:
        raise InsertionError(f"relocated net {rw.relocated_net!r} has no driver")
    moved = t.cells[driver_inst]
    out_pin = moved.kind.output_pin()
    restored = Cell(
        moved.name,
        moved.kind,
        tuple(
            (pin, rw.victim_net if pin == out_pin else net)
            for pin, net in moved.pins
        ),
    )
    t.replace_cell(restored)
    t.nets -= set(rw.new_nets)
    t.validate()
    plan.applied = False
    return t


def build_labels(n: Netlist, accepted: list[tuple[ConeOfInfluence, GraphRewrite]]) -> LabelSet:
    """Label partition for a netlist carrying several accepted insertions."""
    labels = {net: LABEL_CLEAN for net in n.nets}
    cones: dict[str, list[str]] = {}
    for coi, rw in accepted:
        members = []
        for net in coi.nodes:
            if net in labels and labels[net] == LABEL_CLEAN:
                labels[net] = LABEL_CONTEXT
            members.append(net)
        for net, role in rw.labels.items():
            labels[net] = role
            members.append(net)
        cones[coi.cone_id] = sorted(set(members))
    return LabelSet(labels=labels, cones=cones)
