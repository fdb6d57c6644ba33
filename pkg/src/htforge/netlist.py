"""Gate-level netlist model and readers/writers.

Two text formats are supported:

* ISCAS-style ``.bench``: ``INPUT(n)`` / ``OUTPUT(n)`` declarations and
  ``out = FUNC(in, ...)`` assignments, ``#`` comments.
* A restricted structural-Verilog subset: a single module containing only
  ``input``/``output``/``wire`` declarations and instantiations of the
  fixed cell vocabulary below, with named or positional pin connections.
  No expressions, no ``assign``, no ``always`` blocks, no buses.

Cell vocabulary (the only cells accepted anywhere in the pipeline):

    INV, BUF                  1 input  (A), output Y
    AND, NAND, OR, NOR        2..4 inputs (A, B, C, D), output Y
    XOR, XNOR                 2 inputs (A, B), output Y
    MUX2                      3 inputs (S, A, B), output Y; Y = B if S else A
    DFF                       data D, optional CLK, optional active-low RN,
                              output Q

``.bench`` files carry no clock, so CLK is optional on DFF cells; a DFF
parsed from ``.bench`` has only its D pin on the input side.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class NetlistError(Exception):
    """Malformed netlist text or violated structural invariant."""


# Pin layout per kind: (input pin names by arity, output pin name).
_COMB_PINS = ("A", "B", "C", "D")

KIND_ARITIES = {
    "INV": (1, 1),
    "BUF": (1, 1),
    "AND": (2, 4),
    "NAND": (2, 4),
    "OR": (2, 4),
    "NOR": (2, 4),
    "XOR": (2, 2),
    "XNOR": (2, 2),
    "MUX2": (3, 3),
    "DFF": (1, 3),  # D required; CLK and RN optional
}

KIND_NAMES = tuple(KIND_ARITIES)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*$")


@dataclass(frozen=True)
class CellKind:
    """A cell function plus its input arity."""

    name: str
    arity: int

    def __post_init__(self):
        if self.name not in KIND_ARITIES:
            raise NetlistError(f"unsupported cell kind {self.name!r}")
        lo, hi = KIND_ARITIES[self.name]
        if not lo <= self.arity <= hi:
            raise NetlistError(
                f"{self.name} arity {self.arity} outside {lo}..{hi}"
            )

    def input_pins(self) -> tuple[str, ...]:
        if self.name == "MUX2":
            return ("S", "A", "B")
        if self.name == "DFF":
            return ("D", "CLK", "RN")[: self.arity]
        return _COMB_PINS[: self.arity]

    def output_pin(self) -> str:
        return "Q" if self.name == "DFF" else "Y"


@dataclass(frozen=True)
class Cell:
    """One cell instance: immutable so netlists can share them on copy."""

    name: str
    kind: CellKind
    pins: tuple[tuple[str, str], ...]  # (pin, net), output pin included

    def pin_map(self) -> dict[str, str]:
        return dict(self.pins)

    def output_net(self) -> str:
        out = self.kind.output_pin()
        for pin, net in self.pins:
            if pin == out:
                return net
        raise NetlistError(f"cell {self.name} has no output pin {out}")

    def input_nets(self) -> tuple[str, ...]:
        out = self.kind.output_pin()
        return tuple(net for pin, net in self.pins if pin != out)

    def input_items(self) -> tuple[tuple[str, str], ...]:
        out = self.kind.output_pin()
        return tuple((pin, net) for pin, net in self.pins if pin != out)


def make_cell(name: str, kind_name: str, inputs: list[str], output: str) -> Cell:
    """Build a cell from positional inputs in pin order."""
    kind = CellKind(kind_name, len(inputs))
    pins = list(zip(kind.input_pins(), inputs))
    pins.append((kind.output_pin(), output))
    return Cell(name, kind, tuple(pins))


PI_DRIVER = "__input__"


@dataclass
class Netlist:
    """A flat gate-level design: ports, cells, and the nets tying them."""

    name: str
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    cells: dict[str, Cell] = field(default_factory=dict)
    nets: set[str] = field(default_factory=set)
    # net -> driving instance name, or PI_DRIVER for primary inputs
    drivers: dict[str, str] = field(default_factory=dict)

    def copy(self) -> "Netlist":
        return Netlist(
            name=self.name,
            inputs=list(self.inputs),
            outputs=list(self.outputs),
            cells=dict(self.cells),
            nets=set(self.nets),
            drivers=dict(self.drivers),
        )

    def add_input(self, net: str) -> None:
        if net in self.drivers:
            raise NetlistError(f"multiply-driven net {net!r}")
        self.inputs.append(net)
        self.nets.add(net)
        self.drivers[net] = PI_DRIVER

    def add_output(self, net: str) -> None:
        self.outputs.append(net)
        self.nets.add(net)

    def add_cell(self, cell: Cell) -> None:
        if cell.name in self.cells:
            raise NetlistError(f"duplicate instance name {cell.name!r}")
        out = cell.output_net()
        if out in self.drivers:
            raise NetlistError(f"multiply-driven net {out!r}")
        self.cells[cell.name] = cell
        self.drivers[out] = cell.name
        self.nets.add(out)
        for net in cell.input_nets():
            self.nets.add(net)

    def replace_cell(self, cell: Cell) -> None:
        """Swap in a new version of an existing instance, keeping driver maps sound."""
        old = self.cells.get(cell.name)
        if old is None:
            raise NetlistError(f"no instance {cell.name!r} to replace")
        old_out = old.output_net()
        new_out = cell.output_net()
        if new_out != old_out:
            if new_out in self.drivers and self.drivers[new_out] != cell.name:
                raise NetlistError(f"multiply-driven net {new_out!r}")
            del self.drivers[old_out]
            self.drivers[new_out] = cell.name
            self.nets.add(new_out)
        self.cells[cell.name] = cell
        for net in cell.input_nets():
            self.nets.add(net)

    def remove_cell(self, instance: str) -> None:
        cell = self.cells.pop(instance, None)
        if cell is None:
            raise NetlistError(f"no instance {instance!r} to remove")
        del self.drivers[cell.output_net()]

    def driver_kind(self, net: str) -> str:
        """Kind name of the driver: 'PI' for primary inputs."""
        inst = self.drivers[net]
        if inst == PI_DRIVER:
            return "PI"
        return self.cells[inst].kind.name

    def validate(self) -> None:
        """Check the structural invariants; raise NetlistError on the first hole."""
        seen_inst = set()
        for inst, cell in self.cells.items():
            if inst != cell.name or inst in seen_inst:
                raise NetlistError(f"instance map inconsistent at {inst!r}")
            seen_inst.add(inst)
        for net in self.nets:
            if net not in self.drivers:
                raise NetlistError(f"undeclared or driverless net {net!r}")
        for net in self.inputs:
            if self.drivers.get(net) != PI_DRIVER:
                raise NetlistError(f"primary input {net!r} is cell-driven")
        for net in self.outputs:
            if net not in self.drivers:
                raise NetlistError(f"primary output {net!r} has no driver")
        for cell in self.cells.values():
            for net in cell.input_nets():
                if net not in self.nets:
                    raise NetlistError(
                        f"cell {cell.name} references undeclared net {net!r}"
                    )

    def stats(self) -> dict[str, int]:
        return {
            "inputs": len(self.inputs),
            "outputs": len(self.outputs),
            "cells": len(self.cells),
            "nets": len(self.nets),
        }


# ---------------------------------------------------------------------------
# .bench reader/writer

_BENCH_FUNC_MAP = {
    "NOT": "INV",
    "INV": "INV",
    "BUF": "BUF",
    "BUFF": "BUF",
    "AND": "AND",
    "NAND": "NAND",
    "OR": "OR",
    "NOR": "NOR",
    "XOR": "XOR",
    "XNOR": "XNOR",
    "MUX": "MUX2",
    "MUX2": "MUX2",
    "DFF": "DFF",
}

_BENCH_DECL_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^()\s]+)\s*\)$")
_BENCH_ASSIGN_RE = re.compile(r"^([^()=\s]+)\s*=\s*([A-Za-z][A-Za-z0-9]*)\s*\((.*)\)$")


def parse_bench(text: str, name: str = "bench") -> Netlist:
    """Parse ISCAS ``.bench`` text into a validated Netlist."""
    n = Netlist(name=name)
    pending_outputs: list[tuple[int, str]] = []
    counters: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _BENCH_DECL_RE.match(line)
        if m:
            which, net = m.group(1), m.group(2)
            if which == "INPUT":
                if net in n.drivers:
                    raise NetlistError(f"line {lineno}: multiply-driven net {net!r}")
                n.add_input(net)
            else:
                pending_outputs.append((lineno, net))
            continue
        m = _BENCH_ASSIGN_RE.match(line)
        if m:
            out, func, args = m.group(1), m.group(2).upper(), m.group(3)
            kind_name = _BENCH_FUNC_MAP.get(func)
            if kind_name is None:
                raise NetlistError(f"line {lineno}: unsupported gate function {func!r}")
            ins = [a.strip() for a in args.split(",") if a.strip()]
            lo, hi = KIND_ARITIES[kind_name]
            if kind_name == "DFF":
                if len(ins) != 1:
                    raise NetlistError(f"line {lineno}: DFF takes exactly one input")
            elif not lo <= len(ins) <= hi:
                raise NetlistError(
                    f"line {lineno}: {func} with {len(ins)} inputs "
                    f"(expected {lo}..{hi})"
                )
            idx = counters.get(kind_name, 0)
            counters[kind_name] = idx + 1
            inst = f"{kind_name.lower()}_{idx}"
            try:
                n.add_cell(make_cell(inst, kind_name, ins, out))
            except NetlistError as e:
                raise NetlistError(f"line {lineno}: {e}") from e
            continue
        raise NetlistError(f"line {lineno}: syntax error: {raw.strip()!r}")

    for lineno, net in pending_outputs:
        if net not in n.drivers:
            raise NetlistError(f"line {lineno}: output {net!r} is never driven")
        n.add_output(net)

    _check_all_driven(n)
    n.validate()
    return n


def _check_all_driven(n: Netlist) -> None:
    for net in sorted(n.nets):
        if net not in n.drivers:
            raise NetlistError(f"undeclared net reference {net!r}")


def write_bench(n: Netlist) -> str:
    """Emit ``.bench`` text; deterministic (cells sorted by instance name)."""
    lines = [f"# {n.name}"]
    for net in n.inputs:
        lines.append(f"INPUT({net})")
    for net in n.outputs:
        lines.append(f"OUTPUT({net})")
    for inst in sorted(n.cells):
        cell = n.cells[inst]
        func = "NOT" if cell.kind.name == "INV" else cell.kind.name
        if func == "MUX2":
            func = "MUX"
        args = ", ".join(cell.input_nets())
        lines.append(f"{cell.output_net()} = {func}({args})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# structural-Verilog subset reader/writer

_V_COMMENT_LINE = re.compile(r"//[^\n]*")
_V_COMMENT_BLOCK = re.compile(r"/\*.*?\*/", re.DOTALL)

# Constructs outside the subset, reported by name.
_V_FORBIDDEN = (
    ("always", re.compile(r"\balways\b")),
    ("assign", re.compile(r"\bassign\b")),
    ("initial", re.compile(r"\binitial\b")),
    ("function", re.compile(r"\bfunction\b")),
    ("generate", re.compile(r"\bgenerate\b")),
    ("parameter", re.compile(r"\bparameter\b")),
)

_CELL_TYPE_RE = re.compile(r"^(INV|BUF|AND[234]?|NAND[234]?|OR[234]?|NOR[234]?|XOR2?|XNOR2?|MUX2|DFF)$")


def _v_tokenize_names(blob: str, lineno: int) -> list[str]:
    """Split a declaration body into net names, handling escaped identifiers."""
    names = []
    for part in blob.split(","):
        tok = part.strip()
        if not tok:
            continue
        if "[" in tok or "]" in tok:
            raise NetlistError(f"line {lineno}: unsupported construct: bus declaration")
        if tok.startswith("\\"):
            names.append(tok[1:])
        else:
            if not _IDENT_RE.match(tok):
                raise NetlistError(f"line {lineno}: bad identifier {tok!r}")
            names.append(tok)
    return names


def _split_statements(text: str) -> list[tuple[int, str]]:
    """Return (starting line, statement) pairs, splitting on ';'."""
    out = []
    buf = []
    start = 1
    line = 1
    for ch in text:
        if ch == "\n":
            line += 1
        if ch == ";":
            stmt = "".join(buf).strip()
            if stmt:
                out.append((start, stmt))
            buf = []
            start = line
        else:
            if not buf and not ch.isspace():
                start = line
            buf.append(ch)
    tail = "".join(buf).strip()
    if tail:
        out.append((start, tail))
    return out


def _resolve_kind(type_tok: str, n_conns: int, named: bool, lineno: int) -> CellKind:
    base = type_tok.rstrip("234")
    digits = type_tok[len(base):]
    if base in ("INV", "BUF"):
        return CellKind(base, 1)
    if base == "MUX" or type_tok == "MUX2":
        return CellKind("MUX2", 3)
    if base == "DFF":
        # arity fixed later from the connected pins
        return CellKind("DFF", max(1, min(3, n_conns - 1)))
    if digits:
        return CellKind(base, int(digits))
    # bare AND/OR/... take their arity from the connection count
    if named:
        raise NetlistError(
            f"line {lineno}: ambiguous cell type {type_tok!r} with named pins; "
            f"use {type_tok}2/3/4"
        )
    return CellKind(base, n_conns - 1)


def parse_structural_verilog(text: str, name: str | None = None) -> Netlist:
    """Parse the restricted structural-Verilog subset into a validated Netlist.

    Positional connections follow (output, inputs...) order: ``(Y, A, B, ...)``,
    ``MUX2 (Y, S, A, B)``, ``DFF (Q, D[, CLK[, RN]])``.
    """
    text = _V_COMMENT_BLOCK.sub(" ", _V_COMMENT_LINE.sub(" ", text))
    for construct, rx in _V_FORBIDDEN:
        m = rx.search(text)
        if m:
            lineno = text.count("\n", 0, m.start()) + 1
            raise NetlistError(f"line {lineno}: unsupported construct: {construct}")

    statements = _split_statements(text)
    n: Netlist | None = None
    declared: set[str] = set()
    pending_outputs: list[str] = []
    wires: set[str] = set()
    ended = False

    for lineno, stmt in statements:
        stmt = stmt.strip()
        if not stmt:
            continue
        if stmt.startswith("endmodule"):
            ended = True
            rest = stmt[len("endmodule"):].strip()
            if rest:
                raise NetlistError(f"line {lineno}: unsupported construct after endmodule")
            continue
        if ended:
            raise NetlistError(f"line {lineno}: only one module is supported")
        if stmt.startswith("module"):
            if n is not None:
                raise NetlistError(f"line {lineno}: only one module is supported")
            m = re.match(r"module\s+([^\s(]+)\s*(?:\((.*)\))?$", stmt, re.DOTALL)
            if not m:
                raise NetlistError(f"line {lineno}: syntax error in module header")
            n = Netlist(name=name or m.group(1))
            continue
        if n is None:
            raise NetlistError(f"line {lineno}: statement outside module")
        kw = stmt.split(None, 1)
        head = kw[0]
        body = kw[1] if len(kw) > 1 else ""
        if head in ("input", "output", "wire"):
            for net in _v_tokenize_names(body, lineno):
                if head == "input":
                    if net in declared:
                        raise NetlistError(f"line {lineno}: net {net!r} declared twice")
                    n.add_input(net)
                elif head == "output":
                    pending_outputs.append(net)
                else:
                    wires.add(net)
                declared.add(net)
            continue
        # must be an instantiation: TYPE inst ( ... )
        m = re.match(r"([^\s(]+)\s+([^\s(]+)\s*\((.*)\)$", stmt, re.DOTALL)
        if not m:
            raise NetlistError(f"line {lineno}: unsupported construct: {head!r}")
        type_tok, inst_tok, conn_blob = m.groups()
        if not _CELL_TYPE_RE.match(type_tok):
            raise NetlistError(f"line {lineno}: unsupported cell type {type_tok!r}")
        inst = inst_tok[1:] if inst_tok.startswith("\\") else inst_tok
        conns = [c.strip() for c in conn_blob.split(",")]
        named = any(c.startswith(".") for c in conns if c)
        kind = _resolve_kind(type_tok, len([c for c in conns if c]), named, lineno)

        def _net_of(tok: str) -> str:
            tok = tok.strip()
            if tok.startswith("\\"):
                tok = tok[1:].strip()
            if not tok:
                raise NetlistError(f"line {lineno}: empty connection on {inst!r}")
            return tok

        pin_map: dict[str, str] = {}
        if named:
            for c in conns:
                if not c:
                    continue
                pm = re.match(r"\.\s*(\w+)\s*\(\s*(.*?)\s*\)$", c, re.DOTALL)
                if not pm:
                    raise NetlistError(f"line {lineno}: bad named connection {c!r}")
                pin_map[pm.group(1)] = _net_of(pm.group(2))
        else:
            nets_pos = [_net_of(c) for c in conns if c.strip()]
            order = (kind.output_pin(),) + (
                ("D", "CLK", "RN") if kind.name == "DFF" else kind.input_pins()
            )
            if kind.name == "DFF":
                if not 2 <= len(nets_pos) <= 4:
                    raise NetlistError(f"line {lineno}: pin-count mismatch on {inst!r}")
            elif len(nets_pos) != kind.arity + 1:
                raise NetlistError(f"line {lineno}: pin-count mismatch on {inst!r}")
            pin_map = dict(zip(order, nets_pos))

        if kind.name == "DFF":
            in_pins = [p for p in ("D", "CLK", "RN") if p in pin_map]
            if "D" not in pin_map or "Q" not in pin_map:
                raise NetlistError(f"line {lineno}: DFF {inst!r} needs D and Q")
            kind = CellKind("DFF", len(in_pins))
            pins = [(p, pin_map[p]) for p in in_pins] + [("Q", pin_map["Q"])]
        else:
            want = kind.input_pins() + (kind.output_pin(),)
            missing = [p for p in want if p not in pin_map]
            extra = [p for p in pin_map if p not in want]
            if missing or extra:
                raise NetlistError(
                    f"line {lineno}: pin-count mismatch on {inst!r} "
                    f"(missing {missing}, extra {extra})"
                )
            pins = [(p, pin_map[p]) for p in want]

        for _, net in pins:
            if net not in declared and net not in wires:
                raise NetlistError(f"line {lineno}: undeclared net reference {net!r}")
        try:
            n.add_cell(Cell(inst, kind, tuple(pins)))
        except NetlistError as e:
            raise NetlistError(f"line {lineno}: {e}") from e

    if n is None:
        raise NetlistError("no module found")
    for net in pending_outputs:
        if net not in n.drivers:
            raise NetlistError(f"output {net!r} is never driven")
        n.add_output(net)
    for net in sorted(wires):
        if net not in n.nets:
            continue  # declared but unused: drop silently
    for net in sorted(n.nets):
        if net not in n.drivers:
            raise NetlistError(f"net {net!r} has no driver")
    n.validate()
    return n


def _v_ident(net: str) -> str:
    if _IDENT_RE.match(net):
        return net
    return "\\" + net + " "


def write_structural_verilog(n: Netlist) -> str:
    """Emit the netlist in the structural subset.

    Output is byte-deterministic: ports in declared order, wires sorted,
    cells sorted by instance name, pins in canonical order.
    """
    ports = [_v_ident(p) for p in n.inputs + n.outputs]
    lines = [f"module {_v_ident(n.name)}({', '.join(ports)});"]
    for net in n.inputs:
        lines.append(f"  input {_v_ident(net)};")
    for net in n.outputs:
        lines.append(f"  output {_v_ident(net)};")
    io = set(n.inputs) | set(n.outputs)
    for net in sorted(n.nets - io):
        lines.append(f"  wire {_v_ident(net)};")
    for inst in sorted(n.cells):
        cell = n.cells[inst]
        kind = cell.kind
        if kind.name in ("AND", "NAND", "OR", "NOR", "XOR", "XNOR"):
            type_tok = f"{kind.name}{kind.arity}"
        else:
            type_tok = kind.name
        conns = ", ".join(f".{pin}({_v_ident(net)})" for pin, net in cell.pins)
        lines.append(f"  {type_tok} {_v_ident(inst)}({conns});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def parse_file(path: str, fmt: str | None = None) -> Netlist:
    """Parse a netlist file; format inferred from the extension when not given."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if fmt is None:
        fmt = "bench" if path.endswith(".bench") else "verilog"
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if fmt == "bench":
        return parse_bench(text, name=stem)
    if fmt == "verilog":
        return parse_structural_verilog(text)
    raise NetlistError(f"unknown netlist format {fmt!r}")
