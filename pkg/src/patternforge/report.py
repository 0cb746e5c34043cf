"""Static resource accounting over generated IR.

``register_bits`` counts flip-flops (FSM state registers included),
``memory_bits`` counts RAM bits and ``comb_node_count`` counts operator
nodes in every expression, a rough stand-in for LUTs.  None of these
predict FPGA figures; they make overhead comparisons between designs exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .rtlir import Netlist, RtlModule, check_netlist, node_count

FIELDS = ("register_bits", "fsm_state_count", "memory_bits", "port_count", "comb_node_count")


@dataclass(frozen=True)
class ModuleResources:
    module: str
    register_bits: int
    fsm_state_count: int
    memory_bits: int
    port_count: int
    comb_node_count: int


@dataclass(frozen=True)
class ResourceReport:
    modules: tuple
    totals: dict

    def module(self, name: str) -> ModuleResources:
        for m in self.modules:
            if m.module == name:
                return m
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"modules": [asdict(m) for m in self.modules], "totals": dict(self.totals)}


def module_resources(m: RtlModule) -> ModuleResources:
    exprs = [a.expr for a in m.comb] + [a.expr for a in m.seq]
    for w in m.mem_writes:
        exprs += [w.enable, w.addr, w.data]
    for f in m.fsms:
        for t in f.transitions:
            exprs.append(t.guard)
            exprs += [a.expr for a in t.actions]
    return ModuleResources(
        module=m.name,
        register_bits=sum(r.width for r in m.registers) + sum(f.width for f in m.fsms),
        fsm_state_count=sum(len(f.states) for f in m.fsms),
        memory_bits=sum(x.depth * x.width for x in m.memories),
        port_count=len(m.ports),
        comb_node_count=sum(node_count(e) for e in exprs),
    )


def resource_report(n: Netlist) -> ResourceReport:
    """Per-module counts and their sums (each module definition counted once)."""
    lint = check_netlist(n)
    if lint:
        raise ValueError("cannot report on a malformed netlist: " + "; ".join(map(str, lint)))
    rows = tuple(module_resources(m) for m in n.modules)
    totals = {f: sum(getattr(r, f) for r in rows) for f in FIELDS}
    return ResourceReport(rows, totals)


def format_json(r: ResourceReport) -> str:
    return json.dumps(r.to_json(), indent=2) + "\n"


def format_text(r: ResourceReport) -> str:
    heads = ("module", "registers", "fsm_states", "memory_bits", "ports", "comb_nodes")
    rows = [(m.module,) + tuple(str(getattr(m, f)) for f in FIELDS) for m in r.modules]
    rows.append(("TOTAL",) + tuple(str(r.totals[f]) for f in FIELDS))
    widths = [max(len(x[i]) for x in rows + [heads]) for i in range(len(heads))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()
    out = [line(heads), line(["-" * w for w in widths])]
    out += [line(x) for x in rows[:-1]]
    out += [line(["-" * w for w in widths]), line(rows[-1])]
    return "\n".join(out) + "\n"
