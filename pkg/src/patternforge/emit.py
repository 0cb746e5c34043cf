"""Elaborate a system description into a netlist and print it as Verilog."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

from . import __version__
from .algos import build_blur, build_copy
from .genlib import (
    gen_arbiter, gen_container, gen_iterator, iterator_container_ops, prune_unused,
)
from .model import SystemSpec, plan_mapping, validate_system, with_geometry
from .rtlir import (
    Assign, BinOp, Concat, Const, Expr, ExternalInterface, Instance, MemRead, Mux, Net, Netlist,
    Not, Port, Ref, RtlModule, Slice, check_netlist,
)


class ElaborationError(ValueError):
    """Validation or lint failure; ``violations`` holds the findings."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


def spec_digest(spec: SystemSpec) -> str:
    text = json.dumps(spec.to_json(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(text.encode()).hexdigest()


class _Top:
    """Collects top-level ports, nets and instance wiring."""

    def __init__(self):
        self.ports: dict = {}
        self.nets: dict = {}
        self.drivers: dict = {}
        self.readers: set = set()
        self.instances: list = []

    def port(self, name: str, direction: str, width: int) -> str:
        self.ports[name] = Port(name, direction, width)
        return name

    def wire(self, inst: str, module: RtlModule, mapping: dict):
        conns = []
        for p in module.ports:
            sig = mapping.get(p.name)
            if sig is None:
                continue
            if sig not in self.ports:
                have = self.nets.get(sig)
                if have is not None and have != p.width:
                    raise ElaborationError(f"net {sig} used at widths {have} and {p.width}")
                self.nets[sig] = p.width
            if p.direction == "out":
                self.drivers.setdefault(sig, []).append(inst)
            else:
                self.readers.add(sig)
            conns.append((p.name, sig))
        self.instances.append(Instance(inst, module.name, tuple(conns)))

    def build(self, name: str) -> RtlModule:
        comb = []
        for sig, w in self.nets.items():
            if sig not in self.drivers:
                comb.append(Assign(sig, Const(0, w)))
        return RtlModule(
            name=name,
            ports=tuple(self.ports.values()),
            nets=tuple(Net(n, w) for n, w in self.nets.items()),
            comb=tuple(comb),
            instances=tuple(self.instances),
        )


_STREAM_ROLES = {"p_empty": "empty", "p_full": "full", "p_read": "read", "p_write": "write",
                 "p_data": "data", "p_data_out": "data_out"}
_SRAM_ROLES = {"p_addr": "addr", "p_data": "data", "p_data_out": "data_out", "p_we": "we",
               "req": "req", "ack": "ack"}


def elaborate(spec: SystemSpec, top_name: str = "top") -> Netlist:
    """Generate, prune and wire every component of ``spec``.

    Raises :class:`ElaborationError` carrying the violations when ``spec``
    does not validate, or the lint findings if the result is malformed.
    """
    violations = validate_system(spec)
    if violations:
        raise ElaborationError(f"{len(violations)} violations", violations)

    modules: list = []
    top = _Top()
    interfaces: list = []

    plans: dict = {}
    offsets: dict = {}
    for c in spec.containers:
        t = spec.target_of(c.name)
        plan = plan_mapping(c, t)
        if t.kind == "sram":
            plan = with_geometry(plan, base_address=offsets.get(t.name, 0))
            offsets[t.name] = offsets.get(t.name, 0) + c.capacity * plan.beats_per_element
        if t.kind == "line_buffer3":
            blur = next(a for a in spec.algorithms
                        if spec.iterator(a.source_iterator).container == c.name)
            plan = with_geometry(plan, line_length=blur.image_width, line_count=blur.image_height)
        plans[c.name] = plan

    arbitrated = {t.name for t in spec.targets if t.shared and len(spec.containers_on(t.name)) > 1}

    for c in spec.containers:
        t = spec.target_of(c.name)
        (it,) = spec.iterators_of(c.name)
        mod = prune_unused(gen_container(c, plans[c.name], t), iterator_container_ops(it, c))
        modules.append(mod)
        mapping = {}
        for p in mod.ports:
            if p.name.startswith("m_") or p.name in ("data", "data_in", "addr", "done"):
                mapping[p.name] = f"{c.name}_{p.name}"
            elif p.name.startswith(("p_src_", "p_snk_")):
                side, sig = p.name[2:5], p.name[6:]
                mapping[p.name] = top.port(f"{c.name}_{side}_p_{sig}", p.direction, p.width)
            elif t.name in arbitrated:
                mapping[p.name] = f"{c.name}_{p.name}"
            else:
                mapping[p.name] = top.port(f"{t.name}_{p.name}", p.direction, p.width)
        top.wire(f"u_{mod.name}", mod, mapping)

        if t.kind in ("fifo_core", "lifo_core", "line_buffer3"):
            kind = {"read_buffer": "stream_source", "write_buffer": "stream_sink",
                    "queue": "fifo_device", "stack": "lifo_device"}[c.kind]
            rs = tuple((_STREAM_ROLES[p.name], f"{t.name}_{p.name}") for p in mod.ports
                       if p.name in _STREAM_ROLES)
            interfaces.append(ExternalInterface(t.name, kind, rs, width=t.data_bus_width_bits,
                                                depth=c.capacity))
        if c.kind == "read_buffer" and t.kind == "sram":
            rs = tuple((_STREAM_ROLES["p_" + p.name[6:]], f"{c.name}_src_p_{p.name[6:]}")
                       for p in mod.ports if p.name.startswith("p_src_"))
            interfaces.append(ExternalInterface(f"{c.name}_src", "stream_source", rs,
                                                width=t.data_bus_width_bits))
        if c.kind == "write_buffer" and t.kind == "sram":
            rs = tuple(({"full": "full", "write": "write", "data": "data_out"}[p.name[6:]],
                        f"{c.name}_snk_p_{p.name[6:]}")
                       for p in mod.ports if p.name.startswith("p_snk_"))
            interfaces.append(ExternalInterface(f"{c.name}_snk", "stream_sink", rs,
                                                width=t.data_bus_width_bits))

    for t in spec.targets:
        users = spec.containers_on(t.name)
        if t.kind != "sram" or not users:
            continue
        if t.name in arbitrated:
            arb = gen_arbiter(t, len(users))
            modules.append(arb)
            mapping = {}
            for i, c in enumerate(users):
                for sig in ("req", "ack", "p_addr", "p_data_out", "p_we", "p_data"):
                    mapping[f"c{i}_{sig}"] = f"{c.name}_{sig}"
            for p in arb.ports:
                if not p.name.startswith("c") or p.name == "c":
                    mapping[p.name] = top.port(f"{t.name}_{p.name}", p.direction, p.width)
            top.wire(f"u_{arb.name}", arb, mapping)
        rs = tuple((role, f"{t.name}_{sig}") for sig, role in _SRAM_ROLES.items()
                   if f"{t.name}_{sig}" in top.ports)
        interfaces.append(ExternalInterface(t.name, "sram", rs, width=t.data_bus_width_bits,
                                            depth=1 << t.addr_width_bits,
                                            read_latency=t.read_latency_cycles,
                                            addr_width=t.addr_width_bits))

    for it in spec.iterators:
        c = spec.container(it.container)
        t = spec.target_of(c.name)
        mod = gen_iterator(it, plans[c.name], c, t)
        modules.append(mod)
        mapping = {}
        for p in mod.ports:
            if p.name.startswith("c_"):
                mapping[p.name] = f"{c.name}_{p.name[2:]}"
            else:
                mapping[p.name] = f"{it.name}_{p.name}"
        top.wire(f"u_{mod.name}", mod, mapping)

    for al in spec.algorithms:
        mod = build_copy(al, spec) if al.kind == "copy" else build_blur(al, spec)
        modules.append(mod)
        mapping = {}
        for p in mod.ports:
            side, rest = p.name.split("_", 1)
            it_name = al.source_iterator if side == "src" else al.sink_iterator
            mapping[p.name] = f"{it_name}_{rest}"
        top.wire(f"u_{mod.name}", mod, mapping)

    top_mod = top.build(top_name)
    modules.append(top_mod)
    netlist = Netlist(tuple(modules), top_name, tuple(interfaces), spec_digest(spec))
    lint = check_netlist(netlist)
    if lint:
        raise ElaborationError("generated netlist is malformed: " + "; ".join(map(str, lint)), lint)
    return netlist


# ------------------------------------------------------------- Verilog text

_KEYWORDS = frozenset("""
always and assign automatic begin buf bufif0 bufif1 case casex casez cell cmos config deassign default
defparam design disable edge else end endcase endconfig endfunction endgenerate endmodule endprimitive
endspecify endtable endtask event for force forever fork function generate genvar highz0 highz1 if
ifnone incdir include initial inout input instance integer join large liblist library localparam
macromodule medium module nand negedge nmos nor noshowcancelled not notif0 notif1 or output parameter
pmos posedge primitive pull0 pull1 pulldown pullup pulsestyle_onevent pulsestyle_ondetect rcmos real
realtime reg release repeat rnmos rpmos rtran rtranif0 rtranif1 scalared showcancelled signed small
specify specparam strong0 strong1 supply0 supply1 table task time tran tranif0 tranif1 tri tri0 tri1
triand trior trireg unsigned use uwire vectored wait wand weak0 weak1 while wire wor xnor xor
bit byte int logic shortint longint final do let string clk rst
""".split())

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")


@dataclass(frozen=True)
class EmitOptions:
    top_name: str = "top"
    header_comment: str = ""

    def __post_init__(self):
        if not _IDENT.match(self.top_name) or self.top_name in _KEYWORDS:
            raise ValueError(f"{self.top_name!r} is not a legal Verilog identifier")


def _has_state(m: RtlModule, mods: dict) -> bool:
    if m.registers or m.fsms or m.mem_writes:
        return True
    return any(_has_state(mods[i.module], mods) for i in m.instances)


def _range(width: int) -> str:
    return "" if width == 1 else f"[{width - 1}:0] "


class _ModuleWriter:
    def __init__(self, m: RtlModule, clocked: bool, mods: dict):
        self.m = m
        self.clocked = clocked
        self.mods = mods
        self.temps: list = []
        self.widths = m.signal_widths()
        for name in list(self.widths) + [x.name for x in m.memories]:
            if not _IDENT.match(name) or name in _KEYWORDS:
                raise ValueError(f"{m.name}: {name!r} is not a usable Verilog identifier")

    def expr(self, e: Expr) -> str:
        if isinstance(e, Const):
            return f"{e.width}'d{e.value}"
        if isinstance(e, Ref):
            return e.name
        if isinstance(e, Slice):
            if isinstance(e.arg, Ref):
                base = e.arg.name
                if e.arg.width == 1:
                    return base
            else:
                base = self.hoist(e.arg)
            if e.width == 1:
                return f"{base}[{e.lo}]"
            return f"{base}[{e.lo + e.width - 1}:{e.lo}]"
        if isinstance(e, Concat):
            return "{" + ", ".join(self.expr(p) for p in e.parts) + "}"
        if isinstance(e, BinOp):
            op = {"and": "&", "or": "|", "xor": "^", "add": "+", "sub": "-", "eq": "=="}[e.op]
            return f"({self.expr(e.a)} {op} {self.expr(e.b)})"
        if isinstance(e, Not):
            return f"(~{self.expr(e.arg)})"
        if isinstance(e, Mux):
            return f"({self.expr(e.sel)} ? {self.expr(e.if_true)} : {self.expr(e.if_false)})"
        if isinstance(e, MemRead):
            return f"{e.mem}[{self.expr(e.addr)}]"
        raise TypeError(e)

    def hoist(self, e: Expr) -> str:
        name = f"_t{len(self.temps)}"
        text = self.expr(e)
        self.temps.append((name, e.width, text))
        return name

    def render(self) -> str:
        m = self.m
        body: list = []
        for a in m.comb:
            body.append(f"  assign {a.target} = {self.expr(a.expr)};")
        fsm_regs = set()
        for f in m.fsms:
            for t in f.transitions:
                fsm_regs.update(a.target for a in t.actions)
        seq = {a.target: a.expr for a in m.seq}
        regs = {r.name: r for r in m.registers}
        for r in m.registers:
            if r.name in fsm_regs:
                continue
            body.append("  always @(posedge clk) begin")
            body.append(f"    if (rst) {r.name} <= {r.width}'d{r.reset_value};")
            if r.name in seq:
                body.append(f"    else {r.name} <= {self.expr(seq[r.name])};")
            body.append("  end")
        for f in m.fsms:
            body.extend(self.fsm(f, regs))
        for w in m.mem_writes:
            body.append("  always @(posedge clk) begin")
            body.append(f"    if ({self.expr(w.enable)}) {w.mem}[{self.expr(w.addr)}] <= {self.expr(w.data)};")
            body.append("  end")
        for inst in m.instances:
            child = self.mods[inst.module]
            conns = []
            if _has_state(child, self.mods):
                conns += [".clk(clk)", ".rst(rst)"]
            conns += [f".{p}({s})" for p, s in inst.connections]
            body.append(f"  {inst.module} {inst.name} (")
            body.append(",\n".join("    " + c for c in conns))
            body.append("  );")

        lines = []
        port_lines = []
        if self.clocked:
            port_lines += ["  input wire clk", "  input wire rst"]
        for p in m.ports:
            kw = "input" if p.direction == "in" else "output"
            port_lines.append(f"  {kw} wire {_range(p.width)}{p.name}")
        lines.append(f"module {m.name} (")
        lines.append(",\n".join(port_lines))
        lines.append(");")
        for f in m.fsms:
            for i, s in enumerate(f.states):
                lines.append(f"  localparam {f.name.upper()}_{s} = {f.width}'d{i};")
            lines.append(f"  reg {_range(f.width)}{f.name};")
        for n in m.nets:
            lines.append(f"  wire {_range(n.width)}{n.name};")
        for r in m.registers:
            lines.append(f"  reg {_range(r.width)}{r.name};")
        for x in m.memories:
            lines.append(f"  reg {_range(x.width)}{x.name} [0:{x.depth - 1}];")
        for name, width, text in self.temps:
            lines.append(f"  wire {_range(width)}{name} = {text};")
        lines.extend(body)
        lines.append("endmodule")
        return "\n".join(lines) + "\n"

    def fsm(self, f, regs) -> list:
        owned = []
        for t in f.transitions:
            for a in t.actions:
                if a.target not in owned:
                    owned.append(a.target)
        out = ["  always @(posedge clk) begin", "    if (rst) begin",
               f"      {f.name} <= {f.name.upper()}_{f.reset_state};"]
        for r in owned:
            out.append(f"      {r} <= {regs[r].width}'d{regs[r].reset_value};")
        out += ["    end else begin", f"      case ({f.name})"]
        for s in f.states:
            ts = [t for t in f.transitions if t.src == s]
            if not ts:
                continue
            out.append(f"        {f.name.upper()}_{s}: begin")
            for i, t in enumerate(ts):
                kw = "if" if i == 0 else "else if"
                out.append(f"          {kw} ({self.expr(t.guard)}) begin")
                for a in t.actions:
                    out.append(f"            {a.target} <= {self.expr(a.expr)};")
                out.append(f"            {f.name} <= {f.name.upper()}_{t.dst};")
                out.append("          end")
            out.append("        end")
        out += ["        default: ;", "      endcase", "    end", "  end"]
        return out


def emit_verilog(n: Netlist, opts: EmitOptions | None = None) -> str:
    """Verilog-2001 text for ``n``: one module per RtlModule, top last."""
    opts = opts or EmitOptions(top_name=n.top)
    lint = check_netlist(n)
    if lint:
        raise ElaborationError("refusing to emit a malformed netlist", lint)
    mods = {m.name: m for m in n.modules}
    head = [f"// Generated by patternforge {__version__}"]
    if n.spec_digest:
        head.append(f"// spec digest: {n.spec_digest}")
    for line in opts.header_comment.splitlines():
        head.append(f"// {line}".rstrip())
    parts = ["\n".join(head) + "\n"]
    for m in n.modules:
        text = _ModuleWriter(m, _has_state(m, mods), mods).render()
        if m.name == n.top and opts.top_name != n.top:
            text = text.replace(f"module {n.top} (", f"module {opts.top_name} (", 1)
        parts.append(text)
    return "\n".join(parts)
