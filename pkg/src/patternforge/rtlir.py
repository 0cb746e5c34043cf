"""Structural RTL intermediate representation.

Expressions are width-exact trees; every node knows its width statically.
Modules hold ports, nets, registers, memories, FSMs, combinational
assignments, register updates, memory write ports and child instances.
Everything is a frozen dataclass, so structural equality is ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

# --------------------------------------------------------------- expressions


def _mask(width: int) -> int:
    return (1 << width) - 1


class Expr:
    """Base class; subclasses are frozen dataclasses with a ``width``."""

    width: int

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        if isinstance(other, bool):
            other = int(other)
        return Const(other & _mask(self.width), self.width)

    def __and__(self, other):
        return BinOp("and", self, self._coerce(other))

    def __or__(self, other):
        return BinOp("or", self, self._coerce(other))

    def __xor__(self, other):
        return BinOp("xor", self, self._coerce(other))

    def __add__(self, other):
        return BinOp("add", self, self._coerce(other))

    def __sub__(self, other):
        return BinOp("sub", self, self._coerce(other))

    def __invert__(self):
        return Not(self)

    def eq(self, other) -> "Expr":
        return BinOp("eq", self, self._coerce(other))

    def ne(self, other) -> "Expr":
        return Not(self.eq(other))

    def __getitem__(self, key):
        if isinstance(key, slice):
            lo = key.start or 0
            hi = self.width if key.stop is None else key.stop
            return Slice(self, lo, hi - lo)
        return Slice(self, key, 1)

    def zext(self, width: int) -> "Expr":
        if width == self.width:
            return self
        if width < self.width:
            return Slice(self, 0, width)
        return Concat((Const(0, width - self.width), self))

    def resize(self, width: int) -> "Expr":
        return self.zext(width)

    def shl(self, amount: int) -> "Expr":
        """Shift left by a constant, keeping the width."""
        if amount == 0:
            return self
        if amount >= self.width:
            return Const(0, self.width)
        return Concat((Slice(self, 0, self.width - amount), Const(0, amount)))


@dataclass(frozen=True)
class Const(Expr):
    value: int
    width: int

    def __post_init__(self):
        if self.width < 1 or not 0 <= self.value <= _mask(self.width):
            raise ValueError(f"constant {self.value} does not fit {self.width} bits")


@dataclass(frozen=True)
class Ref(Expr):
    name: str
    width: int


@dataclass(frozen=True)
class Slice(Expr):
    arg: Expr
    lo: int
    width: int


@dataclass(frozen=True)
class Concat(Expr):
    parts: tuple  # most significant first, as in Verilog

    @property
    def width(self) -> int:
        return sum(p.width for p in self.parts)


BINOPS = ("and", "or", "xor", "add", "sub", "eq")


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    a: Expr
    b: Expr

    @property
    def width(self) -> int:
        return 1 if self.op == "eq" else self.a.width


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    @property
    def width(self) -> int:
        return self.arg.width


@dataclass(frozen=True)
class Mux(Expr):
    sel: Expr
    if_true: Expr
    if_false: Expr

    @property
    def width(self) -> int:
        return self.if_true.width


@dataclass(frozen=True)
class MemRead(Expr):
    mem: str
    addr: Expr
    width: int


def const(value: int, width: int) -> Const:
    return Const(value & _mask(width), width)


def mux(sel: Expr, if_true, if_false) -> Expr:
    if not isinstance(if_true, Expr):
        if_true = if_false._coerce(if_true)
    if not isinstance(if_false, Expr):
        if_false = if_true._coerce(if_false)
    return Mux(sel, if_true, if_false)


def any_of(terms: Iterable[Expr]) -> Expr:
    terms = list(terms)
    if not terms:
        return Const(0, 1)
    out = terms[0]
    for t in terms[1:]:
        out = out | t
    return out


def all_of(terms: Iterable[Expr]) -> Expr:
    terms = list(terms)
    if not terms:
        return Const(1, 1)
    out = terms[0]
    for t in terms[1:]:
        out = out & t
    return out


def cat(*parts: Expr) -> Expr:
    return parts[0] if len(parts) == 1 else Concat(tuple(parts))


def mul_const(e: Expr, k: int, width: int) -> Expr:
    """``e * k`` truncated to ``width`` bits, as a shift-and-add tree."""
    base = e.zext(width)
    terms = [base.shl(i) for i in range(k.bit_length()) if (k >> i) & 1]
    if not terms:
        return Const(0, width)
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def children(e: Expr) -> tuple:
    if isinstance(e, (Const, Ref)):
        return ()
    if isinstance(e, Slice):
        return (e.arg,)
    if isinstance(e, Concat):
        return e.parts
    if isinstance(e, BinOp):
        return (e.a, e.b)
    if isinstance(e, Not):
        return (e.arg,)
    if isinstance(e, Mux):
        return (e.sel, e.if_true, e.if_false)
    if isinstance(e, MemRead):
        return (e.addr,)
    raise TypeError(f"not an expression: {e!r}")


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(children(node))


def refs(e: Expr) -> set:
    """Names read by ``e`` (signals and memories)."""
    out = set()
    for node in walk(e):
        if isinstance(node, Ref):
            out.add(node.name)
        elif isinstance(node, MemRead):
            out.add(node.mem)
    return out


def node_count(e: Expr) -> int:
    return sum(1 for n in walk(e) if not isinstance(n, (Const, Ref)))


def rename(e: Expr, fn) -> Expr:
    """Rebuild ``e`` with every Ref/MemRead name mapped through ``fn``."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Ref):
        return Ref(fn(e.name), e.width)
    if isinstance(e, Slice):
        return Slice(rename(e.arg, fn), e.lo, e.width)
    if isinstance(e, Concat):
        return Concat(tuple(rename(p, fn) for p in e.parts))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename(e.a, fn), rename(e.b, fn))
    if isinstance(e, Not):
        return Not(rename(e.arg, fn))
    if isinstance(e, Mux):
        return Mux(rename(e.sel, fn), rename(e.if_true, fn), rename(e.if_false, fn))
    if isinstance(e, MemRead):
        return MemRead(fn(e.mem), rename(e.addr, fn), e.width)
    raise TypeError(f"not an expression: {e!r}")


def substitute(e: Expr, table: dict) -> Expr:
    """Replace Ref nodes whose name is in ``table`` by the mapped expression."""
    if isinstance(e, Ref):
        return table.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Slice):
        return Slice(substitute(e.arg, table), e.lo, e.width)
    if isinstance(e, Concat):
        return Concat(tuple(substitute(p, table) for p in e.parts))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.a, table), substitute(e.b, table))
    if isinstance(e, Not):
        return Not(substitute(e.arg, table))
    if isinstance(e, Mux):
        return Mux(substitute(e.sel, table), substitute(e.if_true, table), substitute(e.if_false, table))
    if isinstance(e, MemRead):
        return MemRead(e.mem, substitute(e.addr, table), e.width)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, env) -> int:
    """Reference evaluator; ``env`` maps names to ints and memories to lists."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Ref):
        return env[e.name]
    if isinstance(e, Slice):
        return (evaluate(e.arg, env) >> e.lo) & _mask(e.width)
    if isinstance(e, Concat):
        acc = 0
        for p in e.parts:
            acc = (acc << p.width) | evaluate(p, env)
        return acc
    if isinstance(e, BinOp):
        a, b = evaluate(e.a, env), evaluate(e.b, env)
        if e.op == "and":
            return a & b
        if e.op == "or":
            return a | b
        if e.op == "xor":
            return a ^ b
        if e.op == "add":
            return (a + b) & _mask(e.width)
        if e.op == "sub":
            return (a - b) & _mask(e.width)
        return int(a == b)
    if isinstance(e, Not):
        return ~evaluate(e.arg, env) & _mask(e.width)
    if isinstance(e, Mux):
        return evaluate(e.if_true, env) if evaluate(e.sel, env) else evaluate(e.if_false, env)
    if isinstance(e, MemRead):
        words = env[e.mem]
        a = evaluate(e.addr, env)
        return words[a] if a < len(words) else 0
    raise TypeError(f"not an expression: {e!r}")


def simplify(e: Expr) -> Expr:
    """Constant folding plus the identities pruning relies on."""
    if isinstance(e, (Const, Ref)):
        return e
    if isinstance(e, MemRead):
        return MemRead(e.mem, simplify(e.addr), e.width)
    if isinstance(e, Slice):
        a = simplify(e.arg)
        if e.lo == 0 and e.width == a.width:
            return a
        if isinstance(a, Const):
            return Const((a.value >> e.lo) & _mask(e.width), e.width)
        return Slice(a, e.lo, e.width)
    if isinstance(e, Concat):
        parts = tuple(simplify(p) for p in e.parts)
        if all(isinstance(p, Const) for p in parts):
            acc = 0
            for p in parts:
                acc = (acc << p.width) | p.value
            return Const(acc, e.width)
        return Concat(parts)
    if isinstance(e, Not):
        a = simplify(e.arg)
        if isinstance(a, Const):
            return Const(~a.value & _mask(a.width), a.width)
        if isinstance(a, Not):
            return a.arg
        return Not(a)
    if isinstance(e, Mux):
        s, t, f = simplify(e.sel), simplify(e.if_true), simplify(e.if_false)
        if isinstance(s, Const):
            return t if s.value else f
        if t == f:
            return t
        return Mux(s, t, f)
    if isinstance(e, BinOp):
        a, b = simplify(e.a), simplify(e.b)
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(evaluate(BinOp(e.op, a, b), {}), e.width)
        ones = _mask(a.width)
        if e.op in ("and", "or", "xor", "add") and isinstance(a, Const):
            a, b = b, a
        if isinstance(b, Const):
            if e.op == "and":
                if b.value == 0:
                    return b
                if b.value == ones:
                    return a
            elif e.op in ("or", "xor", "add", "sub") and b.value == 0:
                return a
            elif e.op == "or" and b.value == ones:
                return b
        return BinOp(e.op, a, b)
    raise TypeError(f"not an expression: {e!r}")


# ------------------------------------------------------------- module types


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "in" | "out"
    width: int

    @property
    def ref(self) -> Ref:
        return Ref(self.name, self.width)


@dataclass(frozen=True)
class Net:
    name: str
    width: int

    @property
    def ref(self) -> Ref:
        return Ref(self.name, self.width)


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    reset_value: int = 0

    @property
    def ref(self) -> Ref:
        return Ref(self.name, self.width)


@dataclass(frozen=True)
class MemoryPrim:
    name: str
    depth: int
    width: int

    def read(self, addr: Expr) -> MemRead:
        return MemRead(self.name, addr, self.width)


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class MemWrite:
    mem: str
    enable: Expr
    addr: Expr
    data: Expr


@dataclass(frozen=True)
class Transition:
    src: str
    guard: Expr
    actions: tuple  # of Assign onto registers
    dst: str


def state_width(n_states: int) -> int:
    return max(1, (n_states - 1).bit_length())


@dataclass(frozen=True)
class Fsm:
    """Moore-style controller; the state register is named after the FSM."""

    name: str
    states: tuple
    reset_state: str
    transitions: tuple

    @property
    def width(self) -> int:
        return state_width(len(self.states))

    @property
    def ref(self) -> Ref:
        return Ref(self.name, self.width)

    def code(self, state: str) -> int:
        return self.states.index(state)

    def in_state(self, state: str) -> Expr:
        return self.ref.eq(Const(self.code(state), self.width))


@dataclass(frozen=True)
class Instance:
    name: str
    module: str
    connections: tuple  # of (child port, parent signal)


@dataclass(frozen=True)
class RtlModule:
    name: str
    ports: tuple = ()
    nets: tuple = ()
    registers: tuple = ()
    memories: tuple = ()
    fsms: tuple = ()
    comb: tuple = ()      # Assign onto out ports and nets
    seq: tuple = ()       # Assign onto registers (next value)
    mem_writes: tuple = ()
    instances: tuple = ()
    methods: tuple = ()   # operation names served through m_<op> ports

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    def has_port(self, name: str) -> bool:
        return any(p.name == name for p in self.ports)

    def signal_widths(self) -> dict:
        out = {p.name: p.width for p in self.ports}
        out.update((n.name, n.width) for n in self.nets)
        out.update((r.name, r.width) for r in self.registers)
        out.update((f.name, f.width) for f in self.fsms)
        return out


@dataclass(frozen=True)
class ExternalInterface:
    """A group of top-level ports that talks to one external device."""

    group: str
    kind: str      # stream_source | stream_sink | fifo_device | lifo_device | sram
    ports: tuple   # of (role, top port name)
    width: int = 0
    depth: int = 0
    read_latency: int = 0
    addr_width: int = 0

    def port(self, role: str) -> str | None:
        for r, name in self.ports:
            if r == role:
                return name
        return None


@dataclass(frozen=True)
class Netlist:
    modules: tuple
    top: str
    interfaces: tuple = ()
    spec_digest: str = ""

    def module(self, name: str) -> RtlModule:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def top_module(self) -> RtlModule:
        return self.module(self.top)

    @property
    def nets(self) -> tuple:
        return tuple((n.name, n.width) for n in self.top_module.nets)

    def interface(self, group: str) -> ExternalInterface:
        for i in self.interfaces:
            if i.group == group:
                return i
        raise KeyError(group)


# ------------------------------------------------------------- FSM lowering


def lower_fsm(fsm: Fsm) -> tuple:
    """Next-state and register-update expressions of ``fsm``.

    Returns ``(state_next, {register: (width, next_expr)})`` where each
    register's expression holds its value when no transition assigns it.
    """
    fire = []
    earlier: dict = {}
    for t in fsm.transitions:
        blocked = earlier.get(t.src, [])
        cond = fsm.in_state(t.src) & t.guard
        for g in blocked:
            cond = cond & ~g
        fire.append(cond)
        earlier.setdefault(t.src, []).append(t.guard)
    nxt: Expr = fsm.ref
    for t, cond in reversed(list(zip(fsm.transitions, fire))):
        nxt = Mux(cond, Const(fsm.code(t.dst), fsm.width), nxt)
    regs: dict = {}
    widths: dict = {}
    for t in fsm.transitions:
        for a in t.actions:
            widths[a.target] = a.expr.width
    for reg, width in widths.items():
        e: Expr = Ref(reg, width)
        for t, cond in reversed(list(zip(fsm.transitions, fire))):
            for a in t.actions:
                if a.target == reg:
                    e = Mux(cond, a.expr, e)
        regs[reg] = (width, e)
    return nxt, regs


# ---------------------------------------------------------------- flattening


@dataclass
class FlatDesign:
    """Single-level view of a netlist, hierarchical names joined by ``.``."""

    widths: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    comb: list = field(default_factory=list)          # (target, expr)
    registers: list = field(default_factory=list)     # (name, width, reset, next)
    memories: list = field(default_factory=list)      # MemoryPrim with flat names
    mem_writes: list = field(default_factory=list)    # MemWrite with flat names


def flatten(netlist: Netlist) -> FlatDesign:
    mods = {m.name: m for m in netlist.modules}
    flat = FlatDesign()

    def visit(mod: RtlModule, prefix: str):
        def q(name: str) -> str:
            return prefix + name

        def fix(e: Expr) -> Expr:
            return rename(e, q)

        for name, w in mod.signal_widths().items():
            flat.widths[q(name)] = w
        for a in mod.comb:
            flat.comb.append((q(a.target), fix(a.expr)))
        for r in mod.registers:
            flat.widths[q(r.name)] = r.width
        seq = {a.target: a.expr for a in mod.seq}
        fsm_regs: dict = {}
        for f in mod.fsms:
            nxt, regs = lower_fsm(f)
            flat.registers.append((q(f.name), f.width, f.code(f.reset_state), fix(nxt)))
            for reg, (_, e) in regs.items():
                fsm_regs[reg] = e
        for r in mod.registers:
            e = seq.get(r.name, fsm_regs.get(r.name, r.ref))
            flat.registers.append((q(r.name), r.width, r.reset_value, fix(e)))
        for m in mod.memories:
            flat.memories.append(MemoryPrim(q(m.name), m.depth, m.width))
        for w in mod.mem_writes:
            flat.mem_writes.append(MemWrite(q(w.mem), fix(w.enable), fix(w.addr), fix(w.data)))
        for inst in mod.instances:
            child = mods[inst.module]
            cprefix = prefix + inst.name + "."
            visit(child, cprefix)
            for port_name, parent_sig in inst.connections:
                p = child.port(port_name)
                w = p.width
                if p.direction == "in":
                    flat.comb.append((cprefix + port_name, Ref(q(parent_sig), w)))
                else:
                    flat.comb.append((q(parent_sig), Ref(cprefix + port_name, w)))

    top = mods[netlist.top]
    visit(top, "")
    flat.inputs = [p.name for p in top.ports if p.direction == "in"]
    flat.outputs = [p.name for p in top.ports if p.direction == "out"]
    return flat


def comb_order(flat: FlatDesign) -> tuple:
    """Topological order of comb assignments and the nets on any cycle."""
    drivers = {t: i for i, (t, _) in enumerate(flat.comb)}
    deps = []
    for _, e in flat.comb:
        deps.append([drivers[r] for r in refs(e) if r in drivers])
    indeg = [0] * len(flat.comb)
    users: list = [[] for _ in flat.comb]
    for i, ds in enumerate(deps):
        for d in set(ds):
            indeg[i] += 1
            users[d].append(i)
    ready = [i for i, n in enumerate(indeg) if n == 0]
    ready.reverse()
    order = []
    while ready:
        i = ready.pop()
        order.append(i)
        for u in users[i]:
            indeg[u] -= 1
            if indeg[u] == 0:
                ready.append(u)
    if len(order) == len(flat.comb):
        return order, []
    stuck = sorted(flat.comb[i][0] for i, n in enumerate(indeg) if n > 0)
    return order, stuck


# ------------------------------------------------------------------- lint


@dataclass(frozen=True)
class LintViolation:
    code: str
    module: str
    names: tuple
    message: str

    def __str__(self):
        return f"[{self.code}] {self.module}: {', '.join(self.names)}: {self.message}"


def _expr_violations(mod: RtlModule, e: Expr, where: str, widths: dict, mems: dict) -> list:
    out = []
    for node in walk(e):
        bad = None
        if isinstance(node, Ref):
            if node.name not in widths:
                out.append(LintViolation("dangling", mod.name, (node.name,), f"unknown signal in {where}"))
            elif widths[node.name] != node.width:
                bad = f"reference width {node.width} != declared {widths[node.name]}"
        elif isinstance(node, MemRead):
            if node.mem not in mems:
                out.append(LintViolation("dangling", mod.name, (node.mem,), f"unknown memory in {where}"))
            elif mems[node.mem].width != node.width:
                bad = "memory read width mismatch"
        elif isinstance(node, Slice):
            if node.lo < 0 or node.width < 1 or node.lo + node.width > node.arg.width:
                bad = f"slice [{node.lo}+:{node.width}] out of range of {node.arg.width} bits"
        elif isinstance(node, BinOp):
            if node.op not in BINOPS:
                bad = f"unknown operator {node.op}"
            elif node.a.width != node.b.width:
                bad = f"operator {node.op} on widths {node.a.width} and {node.b.width}"
        elif isinstance(node, Mux):
            if node.sel.width != 1:
                bad = "mux select must be 1 bit"
            elif node.if_true.width != node.if_false.width:
                bad = f"mux arms of widths {node.if_true.width} and {node.if_false.width}"
        if bad:
            out.append(LintViolation("width", mod.name, (where,), bad))
    return out


def _module_violations(mod: RtlModule, mods: dict) -> list:
    out = []
    names = ([p.name for p in mod.ports] + [n.name for n in mod.nets] + [r.name for r in mod.registers]
             + [m.name for m in mod.memories] + [f.name for f in mod.fsms] + [i.name for i in mod.instances])
    seen = set()
    for n in names:
        if n in seen:
            out.append(LintViolation("duplicate", mod.name, (n,), "name declared twice"))
        seen.add(n)
    widths = mod.signal_widths()
    mems = {m.name: m for m in mod.memories}
    ports = {p.name: p for p in mod.ports}
    nets = {n.name for n in mod.nets}
    regs = {r.name: r for r in mod.registers}

    drivers: dict = {}
    for a in mod.comb:
        where = f"assign {a.target}"
        if a.target in ports and ports[a.target].direction == "out" or a.target in nets:
            drivers.setdefault(a.target, []).append("assign")
            if widths[a.target] != a.expr.width:
                out.append(LintViolation("width", mod.name, (a.target,),
                                         f"assigning {a.expr.width} bits to {widths[a.target]}"))
        else:
            out.append(LintViolation("bad-target", mod.name, (a.target,),
                                     "comb target must be an out port or a net"))
        out.extend(_expr_violations(mod, a.expr, where, widths, mems))

    reg_drivers: dict = {}
    for a in mod.seq:
        if a.target not in regs:
            out.append(LintViolation("bad-target", mod.name, (a.target,), "register update of a non-register"))
            continue
        reg_drivers.setdefault(a.target, []).append("seq")
        if a.expr.width != regs[a.target].width:
            out.append(LintViolation("width", mod.name, (a.target,), "register next-value width mismatch"))
        out.extend(_expr_violations(mod, a.expr, f"next {a.target}", widths, mems))
    for r in mod.registers:
        if not 0 <= r.reset_value < (1 << r.width):
            out.append(LintViolation("width", mod.name, (r.name,), "reset value does not fit"))
    for f in mod.fsms:
        if f.reset_state not in f.states:
            out.append(LintViolation("fsm", mod.name, (f.name, f.reset_state), "reset state not declared"))
        assigned = set()
        for t in f.transitions:
            for s in (t.src, t.dst):
                if s not in f.states:
                    out.append(LintViolation("fsm", mod.name, (f.name, s), "transition endpoint not declared"))
            if t.guard.width != 1:
                out.append(LintViolation("width", mod.name, (f.name,), "guard must be 1 bit"))
            out.extend(_expr_violations(mod, t.guard, f"guard in {f.name}", widths, mems))
            for a in t.actions:
                if a.target not in regs:
                    out.append(LintViolation("bad-target", mod.name, (a.target,), "FSM action on a non-register"))
                    continue
                if a.expr.width != regs[a.target].width:
                    out.append(LintViolation("width", mod.name, (a.target,), "FSM action width mismatch"))
                out.extend(_expr_violations(mod, a.expr, f"action in {f.name}", widths, mems))
                assigned.add(a.target)
        for reg in assigned:
            reg_drivers.setdefault(reg, []).append(f.name)
    for reg, ds in reg_drivers.items():
        if len(ds) > 1:
            out.append(LintViolation("multi-driver", mod.name, (reg,), f"register driven by {ds}"))

    for w in mod.mem_writes:
        if w.mem not in mems:
            out.append(LintViolation("dangling", mod.name, (w.mem,), "write to unknown memory"))
            continue
        if w.enable.width != 1 or w.data.width != mems[w.mem].width:
            out.append(LintViolation("width", mod.name, (w.mem,), "memory write port width mismatch"))
        for e in (w.enable, w.addr, w.data):
            out.extend(_expr_violations(mod, e, f"write {w.mem}", widths, mems))

    for inst in mod.instances:
        child = mods.get(inst.module)
        if child is None:
            out.append(LintViolation("dangling", mod.name, (inst.name, inst.module), "unknown module"))
            continue
        connected = set()
        for pname, sig in inst.connections:
            if not child.has_port(pname):
                out.append(LintViolation("dangling", mod.name, (inst.name, pname), "no such port on child"))
                continue
            if pname in connected:
                out.append(LintViolation("multi-driver", mod.name, (inst.name, pname), "port connected twice"))
            connected.add(pname)
            p = child.port(pname)
            if sig not in widths:
                out.append(LintViolation("dangling", mod.name, (sig,), f"unknown signal on {inst.name}.{pname}"))
                continue
            if widths[sig] != p.width:
                out.append(LintViolation("width", mod.name, (f"{inst.name}.{pname}", sig),
                                         f"connection of {p.width} bits to {widths[sig]}"))
            if p.direction == "out":
                if sig in ports and ports[sig].direction == "out" or sig in nets:
                    drivers.setdefault(sig, []).append(inst.name)
                else:
                    out.append(LintViolation("bad-target", mod.name, (sig,), "child output drives a non-net"))
        for p in child.ports:
            if p.direction == "in" and p.name not in connected:
                out.append(LintViolation("dangling", mod.name, (inst.name, p.name), "child input left open"))

    for p in mod.ports:
        if p.direction == "out":
            n = len(drivers.get(p.name, []))
            if n != 1:
                out.append(LintViolation("multi-driver" if n else "undriven", mod.name, (p.name,),
                                         f"out port has {n} drivers"))
    for n_ in mod.nets:
        n = len(drivers.get(n_.name, []))
        if n != 1:
            out.append(LintViolation("multi-driver" if n else "undriven", mod.name, (n_.name,),
                                     f"net has {n} drivers"))
    return out


def check_netlist(n: Netlist) -> list:
    """Every structural problem of ``n``; empty means well-formed."""
    out = []
    mods: dict = {}
    for m in n.modules:
        if m.name in mods:
            out.append(LintViolation("duplicate", m.name, (m.name,), "module defined twice"))
        mods[m.name] = m
    if n.top not in mods:
        return out + [LintViolation("dangling", n.top, (n.top,), "top module not found")]
    for m in n.modules:
        out.extend(_module_violations(m, mods))
    if out:
        return out
    # instance recursion would make flattening diverge
    def reaches(name, stack):
        for inst in mods[name].instances:
            if inst.module in stack:
                return True
            if reaches(inst.module, stack | {inst.module}):
                return True
        return False
    if reaches(n.top, {n.top}):
        return [LintViolation("recursion", n.top, (n.top,), "module instantiates itself")]
    flat = flatten(n)
    _, stuck = comb_order(flat)
    if stuck:
        out.append(LintViolation("comb-cycle", n.top, tuple(stuck), "combinational cycle"))
    return out
