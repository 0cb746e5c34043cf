"""Template generators for containers, iterators and arbiters.

Each generator returns an :class:`~patternforge.rtlir.RtlModule` customised
for one (container kind, physical target, widths, used operations) point.
Method requests follow a hold-until-done protocol: a requester raises
``m_<op>`` and keeps it (and any ``data_in``/``addr``) stable until ``done``
pulses; results on ``data`` are valid in the ``done`` cycle.
"""

from __future__ import annotations

from dataclasses import replace

from .model import (
    STREAM_KINDS, ContainerSpec, IteratorSpec, MappingPlan, PhysicalTarget,
    _iterator_violations, _mapping_violations,
)
from .rtlir import (
    Assign, BinOp, Concat, Const, Expr, Fsm, MemoryPrim, MemRead, MemWrite, Mux, Net, Not,
    Port, Ref, Register, RtlModule, Slice, Transition, any_of, cat, children, const, mul_const,
    mux, refs, simplify, state_width, substitute,
)

CONTAINER_METHODS = {
    "read_buffer": ("empty", "size", "pop"),
    "write_buffer": ("full", "size", "push"),
    "queue": ("empty", "full", "size", "push", "pop"),
    "stack": ("push", "pop", "empty", "full"),
    "vector": ("read_at", "write_at", "size"),
}

TARGET_SUFFIX = {"fifo_core": "fifo", "lifo_core": "lifo", "sram": "sram", "line_buffer3": "lbuf"}


class GenerationError(ValueError):
    pass


class _Builder:
    def __init__(self, name: str):
        self.name = name
        self.ports: list = []
        self.nets: list = []
        self.registers: list = []
        self.memories: list = []
        self.fsms: list = []
        self.comb: list = []
        self.seq: list = []
        self.mem_writes: list = []

    def inp(self, name: str, width: int) -> Ref:
        self.ports.append(Port(name, "in", width))
        return Ref(name, width)

    def out(self, name: str, width: int, expr: Expr | None = None) -> str:
        self.ports.append(Port(name, "out", width))
        if expr is not None:
            self.assign(name, expr)
        return name

    def net(self, name: str, expr: Expr) -> Ref:
        self.nets.append(Net(name, expr.width))
        self.comb.append(Assign(name, expr))
        return Ref(name, expr.width)

    def reg(self, name: str, width: int, reset: int = 0) -> Ref:
        self.registers.append(Register(name, width, reset))
        return Ref(name, width)

    def assign(self, target: str, expr: Expr):
        self.comb.append(Assign(target, expr))

    def update(self, reg: Ref, expr: Expr):
        self.seq.append(Assign(reg.name, expr))

    def build(self, methods=()) -> RtlModule:
        return RtlModule(
            name=self.name, ports=tuple(self.ports), nets=tuple(self.nets),
            registers=tuple(self.registers), memories=tuple(self.memories), fsms=tuple(self.fsms),
            comb=tuple(self.comb), seq=tuple(self.seq), mem_writes=tuple(self.mem_writes),
            methods=tuple(methods),
        )


def _fit(e: Expr, width: int) -> Expr:
    return e.zext(width)


def _data_mux(choices, width: int) -> Expr:
    """Priority mux over (request, value) pairs, zero when none is raised."""
    out: Expr = Const(0, width)
    for req, value in reversed(choices):
        out = Mux(req, _fit(value, width), out)
    return out


def beat_width(container: ContainerSpec, target: PhysicalTarget) -> int:
    """Width of the container's ``data``/``data_in`` buses."""
    if target.kind == "line_buffer3":
        return 3 * container.element.width_bits
    return target.data_bus_width_bits


# ------------------------------------------------------------- containers


def gen_container(spec: ContainerSpec, plan: MappingPlan, target: PhysicalTarget) -> RtlModule:
    """Container module exposing every operation of ``spec.kind``.

    The method side is the functional interface; the ``p_*``/``req``/``ack``
    ports are the implementation interface of ``target``.
    """
    bad = _mapping_violations(spec, target)
    if bad or plan.container != spec.name or plan.target != target.name:
        raise GenerationError(f"plan does not fit {spec.name} on {target.name}: {bad}")
    name = f"{spec.name}_{TARGET_SUFFIX[target.kind]}"
    if target.kind in ("fifo_core", "lifo_core"):
        return _core_container(name, spec, target)
    if target.kind == "line_buffer3":
        return _line_buffer(name, spec, plan)
    if spec.kind == "vector":
        return _sram_vector(name, spec, plan, target)
    return _sram_stream(name, spec, plan, target)


def _core_container(name: str, spec: ContainerSpec, target: PhysicalTarget) -> RtlModule:
    b = target.data_bus_width_bits
    ops = CONTAINER_METHODS[spec.kind]
    g = _Builder(name)
    m = {op: g.inp(f"m_{op}", 1) for op in ops}
    data_in = g.inp("data_in", b) if "push" in ops else None
    reads, writes = "pop" in ops, "push" in ops
    p_empty = g.inp("p_empty", 1) if reads else None
    p_full = g.inp("p_full", 1) if writes else None
    p_data = g.inp("p_data", b) if reads else None

    done_terms, choices = [], []
    if reads:
        pop_ok = m["pop"] & ~p_empty
        g.out("p_read", 1, pop_ok)
    if writes:
        push_ok = m["push"] & ~p_full
        g.out("p_write", 1, push_ok)
        g.out("p_data_out", b, data_in)
    for op in ops:
        if op == "pop":
            done_terms.append(pop_ok)
            choices.append((m[op], p_data))
        elif op == "push":
            done_terms.append(push_ok)
        elif op == "empty":
            done_terms.append(m[op])
            choices.append((m[op], p_empty))
        elif op == "full":
            done_terms.append(m[op])
            choices.append((m[op], p_full))
        elif op == "size":
            done_terms.append(m[op])
            # a core exposes flags only; size is the occupancy they imply
            size = ~p_empty if reads else mux(p_full, const(spec.capacity, b), Const(0, b))
            choices.append((m[op], size))
    if choices:
        g.out("data", b, _data_mux(choices, b))
    g.out("done", 1, any_of(done_terms))
    return g.build(ops)


def _addr_ops(base: int, depth: int, aw: int):
    last = const(base + depth - 1, aw)
    first = const(base, aw)

    def advance(p: Ref) -> Expr:
        return mux(p.eq(last), first, p + 1)
    return advance


def _sram_stream(name: str, spec: ContainerSpec, plan: MappingPlan, target: PhysicalTarget) -> RtlModule:
    b = target.data_bus_width_bits
    aw = target.addr_width_bits
    k = plan.beats_per_element
    depth = spec.capacity * k
    base = plan.base_address
    cw = aw + 1
    kind = spec.kind
    ops = CONTAINER_METHODS[kind]
    g = _Builder(name)
    m = {op: g.inp(f"m_{op}", 1) for op in ops}
    data_in = g.inp("data_in", b) if "push" in ops else None

    ack = g.inp("ack", 1)
    p_data = g.inp("p_data", b)
    if kind == "read_buffer":
        src_empty = g.inp("p_src_empty", 1)
        src_data = g.inp("p_src_data", b)
    if kind == "write_buffer":
        snk_full = g.inp("p_snk_full", 1)

    count = g.reg("count", cw)
    not_empty = ~count.eq(0)
    not_full = ~count.eq(const(depth, cw))
    advance = _addr_ops(base, depth, aw)
    if kind == "stack":
        top = (const(base, aw) + _fit(count, aw))
        raddr, waddr = top - 1, top
        head = tail = None
    else:
        head = g.reg("head", aw, base)
        tail = g.reg("tail", aw, base)
        raddr, waddr = head, tail

    fsm = Fsm("ctrl", ("IDLE", "READ", "WRITE"), "IDLE", ())
    rd, wr = fsm.in_state("READ"), fsm.in_state("WRITE")
    pop_go = (m["pop"] & not_empty) if "pop" in m else None
    push_go = (m["push"] & not_full) if "push" in m else None
    if kind == "read_buffer":
        idle = [(pop_go, "READ"), (~src_empty & not_full, "WRITE")]
    elif kind == "write_buffer":
        idle = [(push_go, "WRITE"), (not_empty & ~snk_full, "READ")]
    else:
        idle = [(pop_go, "READ"), (push_go, "WRITE")]

    def bump(up: bool):
        acts = [Assign("count", count + 1 if up else count - 1)]
        if kind != "stack":
            ptr = tail if up else head
            acts.append(Assign(ptr.name, advance(ptr)))
        return tuple(acts)

    trans = [Transition("IDLE", guard, (), dst) for guard, dst in idle]
    if kind == "write_buffer":
        trans.append(Transition("READ", ack & ~snk_full, bump(False), "IDLE"))
        trans.append(Transition("READ", ack, (), "IDLE"))
    else:
        trans.append(Transition("READ", ack, bump(False), "IDLE"))
    trans.append(Transition("WRITE", ack, bump(True), "IDLE"))
    fsm = replace(fsm, transitions=tuple(trans))
    g.fsms.append(fsm)

    g.out("req", 1, rd | wr)
    g.out("p_we", 1, wr)
    g.out("p_addr", aw, mux(wr, waddr, raddr))
    g.out("p_data_out", b, src_data if kind == "read_buffer" else data_in)
    if kind == "read_buffer":
        g.out("p_src_read", 1, wr & ack)
    if kind == "write_buffer":
        g.out("p_snk_write", 1, rd & ack & ~snk_full)
        g.out("p_snk_data", b, p_data)

    done_terms, choices = [], []
    for op in ops:
        if op == "pop":
            done_terms.append(rd & ack)
            choices.append((m[op], p_data))
        elif op == "push":
            done_terms.append(wr & ack)
        elif op == "empty":
            done_terms.append(m[op])
            choices.append((m[op], count.eq(0)))
        elif op == "full":
            done_terms.append(m[op])
            choices.append((m[op], count.eq(const(depth, cw))))
        elif op == "size":
            done_terms.append(m[op])
            choices.append((m[op], count))
    g.out("data", b, _data_mux(choices, b))
    g.out("done", 1, any_of(done_terms))
    return g.build(ops)


def _sram_vector(name: str, spec: ContainerSpec, plan: MappingPlan, target: PhysicalTarget) -> RtlModule:
    b = target.data_bus_width_bits
    aw = target.addr_width_bits
    ops = CONTAINER_METHODS["vector"]
    g = _Builder(name)
    m = {op: g.inp(f"m_{op}", 1) for op in ops}
    addr = g.inp("addr", aw)
    data_in = g.inp("data_in", b)
    ack = g.inp("ack", 1)
    p_data = g.inp("p_data", b)
    fsm = Fsm("ctrl", ("IDLE", "READ", "WRITE"), "IDLE", ())
    rd, wr = fsm.in_state("READ"), fsm.in_state("WRITE")
    fsm = replace(fsm, transitions=(
        Transition("IDLE", m["read_at"], (), "READ"),
        Transition("IDLE", m["write_at"], (), "WRITE"),
        Transition("READ", ack, (), "IDLE"),
        Transition("WRITE", ack, (), "IDLE"),
    ))
    g.fsms.append(fsm)
    g.out("req", 1, rd | wr)
    g.out("p_we", 1, wr)
    g.out("p_addr", aw, const(plan.base_address, aw) + addr)
    g.out("p_data_out", b, data_in)
    choices = [(m["read_at"], p_data), (m["size"], const(spec.capacity, max(b, spec.capacity.bit_length())))]
    g.out("data", b, _data_mux(choices, b))
    g.out("done", 1, ((rd | wr) & ack) | m["size"])
    return g.build(ops)


def _line_buffer(name: str, spec: ContainerSpec, plan: MappingPlan) -> RtlModule:
    """Three-row window over a raster pixel stream.

    Rows 0 and 1 of each frame are absorbed into two row memories; from row
    2 on, every pop consumes the incoming pixel and returns the column
    ``{row r, row r-1, row r-2}`` (row r-2 in the low bits).
    """
    w = spec.element.width_bits
    width, height = plan.line_length, plan.line_count
    if width < 1 or height < 3 or 2 * width > spec.capacity:
        raise GenerationError(f"{spec.name}: line buffer needs frame geometry from its blur binding")
    ops = CONTAINER_METHODS["read_buffer"]
    g = _Builder(name)
    m = {op: g.inp(f"m_{op}", 1) for op in ops}
    p_empty = g.inp("p_empty", 1)
    p_data = g.inp("p_data", w)
    cw = max(1, (width - 1).bit_length())
    rw = max(1, (height - 1).bit_length())
    col = g.reg("col", cw)
    row = g.reg("row", rw)
    g.memories.append(MemoryPrim("row_m1", width, w))
    g.memories.append(MemoryPrim("row_m2", width, w))
    above = MemRead("row_m1", col, w)
    above2 = MemRead("row_m2", col, w)

    primed = g.net("primed", ~(row.eq(0) | row.eq(1)))
    avail = ~p_empty
    fill = avail & ~primed
    pop_ok = g.net("pop_ok", m["pop"] & avail & primed)
    accept = g.net("accept", fill | pop_ok)
    g.out("p_read", 1, accept)
    g.mem_writes.append(MemWrite("row_m2", accept, col, above))
    g.mem_writes.append(MemWrite("row_m1", accept, col, p_data))
    eol = col.eq(const(width - 1, cw))
    g.update(col, mux(accept, mux(eol, Const(0, cw), col + 1), col))
    g.update(row, mux(accept & eol, mux(row.eq(const(height - 1, rw)), Const(0, rw), row + 1), row))
    ready = avail & primed
    column = cat(p_data, above, above2)
    g.out("data", 3 * w, _data_mux([(m["pop"], column), (m["empty"], ~ready), (m["size"], ready)], 3 * w))
    g.out("done", 1, pop_ok | m["empty"] | m["size"])
    return g.build(ops)


# -------------------------------------------------------------- iterators


def iterator_container_ops(it: IteratorSpec, container: ContainerSpec) -> tuple:
    """Container operations an iterator drives (used to prune the container)."""
    if container.kind == "vector":
        ops = []
        if "read" in it.used_ops:
            ops.append("read_at")
        if "write" in it.used_ops:
            ops.append("write_at")
        return tuple(ops) or ("size",)
    ops = []
    if it.reads:
        ops.append("pop")
    if it.writes:
        ops.append("push")
    return tuple(ops)


def gen_iterator(it: IteratorSpec, plan: MappingPlan, container: ContainerSpec,
                 target: PhysicalTarget) -> RtlModule:
    """Iterator module restricted to ``it.used_ops``.

    Single-beat sequential iterators are pure renaming; wider elements get a
    beat-sequencing FSM; vector iterators keep a position register.
    """
    bad = _iterator_violations(it, container)
    if bad:
        raise GenerationError("; ".join(str(v) for v in bad))
    if plan.container != container.name:
        raise GenerationError(f"plan is for {plan.container}, iterator walks {container.name}")
    b = beat_width(container, target)
    k = plan.beats_per_element
    ew = b if target.kind == "line_buffer3" else container.element.width_bits
    g = _Builder(it.name)
    ops = it.ordered_ops()
    m = {op: g.inp(f"m_{op}", 1) for op in ops}
    data_in = g.inp("data_in", ew) if "write" in ops else None
    index_in = None
    if "index" in ops:
        index_in = g.inp("index_in", _index_width(container))
    c_done = g.inp("c_done", 1)
    c_data = g.inp("c_data", b) if "read" in ops or (it.reads and container.kind != "vector") else None

    fsm = None
    if k > 1:
        fsm = Fsm("beat", tuple(f"B{i}" for i in range(k)), "B0", ())
        last = fsm.in_state(f"B{k - 1}")
    else:
        last = Const(1, 1)

    asm = None
    if c_data is not None and "read" in ops and k > 1:
        asm = g.reg("asm", (k - 1) * b)
    if fsm is not None:
        trans = []
        for i in range(k):
            acts = ()
            if asm is not None:
                nxt = c_data if k == 2 else cat(c_data, Slice(asm, b, (k - 2) * b))
                acts = (Assign("asm", nxt),)
            trans.append(Transition(f"B{i}", c_done, acts, f"B{(i + 1) % k}"))
        fsm = replace(fsm, transitions=tuple(trans))
        g.fsms.append(fsm)

    if "read" in ops:
        whole = c_data if asm is None else cat(c_data, asm)
        g.out("data", ew, _fit(whole, ew))
    if data_in is not None:
        padded = _fit(data_in, k * b)
        beats = [Slice(padded, i * b, b) for i in range(k)]
        word: Expr = beats[-1]
        for i in reversed(range(k - 1)):
            word = Mux(fsm.in_state(f"B{i}"), beats[i], word)
        g.out("c_data_in", b, simplify(word))

    if container.kind in STREAM_KINDS:
        move = m.get("inc") if "inc" in m else m.get("dec")
        if move is None:
            raise GenerationError(f"{it.name}: stream iterator without a move operation")
        write_req = m.get("write")
        if it.reads:
            g.out("c_m_pop", 1, move & ~write_req if it.writes and write_req is not None else move)
        if it.writes:
            if it.reads:
                g.out("c_m_push", 1, move & write_req if write_req is not None else Const(0, 1))
            else:
                g.out("c_m_push", 1, move)
        g.out("done", 1, c_done & last if k > 1 else c_done)
        return g.build(ops)

    # vector: position register, element index -> beat address
    aw = target.addr_width_bits
    iw = _index_width(container)
    pos = g.reg("pos", iw)
    beat_no = Const(0, aw)
    if fsm is not None:
        for i in range(1, k):
            beat_no = Mux(fsm.in_state(f"B{i}"), const(i, aw), beat_no)
    g.out("c_addr", aw, mul_const(pos, k, aw) + beat_no)
    rd = m.get("read")
    wr = m.get("write")
    if rd is not None:
        g.out("c_m_read_at", 1, rd)
    if wr is not None:
        g.out("c_m_write_at", 1, wr & ~rd if rd is not None else wr)
    mem_req = any_of([x for x in (rd, wr) if x is not None])
    moves = any_of([m[o] for o in ("inc", "dec", "index") if o in m])
    if rd is None and wr is None:
        done = moves
    else:
        done = mux(mem_req, c_done & last, moves)
    done_net = g.net("step", done)
    g.out("done", 1, done_net)
    nxt: Expr = pos
    if "dec" in m:
        nxt = mux(m["dec"], pos - 1, nxt)
    if "inc" in m:
        nxt = mux(m["inc"], pos + 1, nxt)
    if "index" in m:
        nxt = mux(m["index"], index_in, nxt)
    g.update(pos, mux(done_net, nxt, pos))
    return g.build(ops)


def _index_width(container: ContainerSpec) -> int:
    return max(1, (container.capacity - 1).bit_length())


# ---------------------------------------------------------------- arbiter


def gen_arbiter(target: PhysicalTarget, client_count: int) -> RtlModule:
    """Round-robin arbiter multiplexing one sram port among clients.

    A grant is held while the client waits for ``ack``; after each
    completed access the next requesting client in rotation wins.
    """
    if client_count < 2:
        raise GenerationError("an arbiter needs at least two clients")
    if not target.shared:
        raise GenerationError(f"target {target.name} is not shared")
    n = client_count
    b, aw = target.data_bus_width_bits, target.addr_width_bits
    sw = state_width(n)
    g = _Builder(f"{target.name}_arb")
    req = [g.inp(f"c{i}_req", 1) for i in range(n)]
    addr = [g.inp(f"c{i}_p_addr", aw) for i in range(n)]
    dout = [g.inp(f"c{i}_p_data_out", b) for i in range(n)]
    we = [g.inp(f"c{i}_p_we", 1) for i in range(n)]
    ack = g.inp("ack", 1)
    p_data = g.inp("p_data", b)
    busy = g.reg("busy", 1)
    cur = g.reg("cur", sw)
    last = g.reg("last", sw, n - 1)

    def pick_after(l: int) -> Expr:
        order = [(l + 1 + j) % n for j in range(n)]
        out: Expr = const(order[-1], sw)
        for idx in reversed(order[:-1]):
            out = Mux(req[idx], const(idx, sw), out)
        return out

    pick: Expr = pick_after(n - 1)
    for l in reversed(range(n - 1)):
        pick = Mux(last.eq(const(l, sw)), pick_after(l), pick)
    sel = g.net("sel", mux(busy, cur, pick))

    def by_sel(values) -> Expr:
        out = values[-1]
        for i in reversed(range(n - 1)):
            out = Mux(sel.eq(const(i, sw)), values[i], out)
        return out

    dev_req = g.net("dev_req", by_sel(req))
    g.out("req", 1, dev_req)
    g.out("p_addr", aw, by_sel(addr))
    g.out("p_data_out", b, by_sel(dout))
    g.out("p_we", 1, by_sel(we))
    for i in range(n):
        g.out(f"c{i}_ack", 1, ack & dev_req & sel.eq(const(i, sw)))
        g.out(f"c{i}_p_data", b, p_data)
    waiting = dev_req & ~ack
    g.update(busy, waiting)
    g.update(cur, mux(waiting, sel, cur))
    g.update(last, mux(dev_req & ack, sel, last))
    return g.build()


# ---------------------------------------------------------------- pruning


class PruneError(ValueError):
    pass


# Data ports only meaningful while some write strobe survives.
_STROBED = {"p_data_out": ("p_write", "p_we"), "p_snk_data": ("p_snk_write",)}


def _map_expr(e: Expr, fn) -> Expr:
    kids = children(e)
    if kids:
        new = tuple(_map_expr(c, fn) for c in kids)
        if new != kids:
            if isinstance(e, Slice):
                e = Slice(new[0], e.lo, e.width)
            elif isinstance(e, Concat):
                e = Concat(new)
            elif isinstance(e, BinOp):
                e = BinOp(e.op, new[0], new[1])
            elif isinstance(e, Not):
                e = Not(new[0])
            elif isinstance(e, Mux):
                e = Mux(*new)
            elif isinstance(e, MemRead):
                e = MemRead(e.mem, new[0], e.width)
    return fn(e)


def _renumber(fsm: Fsm, keep: list):
    """Rewrite state tests of ``fsm`` after dropping unreachable states."""
    old_w = fsm.width
    new = replace(fsm, states=tuple(keep))
    new_w = new.width

    def fn(e: Expr) -> Expr:
        if (isinstance(e, BinOp) and e.op == "eq" and isinstance(e.a, Ref) and e.a.name == fsm.name
                and e.a.width == old_w and isinstance(e.b, Const)):
            state = fsm.states[e.b.value] if e.b.value < len(fsm.states) else None
            if state not in keep:
                return Const(0, 1)
            return BinOp("eq", Ref(fsm.name, new_w), Const(keep.index(state), new_w))
        return e
    return new, fn


def prune_unused(m: RtlModule, used_ops) -> RtlModule:
    """Drop the logic of operations outside ``used_ops``.

    Dropped request ports are tied low, then constants are propagated,
    unreachable FSM states and constant or unobserved state are removed,
    and implementation ports no retained operation needs disappear.
    """
    used = set(used_ops)
    if not used:
        raise PruneError("used_ops must not be empty")
    keep_ops = [op for op in m.methods if op in used]
    if not keep_ops:
        raise PruneError(f"pruning {m.name} to {sorted(used)} would remove every operation")
    if set(m.methods) <= used:
        return m
    table: dict = {f"m_{op}": Const(0, 1) for op in m.methods if op not in used}

    ports = [p for p in m.ports if p.name not in table]
    nets = list(m.nets)
    regs = list(m.registers)
    mems = list(m.memories)
    fsms = list(m.fsms)
    comb = list(m.comb)
    seq = list(m.seq)
    writes = list(m.mem_writes)

    def fold(e: Expr) -> Expr:
        return simplify(substitute(e, table))

    for _ in range(64):
        before = (tuple(ports), tuple(nets), tuple(regs), tuple(mems), tuple(fsms),
                  tuple(comb), tuple(seq), tuple(writes))
        comb = [Assign(a.target, fold(a.expr)) for a in comb]
        seq = [Assign(a.target, fold(a.expr)) for a in seq]
        writes = [MemWrite(w.mem, fold(w.enable), fold(w.addr), fold(w.data)) for w in writes]
        writes = [w for w in writes if w.enable != Const(0, 1)]
        new_fsms = []
        for f in fsms:
            trans = []
            closed: set = set()
            for t in f.transitions:
                guard = fold(t.guard)
                if t.src in closed or guard == Const(0, 1):
                    continue
                if guard == Const(1, 1):
                    closed.add(t.src)
                trans.append(Transition(t.src, guard, tuple(Assign(a.target, fold(a.expr)) for a in t.actions), t.dst))
            reach, todo = {f.reset_state}, [f.reset_state]
            while todo:
                s = todo.pop()
                for t in trans:
                    if t.src == s and t.dst not in reach:
                        reach.add(t.dst)
                        todo.append(t.dst)
            keep = [s for s in f.states if s in reach]
            trans = [t for t in trans if t.src in reach]
            f2 = replace(f, transitions=tuple(trans))
            if len(keep) != len(f.states):
                f2, fn = _renumber(f2, keep)
                rw = lambda e, fn=fn: simplify(_map_expr(e, fn))
                comb = [Assign(a.target, rw(a.expr)) for a in comb]
                seq = [Assign(a.target, rw(a.expr)) for a in seq]
                writes = [MemWrite(w.mem, rw(w.enable), rw(w.addr), rw(w.data)) for w in writes]
                f2 = replace(f2, transitions=tuple(
                    Transition(t.src, rw(t.guard), tuple(Assign(a.target, rw(a.expr)) for a in t.actions), t.dst)
                    for t in f2.transitions))
                new_fsms = [replace(o, transitions=tuple(
                    Transition(t.src, rw(t.guard), tuple(Assign(a.target, rw(a.expr)) for a in t.actions), t.dst)
                    for t in o.transitions)) for o in new_fsms]
            if len(f2.states) == 1 and not any(t.actions for t in f2.transitions):
                table[f2.name] = Const(0, f2.width)
                continue
            new_fsms.append(f2)
        fsms = new_fsms

        # registers nobody drives keep their reset value forever
        driven = {a.target for a in seq if a.expr != Ref(a.target, a.expr.width)}
        for f in fsms:
            for t in f.transitions:
                driven.update(a.target for a in t.actions)
        for r in regs:
            if r.name not in driven:
                table[r.name] = Const(r.reset_value, r.width)
        regs = [r for r in regs if r.name not in table]
        seq = [a for a in seq if a.target not in table]
        fsms = [replace(f, transitions=tuple(
            replace(t, actions=tuple(a for a in t.actions if a.target not in table)) for t in f.transitions))
            for f in fsms]

        # out ports: constant-zero strobes and unstrobed data disappear
        port_names = {p.name for p in ports}
        drivers = {a.target: a.expr for a in comb}
        drop = set()
        for p in ports:
            if p.direction != "out" or p.name == "done":
                continue
            if drivers.get(p.name) == Const(0, p.width):
                drop.add(p.name)
            strobes = _STROBED.get(p.name)
            if strobes and not any(s in port_names and drivers.get(s) != Const(0, 1) for s in strobes):
                drop.add(p.name)
        ports = [p for p in ports if p.name not in drop]
        comb = [a for a in comb if a.target not in drop]

        # liveness from the surviving outputs
        comb_of = {a.target: a.expr for a in comb}
        seq_of = {a.target: a.expr for a in seq}
        live: set = set()
        work = [p.name for p in ports if p.direction == "out"]
        fsm_by_name = {f.name: f for f in fsms}
        while work:
            name = work.pop()
            if name in live:
                continue
            live.add(name)
            deps: set = set()
            if name in comb_of:
                deps |= refs(comb_of[name])
            if name in seq_of:
                deps |= refs(seq_of[name])
            for w in writes:
                if w.mem == name:
                    deps |= refs(w.enable) | refs(w.addr) | refs(w.data)
            for f in fsms:
                assigns = any(a.target == name for t in f.transitions for a in t.actions)
                if f.name == name or assigns:
                    deps.add(f.name)
                if f.name == name:
                    for t in f.transitions:
                        deps |= refs(t.guard)
                if assigns:
                    for t in f.transitions:
                        for a in t.actions:
                            if a.target == name:
                                deps |= refs(a.expr)
            work.extend(deps - live)
        nets = [n for n in nets if n.name in live]
        comb = [a for a in comb if a.target in live]
        regs = [r for r in regs if r.name in live]
        seq = [a for a in seq if a.target in live]
        mems = [x for x in mems if x.name in live]
        writes = [w for w in writes if w.mem in live]
        fsms = [replace(f, transitions=tuple(
            replace(t, actions=tuple(a for a in t.actions if a.target in live)) for t in f.transitions))
            for f in fsms if f.name in live or f.name in fsm_by_name and any(
                a.target in live for t in f.transitions for a in t.actions)]

        read: set = set()
        for a in comb + seq:
            read |= refs(a.expr)
        for w in writes:
            read |= refs(w.enable) | refs(w.addr) | refs(w.data)
        for f in fsms:
            for t in f.transitions:
                read |= refs(t.guard)
                for a in t.actions:
                    read |= refs(a.expr)
        retained = {f"m_{op}" for op in keep_ops}
        ports = [p for p in ports if p.direction == "out" or p.name in retained or p.name in read]

        after = (tuple(ports), tuple(nets), tuple(regs), tuple(mems), tuple(fsms),
                 tuple(comb), tuple(seq), tuple(writes))
        if after == before:
            break

    return RtlModule(
        name=m.name, ports=tuple(ports), nets=tuple(nets), registers=tuple(regs),
        memories=tuple(mems), fsms=tuple(fsms), comb=tuple(comb), seq=tuple(seq),
        mem_writes=tuple(writes), instances=m.instances, methods=tuple(keep_ops),
    )
