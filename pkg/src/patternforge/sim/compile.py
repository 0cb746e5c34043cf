"""Testbench assembly and lowering of a netlist to a flat slot program.

External devices that have state of their own (sram, fifo/lifo cores) are
built as IR modules and instantiated next to the design under test; stream
endpoints stay as testbench ports that the kernel drives directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..genlib import _Builder
from ..rtlir import (
    Assign, BinOp, Concat, Const, Expr, Instance, MemRead, MemWrite, MemoryPrim, Mux, Net, Netlist,
    Not, Port, Ref, RtlModule, Slice, check_netlist, comb_order, const, flatten, mux,
)

DUT = "dut"
MAX_MEMORY_WORDS = 1 << 20

# opcodes shared with the kernels
CONST, COPY, AND, OR, XOR, NOT, EQ, ADD, SUB, MUX, SLICE, CONCAT2, MEMRD = range(13)


class SimulationError(RuntimeError):
    pass


def _bits(n: int) -> int:
    return max(1, int(n).bit_length())


def sram_device(name: str, width: int, addr_width: int, latency: int) -> RtlModule:
    """Single-port memory that acks ``latency`` cycles after ``req`` rises."""
    depth = 1 << addr_width
    if depth > MAX_MEMORY_WORDS:
        raise SimulationError(f"{name}: {depth} words is too large to simulate")
    g = _Builder(name)
    req = g.inp("req", 1)
    we = g.inp("we", 1)
    addr = g.inp("addr", addr_width)
    wdata = g.inp("wdata", width)
    g.memories.append(MemoryPrim("mem", depth, width))
    if latency == 0:
        ack = g.net("ack_i", req)
    else:
        cw = _bits(latency)
        cnt = g.reg("cnt", cw)
        ack = g.net("ack_i", req & cnt.eq(const(latency, cw)))
        g.update(cnt, mux(req & ~ack, cnt + 1, Const(0, cw)))
    g.out("ack", 1, ack)
    g.out("rdata", width, MemRead("mem", addr, width))
    g.mem_writes.append(MemWrite("mem", req & ack & we, addr, wdata))
    return g.build()


def core_device(name: str, kind: str, width: int, depth: int, contents=()) -> RtlModule:
    """Hardware fifo (``fifo_device``) or lifo (``lifo_device``) core."""
    contents = list(contents)
    if len(contents) > depth:
        raise SimulationError(f"{name}: {len(contents)} preloaded elements exceed depth {depth}")
    g = _Builder(name)
    read = g.inp("read", 1)
    write = g.inp("write", 1)
    wdata = g.inp("wdata", width)
    g.memories.append(MemoryPrim("mem", depth, width))
    cw = _bits(depth)
    count = g.reg("count", cw, len(contents))
    empty = g.net("empty_i", count.eq(0))
    full = g.net("full_i", count.eq(const(depth, cw)))
    rd = g.net("rd", read & ~empty)
    wr = g.net("wr", write & ~full)
    g.out("empty", 1, empty)
    g.out("full", 1, full)
    up = mux(wr, count + 1, count)
    g.update(count, mux(rd, mux(wr, count, count - 1), up))
    if kind == "fifo_device":
        aw = _bits(depth - 1)
        head = g.reg("head", aw)
        tail = g.reg("tail", aw, len(contents) % depth)

        def adv(p):
            return mux(p.eq(const(depth - 1, aw)), Const(0, aw), p + 1)
        g.update(head, mux(rd, adv(head), head))
        g.update(tail, mux(wr, adv(tail), tail))
        g.out("rdata", width, MemRead("mem", head, width))
        g.mem_writes.append(MemWrite("mem", wr, tail, wdata))
    else:
        top = count - 1
        g.out("rdata", width, MemRead("mem", top, width))
        g.mem_writes.append(MemWrite("mem", wr, mux(rd, top, count), wdata))
    return g.build()


_DEVICE_ROLES = {
    "sram": {"req": "req", "we": "we", "addr": "addr", "data_out": "wdata", "ack": "ack", "data": "rdata"},
    "core": {"read": "read", "write": "write", "data_out": "wdata", "empty": "empty", "full": "full",
             "data": "rdata"},
}


@dataclass(frozen=True)
class DeviceConfig:
    group: str
    kind: str
    latency: int = 0
    contents: tuple = ()


def build_testbench(n: Netlist, devices: tuple) -> Netlist:
    """Wrap ``n`` with device models; stream interfaces become tb ports."""
    dut = n.top_module
    tb_ports, nets, comb, insts, mods = [], [], [], [], list(n.modules)
    dev_by_group = {d.group: d for d in devices}
    conns = []
    device_ports = set()
    for itf in n.interfaces:
        if itf.kind not in ("stream_source", "stream_sink"):
            device_ports.update(name for _, name in itf.ports)
    # everything a device model does not own is driven or sampled by the kernel
    for p in dut.ports:
        if p.name in device_ports:
            nets.append(Net(p.name, p.width))
        else:
            tb_ports.append(Port(p.name, p.direction, p.width))
        conns.append((p.name, p.name))
    insts.append(Instance(DUT, dut.name, tuple(conns)))

    dev_outs = set()
    for itf in n.interfaces:
        if itf.kind in ("stream_source", "stream_sink"):
            continue
        cfg = dev_by_group[itf.group]
        mname = f"__dev_{itf.group}"
        if itf.kind == "sram":
            dev = sram_device(mname, itf.width, itf.addr_width, cfg.latency)
            roles = _DEVICE_ROLES["sram"]
        else:
            dev = core_device(mname, itf.kind, itf.width, itf.depth, cfg.contents)
            roles = _DEVICE_ROLES["core"]
        mods.append(dev)
        bound = dict(itf.ports)
        dconns = []
        for role, dport in roles.items():
            p = dev.port(dport)
            sig = bound.get(role)
            if sig is None:
                sig = f"__{itf.group}_{dport}"
                nets.append(Net(sig, p.width))
                if p.direction == "in":
                    comb.append(Assign(sig, Const(0, p.width)))
            dconns.append((dport, sig))
            if p.direction == "out":
                dev_outs.add(sig)
        insts.append(Instance(f"dev_{itf.group}", mname, tuple(dconns)))
    # dut inputs that no device drives read as zero
    for p in dut.ports:
        if p.direction == "in" and p.name in device_ports and p.name not in dev_outs:
            comb.append(Assign(p.name, Const(0, p.width)))
    tb = RtlModule("__tb", ports=tuple(tb_ports), nets=tuple(nets), comb=tuple(comb), instances=tuple(insts))
    out = Netlist(tuple(mods) + (tb,), "__tb", n.interfaces, n.spec_digest)
    lint = check_netlist(out)
    if lint:
        raise SimulationError("testbench is malformed: " + "; ".join(map(str, lint)))
    return out


@dataclass
class Program:
    """Flat, array-encoded design ready for a kernel."""

    init: np.ndarray                 # uint64[n_slots]
    code: np.ndarray                 # int64[m, 5]: op, dst, a, b, c
    imm: np.ndarray                  # uint64[m]
    regs: np.ndarray                 # int64[r, 2]: slot, next slot
    memw: np.ndarray                 # int64[w, 5]: en, addr, data, base, depth
    mem_init: np.ndarray             # uint64[total words]
    slot_of: dict = field(default_factory=dict)
    mem_base: dict = field(default_factory=dict)   # flat memory name -> (base, depth, width)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)


def compile_program(tb: Netlist) -> Program:
    flat = flatten(tb)
    order, stuck = comb_order(flat)
    if stuck:
        raise SimulationError(f"combinational cycle through {stuck}")

    # pure renames share the slot of their source
    alias: dict = {}
    for target, e in flat.comb:
        if isinstance(e, Ref) and e.width == flat.widths[target]:
            alias[target] = e.name

    def rep(name: str) -> str:
        seen = 0
        while name in alias:
            name = alias[name]
            seen += 1
            if seen > len(alias):
                raise SimulationError("alias cycle")
        return name

    slot_of: dict = {}
    init: list = []

    def new_slot(value: int = 0) -> int:
        init.append(value)
        return len(init) - 1

    def slot(name: str) -> int:
        r = rep(name)
        if r not in slot_of:
            slot_of[r] = new_slot()
        return slot_of[r]

    for name in flat.widths:
        slot(name)
    resets = {}
    for name, width, reset, _ in flat.registers:
        init[slot(name)] = reset
        resets[name] = reset

    mem_base: dict = {}
    mem_words = 0
    for m in flat.memories:
        mem_base[m.name] = (mem_words, m.depth, m.width)
        mem_words += m.depth
    if mem_words > 4 * MAX_MEMORY_WORDS:
        raise SimulationError("design memories too large to simulate")

    code: list = []
    consts: dict = {}
    memo: dict = {}
    temps: set = set()

    def emit(op, a=0, b=0, c=0, imm=0, dst=None) -> int:
        if dst is None:
            dst = new_slot()
            temps.add(dst)
        code.append((op, dst, a, b, c, imm))
        return dst

    def cslot(value: int) -> int:
        if value not in consts:
            consts[value] = new_slot(value)
        return consts[value]

    def lower(e: Expr) -> int:
        if isinstance(e, Ref):
            return slot(e.name)
        if isinstance(e, Const):
            return cslot(e.value)
        hit = memo.get(e)
        if hit is not None:
            return hit
        mask = (1 << e.width) - 1
        if isinstance(e, Slice):
            out = emit(SLICE, lower(e.arg), e.lo, 0, mask)
        elif isinstance(e, Concat):
            parts = list(e.parts)
            acc = lower(parts[0])
            for p in parts[1:]:
                acc = emit(CONCAT2, acc, lower(p), p.width)
            out = acc
        elif isinstance(e, BinOp):
            op = {"and": AND, "or": OR, "xor": XOR, "add": ADD, "sub": SUB, "eq": EQ}[e.op]
            out = emit(op, lower(e.a), lower(e.b), 0, mask)
        elif isinstance(e, Not):
            out = emit(NOT, lower(e.arg), 0, 0, mask)
        elif isinstance(e, Mux):
            out = emit(MUX, lower(e.sel), lower(e.if_true), lower(e.if_false))
        elif isinstance(e, MemRead):
            base, depth, _ = mem_base[e.mem]
            out = emit(MEMRD, lower(e.addr), base, depth)
        else:
            raise TypeError(e)
        memo[e] = out
        return out

    for i in order:
        target, e = flat.comb[i]
        if target in alias:
            continue
        dst = slot(target)
        if isinstance(e, Const):
            emit(CONST, imm=e.value, dst=dst)
            continue
        mark = len(code)
        src = lower(e)
        # write a freshly computed root straight into the target slot
        if len(code) > mark and code[-1][1] == src and src in temps:
            op, _, a, b, c, imm = code[-1]
            code[-1] = (op, dst, a, b, c, imm)
            temps.discard(src)
            memo[e] = dst
        else:
            emit(COPY, src, dst=dst)

    regs = []
    for name, width, reset, nxt in flat.registers:
        s = slot(name)
        n_s = lower(nxt)
        if n_s != s:
            regs.append((s, n_s))
    memw = []
    for w in flat.mem_writes:
        base, depth, _ = mem_base[w.mem]
        memw.append((lower(w.enable), lower(w.addr), lower(w.data), base, depth))

    code_arr = np.array([c[:5] for c in code], dtype=np.int64).reshape(-1, 5)
    imm_arr = np.array([c[5] for c in code], dtype=np.uint64)
    named = {name: slot(name) for name in flat.widths}
    return Program(
        init=np.array(init, dtype=np.uint64),
        code=code_arr,
        imm=imm_arr,
        regs=np.array(regs, dtype=np.int64).reshape(-1, 2),
        memw=np.array(memw, dtype=np.int64).reshape(-1, 5),
        mem_init=np.zeros(mem_words, dtype=np.uint64),
        slot_of=named,
        mem_base=mem_base,
        inputs=list(flat.inputs),
        outputs=list(flat.outputs),
    )
