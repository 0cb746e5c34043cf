"""Shared helpers for the test suite."""

from __future__ import annotations

import json
import random
from importlib import resources

from patternforge.genlib import _Builder
from patternforge.model import (
    AlgorithmBinding, ContainerSpec, ElementType, IteratorSpec, PhysicalTarget, SystemSpec,
    parse_system_spec,
)
from patternforge.rtlir import Assign, Instance, Net, Netlist, Port, Ref, RtlModule, const, mux
from patternforge.sim import Stimulus, run_simulation
from patternforge.sim.compile import sram_device

FIXTURES = ("copy_fifo", "copy_sram", "copy_shared_sram", "copy_rgb24", "copy_rgb24_sram",
            "copy_vector", "copy_queue_stack", "blur")


def fixture_text(name: str) -> str:
    return resources.files("patternforge.fixtures").joinpath(f"{name}.json").read_text()


def fixture_json(name: str) -> dict:
    return json.loads(fixture_text(name))


def load(name: str) -> SystemSpec:
    return parse_system_spec(fixture_text(name))


def copy_spec(width: int, src_target: PhysicalTarget, snk_target: PhysicalTarget,
              capacity: int = 16) -> SystemSpec:
    """read_buffer -> copy -> write_buffer over the given targets."""
    targets = (src_target,) if src_target.name == snk_target.name else (src_target, snk_target)
    return SystemSpec(
        containers=(ContainerSpec("rbuffer", "read_buffer", ElementType(width), capacity),
                    ContainerSpec("wbuffer", "write_buffer", ElementType(width), capacity)),
        iterators=(IteratorSpec("rbuffer_it", "forward", "read", "rbuffer", {"inc", "read"}),
                   IteratorSpec("wbuffer_it", "forward", "write", "wbuffer", {"inc", "write"})),
        algorithms=(AlgorithmBinding("copy", "copy", "rbuffer_it", "wbuffer_it"),),
        targets=targets,
        bindings={"rbuffer": src_target.name, "wbuffer": snk_target.name},
    )


def fifo(name: str, bus: int) -> PhysicalTarget:
    return PhysicalTarget(name, "fifo_core", bus)


def sram(name: str, bus: int, addr: int = 8, latency: int = 1, shared: bool = False) -> PhysicalTarget:
    return PhysicalTarget(name, "sram", bus, addr, latency, shared)


def standalone(m: RtlModule) -> Netlist:
    return Netlist((m,), m.name, (), "")


def drive_module(m: RtlModule, drives: dict, backend=None) -> dict:
    """Run ``m`` open-loop for ``len(drives[...])`` cycles; return output waves."""
    cycles = len(next(iter(drives.values())))
    outs = tuple(p.name for p in m.ports if p.direction == "out")
    tr = run_simulation(standalone(m), Stimulus(drives=drives, max_cycles=cycles, stop_when_idle=False,
                                                waves=outs), backend=backend)
    return tr.waves


def random_drives(m: RtlModule, cycles: int, seed: int, hold_zero=()) -> dict:
    r = random.Random(seed)
    out = {}
    for p in m.ports:
        if p.direction != "in":
            continue
        if p.name in hold_zero:
            out[p.name] = [0] * cycles
        elif p.width == 1:
            out[p.name] = [int(r.random() < 0.5) for _ in range(cycles)]
        else:
            out[p.name] = [r.randrange(1 << p.width) for _ in range(cycles)]
    return out


def arbiter_harness(arb: RtlModule, clients: int, latency: int, aw: int, bus: int) -> Netlist:
    """Arbiter + sram model + clients that hold ``req`` from ``want`` until acked."""
    mem = sram_device("__mem", bus, aw, latency)
    g = _Builder("__harness")
    conns = []
    for i in range(clients):
        want = g.inp(f"want{i}", 1)
        pend = g.reg(f"pend{i}", 1)
        ack = Ref(f"c{i}_ack", 1)
        g.nets.append(Net(f"c{i}_ack", 1))
        g.nets.append(Net(f"c{i}_p_data", bus))
        req = g.net(f"c{i}_req", want | pend)
        g.update(pend, req & ~ack)
        g.out(f"req{i}", 1, req)
        g.out(f"ack{i}", 1, ack)
        g.net(f"c{i}_p_addr", const(i, aw))
        g.net(f"c{i}_p_data_out", const(i, bus))
        g.net(f"c{i}_p_we", mux(req, const(1, 1), const(0, 1)))
        conns += [(f"c{i}_{s}", f"c{i}_{s}") for s in ("req", "p_addr", "p_data_out", "p_we", "ack", "p_data")]
    for s, w in (("req", 1), ("p_addr", aw), ("p_data_out", bus), ("p_we", 1), ("ack", 1), ("p_data", bus)):
        g.nets.append(Net(f"m_{s}", w))
        conns.append((s, f"m_{s}"))
    top = g.build()
    top = RtlModule(
        top.name, top.ports, top.nets, top.registers, (), (), top.comb, top.seq, (),
        (Instance("u_arb", arb.name, tuple(conns)),
         Instance("u_mem", mem.name, (("req", "m_req"), ("we", "m_p_we"), ("addr", "m_p_addr"),
                                      ("wdata", "m_p_data_out"), ("ack", "m_ack"),
                                      ("rdata", "m_p_data")))),
    )
    return Netlist((arb, mem, top), top.name, (), "")


def check_arbitration(reqs, acks, bound: int):
    """Mutual exclusion each cycle and bounded wait for held requests.

    Returns ``(max_wait, violations)``.
    """
    n = len(reqs)
    cycles = len(reqs[0])
    bad = []
    max_wait = 0
    for t in range(cycles):
        if sum(a[t] for a in acks) > 1:
            bad.append(("overlap", t))
    for i in range(n):
        start = None
        for t in range(cycles):
            if reqs[i][t] and start is None:
                start = t
            if acks[i][t]:
                if start is not None:
                    max_wait = max(max_wait, t - start + 1)
                start = None
            elif not reqs[i][t]:
                start = None
            if start is not None and t - start + 1 > bound:
                bad.append(("starved", i, start))
                start = None
    return max_wait, bad


__all__ = [n for n in dir() if not n.startswith("_")] + ["Assign", "Port"]
