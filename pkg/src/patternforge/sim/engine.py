"""Stimulus, trace and the run loop around the kernels."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from ..rtlir import Netlist, check_netlist
from . import kernel
from .compile import DUT, DeviceConfig, SimulationError, build_testbench, compile_program

IDLE_CYCLES = 8
_M64 = (1 << 64) - 1


@dataclass(frozen=True)
class StreamSource:
    """Producer feeding a design's read side; ``stall`` is the per-cycle
    probability that a not-yet-visible element stays hidden."""

    data: Sequence[int]
    stall: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class StreamSink:
    """Consumer on a write side; ``stall`` is the per-cycle full probability."""

    stall: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class CoreDevice:
    contents: Sequence[int] = ()


@dataclass(frozen=True)
class SramImage:
    contents: Sequence[int] | Mapping[int, int] = ()
    latency: int | None = None   # None: the target's read_latency_cycles


@dataclass(frozen=True)
class Stimulus:
    bindings: Mapping[str, object] = field(default_factory=dict)
    drives: Mapping[str, Sequence[int]] = field(default_factory=dict)
    max_cycles: int = 100_000
    seed: int = 0
    waves: tuple = ()
    stop_when_idle: bool = True


@dataclass(frozen=True)
class Counter:
    count: int
    first_cycle: int | None
    last_cycle: int | None


@dataclass
class Trace:
    cycles: int
    sinks: dict
    sink_cycles: dict
    source_cycles: dict
    memories: dict
    devices: dict
    waves: dict
    counters: dict

    def wave(self, name: str) -> list:
        return self.waves[name]


def derive_seed(seed: int, index: int) -> int:
    """Per-stream generator state from the run seed and stream position."""
    return (seed * 0x9E3779B97F4A7C15 + (index + 1) * 0xD1B54A32D192ED03) & _M64


def stall_threshold(p: float) -> int:
    if not 0.0 <= p <= 1.0:
        raise SimulationError(f"stall probability {p} outside [0, 1]")
    return int(round(p * (1 << 32)))


@lru_cache(maxsize=16)
def _program(netlist: Netlist, devices: tuple):
    return compile_program(build_testbench(netlist, devices))


def _words(values, width: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=object) if not isinstance(values, np.ndarray) else values
    out = np.empty(len(arr), dtype=np.uint64)
    limit = 1 << width
    for i, x in enumerate(arr.tolist()):
        x = int(x)
        if not 0 <= x < limit:
            raise SimulationError(f"{what}: value {x} does not fit {width} bits")
        out[i] = x
    return out


def _check_kind(group: str, kind: str, binding) -> None:
    want = {"stream_source": StreamSource, "stream_sink": StreamSink, "sram": SramImage,
            "fifo_device": CoreDevice, "lifo_device": CoreDevice}[kind]
    if not isinstance(binding, want):
        raise SimulationError(f"{group} is a {kind}; bind it with {want.__name__}, not {type(binding).__name__}")


def run_simulation(netlist: Netlist, stimulus: Stimulus, backend: str | None = None) -> Trace:
    """Simulate ``netlist`` cycle by cycle against ``stimulus``.

    Each cycle the combinational logic settles in one topological pass, then
    registers, memories and stream transfers commit together.  The run ends
    at ``max_cycles`` or once every source is drained and nothing changed
    for eight consecutive cycles with every sink ready.
    """
    if stimulus.max_cycles < 1:
        raise SimulationError("max_cycles must be positive")
    lint = check_netlist(netlist)
    if lint:
        raise SimulationError("netlist is malformed: " + "; ".join(map(str, lint)))
    groups = {i.group: i for i in netlist.interfaces}
    for g in stimulus.bindings:
        if g not in groups:
            raise SimulationError(f"stimulus binds {g!r}, which is not an interface of {netlist.top}")

    bindings: dict = {}
    devices = []
    for itf in netlist.interfaces:
        b = stimulus.bindings.get(itf.group)
        if b is None:
            if itf.kind == "stream_source":
                raise SimulationError(f"unbound stimulus: stream source {itf.group!r} needs data")
            b = {"stream_sink": StreamSink(), "sram": SramImage()}.get(itf.kind, CoreDevice())
        _check_kind(itf.group, itf.kind, b)
        bindings[itf.group] = b
        if itf.kind == "sram":
            lat = itf.read_latency if b.latency is None else b.latency
            if lat < 0:
                raise SimulationError(f"{itf.group}: negative latency")
            devices.append(DeviceConfig(itf.group, itf.kind, latency=lat))
        elif itf.kind in ("fifo_device", "lifo_device"):
            contents = tuple(int(x) for x in _words(b.contents, itf.width, itf.group).tolist())
            devices.append(DeviceConfig(itf.group, itf.kind, contents=contents))
    prog = _program(netlist, tuple(devices))

    v = prog.init.copy()
    mem = prog.mem_init.copy()
    for itf in netlist.interfaces:
        b = bindings[itf.group]
        base_depth = prog.mem_base.get(f"dev_{itf.group}.mem")
        if base_depth is None:
            continue
        base, depth, _ = base_depth
        items = b.contents.items() if isinstance(b.contents, Mapping) else enumerate(b.contents)
        for addr, word in items:
            if not 0 <= addr < depth:
                raise SimulationError(f"{itf.group}: preload address {addr} outside 0..{depth - 1}")
            mem[base + addr] = _words([word], itf.width, itf.group)[0]

    slot = prog.slot_of
    stream_ports = set()
    sources, sinks = [], []
    for itf in netlist.interfaces:
        if itf.kind == "stream_source":
            sources.append(itf)
        elif itf.kind == "stream_sink":
            sinks.append(itf)
        else:
            continue
        stream_ports.update(name for _, name in itf.ports)

    def role_slot(itf, role):
        name = itf.port(role)
        return slot[name] if name is not None else -1

    src = np.array([[role_slot(i, "empty"), role_slot(i, "data"), role_slot(i, "read")] for i in sources],
                   dtype=np.int64).reshape(-1, 3)
    bufs = [_words(bindings[i.group].data, i.width, i.group) for i in sources]
    slen = np.array([len(b) for b in bufs], dtype=np.int64)
    soff = np.concatenate([[0], np.cumsum(slen)[:-1]]).astype(np.int64) if len(bufs) else np.zeros(0, np.int64)
    sbuf = np.concatenate(bufs + [np.zeros(1, np.uint64)]).astype(np.uint64)
    snk = np.array([[role_slot(i, "full"), role_slot(i, "write"), role_slot(i, "data_out")] for i in sinks],
                   dtype=np.int64).reshape(-1, 3)

    streams = sources + sinks
    seeds = []
    for idx, itf in enumerate(streams):
        b = bindings[itf.group]
        seeds.append(derive_seed(stimulus.seed, idx) if b.seed is None else b.seed & _M64)
    sthr = np.array([stall_threshold(bindings[i.group].stall) for i in sources], dtype=np.uint64)
    kthr = np.array([stall_threshold(bindings[i.group].stall) for i in sinks], dtype=np.uint64)
    sseed = np.array(seeds[:len(sources)], dtype=np.uint64)
    kseed = np.array(seeds[len(sources):], dtype=np.uint64)

    tb_inputs = [p for p in prog.inputs if p not in stream_ports]
    for name in stimulus.drives:
        if name not in tb_inputs:
            raise SimulationError(f"drive for {name!r}: not a free input port of {netlist.top}")
    missing = [p for p in tb_inputs if p not in stimulus.drives]
    if missing:
        raise SimulationError(f"unbound stimulus: input ports {missing} are not driven")
    widths = {p.name: p.width for p in netlist.top_module.ports}
    drv_rows, dbufs, off = [], [], 0
    for name in tb_inputs:
        seq = _words(stimulus.drives[name], widths[name], name)
        if len(seq) == 0:
            raise SimulationError(f"drive for {name!r} is empty")
        drv_rows.append((slot[name], off, len(seq)))
        dbufs.append(seq)
        off += len(seq)
    drv = np.array(drv_rows, dtype=np.int64).reshape(-1, 3)
    dbuf = np.concatenate(dbufs + [np.zeros(1, np.uint64)]).astype(np.uint64)
    min_cycles = int(max(slen.max(initial=0), max((r[2] for r in drv_rows), default=0)))
    min_cycles = min(min_cycles, stimulus.max_cycles) if drv_rows else 0

    wave_names = list(stimulus.waves)
    wslots = []
    for name in wave_names:
        for cand in (f"{DUT}.{name}", name):
            if cand in slot:
                wslots.append(slot[cand])
                break
        else:
            raise SimulationError(f"no signal named {name!r}")
    wslots = np.array(wslots, dtype=np.int64)

    n = stimulus.max_cycles
    src_cycles = np.full(int(slen.sum()) + 1, -1, dtype=np.int64)
    snk_vals = np.zeros((len(sinks), n), dtype=np.uint64)
    snk_cycles = np.zeros((len(sinks), n), dtype=np.int64)
    snk_count = np.zeros(len(sinks), dtype=np.int64)
    src_count = np.zeros(len(sources), dtype=np.int64)
    wave_out = np.zeros((n if len(wslots) else 0, len(wslots)), dtype=np.uint64)

    run = kernel.get(backend)
    cycles = int(run(v, prog.code, prog.imm, prog.regs, prog.memw, mem, src, sbuf, soff, slen, sthr, sseed,
                     snk, kthr, kseed, drv, dbuf, wslots, n, IDLE_CYCLES if stimulus.stop_when_idle else 0,
                     min_cycles, src_cycles, snk_vals, snk_cycles, snk_count, src_count, wave_out))

    out_sinks, out_sink_cycles, out_src_cycles, counters = {}, {}, {}, {}
    for i, itf in enumerate(sinks):
        k = int(snk_count[i])
        out_sinks[itf.group] = snk_vals[i, :k].tolist()
        out_sink_cycles[itf.group] = snk_cycles[i, :k].tolist()
    for i, itf in enumerate(sources):
        k = int(src_count[i])
        out_src_cycles[itf.group] = src_cycles[soff[i]:soff[i] + k].tolist()
    for group, stamps in list(out_sink_cycles.items()) + list(out_src_cycles.items()):
        counters[group] = Counter(len(stamps), stamps[0] if stamps else None, stamps[-1] if stamps else None)

    memories, dev_contents = {}, {}
    for itf in netlist.interfaces:
        base_depth = prog.mem_base.get(f"dev_{itf.group}.mem")
        if base_depth is None:
            continue
        base, depth, _ = base_depth
        words = mem[base:base + depth].tolist()
        if itf.kind == "sram":
            memories[itf.group] = words
            continue
        count = int(v[slot[f"dev_{itf.group}.count"]])
        if itf.kind == "fifo_device":
            head = int(v[slot[f"dev_{itf.group}.head"]])
            dev_contents[itf.group] = [words[(head + j) % depth] for j in range(count)]
        else:
            dev_contents[itf.group] = words[:count]

    waves = {name: wave_out[:cycles, j].tolist() for j, name in enumerate(wave_names)}
    return Trace(cycles, out_sinks, out_sink_cycles, out_src_cycles, memories, dev_contents, waves, counters)


def split_beats(elements, element_width: int, bus_width: int) -> list:
    """Elements to bus beats, least-significant beat first."""
    k = -(-element_width // bus_width)
    mask = (1 << bus_width) - 1
    return [(int(e) >> (i * bus_width)) & mask for e in elements for i in range(k)]


def join_beats(beats, element_width: int, bus_width: int) -> list:
    """Inverse of :func:`split_beats`; a trailing partial element is dropped."""
    k = -(-element_width // bus_width)
    emask = (1 << element_width) - 1
    out = []
    for j in range(len(beats) // k):
        word = 0
        for i in range(k):
            word |= int(beats[j * k + i]) << (i * bus_width)
        out.append(word & emask)
    return out


def measure_throughput(trace: Trace, interface: str, start: int = 0, stop: int | None = None) -> Fraction:
    """Cycles per element on ``interface`` over elements ``start:stop``.

    ``(last_cycle - first_cycle) / (count - 1)`` as an exact fraction.
    """
    stamps = trace.sink_cycles.get(interface)
    if stamps is None:
        stamps = trace.source_cycles.get(interface)
    if stamps is None:
        raise KeyError(f"no stream interface {interface!r} in trace")
    stamps = stamps[start:stop]
    if len(stamps) < 2:
        raise ValueError(f"{interface}: need at least 2 elements, have {len(stamps)}")
    return Fraction(stamps[-1] - stamps[0], len(stamps) - 1)


def waves_csv(trace: Trace) -> str:
    """Waveforms as CSV text: one row per cycle, decimal values."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(trace.waves)
    w.writerow(names)
    for row in zip(*(trace.waves[n] for n in names)):
        w.writerow(row)
    return buf.getvalue()
