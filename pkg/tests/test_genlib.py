from itertools import combinations

import pytest

from patternforge.genlib import (
    CONTAINER_METHODS, GenerationError, PruneError, gen_arbiter, gen_container, gen_iterator, prune_unused,
)
from patternforge.model import ContainerSpec, ElementType, IteratorSpec, PhysicalTarget, plan_mapping, with_geometry
from patternforge.report import module_resources
from patternforge.sim import Stimulus, run_simulation

from _support import arbiter_harness, check_arbitration, drive_module, fifo, random_drives, sram


def shape(m):
    return {(p.name, p.direction, p.width) for p in m.ports}


def container(kind, width, target, capacity=16, line_length=None):
    c = ContainerSpec("c", kind, ElementType(width), capacity)
    plan = plan_mapping(c, target)
    if line_length:
        plan = with_geometry(plan, line_length=line_length, line_count=3)
    return gen_container(c, plan, target)


def test_fifo_read_buffer_shape():
    m = container("read_buffer", 8, fifo("f", 8))
    assert shape(m) == {
        ("m_empty", "in", 1), ("m_size", "in", 1), ("m_pop", "in", 1), ("p_empty", "in", 1),
        ("p_data", "in", 8), ("data", "out", 8), ("done", "out", 1), ("p_read", "out", 1),
    }
    r = module_resources(m)
    assert (r.register_bits, r.fsm_state_count) == (0, 0)


def test_sram_read_buffer_shape():
    m = container("read_buffer", 8, sram("s", 8, addr=16))
    ports = shape(m)
    assert {("p_addr", "out", 16), ("req", "out", 1), ("ack", "in", 1)} <= ports
    assert {("m_empty", "in", 1), ("m_size", "in", 1), ("m_pop", "in", 1), ("data", "out", 8),
            ("done", "out", 1)} <= ports
    ptrs = [r for r in m.registers if r.width == 16]
    assert len(ptrs) >= 2
    assert len(m.fsms) == 1


CASES = [
    ("read_buffer", fifo("f", 8)), ("write_buffer", fifo("f", 8)), ("queue", fifo("f", 8)),
    ("stack", PhysicalTarget("l", "lifo_core", 8)),
    ("read_buffer", sram("s", 8)), ("write_buffer", sram("s", 8)), ("queue", sram("s", 8)),
    ("stack", sram("s", 8)), ("vector", sram("s", 8)),
    ("queue", sram("s", 8, shared=True)),
]


@pytest.mark.parametrize("kind, target", CASES)
@pytest.mark.parametrize("width", [8, 24])
def test_single_done_and_data(kind, target, width):
    m = container(kind, width, target)
    names = [p.name for p in m.ports]
    assert names.count("done") == 1
    assert names.count("data") <= 1 and names.count("data_in") <= 1
    assert set(m.methods) == set(CONTAINER_METHODS[kind])


def test_queue_footprint_counts_beats():
    m = container("queue", 24, sram("s", 8), capacity=4)
    n = 40
    waves = drive_module(m, {"m_push": [1] * n, "m_pop": [0] * n, "m_empty": [0] * n, "m_full": [0] * n,
                             "m_size": [0] * n, "data_in": [7] * n, "ack": [1] * n, "p_data": [0] * n})
    written = [a for a, r, w in zip(waves["p_addr"], waves["req"], waves["p_we"]) if r and w]
    assert written == list(range(12))


def test_fifo_iterator_is_a_wrapper():
    c = ContainerSpec("rb", "read_buffer", ElementType(8), 16)
    t = fifo("f", 8)
    it = gen_iterator(IteratorSpec("it", "forward", "read", "rb", {"inc", "read"}), plan_mapping(c, t), c, t)
    r = module_resources(it)
    assert (r.register_bits, r.fsm_state_count) == (0, 0)


def test_wide_read_takes_three_pops():
    c = ContainerSpec("rb", "read_buffer", ElementType(24), 16)
    t = fifo("f", 8)
    it = gen_iterator(IteratorSpec("it", "forward", "read", "rb", {"inc", "read"}), plan_mapping(c, t), c, t)
    w = drive_module(it, {"m_inc": [1, 1, 1, 0], "m_read": [1, 1, 1, 0], "c_done": [1, 1, 1, 0],
                          "c_data": [0x11, 0x22, 0x33, 0]})
    assert w["c_m_pop"] == [1, 1, 1, 0]
    assert w["done"] == [0, 0, 1, 0]
    assert w["data"][2] == 0x332211


def test_wide_write_takes_three_pushes():
    c = ContainerSpec("wb", "write_buffer", ElementType(24), 16)
    t = fifo("f", 8)
    it = gen_iterator(IteratorSpec("it", "forward", "write", "wb", {"inc", "write"}), plan_mapping(c, t), c, t)
    w = drive_module(it, {"m_inc": [1, 1, 1, 0], "m_write": [1, 1, 1, 0], "c_done": [1, 1, 1, 0],
                          "data_in": [0x332211] * 3 + [0]})
    assert w["c_m_push"] == [1, 1, 1, 0]
    assert w["c_data_in"][:3] == [0x11, 0x22, 0x33]
    assert w["done"] == [0, 0, 1, 0]


def test_random_index_scales_by_beats():
    v = ContainerSpec("v", "vector", ElementType(24), 16)
    t = sram("s", 8)
    it = gen_iterator(IteratorSpec("vi", "random", "read", "v", {"index", "read"}), plan_mapping(v, t), v, t)
    n = 5
    w = drive_module(it, {"m_index": [1, 0, 0, 0, 0], "index_in": [5] * n, "m_read": [0, 1, 1, 1, 0],
                          "c_done": [0, 1, 1, 1, 0], "c_data": [0, 1, 2, 3, 0]})
    assert w["c_addr"][1:4] == [15, 16, 17]
    assert w["done"][3] == 1 and w["data"][3] == 0x030201


# ---------------------------------------------------------------- arbiter


def _arb_run(clients, wants, latency=1):
    t = sram("r", 8, latency=latency, shared=True)
    arb = gen_arbiter(t, clients)
    n = arbiter_harness(arb, clients, latency, 8, 8)
    cycles = len(wants[0])
    tr = run_simulation(n, Stimulus(drives={f"want{i}": wants[i] for i in range(clients)}, max_cycles=cycles,
                                    stop_when_idle=False,
                                    waves=tuple(f"{k}{i}" for k in ("req", "ack") for i in range(clients))))
    return [tr.waves[f"req{i}"] for i in range(clients)], [tr.waves[f"ack{i}"] for i in range(clients)]


def test_two_holding_clients_alternate():
    reqs, acks = _arb_run(2, [[1] * 40, [1] * 40])
    order = [i for t in range(40) for i in range(2) if acks[i][t]]
    assert len(order) >= 10
    assert all(a != b for a, b in zip(order, order[1:]))


def test_lone_requester_always_served():
    reqs, acks = _arb_run(2, [[1] * 40, [0] * 40])
    assert sum(acks[0]) == 20  # one ack per two-cycle transaction
    assert sum(acks[1]) == 0


@pytest.mark.parametrize("latency", [0, 1, 3])
def test_three_clients_random_traffic(latency):
    import random
    r = random.Random(latency)
    n = 10_000
    wants = [[int(r.random() < 0.3) for _ in range(n)] for _ in range(3)]
    reqs, acks = _arb_run(3, wants, latency)
    txn = latency + 1
    max_wait, bad = check_arbitration(reqs, acks, 3 * txn)
    assert bad == []
    assert max_wait <= 3 * txn
    assert sum(map(sum, acks)) > n // 10


def test_arbiter_rejects_bad_arguments():
    with pytest.raises(GenerationError):
        gen_arbiter(sram("r", 8, shared=True), 1)
    with pytest.raises(GenerationError):
        gen_arbiter(sram("r", 8), 2)


# ---------------------------------------------------------------- pruning


def _subsets(ops):
    for k in range(1, len(ops) + 1):
        yield from combinations(ops, k)


PRUNE_CASES = CASES + [("read_buffer", PhysicalTarget("lb", "line_buffer3", 8))]


def _build(kind, target):
    if target.kind == "line_buffer3":
        return container(kind, 8, target, capacity=16, line_length=6)
    return container(kind, 8, target)


def _prune_matrix():
    for kind, target in PRUNE_CASES:
        for ops in _subsets(CONTAINER_METHODS[kind]):
            yield pytest.param(kind, target, frozenset(ops), id=f"{kind}-{target.kind}{'-shared' if target.shared else ''}-{'+'.join(ops)}")


@pytest.mark.parametrize("kind, target, ops", list(_prune_matrix()))
def test_pruning_is_sound(kind, target, ops):
    full = _build(kind, target)
    try:
        pruned = prune_unused(full, ops)
    except PruneError:
        pytest.skip("subset removes every operation")
    dropped = {f"m_{op}" for op in full.methods if op not in ops}
    for seed in range(3):
        drives = random_drives(full, 300, seed, hold_zero=dropped)
        a = drive_module(full, drives)
        kept_inputs = {p.name for p in pruned.ports if p.direction == "in"}
        b = drive_module(pruned, {k: v for k, v in drives.items() if k in kept_inputs})
        for name in b:
            assert a[name] == b[name], name
    ra, rb = module_resources(full), module_resources(pruned)
    for f in ("register_bits", "fsm_state_count", "memory_bits", "port_count", "comb_node_count"):
        assert getattr(rb, f) <= getattr(ra, f), f


def test_prune_rbuffer_to_pop():
    m = container("read_buffer", 8, fifo("f", 8))
    p = prune_unused(m, {"pop"})
    names = {x.name for x in p.ports}
    assert "m_empty" not in names and "m_size" not in names
    assert "p_empty" in names


def test_prune_full_set_is_identity():
    for kind, target in CASES:
        m = container(kind, 8, target)
        assert prune_unused(m, set(CONTAINER_METHODS[kind])) == m


def test_prune_sram_queue_to_push():
    m = container("queue", 8, sram("s", 8))
    p = prune_unused(m, {"push"})
    before, after = module_resources(m), module_resources(p)
    assert after.register_bits < before.register_bits
    assert after.fsm_state_count < before.fsm_state_count
    assert "p_data" not in {x.name for x in p.ports}


def test_prune_rejects_empty_set():
    with pytest.raises(PruneError):
        prune_unused(container("queue", 8, fifo("f", 8)), set())
