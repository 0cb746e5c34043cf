import json

import pytest

from patternforge.emit import elaborate
from patternforge.genlib import gen_container
from patternforge.model import ContainerSpec, ElementType, plan_mapping
from patternforge.report import FIELDS, format_json, format_text, module_resources, resource_report
from patternforge.rtlir import Assign, Netlist, Port, Ref, RtlModule

from _support import load, sram


def test_fifo_iterators_cost_nothing():
    rep = resource_report(elaborate(load("copy_fifo")))
    for name in ("rbuffer_it", "wbuffer_it", "rbuffer_fifo", "wbuffer_fifo"):
        m = rep.module(name)
        assert (m.register_bits, m.fsm_state_count) == (0, 0)


def test_sram_read_buffer_pointers():
    c = ContainerSpec("rb", "read_buffer", ElementType(8), 64)
    t = sram("s", 8, addr=16)
    r = module_resources(gen_container(c, plan_mapping(c, t), t))
    assert r.register_bits >= 32 + 1
    assert r.fsm_state_count >= 2


def test_pass_through_top():
    m = RtlModule("top", ports=(Port("a", "in", 4), Port("y", "out", 4)), comb=(Assign("y", Ref("a", 4)),))
    rep = resource_report(Netlist((m,), "top"))
    assert rep.totals == {"register_bits": 0, "fsm_state_count": 0, "memory_bits": 0, "port_count": 2,
                          "comb_node_count": 0}


def test_totals_are_column_sums():
    rep = resource_report(elaborate(load("copy_sram")))
    for f in FIELDS:
        assert rep.totals[f] == sum(getattr(m, f) for m in rep.modules)


def test_json_and_text_forms():
    rep = resource_report(elaborate(load("copy_fifo")))
    doc = json.loads(format_json(rep))
    assert [m["module"] for m in doc["modules"]] == [m.module for m in rep.modules]
    assert doc["totals"] == rep.totals
    text = format_text(rep)
    assert text.splitlines()[0].split() == ["module", "registers", "fsm_states", "memory_bits", "ports", "comb_nodes"]
    assert text.splitlines()[-1].split()[0] == "TOTAL"


def test_malformed_netlist_is_refused():
    m = RtlModule("top", ports=(Port("y", "out", 1),))
    with pytest.raises(ValueError):
        resource_report(Netlist((m,), "top"))
