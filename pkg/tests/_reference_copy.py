"""Hand-written copy engine wired straight to the two fifo cores.

Written without the generator library: one FSM, one holding register.
Port names match the elaborated ``copy_fifo`` top so both can be run
against the same testbench.
"""

from patternforge.rtlir import Assign, Fsm, Net, Netlist, Port, Ref, Register, RtlModule, Transition


def reference_copy(interfaces) -> Netlist:
    empty, data = Ref("rfifo_p_empty", 1), Ref("rfifo_p_data", 8)
    full_in = Ref("wfifo_p_full", 1)
    hold = Ref("hold", 8)
    fsm = Fsm("st", ("EMPTY", "FULL"), "EMPTY", (
        Transition("EMPTY", Ref("take", 1), (Assign("hold", data),), "FULL"),
        Transition("FULL", Ref("take", 1), (Assign("hold", data),), "FULL"),
        Transition("FULL", Ref("put", 1), (), "EMPTY"),
    ))
    put = fsm.in_state("FULL") & ~full_in
    take = ~empty & (fsm.in_state("EMPTY") | put)
    m = RtlModule(
        "top",
        ports=(Port("rfifo_p_empty", "in", 1), Port("rfifo_p_data", "in", 8), Port("rfifo_p_read", "out", 1),
               Port("wfifo_p_full", "in", 1), Port("wfifo_p_write", "out", 1),
               Port("wfifo_p_data_out", "out", 8)),
        nets=(Net("put", 1), Net("take", 1)),
        registers=(Register("hold", 8),),
        fsms=(fsm,),
        comb=(Assign("put", put), Assign("take", take), Assign("rfifo_p_read", Ref("take", 1)),
              Assign("wfifo_p_write", Ref("put", 1)), Assign("wfifo_p_data_out", hold)),
    )
    return Netlist((m,), "top", tuple(interfaces), "")
