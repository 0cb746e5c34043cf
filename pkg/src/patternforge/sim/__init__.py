"""Cycle-accurate simulation of generated netlists."""

from .compile import SimulationError
from .engine import (
    CoreDevice, Counter, SramImage, Stimulus, StreamSink, StreamSource, Trace, measure_throughput,
    run_simulation, waves_csv, split_beats, join_beats,
)
from .kernel import available as available_backends

__all__ = [
    "SimulationError", "CoreDevice", "Counter", "SramImage", "Stimulus", "StreamSink", "StreamSource",
    "Trace", "measure_throughput", "run_simulation", "waves_csv", "split_beats", "join_beats", "available_backends",
]
