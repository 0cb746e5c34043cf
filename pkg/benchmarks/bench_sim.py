"""Compare the compiled and pure-Python simulation kernels.

    python benchmarks/bench_sim.py [--repeat N]

Each workload is run on every available backend; traces are checked for
equality and the best wall time of N repeats is reported.
"""

from __future__ import annotations

import argparse
import json
import random
import time
from importlib import resources

from patternforge.emit import elaborate
from patternforge.model import parse_system_spec
from patternforge.sim import StreamSink, StreamSource, Stimulus, available_backends, run_simulation
from patternforge.sim.engine import _program


def _load(name):
    return parse_system_spec(resources.files("patternforge.fixtures").joinpath(f"{name}.json").read_text())


def workloads():
    rng = random.Random(0)
    data = [rng.randrange(256) for _ in range(10_000)]
    yield "copy_fifo 10k, 30% stalls", elaborate(_load("copy_fifo")), Stimulus(
        {"rfifo": StreamSource(data, 0.3), "wfifo": StreamSink(0.3)}, seed=1)
    yield "copy_shared_sram 2k", elaborate(_load("copy_shared_sram")), Stimulus(
        {"rbuffer_src": StreamSource(data[:2000]), "wbuffer_snk": StreamSink()}, seed=1)
    px = [rng.randrange(256) for _ in range(64 * 64)]
    yield "blur 64x64", elaborate(_load("blur")), Stimulus({"lbuf": StreamSource(px), "vga": StreamSink()})


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args(argv)
    backends = available_backends()
    rows = []
    for label, n, stim in workloads():
        run_simulation(n, stim)  # compile once outside the timed region
        times, traces = {}, {}
        for b in backends:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                traces[b] = run_simulation(n, stim, backend=b)
                best = min(best, time.perf_counter() - t0)
            times[b] = best
        agree = all(t == traces[backends[0]] for t in traces.values())
        cycles = traces[backends[0]].cycles
        rows.append({"workload": label, "cycles": cycles, "seconds": times, "traces_equal": agree})
    _program.cache_clear()
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'workload':28} {'cycles':>8} " + " ".join(f"{b + ' s':>10}" for b in backends) + "  speedup  equal")
    for r in rows:
        t = r["seconds"]
        speed = f"{t['python'] / t['c']:7.1f}x" if "c" in t else "      -"
        print(f"{r['workload']:28} {r['cycles']:>8} " + " ".join(f"{t[b]:10.4f}" for b in backends)
              + f"  {speed}  {r['traces_equal']}")


if __name__ == "__main__":
    main()
