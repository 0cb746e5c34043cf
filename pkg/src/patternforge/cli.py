"""Command-line front end: validate, generate, simulate, report."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .algos import golden_blur
from .emit import ElaborationError, EmitOptions, elaborate, emit_verilog
from .model import SpecError, parse_system_spec, validate_system
from .pnm import Image, ImageFormatError, decode_stream, encode_stream, read_pnm, write_pnm
from .report import format_json, format_text, resource_report
from .sim import (
    CoreDevice, SimulationError, SramImage, Stimulus, StreamSink, StreamSource, join_beats,
    measure_throughput, run_simulation, split_beats, waves_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="patternforge", description=__doc__)
    p.add_argument("--version", action="version", version=f"patternforge {__version__}")
    p.add_argument("command", choices=("validate", "generate", "simulate", "report"))
    p.add_argument("--spec", required=True, help="system description (JSON)")
    p.add_argument("--out", default=".", help="output directory (generate, simulate)")
    p.add_argument("--stimulus", action="append", default=[], metavar="NAME=FILE",
                   help="raw little-endian element file for an interface group")
    p.add_argument("--image", action="append", default=[], metavar="NAME=FILE",
                   help="PGM/PPM image for a stream source group")
    p.add_argument("--golden", action="store_true", help="compare sink output with the reference model")
    p.add_argument("--seed", type=int, default=0, help="stall generator seed (default 0)")
    p.add_argument("--stall", type=float, default=0.0, help="per-cycle stall probability of every stream")
    p.add_argument("--max-cycles", type=int, default=1_000_000)
    p.add_argument("--waves", metavar="CSV", help="write top-level port waveforms")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--top", default="top", help="top module name")
    return p


def _pairs(items, flag):
    out = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"{flag} expects NAME=FILE, got {item!r}")
        if name in out:
            raise UsageError(f"{flag} {name} given twice")
        out[name] = path
    return out


def _read(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _violations_doc(vs) -> dict:
    return {"count": len(vs), "violations": [
        {"code": v.code, "message": v.message, "entities": list(v.entities)} for v in vs]}


def _print_violations(vs, fmt: str, stream) -> None:
    if fmt == "json":
        stream.write(json.dumps(_violations_doc(vs), indent=2) + "\n")
        return
    for v in vs:
        stream.write(f"{v}\n")
    stream.write(f"{len(vs)} violations\n")


def _group_containers(spec, netlist) -> dict:
    """Interface group -> the container whose elements cross it."""
    out = {}
    for itf in netlist.interfaces:
        if itf.kind in ("stream_source", "stream_sink") and itf.group.endswith(("_src", "_snk")):
            name = itf.group[:-4]
            if any(c.name == name for c in spec.containers):
                out[itf.group] = spec.container(name)
                continue
        users = spec.containers_on(itf.group)
        if len(users) == 1:
            out[itf.group] = users[0]
    return out


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def cmd_validate(spec, args) -> int:
    vs = validate_system(spec)
    _print_violations(vs, args.format, sys.stdout)
    return EXIT_OK if not vs else EXIT_FAIL


def _elaborate(spec, args):
    try:
        return elaborate(spec, top_name=args.top)
    except ElaborationError as exc:
        if exc.violations and hasattr(exc.violations[0], "entities"):
            _print_violations(exc.violations, args.format, sys.stderr)
            return None
        raise


def cmd_generate(spec, args) -> int:
    n = _elaborate(spec, args)
    if n is None:
        return EXIT_FAIL
    os.makedirs(args.out, exist_ok=True)
    text = emit_verilog(n, EmitOptions(top_name=args.top))
    rep = resource_report(n)
    vpath = os.path.join(args.out, f"{args.top}.v")
    rpath = os.path.join(args.out, f"{args.top}_report.{'json' if args.format == 'json' else 'txt'}")
    _write_text(vpath, text)
    _write_text(rpath, format_json(rep) if args.format == "json" else format_text(rep))
    print(f"wrote {vpath}")
    print(f"wrote {rpath}")
    return EXIT_OK


def cmd_report(spec, args) -> int:
    n = _elaborate(spec, args)
    if n is None:
        return EXIT_FAIL
    rep = resource_report(n)
    sys.stdout.write(format_json(rep) if args.format == "json" else format_text(rep))
    return EXIT_OK


def cmd_simulate(spec, args) -> int:
    n = _elaborate(spec, args)
    if n is None:
        return EXIT_FAIL
    streams = _pairs(args.stimulus, "--stimulus")
    images = _pairs(args.image, "--image")
    groups = {i.group: i for i in n.interfaces}
    owners = _group_containers(spec, n)
    for name in list(streams) + list(images):
        if name not in groups:
            raise UsageError(f"no interface group {name!r}; groups: {sorted(groups)}")
        if name in streams and name in images:
            raise UsageError(f"{name} bound by both --stimulus and --image")

    bindings, elements, source_images = {}, {}, {}
    for name, itf in groups.items():
        owner = owners.get(name)
        if name in images:
            if itf.kind != "stream_source":
                raise UsageError(f"--image needs a stream source, {name} is a {itf.kind}")
            img = read_pnm(images[name])
            if owner is None or owner.element.width_bits != img.bits:
                raise UsageError(f"{name}: {img.bits}-bit image for "
                                 f"{owner.element.width_bits if owner else '?'}-bit elements")
            source_images[name] = img
            elements[name] = list(img.pixels)
        elif name in streams:
            raw = _read(streams[name])
            if itf.kind == "sram":
                bindings[name] = SramImage(decode_stream(raw, itf.width))
                continue
            if owner is None:
                raise UsageError(f"cannot tell the element width of {name}")
            elements[name] = decode_stream(raw, owner.element.width_bits)
        if itf.kind == "stream_source" and name in elements:
            bindings[name] = StreamSource(split_beats(elements[name], owner.element.width_bits, itf.width),
                                          args.stall)
        elif itf.kind == "stream_sink":
            bindings[name] = StreamSink(args.stall)
        elif itf.kind in ("fifo_device", "lifo_device") and name in elements:
            bindings[name] = CoreDevice(split_beats(elements[name], owner.element.width_bits, itf.width))
    waves = tuple(p.name for p in n.top_module.ports) if args.waves else ()
    trace = run_simulation(n, Stimulus(bindings, max_cycles=args.max_cycles, seed=args.seed, waves=waves))

    os.makedirs(args.out, exist_ok=True)
    captured = {}
    for name, itf in groups.items():
        owner = owners.get(name)
        if itf.kind == "stream_sink":
            beats = trace.sinks[name]
        elif itf.kind in ("fifo_device", "lifo_device") and owner is not None and any(
                it.writes for it in spec.iterators_of(owner.name)):
            beats = trace.devices[name]
        else:
            continue
        captured[name] = join_beats(beats, owner.element.width_bits, itf.width)
        with open(os.path.join(args.out, f"{name}.bin"), "wb") as f:
            f.write(encode_stream(captured[name], owner.element.width_bits))

    golden_ok, checks = True, []
    for al in spec.algorithms:
        src_c = spec.container(spec.iterator(al.source_iterator).container)
        snk_c = spec.container(spec.iterator(al.sink_iterator).container)
        src_g = next((g for g, c in owners.items() if c.name == src_c.name and g in elements), None)
        snk_g = next((g for g, c in owners.items() if c.name == snk_c.name and g in captured), None)
        img = source_images.get(src_g)
        if snk_g is not None and img is not None:
            w, h = (img.width - 2, img.height - 2) if al.kind == "blur3x3" else (img.width, img.height)
            out = captured[snk_g][:w * h] + [0] * max(0, w * h - len(captured[snk_g]))
            ext = "pgm" if img.channels == 1 else "ppm"
            write_pnm(os.path.join(args.out, f"{snk_g}.{ext}"), Image(w, h, img.channels, tuple(out)))
        if not args.golden:
            continue
        if src_g is None or snk_g is None:
            raise UsageError(f"--golden for {al.name} needs stream input and captured output")
        data = elements[src_g]
        if al.kind == "copy":
            want = list(data)
        else:
            if len(data) != al.image_width * al.image_height:
                raise UsageError(f"{al.name}: expected a {al.image_width}x{al.image_height} frame")
            want = golden_blur(data, al.image_width, al.image_height, pixel_bits=snk_c.element.width_bits)
        ok = captured[snk_g] == want
        golden_ok &= ok
        checks.append({"algorithm": al.name, "sink": snk_g, "expected": len(want),
                       "captured": len(captured[snk_g]), "match": ok})

    if args.waves:
        _write_text(args.waves, waves_csv(trace))
    summary = {"cycles": trace.cycles, "streams": {}, "golden": checks}
    for group, c in trace.counters.items():
        entry = {"count": c.count, "first_cycle": c.first_cycle, "last_cycle": c.last_cycle}
        if c.count >= 2:
            entry["cycles_per_beat"] = str(measure_throughput(trace, group))
        summary["streams"][group] = entry
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(f"cycles: {trace.cycles}")
        for group, e in summary["streams"].items():
            rate = f", {e['cycles_per_beat']} cycles/beat" if "cycles_per_beat" in e else ""
            print(f"{group}: {e['count']} beats{rate}")
        for c in checks:
            verdict = "match" if c["match"] else "MISMATCH"
            print(f"golden {c['algorithm']}: {verdict} ({c['captured']}/{c['expected']} elements)")
    return EXIT_OK if golden_ok else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "generate": cmd_generate, "simulate": cmd_simulate,
            "report": cmd_report}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.max_cycles < 1:
            raise UsageError("--max-cycles must be positive")
        if not 0.0 <= args.stall <= 1.0:
            raise UsageError("--stall must lie in [0, 1]")
        if args.seed < 0 or args.seed >= 1 << 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        spec = parse_system_spec(_read(args.spec))
        return COMMANDS[args.command](spec, args)
    except (UsageError, SpecError, ImageFormatError, SimulationError, OSError, ValueError) as exc:
        print(f"patternforge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
