"""Built-in algorithms (copy, 3x3 blur) and their software reference models.

Algorithms only see iterator method interfaces: ``src_*`` ports talk to the
input iterator and ``snk_*`` ports to the output iterator.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import AlgorithmBinding, SpecError, SystemSpec
from .rtlir import Assign, Const, Expr, Fsm, Slice, Transition, const, mul_const, mux
from .genlib import _Builder

__all__ = [
    "AlgorithmBinding", "BlurKernel", "BINOMIAL_3X3",
    "build_copy", "build_blur", "golden_reference", "golden_blur", "golden_copy",
]


@dataclass(frozen=True)
class BlurKernel:
    weights: tuple  # 3 rows of 3 non-negative ints
    divisor: int

    def __post_init__(self):
        if len(self.weights) != 3 or any(len(r) != 3 for r in self.weights):
            raise ValueError("kernel must be 3x3")
        if any(w < 0 for r in self.weights for w in r):
            raise ValueError("kernel weights must be non-negative")
        if self.divisor < 1 or self.divisor & (self.divisor - 1):
            raise ValueError("divisor must be a power of two")
        if sum(map(sum, self.weights)) != self.divisor:
            raise ValueError("weights must sum to the divisor (unit DC gain)")

    @property
    def shift(self) -> int:
        return self.divisor.bit_length() - 1


BINOMIAL_3X3 = BlurKernel(((1, 2, 1), (2, 4, 2), (1, 2, 1)), 16)


def _endpoints(b: AlgorithmBinding, spec: SystemSpec):
    src = spec.iterator(b.source_iterator)
    snk = spec.iterator(b.sink_iterator)
    width = spec.container(src.container).element.width_bits
    return src, snk, width


def build_copy(b: AlgorithmBinding, spec: SystemSpec):
    """Endless copy loop with a one-element holding register.

    The source is asked for a new element whenever the holding register is
    empty or is being drained this cycle, so zero-latency wrappers move one
    element per cycle.
    """
    if b.kind != "copy":
        raise SpecError(f"{b.name} is not a copy")
    src, snk, w = _endpoints(b, spec)
    g = _Builder(b.name)
    src_data = g.inp("src_data", w)
    src_done = g.inp("src_done", 1)
    snk_done = g.inp("snk_done", 1)
    hold = g.reg("hold", w)
    fsm = Fsm("loop", ("EMPTY", "FULL"), "EMPTY", (
        Transition("EMPTY", src_done, (Assign("hold", src_data),), "FULL"),
        Transition("FULL", src_done, (Assign("hold", src_data),), "FULL"),
        Transition("FULL", snk_done, (), "EMPTY"),
    ))
    g.fsms.append(fsm)
    src_req = g.net("src_req", fsm.in_state("EMPTY") | snk_done)
    for op in src.ordered_ops():
        g.out(f"src_m_{op}", 1, src_req)
    for op in snk.ordered_ops():
        g.out(f"snk_m_{op}", 1, fsm.in_state("FULL"))
    g.out("snk_data_in", w, hold)
    return g.build()


def build_blur(b: AlgorithmBinding, spec: SystemSpec, kernel: BlurKernel = BINOMIAL_3X3):
    """3x3 convolution over columns served by a line buffer.

    Each accepted column shifts a two-column window; from the third column
    of a row on, the weighted sum of the window plus the new column, shifted
    right by the kernel's divisor, is registered as the next output pixel.
    """
    if b.kind != "blur3x3":
        raise SpecError(f"{b.name} is not a blur3x3")
    if b.image_width < 3 or b.image_height < 3:
        raise SpecError(f"{b.name}: image smaller than 3x3")
    src, snk, w = _endpoints(b, spec)
    g = _Builder(b.name)
    column = g.inp("src_data", 3 * w)
    src_done = g.inp("src_done", 1)
    snk_done = g.inp("snk_done", 1)
    cw = max(1, (b.image_width - 1).bit_length())
    col = g.reg("col", cw)
    win0 = g.reg("win0", 3 * w)
    win1 = g.reg("win1", 3 * w)
    out_pix = g.reg("out_pix", w)
    out_valid = g.reg("out_valid", 1)

    sw = w + kernel.shift
    total: Expr | None = None
    for dj, colv in enumerate((win0, win1, column)):
        for di in range(3):
            weight = kernel.weights[di][dj]
            if weight == 0:
                continue
            px = Slice(colv, di * w, w)
            term = mul_const(px, weight, sw)
            total = term if total is None else total + term
    total = total if total is not None else Const(0, sw)
    acc = g.net("acc", total)

    src_req = g.net("src_req", ~out_valid | snk_done)
    for op in src.ordered_ops():
        g.out(f"src_m_{op}", 1, src_req)
    for op in snk.ordered_ops():
        g.out(f"snk_m_{op}", 1, out_valid)
    g.out("snk_data_in", w, out_pix)

    emits = g.net("emits", src_done & ~(col.eq(0) | col.eq(1)))
    eol = col.eq(const(b.image_width - 1, cw))
    g.update(col, mux(src_done, mux(eol, Const(0, cw), col + 1), col))
    g.update(win0, mux(src_done, win1, win0))
    g.update(win1, mux(src_done, column, win1))
    g.update(out_pix, mux(emits, Slice(acc, kernel.shift, w), out_pix))
    g.update(out_valid, emits | (out_valid & ~snk_done))
    return g.build()


# ---------------------------------------------------------- golden models


def golden_copy(elements):
    return list(elements)


def golden_blur(image, width: int, height: int, kernel: BlurKernel = BINOMIAL_3X3, pixel_bits: int = 8):
    """Valid-region 3x3 convolution of a row-major image, nested loops."""
    if width < 3 or height < 3:
        raise SpecError("image smaller than 3x3")
    if len(image) != width * height:
        raise SpecError(f"expected {width * height} pixels, got {len(image)}")
    mask = (1 << pixel_bits) - 1
    out = []
    for r in range(height - 2):
        for c in range(width - 2):
            acc = 0
            for di in range(3):
                for dj in range(3):
                    acc += kernel.weights[di][dj] * image[(r + di) * width + c + dj]
            out.append((acc // kernel.divisor) & mask)
    return out


def golden_reference(kind: str, inputs, params: dict | None = None):
    params = params or {}
    if kind == "copy":
        return golden_copy(inputs)
    if kind == "blur3x3":
        return golden_blur(inputs, params["width"], params["height"],
                           params.get("kernel", BINOMIAL_3X3), params.get("pixel_bits", 8))
    raise SpecError(f"unknown algorithm kind {kind!r}")
