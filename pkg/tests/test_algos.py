import random

import numpy as np
import pytest
from scipy.signal import correlate2d

from patternforge.algos import BINOMIAL_3X3, BlurKernel, golden_blur, golden_reference
from patternforge.emit import elaborate
from patternforge.model import SpecError, parse_system_spec
from patternforge.sim import StreamSink, StreamSource, Stimulus, run_simulation

from _support import fixture_json, load


def blur_netlist(w, h):
    doc = fixture_json("blur")
    doc["algorithms"][0].update(image_width=w, image_height=h)
    doc["containers"][0]["capacity"] = max(2 * w, 4)
    return elaborate(parse_system_spec(doc))


def run_blur(pixels, w, h, stall=0.0, seed=0):
    tr = run_simulation(blur_netlist(w, h), Stimulus({"lbuf": StreamSource(pixels, stall), "vga": StreamSink(stall)},
                                                     seed=seed))
    return tr.sinks["vga"]


def oracle(pixels, w, h):
    img = np.asarray(pixels, dtype=np.int64).reshape(h, w)
    k = np.asarray(BINOMIAL_3X3.weights, dtype=np.int64)
    return (correlate2d(img, k, mode="valid") // BINOMIAL_3X3.divisor).ravel().tolist()


def test_golden_copy_singleton():
    assert golden_reference("copy", [7]) == [7]


def test_golden_blur_constant():
    assert golden_reference("blur3x3", [100] * 16, {"width": 4, "height": 4}) == [100] * 4


def test_golden_blur_ramp():
    # weights are symmetric and sum to 16, so a linear ramp returns its centre values
    ramp = [i * 4 + j for i in range(4) for j in range(4)]
    assert golden_blur(ramp, 4, 4) == [5, 6, 9, 10]


@pytest.mark.parametrize("seed", range(5))
def test_golden_blur_matches_scipy(seed):
    r = random.Random(seed)
    w, h = r.randint(3, 20), r.randint(3, 20)
    px = [r.randrange(256) for _ in range(w * h)]
    assert golden_blur(px, w, h) == oracle(px, w, h)


def test_golden_rejects_small_or_short_images():
    with pytest.raises(SpecError):
        golden_blur([0] * 4, 2, 2)
    with pytest.raises(SpecError):
        golden_blur([0] * 8, 3, 3)


@pytest.mark.parametrize("weights, div", [(((1, 1, 1), (1, 1, 1), (1, 1, 1)), 9),
                                          (((1, 2, 1), (2, 4, 2), (1, 2, 1)), 8),
                                          (((1, -1, 1), (1, 1, 1), (1, 1, 9)), 16)])
def test_bad_kernels(weights, div):
    with pytest.raises(ValueError):
        BlurKernel(weights, div)


def test_blur_constant_image_hardware():
    assert run_blur([100] * 16, 4, 4) == [100] * 4


def test_blur_3x3_gives_one_pixel():
    px = list(range(10, 19))
    assert run_blur(px, 3, 3) == golden_blur(px, 3, 3)


def test_blur_ramp_hardware():
    assert run_blur([i * 4 + j for i in range(4) for j in range(4)], 4, 4) == [5, 6, 9, 10]


@pytest.mark.parametrize("w, h, stall", [(5, 7, 0.0), (9, 4, 0.3), (16, 16, 0.5)])
def test_blur_hardware_vs_oracle(w, h, stall):
    r = random.Random(w * h)
    px = [r.randrange(256) for _ in range(w * h)]
    assert run_blur(px, w, h, stall, seed=3) == oracle(px, w, h)


def test_blur_64x64_random():
    r = random.Random(64)
    px = [r.randrange(256) for _ in range(64 * 64)]
    assert run_blur(px, 64, 64) == oracle(px, 64, 64)


def _copy(data, stall=0.0, seed=0, max_cycles=100_000):
    n = elaborate(load("copy_fifo"))
    return run_simulation(n, Stimulus({"rfifo": StreamSource(data, stall), "wfifo": StreamSink(stall)},
                                      seed=seed, max_cycles=max_cycles))


def test_copy_small_stream():
    assert _copy([1, 2, 3]).sinks["wfifo"] == [1, 2, 3]


def test_copy_empty_stream_idles():
    tr = _copy([])
    assert tr.sinks["wfifo"] == []
    assert tr.cycles < 50


def test_copy_ten_thousand_bytes():
    r = random.Random(1)
    data = [r.randrange(256) for _ in range(10_000)]
    assert _copy(data, 0.2, seed=9).sinks["wfifo"] == data
