"""Binary PGM/PPM images and raw element-stream files."""

from __future__ import annotations

from dataclasses import dataclass


class ImageFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    channels: int          # 1 = P5 grayscale, 3 = P6 RGB
    pixels: tuple          # row-major; RGB packed as R | G << 8 | B << 16

    @property
    def bits(self) -> int:
        return 8 * self.channels


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just after the last one."""
    out, i, n = [], 0, len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise ImageFormatError("truncated header")
        out.append(data[i:j])
        i = j
    if i >= n or not data[i:i + 1].isspace():
        raise ImageFormatError("header must end with one whitespace byte")
    return out, i + 1


def parse_pnm(data: bytes) -> Image:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError("not a binary PGM (P5) or PPM (P6) file")
    (_, w, h, maxval), off = _tokens(data, 4)
    try:
        width, height, maxv = int(w), int(h), int(maxval)
    except ValueError:
        raise ImageFormatError("non-numeric header field") from None
    if width < 1 or height < 1:
        raise ImageFormatError("image dimensions must be positive")
    if maxv != 255:
        raise ImageFormatError(f"only 8-bit samples (maxval 255) are supported, got {maxv}")
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    body = data[off:]
    if len(body) < need:
        raise ImageFormatError(f"expected {need} sample bytes, found {len(body)}")
    if len(body) > need:
        raise ImageFormatError(f"{len(body) - need} trailing bytes after the samples")
    if channels == 1:
        pixels = tuple(body)
    else:
        pixels = tuple(body[i] | body[i + 1] << 8 | body[i + 2] << 16 for i in range(0, need, 3))
    return Image(width, height, channels, pixels)


def format_pnm(img: Image) -> bytes:
    if img.channels not in (1, 3):
        raise ImageFormatError("channels must be 1 or 3")
    if len(img.pixels) != img.width * img.height:
        raise ImageFormatError("pixel count does not match the dimensions")
    magic = b"P5" if img.channels == 1 else b"P6"
    head = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    if img.channels == 1:
        return head + bytes(img.pixels)
    body = bytearray()
    for p in img.pixels:
        body += bytes((p & 0xFF, (p >> 8) & 0xFF, (p >> 16) & 0xFF))
    return head + bytes(body)


def read_pnm(path) -> Image:
    with open(path, "rb") as f:
        return parse_pnm(f.read())


def write_pnm(path, img: Image) -> None:
    with open(path, "wb") as f:
        f.write(format_pnm(img))


def element_bytes(width_bits: int) -> int:
    return -(-width_bits // 8)


def decode_stream(data: bytes, width_bits: int) -> list:
    """Raw little-endian elements, each rounded up to whole bytes."""
    k = element_bytes(width_bits)
    if len(data) % k:
        raise ImageFormatError(f"stream length {len(data)} is not a multiple of {k} bytes")
    out = [int.from_bytes(data[i:i + k], "little") for i in range(0, len(data), k)]
    limit = 1 << width_bits
    for x in out:
        if x >= limit:
            raise ImageFormatError(f"element {x} does not fit {width_bits} bits")
    return out


def encode_stream(elements, width_bits: int) -> bytes:
    k = element_bytes(width_bits)
    limit = 1 << width_bits
    out = bytearray()
    for x in elements:
        x = int(x)
        if not 0 <= x < limit:
            raise ValueError(f"element {x} does not fit {width_bits} bits")
        out += x.to_bytes(k, "little")
    return bytes(out)
