"""Image file I/O: the NDT raw tensor format and a baseline 2D TIFF reader.

NDT is the pipeline's canonical interchange format: a fixed little-endian
header followed by the raw row-major buffer, designed for bit-exact round
trips (cache blobs are compared by content hash). Layout::

    bytes 0..3   magic "MMVT"
    bytes 4..5   version, u16 LE (currently 1)
    byte  6      dtype code: 0 = f32, 1 = u8, 2 = u16
    byte  7      axis count n (2..5)
    bytes 8..8+n axis labels, one ASCII byte each from {T,C,Z,Y,X},
                 strictly in canonical order
    then         n extents, u64 LE each
    then         payload, little-endian row-major, no compression

The TIFF path covers just enough of baseline TIFF (single page, 8/16-bit,
grayscale or RGB, uncompressed strips or tiles) to ingest common 2D
microscopy exports; everything else raises :class:`UnsupportedTiff`.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    IoError,
    MalformedHeader,
    TruncatedPayload,
    UnsupportedTiff,
    UnsupportedVersion,
)
from .ndimage import CANONICAL_AXES, NDImage

NDT_MAGIC = b"MMVT"
NDT_VERSION = 1

_DTYPE_BY_CODE = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<u2")}
_CODE_BY_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.uint8): 1, np.dtype(np.uint16): 2}

IMAGE_SUFFIXES = (".ndt", ".tif", ".tiff")


def write_ndt(img: NDImage, path) -> None:
    """Write the image as an NDT file; `read_ndt` reconstructs it bit-exactly."""
    code = _CODE_BY_DTYPE[np.dtype(img.dtype)]
    n = len(img.axes)
    header = NDT_MAGIC + struct.pack("<HBB", NDT_VERSION, code, n)
    header += img.axes.encode("ascii")
    header += struct.pack(f"<{n}Q", *img.shape)
    payload = np.ascontiguousarray(img.data, dtype=_DTYPE_BY_CODE[code]).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_ndt_header(buf: bytes, path) -> tuple[str, tuple[int, ...], np.dtype, int]:
    """Return (axes, shape, dtype, header_size) or raise a typed error."""
    if len(buf) < 4:
        raise TruncatedPayload(f"{path}: file shorter than the magic field")
    if buf[:4] != NDT_MAGIC:
        raise BadMagic(f"{path}: expected magic {NDT_MAGIC!r}, found {buf[:4]!r}")
    if len(buf) < 8:
        raise TruncatedPayload(f"{path}: header truncated")
    version, code, n = struct.unpack_from("<HBB", buf, 4)
    if version != NDT_VERSION:
        raise UnsupportedVersion(f"{path}: version {version} (reader speaks {NDT_VERSION})")
    if code not in _DTYPE_BY_CODE:
        raise MalformedHeader(f"{path}: unknown dtype code {code}")
    if not (2 <= n <= 5):
        raise MalformedHeader(f"{path}: axis count {n} outside 2..5")
    header_size = 8 + n + 8 * n
    if len(buf) < header_size:
        raise TruncatedPayload(f"{path}: header truncated")
    axes = buf[8 : 8 + n].decode("ascii", errors="replace")
    positions = [CANONICAL_AXES.find(a) for a in axes]
    if -1 in positions or sorted(positions) != positions or len(set(axes)) != n:
        raise MalformedHeader(f"{path}: axis labels {axes!r} not strictly canonical")
    shape = struct.unpack_from(f"<{n}Q", buf, 8 + n)
    if any(e < 1 for e in shape):
        raise MalformedHeader(f"{path}: zero extent in shape {shape}")
    return axes, shape, _DTYPE_BY_CODE[code], header_size


def read_ndt(path) -> NDImage:
    """Read an NDT file; u8/u16 payloads are converted to f32 by numeric value."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    axes, shape, dtype, header_size = _parse_ndt_header(buf, path)
    count = int(np.prod(shape))
    expected = count * dtype.itemsize
    payload = buf[header_size:]
    if len(payload) < expected:
        raise TruncatedPayload(
            f"{path}: payload holds {len(payload)} bytes, header promises {expected}"
        )
    if len(payload) > expected:
        raise MalformedHeader(f"{path}: {len(payload) - expected} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return NDImage(arr.astype(np.float32), axes)


def inspect_ndt(path) -> dict:
    """Header summary without decoding the payload (CLI `inspect`)."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read(8 + 5 + 8 * 5)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    axes, shape, dtype, _ = _parse_ndt_header(buf, path)
    return {"format": "ndt", "version": NDT_VERSION, "dtype": dtype.name, "axes": axes,
            "shape": list(shape)}


# --- baseline TIFF ----------------------------------------------------------

_TIFF_TYPE_SIZES = {1: 1, 3: 2, 4: 4}  # BYTE, SHORT, LONG


def _read_tiff_entries(buf: bytes, path) -> dict[int, list[int]]:
    if len(buf) < 8:
        raise UnsupportedTiff(f"{path}: too short for a TIFF header")
    order = buf[:2]
    if order == b"II":
        bo = "<"
    elif order == b"MM":
        bo = ">"
    else:
        raise UnsupportedTiff(f"{path}: unknown byte-order mark {order!r}")
    (magic,) = struct.unpack_from(bo + "H", buf, 2)
    if magic != 42:
        raise UnsupportedTiff(f"{path}: magic {magic} != 42 (BigTIFF not supported)")
    (ifd_off,) = struct.unpack_from(bo + "I", buf, 4)
    if ifd_off + 2 > len(buf):
        raise UnsupportedTiff(f"{path}: IFD offset beyond end of file")
    (count,) = struct.unpack_from(bo + "H", buf, ifd_off)
    entries: dict[int, list[int]] = {}
    for i in range(count):
        base = ifd_off + 2 + 12 * i
        if base + 12 > len(buf):
            raise UnsupportedTiff(f"{path}: truncated IFD")
        tag, typ, n = struct.unpack_from(bo + "HHI", buf, base)
        if typ not in _TIFF_TYPE_SIZES:
            continue  # tags with RATIONAL etc. are irrelevant to the subset
        size = _TIFF_TYPE_SIZES[typ] * n
        if size <= 4:
            raw = buf[base + 8 : base + 8 + size]
        else:
            (off,) = struct.unpack_from(bo + "I", buf, base + 8)
            if off + size > len(buf):
                raise UnsupportedTiff(f"{path}: tag {tag} data beyond end of file")
            raw = buf[off : off + size]
        fmt = {1: "B", 3: "H", 4: "I"}[typ]
        entries[tag] = list(struct.unpack(bo + fmt * n, raw))
    next_off_pos = ifd_off + 2 + 12 * count
    (next_ifd,) = struct.unpack_from(bo + "I", buf, next_off_pos)
    if next_ifd != 0:
        raise UnsupportedTiff(f"{path}: multi-page TIFF not supported")
    entries[-1] = [1 if bo == "<" else 0]  # stash byte order for payload decode
    return entries


def read_tiff_2d(path) -> NDImage:
    """Read a baseline single-page TIFF as a YX (gray) or CYX (RGB) f32 image."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    tags = _read_tiff_entries(buf, path)
    little = bool(tags[-1][0])

    def one(tag, default=None):
        vals = tags.get(tag)
        if vals is None:
            if default is None:
                raise UnsupportedTiff(f"{path}: required tag {tag} missing")
            return default
        return vals[0]

    width = one(256)
    height = one(257)
    compression = one(259, 1)
    if compression != 1:
        raise UnsupportedTiff(f"{path}: compression {compression} not supported")
    photometric = one(262)
    spp = one(277, 1)
    bits = tags.get(258, [1])
    if len(set(bits)) != 1 or bits[0] not in (8, 16):
        raise UnsupportedTiff(f"{path}: bits per sample {bits} outside 8/16")
    if one(284, 1) != 1:
        raise UnsupportedTiff(f"{path}: planar configuration must be chunky")
    if photometric in (0, 1):
        if spp != 1:
            raise UnsupportedTiff(f"{path}: grayscale with {spp} samples per pixel")
    elif photometric == 2:
        if spp != 3:
            raise UnsupportedTiff(f"{path}: RGB with {spp} samples per pixel")
    else:
        raise UnsupportedTiff(f"{path}: photometric {photometric} not supported")

    dtype = np.dtype(("<" if little else ">") + ("u1" if bits[0] == 8 else "u2"))
    pixels = np.zeros((height, width, spp), dtype=dtype.newbyteorder("="))

    if 322 in tags:  # tiled layout
        tw, tl = one(322), one(323)
        offsets, counts = tags.get(324), tags.get(325)
        if offsets is None or counts is None:
            raise UnsupportedTiff(f"{path}: tiled file missing tile offsets/counts")
        tiles_across = -(-width // tw)
        tiles_down = -(-height // tl)
        if len(offsets) != tiles_across * tiles_down:
            raise UnsupportedTiff(f"{path}: tile count mismatch")
        for idx, (off, cnt) in enumerate(zip(offsets, counts)):
            need = tw * tl * spp * dtype.itemsize
            if cnt < need or off + cnt > len(buf):
                raise UnsupportedTiff(f"{path}: tile {idx} payload truncated")
            tile = np.frombuffer(buf, dtype=dtype, count=tw * tl * spp, offset=off)
            tile = tile.reshape(tl, tw, spp)
            ty, tx = divmod(idx, tiles_across)
            y0, x0 = ty * tl, tx * tw
            h = min(tl, height - y0)
            w = min(tw, width - x0)
            pixels[y0 : y0 + h, x0 : x0 + w] = tile[:h, :w]
    else:  # stripped layout
        offsets, counts = tags.get(273), tags.get(279)
        if offsets is None or counts is None:
            raise UnsupportedTiff(f"{path}: missing strip offsets/byte counts")
        rows_per_strip = one(278, height)
        row = 0
        for idx, (off, cnt) in enumerate(zip(offsets, counts)):
            rows = min(rows_per_strip, height - row)
            need = rows * width * spp * dtype.itemsize
            if cnt < need or off + cnt > len(buf):
                raise UnsupportedTiff(f"{path}: strip {idx} payload truncated")
            strip = np.frombuffer(buf, dtype=dtype, count=rows * width * spp, offset=off)
            pixels[row : row + rows] = strip.reshape(rows, width, spp)
            row += rows
        if row < height:
            raise UnsupportedTiff(f"{path}: strips cover {row} of {height} rows")

    data = pixels.astype(np.float32)
    if spp == 1:
        return NDImage(data[:, :, 0], "YX")
    return NDImage(np.ascontiguousarray(np.moveaxis(data, 2, 0)), "CYX")


def inspect_tiff(path) -> dict:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    tags = _read_tiff_entries(buf, path)
    spp = tags.get(277, [1])[0]
    return {
        "format": "tiff",
        "width": tags.get(256, [0])[0],
        "height": tags.get(257, [0])[0],
        "bits": tags.get(258, [1])[0],
        "samples_per_pixel": spp,
        "layout": "tiled" if 322 in tags else "stripped",
    }


def read_image(path) -> NDImage:
    """Dispatch on suffix: .ndt or .tif/.tiff."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ndt":
        return read_ndt(path)
    if suffix in (".tif", ".tiff"):
        return read_tiff_2d(path)
    raise IoError(f"{path}: unknown image suffix {suffix!r}")
