"""On-disk formats: array files, dataset manifests, and raster images.

This module is the only place that knows byte layouts. The array format is
NPY v1.0 restricted to little-endian float32/float64, C order, 1-D or 3-D
shapes; the manifest is a line-oriented text file; images are PNG and P6 PPM.
"""

from __future__ import annotations

import ast
import io
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadMagic,
    CorruptImage,
    DuplicateId,
    FortranOrderUnsupported,
    HeaderSyntax,
    ManifestSyntax,
    MissingFile,
    NonFiniteElement,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedImageFormat,
    UnsupportedVersion,
)

MAGIC = b"\x93NUMPY"
MANIFEST_HEADER = "simviz-manifest v1"

_DESCR_TO_DTYPE = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


@dataclass
class ArrayFile:
    """A parsed array: dtype descr ('<f4' or '<f8'), shape, and C-order data."""

    dtype: str
    shape: tuple[int, ...]
    data: np.ndarray  # flat, in the declared dtype

    def __post_init__(self):
        if self.dtype not in _DESCR_TO_DTYPE:
            raise ValueError(f"unsupported dtype {self.dtype!r}")
        self.shape = tuple(int(d) for d in self.shape)
        if len(self.shape) not in (1, 3) or any(d < 1 for d in self.shape):
            raise ValueError(f"shape must be 1-D or 3-D with positive dims, got {self.shape}")
        self.data = np.ascontiguousarray(self.data, dtype=_DESCR_TO_DTYPE[self.dtype]).reshape(-1)
        if self.data.size != int(np.prod(self.shape)):
            raise ValueError("data length does not match shape")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("array contains non-finite elements")

    def as_ndarray(self) -> np.ndarray:
        return self.data.reshape(self.shape)


@dataclass
class ManifestEntry:
    id: str
    image_path: str
    activation_path: str
    class_label: str


@dataclass
class DatasetManifest:
    root: str
    entries: list[ManifestEntry]
    grid: tuple[int, int] = (0, 0)
    channels: int = 0

    def image_file(self, e: ManifestEntry) -> str:
        return os.path.join(self.root, e.image_path)

    def activation_file(self, e: ManifestEntry) -> str:
        return os.path.join(self.root, e.activation_path)


@dataclass
class RasterImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError("pixel buffer does not match dimensions")


def _parse_header_dict(header_text: str) -> tuple[str, tuple[int, ...]]:
    """Validate the restricted header grammar; return (descr, shape)."""
    try:
        with warnings.catch_warnings():
            # fuzzed headers may contain invalid escape sequences
            warnings.simplefilter("ignore")
            obj = ast.literal_eval(header_text)
    except (ValueError, SyntaxError, MemoryError, RecursionError, TypeError):
        raise HeaderSyntax("header is not a literal dict") from None
    if not isinstance(obj, dict) or set(obj.keys()) != {"descr", "fortran_order", "shape"}:
        raise HeaderSyntax("header must contain exactly descr, fortran_order, shape")
    descr = obj["descr"]
    if not isinstance(descr, str):
        raise HeaderSyntax("descr must be a string")
    if descr not in _DESCR_TO_DTYPE:
        raise UnsupportedDtype(f"unsupported descr {descr!r}")
    fo = obj["fortran_order"]
    if fo is True:
        raise FortranOrderUnsupported("fortran_order arrays are not supported")
    if fo is not False:
        raise HeaderSyntax("fortran_order must be a boolean")
    shape = obj["shape"]
    if not isinstance(shape, tuple) or not all(type(d) is int for d in shape):
        raise HeaderSyntax("shape must be a tuple of ints")
    if len(shape) not in (1, 3) or any(d < 1 for d in shape):
        raise HeaderSyntax("shape must be 1-D or 3-D with positive dims")
    return descr, shape


def _split_header(data: bytes) -> tuple[str, tuple[int, ...], int]:
    """Parse magic/version/header; return (descr, shape, payload offset)."""
    if len(data) < 6 or data[:6] != MAGIC:
        raise BadMagic("not an NPY stream")
    if len(data) < 8 or data[6:8] != b"\x01\x00":
        raise UnsupportedVersion("only NPY version 1.0 is supported")
    if len(data) < 10:
        raise HeaderSyntax("truncated header length field")
    (hlen,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + hlen:
        raise HeaderSyntax("truncated header")
    try:
        header_text = data[10:10 + hlen].decode("ascii")
    except UnicodeDecodeError:
        raise HeaderSyntax("header is not ASCII") from None
    descr, shape = _parse_header_dict(header_text)
    return descr, shape, 10 + hlen


def read_array(data: bytes) -> ArrayFile:
    """Parse a complete NPY v1.0 byte stream into an ArrayFile.

    Never raises anything but the enumerated ArrayFormatError subclasses,
    regardless of input bytes.
    """
    descr, shape, offset = _split_header(bytes(data))
    dtype = _DESCR_TO_DTYPE[descr]
    count = 1
    for d in shape:
        count *= d
    need = count * dtype.itemsize
    payload = data[offset:]
    if len(payload) < need:
        raise TruncatedPayload(f"need {need} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload[:need], dtype=dtype)
    if not np.all(np.isfinite(values)):
        raise NonFiniteElement("array contains NaN or Inf")
    return ArrayFile(dtype=descr, shape=shape, data=values.copy())


def read_array_shape(data: bytes) -> tuple[int, ...]:
    """Parse only the header of an NPY stream and return its shape."""
    _, shape, _ = _split_header(bytes(data))
    return shape


def write_array(a: ArrayFile) -> bytes:
    """Serialize an ArrayFile as NPY v1.0, little-endian, C order.

    The header is space-padded so the total header length is a multiple of
    64 and ends with a newline; read_array round-trips the result bit-exactly.
    """
    if len(a.shape) == 1:
        shape_txt = f"({a.shape[0]},)"
    else:
        shape_txt = "(" + ", ".join(str(d) for d in a.shape) + ")"
    header = f"{{'descr': '{a.dtype}', 'fortran_order': False, 'shape': {shape_txt}, }}"
    total = 10 + len(header) + 1
    pad = (64 - total % 64) % 64
    header_bytes = (header + " " * pad + "\n").encode("ascii")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(b"\x01\x00")
    out.write(struct.pack("<H", len(header_bytes)))
    out.write(header_bytes)
    out.write(a.data.tobytes())
    return out.getvalue()


def load_array(path: str) -> ArrayFile:
    with open(path, "rb") as f:
        return read_array(f.read())


def save_array(a: ArrayFile, path: str) -> None:
    with open(path, "wb") as f:
        f.write(write_array(a))


def array_from_ndarray(values: np.ndarray, dtype: str = "<f8") -> ArrayFile:
    values = np.asarray(values)
    return ArrayFile(dtype=dtype, shape=values.shape, data=values.reshape(-1))


def load_manifest(path: str, root: str | None = None) -> DatasetManifest:
    """Load and eagerly validate a dataset manifest file.

    Entry paths resolve under `root`, defaulting to the manifest's directory.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise MissingFile(str(e)) from None
    except UnicodeDecodeError:
        raise ManifestSyntax("manifest is not UTF-8 text") from None

    lines = text.splitlines()
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise ManifestSyntax(f"first line must be {MANIFEST_HEADER!r}")

    if root is None:
        root = os.path.dirname(os.path.abspath(path))
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestSyntax(f"line {lineno}: expected 4 tab-separated fields")
        entry = ManifestEntry(*fields)
        if not entry.id:
            raise ManifestSyntax(f"line {lineno}: empty id")
        if entry.id in seen:
            raise DuplicateId(f"duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)

    manifest = DatasetManifest(root=root, entries=entries)
    grid: tuple[int, int] | None = None
    channels = 0
    for e in entries:
        img = manifest.image_file(e)
        act = manifest.activation_file(e)
        if not os.path.isfile(img):
            raise MissingFile(f"{e.id}: image {e.image_path} not found")
        if not os.path.isfile(act):
            raise MissingFile(f"{e.id}: activation {e.activation_path} not found")
        with open(act, "rb") as f:
            head = f.read(4096)
        shape = read_array_shape(head)
        if len(shape) != 3:
            raise ShapeMismatch(f"{e.id}: activation must be 3-D, got shape {shape}")
        if grid is None:
            grid = (shape[0], shape[1])
            channels = shape[2]
        elif (shape[0], shape[1]) != grid or shape[2] != channels:
            raise ShapeMismatch(
                f"{e.id}: activation shape {shape} differs from {grid + (channels,)}"
            )
    if grid is not None:
        manifest.grid = grid
        manifest.channels = channels
    return manifest


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    lines = [MANIFEST_HEADER]
    for e in manifest.entries:
        lines.append(f"{e.id}\t{e.image_path}\t{e.activation_path}\t{e.class_label}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _read_ppm(data: bytes) -> RasterImage:
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1].isspace():
                pos += 1
            elif data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptImage("unexpected end of PPM header")
        return data[start:pos]

    if token() != b"P6":
        raise UnsupportedImageFormat("only binary P6 PPM is supported")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except (ValueError, CorruptImage):
        raise CorruptImage("malformed PPM header") from None
    if maxval != 255:
        raise UnsupportedImageFormat("only maxval 255 PPM is supported")
    if width < 1 or height < 1:
        raise CorruptImage("non-positive PPM dimensions")
    pos += 1  # single whitespace after maxval
    need = 3 * width * height
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise CorruptImage("truncated PPM payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(width=width, height=height, pixels=pixels.copy())


def _write_ppm(img: RasterImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def _read_png(data: bytes) -> RasterImage:
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, ValueError):
        raise CorruptImage("failed to decode PNG") from None
    if pil.mode == "RGBA":
        pil = pil.convert("RGB")  # drop alpha
    if pil.mode != "RGB":
        raise UnsupportedImageFormat(f"unsupported PNG mode {pil.mode}")
    pixels = np.asarray(pil, dtype=np.uint8)
    return RasterImage(width=pil.width, height=pil.height, pixels=pixels)


def read_image_bytes(data: bytes) -> RasterImage:
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(data)
    if data[:2] == b"P6":
        return _read_ppm(data)
    raise UnsupportedImageFormat("expected PNG or binary P6 PPM")


def read_image(path: str) -> RasterImage:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise MissingFile(str(e)) from None
    return read_image_bytes(data)


def encode_png(img: RasterImage) -> bytes:
    """Encode as PNG with a fixed encoder configuration (zlib level 6,
    no optimization pass) so identical pixels give identical bytes."""
    pil = Image.fromarray(img.pixels, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def write_image(img: RasterImage, path: str) -> None:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".png":
        payload = encode_png(img)
    elif ext == ".ppm":
        payload = _write_ppm(img)
    else:
        raise UnsupportedImageFormat(f"unsupported output extension {ext!r}")
    with open(path, "wb") as f:
        f.write(payload)
