"""Image ingestion, block quantization, reconstruction, and PSNR.

Reads binary (P5) and ASCII (P2) PGM up to maxval 255, writes canonical P5,
slices images into fixed-size blocks (4x4 by default, giving the 16-dim
training vectors), encodes/decodes against a codebook, and measures PSNR
against a 255 peak.

Two small binary container formats round out the toolchain:

* VQCB codebook file: magic ``VQCB``, little-endian u32 {M, dim}, M*dim
  little-endian float64 codewords row-major, then the 32-byte SHA-256 digest
  of everything before it.
* VQIX index-map file: magic ``VQIX``, little-endian u32 {block_w, block_h,
  blocks_x, blocks_y, M}, the 32-byte digest of the codebook used, then
  blocks_x * blocks_y little-endian u16 indices row-major.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import Codebook, TrainingSet, assign_nearest


class PGMParseError(ValueError):
    """Malformed PGM input; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class FormatError(ValueError):
    """Malformed or corrupt VQCB/VQIX container."""


class DigestMismatchError(ValueError):
    """Index map was produced with a different codebook."""

    def __init__(self, expected: bytes, actual: bytes):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"codebook digest mismatch: index map expects {expected.hex()}, got {actual.hex()}"
        )


@dataclass(eq=False)
class Image:
    """8-bit grayscale raster, pixels stored as an (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError(f"image must be a nonempty 2-D raster, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class BlockGeometry:
    block_w: int = 4
    block_h: int = 4

    def __post_init__(self):
        if self.block_w < 1 or self.block_h < 1:
            raise ValueError("block dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.block_w * self.block_h

    def grid_for(self, img: Image) -> tuple[int, int]:
        """(blocks_x, blocks_y) for an image, enforcing exact divisibility."""
        if img.width % self.block_w or img.height % self.block_h:
            raise ValueError(
                f"image {img.width}x{img.height} not divisible into "
                f"{self.block_w}x{self.block_h} blocks"
            )
        return img.width // self.block_w, img.height // self.block_h


@dataclass(eq=False)
class IndexMap:
    """Per-block codeword indices plus the digest of the codebook that made them."""

    geometry: BlockGeometry
    indices: np.ndarray  # (blocks_y, blocks_x)
    m: int
    codebook_digest: bytes

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.ndim != 2 or self.indices.size == 0:
            raise ValueError("index grid must be a nonempty 2-D array")
        if self.indices.min() < 0 or self.indices.max() >= self.m:
            raise ValueError(f"index outside [0, {self.m})")
        if len(self.codebook_digest) != 32:
            raise ValueError("codebook digest must be 32 bytes")


_WHITESPACE = b" \t\n\r\x0b\x0c"


class _Tokenizer:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _skip_filler(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = self.data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == ord("#"):
                nl = data.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            else:
                return

    def token(self) -> tuple[bytes, int]:
        self._skip_filler()
        if self.pos >= len(self.data):
            raise PGMParseError("truncated file: expected another token", len(self.data))
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos] not in _WHITESPACE + b"#":
            self.pos += 1
        return self.data[start : self.pos], start

    def int_token(self, what: str) -> int:
        tok, start = self.token()
        try:
            return int(tok)
        except ValueError:
            raise PGMParseError(f"nonnumeric {what} token {tok!r}", start) from None


def read_pgm(data: bytes) -> Image:
    """Parse a P5 (binary) or P2 (ASCII) PGM with maxval <= 255."""
    tok = _Tokenizer(data)
    magic, start = tok.token()
    if magic not in (b"P5", b"P2"):
        raise PGMParseError(f"unsupported magic {magic!r}; expected P5 or P2", start)

    width = tok.int_token("width")
    height = tok.int_token("height")
    if width < 1 or height < 1:
        raise PGMParseError(f"invalid dimensions {width}x{height}", start)
    maxval_at = tok.pos
    maxval = tok.int_token("maxval")
    if maxval > 255:
        raise PGMParseError(f"unsupported maxval {maxval} (only 8-bit supported)", maxval_at)
    if maxval < 1:
        raise PGMParseError(f"invalid maxval {maxval}", maxval_at)

    n_pixels = width * height
    if magic == b"P5":
        if tok.pos >= len(data) or data[tok.pos] not in _WHITESPACE:
            raise PGMParseError("expected single whitespace before binary raster", tok.pos)
        payload_start = tok.pos + 1
        payload = data[payload_start : payload_start + n_pixels]
        if len(payload) < n_pixels:
            raise PGMParseError(
                f"truncated raster: expected {n_pixels} bytes, got {len(payload)}", len(data)
            )
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
        return Image(pixels=pixels.copy())

    values = np.empty(n_pixels, dtype=np.uint8)
    for i in range(n_pixels):
        at = tok.pos
        v = tok.int_token("pixel")
        if not 0 <= v <= maxval:
            raise PGMParseError(f"pixel value {v} outside [0, {maxval}]", at)
        values[i] = v
    return Image(pixels=values.reshape(height, width))


def write_pgm(img: Image) -> bytes:
    """Canonical binary P5 bytes: ``P5\\n<w> <h>\\n255\\n`` plus the raster."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def extract_blocks(img: Image, geom: BlockGeometry = BlockGeometry()) -> TrainingSet:
    """One training vector per block, blocks and in-block pixels both row-major."""
    bx, by = geom.grid_for(img)
    blocks = (
        img.pixels.reshape(by, geom.block_h, bx, geom.block_w)
        .swapaxes(1, 2)
        .reshape(by * bx, geom.dim)
    )
    return TrainingSet(vectors=blocks.astype(np.float64))


def assemble_blocks(blocks: np.ndarray, geom: BlockGeometry, blocks_x: int, blocks_y: int) -> np.ndarray:
    """Inverse of :func:`extract_blocks` on a (blocks, dim) array of pixel values."""
    return (
        blocks.reshape(blocks_y, blocks_x, geom.block_h, geom.block_w)
        .swapaxes(1, 2)
        .reshape(blocks_y * geom.block_h, blocks_x * geom.block_w)
    )


def encode(img: Image, cb: Codebook, geom: BlockGeometry = BlockGeometry()) -> IndexMap:
    """Quantize every block to its nearest codeword (ties to the lowest index)."""
    if cb.dim != geom.dim:
        raise ValueError(f"codebook dim {cb.dim} != block dim {geom.dim}")
    bx, by = geom.grid_for(img)
    asg = assign_nearest(extract_blocks(img, geom), cb)
    return IndexMap(
        geometry=geom,
        indices=asg.cluster_of.reshape(by, bx),
        m=cb.m,
        codebook_digest=codebook_digest(cb),
    )


def decode(index_map: IndexMap, cb: Codebook) -> Image:
    """Reconstruct the image: codeword components rounded half-up, clamped to [0, 255]."""
    geom = index_map.geometry
    if cb.dim != geom.dim:
        raise ValueError(f"codebook dim {cb.dim} != block dim {geom.dim}")
    indices = index_map.indices
    if indices.min() < 0 or indices.max() >= cb.m:
        raise ValueError(f"index map references codeword outside [0, {cb.m})")
    by, bx = indices.shape
    blocks = cb.codewords[indices.ravel()]
    pixels = np.clip(np.floor(blocks + 0.5), 0, 255).astype(np.uint8)
    return Image(pixels=assemble_blocks(pixels, geom, bx, by))


def psnr_from_mse(mse: float) -> float:
    """PSNR in dB against the 8-bit peak of 255; infinite when MSE is 0."""
    if mse < 0:
        raise ValueError("MSE cannot be negative")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio between two equal-size images."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"image size mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return psnr_from_mse(float((diff * diff).mean()))


def codebook_digest(cb: Codebook) -> bytes:
    """SHA-256 of the serialized codebook payload (magic, header, codewords)."""
    return hashlib.sha256(_codebook_payload(cb)).digest()


def _codebook_payload(cb: Codebook) -> bytes:
    header = b"VQCB" + struct.pack("<II", cb.m, cb.dim)
    body = np.ascontiguousarray(cb.codewords, dtype="<f8").tobytes()
    return header + body


def write_codebook_file(cb: Codebook) -> bytes:
    payload = _codebook_payload(cb)
    return payload + hashlib.sha256(payload).digest()


def read_codebook_file(data: bytes) -> Codebook:
    if len(data) < 12 or data[:4] != b"VQCB":
        raise FormatError("not a VQCB codebook file")
    m, dim = struct.unpack_from("<II", data, 4)
    if m < 1 or dim < 1:
        raise FormatError(f"VQCB header fields must be positive, got M={m} dim={dim}")
    body_end = 12 + m * dim * 8
    if len(data) < body_end + 32:
        raise FormatError(f"truncated VQCB file: expected {body_end + 32} bytes, got {len(data)}")
    payload, stored = data[:body_end], data[body_end : body_end + 32]
    if hashlib.sha256(payload).digest() != stored:
        raise FormatError("VQCB digest mismatch: file is corrupt")
    codewords = np.frombuffer(data[12:body_end], dtype="<f8").reshape(m, dim)
    return Codebook(codewords=codewords.astype(np.float64), source="file")


def write_index_file(index_map: IndexMap) -> bytes:
    geom = index_map.geometry
    by, bx = index_map.indices.shape
    if index_map.indices.max() > 0xFFFF:
        raise FormatError("index map exceeds u16 range")
    header = b"VQIX" + struct.pack("<IIIII", geom.block_w, geom.block_h, bx, by, index_map.m)
    body = np.ascontiguousarray(index_map.indices, dtype="<u2").tobytes()
    return header + index_map.codebook_digest + body


def read_index_file(data: bytes) -> IndexMap:
    if len(data) < 56 or data[:4] != b"VQIX":
        raise FormatError("not a VQIX index file")
    block_w, block_h, bx, by, m = struct.unpack_from("<IIIII", data, 4)
    if min(block_w, block_h, bx, by, m) < 1:
        raise FormatError("VQIX header fields must be positive")
    digest = data[24:56]
    body_end = 56 + bx * by * 2
    if len(data) < body_end:
        raise FormatError(f"truncated VQIX file: expected {body_end} bytes, got {len(data)}")
    indices = np.frombuffer(data[56:body_end], dtype="<u2").reshape(by, bx)
    if indices.size and indices.max() >= m:
        raise FormatError(f"VQIX index {int(indices.max())} out of range for M={m}")
    return IndexMap(
        geometry=BlockGeometry(block_w=block_w, block_h=block_h),
        indices=indices.astype(np.int64),
        m=m,
        codebook_digest=digest,
    )
