"""64x64 patch extraction, class balancing and the ``PCH1`` patch file format.

``PCH1`` layout: magic, u32 record count, then per record 64*64 little-endian
f32 pixels, u8 class index, u32 slice index, u32 row and u32 col of the
top-left corner.
"""

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .._io import atomic_write_bytes, read_exact
from ..errors import DataError, FormatError, ShapeError
from ..metrics import C1, C2

PATCH = 64
PCH_MAGIC = b"PCH1"


@dataclass
class PatchRecord:
    pixels: np.ndarray  # PATCH x PATCH float32
    label: int  # C1 (nodule present) or C2
    slice_index: int
    top_left: Tuple[int, int]  # (row, col)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.shape != (PATCH, PATCH):
            raise ShapeError(f"patch pixels must be {PATCH}x{PATCH}, got {self.pixels.shape}")
        if self.label not in (C1, C2):
            raise ValueError(f"patch label must be C1={C1} or C2={C2}, got {self.label}")
        self.top_left = (int(self.top_left[0]), int(self.top_left[1]))


def grid_starts(lo: int, hi: int, limit: int, size: int, stride: int) -> List[int]:
    """Window starts covering ``[lo, hi]`` with windows of ``size`` inside ``[0, limit)``.

    Starts are ``lo + i*stride`` with the last one pulled back to end at
    ``hi``; a span shorter than ``size`` gets one window. The count is
    ``ceil((span - size) / stride) + 1`` for ``span = max(hi - lo + 1, size)``.
    """
    span = max(hi - lo + 1, size)
    count = math.ceil((span - size) / stride) + 1
    starts = []
    for i in range(count):
        s = lo + min(i * stride, span - size)
        s = min(max(s, 0), limit - size)
        if not starts or starts[-1] != s:
            starts.append(s)
    return starts


def extract_patches(
    image,
    lung_mask,
    nodule_mask,
    stride: int = 32,
    slice_index: int = 0,
    min_lung_fraction: float = 0.25,
) -> List[PatchRecord]:
    """Grid of 64x64 windows over the lung bounding box.

    Windows with at least ``min_lung_fraction`` lung pixels are kept (this
    includes the lung walls). A window is ``C1`` iff it contains any nodule
    pixel.
    """
    image = np.asarray(image, dtype=np.float32)
    lung = np.asarray(lung_mask, dtype=bool)
    nod = np.asarray(nodule_mask, dtype=bool)
    if image.ndim != 2 or image.shape[0] < PATCH or image.shape[1] < PATCH:
        raise ShapeError(f"image must be 2-D and at least {PATCH}x{PATCH}, got {image.shape}")
    if lung.shape != image.shape or nod.shape != image.shape:
        raise ShapeError(f"mask shapes {lung.shape}, {nod.shape} vs image {image.shape}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not lung.any():
        return []
    rows = np.flatnonzero(lung.any(axis=1))
    cols = np.flatnonzero(lung.any(axis=0))
    h, w = image.shape
    out = []
    need = min_lung_fraction * PATCH * PATCH
    for r in grid_starts(rows[0], rows[-1], h, PATCH, stride):
        for c in grid_starts(cols[0], cols[-1], w, PATCH, stride):
            if lung[r : r + PATCH, c : c + PATCH].sum() < need:
                continue
            label = C1 if nod[r : r + PATCH, c : c + PATCH].any() else C2
            out.append(PatchRecord(image[r : r + PATCH, c : c + PATCH].copy(), label, slice_index, (r, c)))
    return out


def balance_patches(records: List[PatchRecord], seed: int = 0) -> List[PatchRecord]:
    """Subsample the majority class to the minority count; original order kept."""
    labels = np.array([r.label for r in records])
    pos = np.flatnonzero(labels == C1)
    neg = np.flatnonzero(labels == C2)
    if len(pos) == 0 or len(neg) == 0:
        raise DataError(f"cannot balance patches: {len(pos)} C1 and {len(neg)} C2")
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    k = min(len(pos), len(neg))
    keep = np.concatenate([rng.choice(pos, k, replace=False), rng.choice(neg, k, replace=False)])
    return [records[i] for i in np.sort(keep)]


def patches_to_arrays(records: List[PatchRecord]):
    """Stack records into ``(N x 1 x 64 x 64 float32, N labels)``."""
    x = np.stack([r.pixels for r in records])[:, None].astype(np.float32)
    y = np.array([r.label for r in records], dtype=np.int64)
    return x, y


def patches_to_bytes(records: List[PatchRecord]) -> bytes:
    buf = io.BytesIO()
    buf.write(PCH_MAGIC)
    buf.write(struct.pack("<I", len(records)))
    for r in records:
        buf.write(np.ascontiguousarray(r.pixels, dtype="<f4").tobytes())
        buf.write(struct.pack("<BIII", r.label, r.slice_index, r.top_left[0], r.top_left[1]))
    return buf.getvalue()


def patches_from_bytes(payload: bytes) -> List[PatchRecord]:
    stream = io.BytesIO(payload)
    magic = read_exact(stream, 4, "PCH1 magic")
    if magic != PCH_MAGIC:
        raise FormatError(f"bad patch file magic {magic!r}")
    (count,) = struct.unpack("<I", read_exact(stream, 4, "PCH1 count"))
    out = []
    for i in range(count):
        px = np.frombuffer(read_exact(stream, PATCH * PATCH * 4, f"PCH1 record {i} pixels"), dtype="<f4")
        label, sl, r, c = struct.unpack("<BIII", read_exact(stream, 13, f"PCH1 record {i} trailer"))
        if label not in (C1, C2):
            raise FormatError(f"PCH1 record {i}: invalid label {label}")
        out.append(PatchRecord(px.reshape(PATCH, PATCH).astype(np.float32), label, sl, (r, c)))
    if stream.read(1):
        raise FormatError("trailing bytes after last PCH1 record")
    return out


def write_patches(path, records: List[PatchRecord]) -> None:
    atomic_write_bytes(path, patches_to_bytes(records))


def read_patches(path) -> List[PatchRecord]:
    return patches_from_bytes(Path(path).read_bytes())
