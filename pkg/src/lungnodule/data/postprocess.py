"""Classical clean-up of a lung probability map and PGM export."""

import re
from pathlib import Path

import numpy as np
from scipy import ndimage

from .._io import atomic_write_bytes
from ..errors import FormatError

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def postprocess_mask(prob_map, threshold: float = 0.5, keep: int = 2) -> np.ndarray:
    """Threshold, keep the ``keep`` largest 4-connected components, fill holes."""
    mask = np.asarray(prob_map) >= threshold
    labels, n = ndimage.label(mask, structure=FOUR_CONNECTED)
    if n == 0:
        return np.zeros(mask.shape, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    # stable order: larger first, lower label on ties
    order = np.lexsort((np.arange(1, n + 1), -sizes))[:keep] + 1
    kept = np.isin(labels, order)
    return ndimage.binary_fill_holes(kept, structure=FOUR_CONNECTED)


def to_uint8(image, vmin=None, vmax=None) -> np.ndarray:
    a = np.asarray(image, dtype=np.float64)
    lo = a.min() if vmin is None else vmin
    hi = a.max() if vmax is None else vmax
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.uint8)
    return np.clip(np.round((a - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, image, vmin=None, vmax=None) -> None:
    """Binary 8-bit PGM (P5), linearly scaled from ``[vmin, vmax]`` (default: data range)."""
    px = to_uint8(image, vmin, vmax)
    if px.ndim != 2:
        raise ValueError(f"PGM needs a 2-D image, got shape {px.shape}")
    h, w = px.shape
    atomic_write_bytes(path, f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise FormatError(f"{path} is not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported")
    px = data[m.end() :]
    if len(px) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, found {len(px)}")
    return np.frombuffer(px, dtype=np.uint8).reshape(h, w)
