"""RISE saliency: random low-resolution masks, score-weighted average.

For a model ``f`` and masks ``M_i`` the importance map is

    S = 1 / (N * p1) * sum_i f_C1(x * M_i) * M_i

Masked-out pixels take the value ``baseline`` (0 by default, or the patch
mean with ``baseline="mean"``), i.e. the model sees ``b + M_i * (x - b)``.
Masks are accumulated in a fixed order so results are reproducible.
"""

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError
from .metrics import C1


@dataclass
class RiseConfig:
    n_masks: int = 1000
    grid: int = 8
    p1: float = 0.5
    seed: int = 0
    batch_size: int = 100
    baseline: float | str = 0.0

    def __post_init__(self):
        if isinstance(self.baseline, str) and self.baseline != "mean":
            raise ValueError("baseline must be a number or 'mean'")
        if self.n_masks < 1:
            raise ValueError("n_masks must be >= 1")
        if self.grid < 1:
            raise ValueError("grid must be >= 1")
        if not 0 < self.p1 <= 1:
            raise ValueError("p1 must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


def _upsample_bilinear(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear interpolation of a (g+1) x (g+1) node grid onto out_h x out_w, corners aligned."""
    gh, gw = grid.shape
    ys = np.linspace(0, gh - 1, out_h)
    xs = np.linspace(0, gw - 1, out_w)
    y0 = np.minimum(np.floor(ys).astype(int), gh - 2)
    x0 = np.minimum(np.floor(xs).astype(int), gw - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    g00 = grid[y0][:, x0]
    g01 = grid[y0][:, x0 + 1]
    g10 = grid[y0 + 1][:, x0]
    g11 = grid[y0 + 1][:, x0 + 1]
    return (1 - fy) * ((1 - fx) * g00 + fx * g01) + fy * ((1 - fx) * g10 + fx * g11)


def generate_masks(config: RiseConfig, height: int, width: int) -> np.ndarray:
    """``N x H x W`` float masks in ``[0, 1]``.

    Each mask is an ``s x s`` Bernoulli(p1) grid (one extra row/column so the
    shift never runs off the end), bilinearly upsampled to ``(s+1)`` cells
    of ``ceil(H/s) x ceil(W/s)`` pixels and cropped at a random sub-cell
    offset.
    """
    s = config.grid
    if s >= min(height, width):
        raise ValueError(f"grid {s} must be smaller than the patch side {min(height, width)}")
    rng = np.random.default_rng(np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF))
    ch, cw = -(-height // s), -(-width // s)
    up_h, up_w = (s + 1) * ch, (s + 1) * cw
    cells = rng.random((config.n_masks, s + 1, s + 1)) < config.p1
    shifts = rng.integers(0, [ch, cw], size=(config.n_masks, 2))
    masks = np.empty((config.n_masks, height, width), dtype=np.float64)
    for i in range(config.n_masks):
        up = _upsample_bilinear(cells[i].astype(np.float64), up_h, up_w)
        dy, dx = shifts[i]
        masks[i] = up[dy : dy + height, dx : dx + width]
    return masks


def rise_saliency(model, patch, config: RiseConfig = None, masks: np.ndarray = None, target: int = C1) -> np.ndarray:
    """Importance map for class ``target`` of a 2-D patch.

    ``model`` maps an ``n x 1 x H x W`` batch to ``n x K`` class
    probabilities (e.g. ``Network.predict``). Pre-computed ``masks`` may be
    passed to reuse one mask set across patches.
    """
    config = config or RiseConfig()
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2:
        raise ShapeError(f"rise_saliency expects a 2-D patch, got {patch.shape}")
    h, w = patch.shape
    if masks is None:
        masks = generate_masks(config, h, w)
    if masks.shape[1:] != (h, w):
        raise ShapeError(f"mask shape {masks.shape[1:]} vs patch {patch.shape}")
    b = float(patch.mean()) if config.baseline == "mean" else float(config.baseline)
    n = len(masks)
    sal = np.zeros((h, w), dtype=np.float64)
    for start in range(0, n, config.batch_size):
        m = masks[start : start + config.batch_size]
        probs = np.asarray(model((b + m * (patch - b))[:, None].astype(np.float32)), dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != len(m):
            raise ValueError(f"model returned shape {probs.shape} for a batch of {len(m)}")
        if np.any(probs < -1e-6) or np.any(probs > 1 + 1e-6) or np.any(np.abs(probs.sum(axis=1) - 1) > 1e-4):
            raise ValueError("model output is not a probability vector")
        sal += np.tensordot(probs[:, target], m, axes=(0, 0))
    return sal / (n * config.p1)


def saliency_to_csv(saliency) -> str:
    sal = np.asarray(saliency)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("row", "col", "score"))
    for (r, c), v in np.ndenumerate(sal):
        writer.writerow((r, c, repr(float(v))))
    return buf.getvalue()
