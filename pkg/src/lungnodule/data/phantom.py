"""Deterministic synthetic chest-slice phantoms.

A gray body ellipse holds two dark lung ellipses (the lung ground truth).
Bright nodule disks sit inside the lungs, either free-floating or touching
the lung wall. Intensities are already in ``[0, 1]``.
"""

from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from ..errors import DataError
from .volume import NoduleAnnotation, VolumeMeta, nodule_mask


@dataclass
class PhantomConfig:
    size: int = 64
    body_intensity: Tuple[float, float] = (0.55, 0.7)
    lung_intensity: Tuple[float, float] = (0.08, 0.2)
    nodule_intensity: Tuple[float, float] = (0.65, 0.9)
    nodule_count: Tuple[int, int] = (0, 3)
    nodule_diameter: Tuple[float, float] = (3.0, 8.0)
    wall_attach_prob: float = 0.3
    noise: float = 0.03
    lung_fraction: Tuple[float, float] = (0.15, 0.40)
    seed: int = 0

    def __post_init__(self):
        for name in ("body_intensity", "lung_intensity", "nodule_intensity", "nodule_count", "nodule_diameter", "lung_fraction"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} above upper bound {hi}")
            setattr(self, name, (lo, hi))
        if self.nodule_diameter[0] < 3:
            raise ValueError("nodule diameter must be at least 3 px")
        if not 0 <= self.wall_attach_prob <= 1:
            raise ValueError("wall_attach_prob must lie in [0, 1]")
        if not 0 <= self.lung_fraction[0] <= self.lung_fraction[1] <= 1:
            raise ValueError("lung_fraction must lie in [0, 1]")
        if self.size < 32:
            raise ValueError("phantom size must be at least 32 px")

    def to_dict(self):
        return asdict(self)


def _ellipse(shape, cy, cx, ry, rx, theta=0.0) -> np.ndarray:
    yy, xx = np.mgrid[: shape[0], : shape[1]].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    c, s = np.cos(theta), np.sin(theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def _lungs(size, rng, fraction, tries=200):
    for _ in range(tries):
        body_rx = rng.uniform(0.42, 0.47) * size
        body_ry = rng.uniform(0.34, 0.42) * size
        cy = size / 2 + rng.uniform(-0.02, 0.02) * size
        cx = size / 2 + rng.uniform(-0.02, 0.02) * size
        body = _ellipse((size, size), cy, cx, body_ry, body_rx)
        lungs = np.zeros((size, size), dtype=bool)
        for side in (-1, 1):
            rx = rng.uniform(0.12, 0.18) * size
            ry = rng.uniform(0.22, 0.31) * size
            gap = rng.uniform(0.03, 0.06) * size
            lcx = cx + side * (gap + rx)
            lcy = cy + rng.uniform(-0.03, 0.03) * size
            theta = side * rng.uniform(0.0, 0.2)
            lungs |= _ellipse((size, size), lcy, lcx, ry, rx, theta)
        # lungs must sit inside the body with a wall of at least 2 px
        if np.any(lungs & ~ndimage.binary_erosion(body, iterations=2)):
            continue
        frac = lungs.mean()
        if fraction[0] <= frac <= fraction[1]:
            return body, lungs
    raise DataError(f"could not draw lungs with area fraction in {fraction} after {tries} tries")


def phantom_generate(config: PhantomConfig):
    """Draw one phantom slice.

    Returns ``(image, lung_mask, nodule_mask, annotations)``; the image is
    float32 in ``[0, 1]`` and annotation centres are in pixel units (x =
    column, y = row, z = 0) with unit spacing.
    """
    size = config.size
    rng = np.random.default_rng(np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF))
    body, lungs = _lungs(size, rng, config.lung_fraction)
    image = np.zeros((size, size), dtype=np.float64)
    image[body] = rng.uniform(*config.body_intensity)
    image[lungs] = rng.uniform(*config.lung_intensity)

    uid = f"phantom-{config.seed}"
    meta = VolumeMeta((size, size, 1), series_uid=uid)
    depth = ndimage.distance_transform_edt(lungs)
    nodules = np.zeros((size, size), dtype=bool)
    annotations: List[NoduleAnnotation] = []
    n_nodules = int(rng.integers(config.nodule_count[0], config.nodule_count[1] + 1))
    for k in range(n_nodules):
        diameter = float(rng.uniform(*config.nodule_diameter))
        r = diameter / 2.0
        attached = rng.random() < config.wall_attach_prob
        for _attempt in range(50):
            if attached:
                ok = (depth >= max(r - 1.0, 1.0)) & (depth <= r + 0.5)
            else:
                ok = depth >= r + 2.0
            ok &= ~ndimage.binary_dilation(nodules, iterations=int(np.ceil(r)) + 2)
            cand = np.argwhere(ok)
            if len(cand):
                break
            attached = not attached
            diameter = max(config.nodule_diameter[0], diameter * 0.8)
            r = diameter / 2.0
        else:
            raise DataError(f"phantom seed {config.seed}: nodule {k} (diameter {diameter:.1f}px) does not fit in the lungs")
        cy, cx = cand[rng.integers(len(cand))]
        ann = NoduleAnnotation(uid, (float(cx), float(cy), 0.0), diameter)
        disk = nodule_mask(ann, meta, 0)
        nodules |= disk
        image[disk] = rng.uniform(*config.nodule_intensity)
        annotations.append(ann)

    image += rng.normal(0.0, config.noise, size=image.shape)
    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    return image, lungs, nodules, annotations


def phantom_dataset(config: PhantomConfig, count: int):
    """``count`` phantoms with per-item seeds spawned from ``config.seed``.

    Returns stacked ``(images, lung_masks, nodule_masks, annotations)`` where
    annotation z-coordinates carry the item index.
    """
    seeds = np.random.SeedSequence(config.seed & 0xFFFFFFFFFFFFFFFF).generate_state(count, dtype=np.uint64)
    images, lungs, nods, anns = [], [], [], []
    for i, s in enumerate(seeds):
        cfg = PhantomConfig(**{**config.to_dict(), "seed": int(s)})
        img, lung, nod, a = phantom_generate(cfg)
        images.append(img)
        lungs.append(lung)
        nods.append(nod)
        anns += [NoduleAnnotation(f"phantom-{config.seed}", (x.center[0], x.center[1], float(i)), x.diameter) for x in a]
    return np.stack(images), np.stack(lungs), np.stack(nods), anns
