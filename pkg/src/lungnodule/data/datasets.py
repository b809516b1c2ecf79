"""Ready-made phantom datasets for both stages."""

import numpy as np

from .patches import balance_patches, extract_patches
from .phantom import PhantomConfig, phantom_dataset


def phantom_segmentation_set(config: PhantomConfig, count: int):
    """``(images, lung_masks)``, each N x H x W."""
    images, lungs, _, _ = phantom_dataset(config, count)
    return images, lungs.astype(np.uint8)


def phantom_patch_set(config: PhantomConfig, count: int, stride: int = 32, balance: bool = True):
    """Patches from ``count`` phantom slices using their ground-truth lung masks.

    The slice index of each record is the phantom's position in the set.
    """
    images, lungs, nodules, _ = phantom_dataset(config, count)
    records = []
    for i, (img, lung, nod) in enumerate(zip(images, lungs, nodules)):
        records += extract_patches(img, lung, nod, stride=stride, slice_index=i)
    return balance_patches(records, seed=config.seed) if balance else records
