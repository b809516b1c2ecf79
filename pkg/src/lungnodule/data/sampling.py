"""Slice balancing and cross-validation splits."""

import hashlib
from typing import List, Sequence

import numpy as np

from ..errors import DataError


def systematic_sample(slices: Sequence, nodule_masks) -> List[int]:
    """Indices of a class-balanced, order-preserving subset of ``slices``.

    Slices with any nodule pixel are positive. The majority class is thinned
    to the minority count by uniform stride (positions ``floor(i*M/k)``);
    the minority class is kept whole.
    """
    masks = [np.asarray(m) for m in nodule_masks]
    if len(masks) != len(slices):
        raise DataError(f"{len(slices)} slices but {len(masks)} nodule masks")
    positive = np.array([m.any() for m in masks], dtype=bool)
    pos, neg = np.flatnonzero(positive), np.flatnonzero(~positive)
    if len(pos) == 0 or len(neg) == 0:
        raise DataError(f"systematic sampling needs both kinds of slices ({len(pos)} with nodules, {len(neg)} without)")
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    k, m = len(minority), len(majority)
    picked = majority[(np.arange(k) * m) // k]
    return sorted(int(i) for i in np.concatenate([minority, picked]))


def _hash_key(subject) -> str:
    return hashlib.sha256(str(subject).encode("utf-8")).hexdigest()


def kfold_split(subject_ids: Sequence, k: int = 10, fold: int = 0):
    """Hash-ordered k-way partition: validation = part ``fold``, test = part ``fold+1 mod k``."""
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    if not 0 <= fold < k:
        raise ValueError(f"fold {fold} outside [0, {k})")
    ids = list(subject_ids)
    if len(ids) < k:
        raise DataError(f"{len(ids)} subjects cannot fill {k} folds")
    if len(set(map(str, ids))) != len(ids):
        raise DataError("subject ids are not unique")
    ordered = sorted(ids, key=_hash_key)
    bounds = np.linspace(0, len(ordered), k + 1).round().astype(int)
    parts = [ordered[bounds[i] : bounds[i + 1]] for i in range(k)]
    test_part = (fold + 1) % k
    train = [s for i, p in enumerate(parts) if i not in (fold, test_part) for s in p]
    return train, parts[fold], parts[test_part]
