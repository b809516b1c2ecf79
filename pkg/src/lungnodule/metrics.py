"""Segmentation and classification metrics.

Probability maps are binarized at 0.5 before :func:`dice` and
:func:`hausdorff`; :func:`roc_auc` takes raw scores. Hausdorff distances are
in pixels. Classification reports treat class ``C1`` (index 0, nodule
present) as positive.
"""

import csv
import io
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from .errors import ShapeError

C1, C2 = 0, 1


@dataclass
class MetricsReport:
    dsc: Optional[float] = None
    auc: Optional[float] = None
    hd: Optional[float] = None
    accuracy: Optional[float] = None
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    tp: Optional[int] = None
    fp: Optional[int] = None
    tn: Optional[int] = None
    fn: Optional[int] = None

    def to_csv(self) -> str:
        row = {k: v for k, v in asdict(self).items() if v is not None}
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_text(self) -> str:
        rows = [(k, _fmt(v)) for k, v in asdict(self).items() if v is not None]
        width = max((len(k) for k, _ in rows), default=0)
        return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def binarize(prob_map, threshold: float = 0.5) -> np.ndarray:
    return np.asarray(prob_map) >= threshold


def _as_mask(m, name):
    m = np.asarray(m)
    if m.dtype != bool:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError(f"{name} is not binary")
        m = m.astype(bool)
    return m


def dice(pred, gt) -> float:
    """``2|P & G| / (|P| + |G|)``; two empty masks score 1.0."""
    p, g = _as_mask(pred, "pred"), _as_mask(gt, "gt")
    if p.shape != g.shape:
        raise ShapeError(f"dice: shape mismatch {p.shape} vs {g.shape}")
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / total


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC, ties counted as one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ShapeError(f"roc_auc: {s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = rankdata(s)  # average ranks on ties
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels):
    """(fpr, tpr) at every distinct threshold, from (0,0) to (1,1)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(y)[last]
    fps = np.cumsum(~y)[last]
    tpr = np.r_[0.0, tps / max(int(y.sum()), 1)]
    fpr = np.r_[0.0, fps / max(int((~y).sum()), 1)]
    return fpr, tpr


def roc_auc_trapezoid(scores, labels) -> float:
    fpr, tpr = roc_curve(scores, labels)
    return float(np.trapezoid(tpr, fpr))


def boundary(mask) -> np.ndarray:
    """Foreground pixels with a background 4-neighbour or lying on the image edge."""
    m = _as_mask(mask, "mask")
    padded = np.pad(m, 1, constant_values=False)
    interior = padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    return m & ~interior


def hausdorff(mask_a, mask_b) -> float:
    """Symmetric Hausdorff distance between the boundary pixel sets, in pixels."""
    a, b = _as_mask(mask_a, "mask_a"), _as_mask(mask_b, "mask_b")
    if a.shape != b.shape:
        raise ShapeError(f"hausdorff: shape mismatch {a.shape} vs {b.shape}")
    if not a.any() or not b.any():
        raise ValueError("hausdorff is undefined for an empty mask")
    pa = np.argwhere(boundary(a)).astype(np.float64)
    pb = np.argwhere(boundary(b)).astype(np.float64)
    d_ab = cKDTree(pb).query(pa)[0].max()
    d_ba = cKDTree(pa).query(pb)[0].max()
    return float(max(d_ab, d_ba))


def classification_report(predictions, labels) -> MetricsReport:
    """Confusion counts and rates with ``C1`` as the positive class."""
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.size == 0:
        raise ValueError("classification_report of empty input")
    if p.shape != y.shape:
        raise ShapeError(f"classification_report: {p.size} predictions vs {y.size} labels")
    for name, arr in (("predictions", p), ("labels", y)):
        if not np.all((arr == C1) | (arr == C2)):
            raise ValueError(f"{name} must be class indices C1={C1} or C2={C2}")
    tp = int(np.sum((p == C1) & (y == C1)))
    fn = int(np.sum((p == C2) & (y == C1)))
    tn = int(np.sum((p == C2) & (y == C2)))
    fp = int(np.sum((p == C1) & (y == C2)))
    return MetricsReport(
        accuracy=(tp + tn) / p.size,
        sensitivity=tp / (tp + fn) if tp + fn else float("nan"),
        specificity=tn / (tn + fp) if tn + fp else float("nan"),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def segmentation_report(prob_maps, gt_masks, threshold: float = 0.5) -> MetricsReport:
    """Mean per-slice DSC and HD, pooled-pixel AUC."""
    probs = np.asarray(prob_maps, dtype=np.float64)
    gts = np.asarray(gt_masks).astype(bool)
    if probs.shape != gts.shape:
        raise ShapeError(f"segmentation_report: {probs.shape} vs {gts.shape}")
    if probs.ndim == 2:
        probs, gts = probs[None], gts[None]
    dscs, hds = [], []
    for p, g in zip(probs, gts):
        pb = binarize(p, threshold)
        dscs.append(dice(pb, g))
        if pb.any() and g.any():
            hds.append(hausdorff(pb, g))
    y = gts.ravel()
    auc = roc_auc(probs.ravel(), y) if 0 < y.sum() < y.size else None
    return MetricsReport(
        dsc=float(np.mean(dscs)),
        auc=auc,
        hd=float(np.mean(hds)) if hds else None,
    )
