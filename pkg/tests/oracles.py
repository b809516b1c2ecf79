"""Brute-force reference implementations shared by the test modules."""

import math

import numpy as np


def dice_oracle(p, g):
    inter = sp = sg = 0
    for a, b in zip(np.asarray(p).ravel().tolist(), np.asarray(g).ravel().tolist()):
        sp += bool(a)
        sg += bool(b)
        inter += bool(a) and bool(b)
    return 1.0 if sp + sg == 0 else 2.0 * inter / (sp + sg)


def auc_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def boundary_oracle(mask):
    m = np.asarray(mask, bool)
    h, w = m.shape
    pts = []
    for r in range(h):
        for c in range(w):
            if not m[r, c]:
                continue
            on_edge = r in (0, h - 1) or c in (0, w - 1)
            if on_edge or not (m[r - 1, c] and m[r + 1, c] and m[r, c - 1] and m[r, c + 1]):
                pts.append((r, c))
    return pts


def hausdorff_oracle(a, b):
    pa, pb = boundary_oracle(a), boundary_oracle(b)

    def directed(xs, ys):
        return max(min(math.hypot(x[0] - y[0], x[1] - y[1]) for y in ys) for x in xs)

    return max(directed(pa, pb), directed(pb, pa))


def confusion_oracle(pred, labels):
    tp = fp = tn = fn = 0
    for p, y in zip(pred, labels):
        if y == 0:
            tp += p == 0
            fn += p == 1
        else:
            tn += p == 1
            fp += p == 0
    return tp, fp, tn, fn
