"""Stage 2: supervised training of the patch classifier."""

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ..errors import DataError, NumericalError
from ..metrics import C1, C2, classification_report
from ..nn.network import Network
from ..nn.spec import build_classifier
from ..nn.weights import WeightStore, init_weights
from ..tensor import Tensor, backward, no_grad
from .adam import AdamState, adam_step
from .config import TrainConfig
from .losses import cross_entropy

STAGE2_FIELDS = ("epoch", "train_loss", "val_accuracy", "val_sensitivity", "val_specificity")


def one_hot(labels) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros((labels.size, 2), dtype=np.float32)
    out[np.arange(labels.size), labels] = 1.0
    return out


def classify(net: Network, patches, batch_size: int = 128) -> np.ndarray:
    """Class-probability rows (column ``C1`` first) for N x 1 x 64 x 64 patches."""
    return net.predict(np.asarray(patches, dtype=np.float32), batch_size=batch_size)


def dataset_loss(net: Network, x, y, batch_size: int = 128) -> float:
    probs = classify(net, x, batch_size)
    with no_grad():
        return float(cross_entropy(Tensor(probs.astype(np.float64)), one_hot(y)).data)


@dataclass
class Stage2Result:
    weights: WeightStore
    history: List[Dict[str, float]] = field(default_factory=list)
    best_val_accuracy: float = float("nan")


def train_stage2(train_set, val_set, config: TrainConfig, progress=None) -> Stage2Result:
    """Minimize 2-class cross-entropy with Adam; keep the best-validation-accuracy weights.

    ``train_set``/``val_set`` are ``(patches, labels)`` with patches
    N x 1 x 64 x 64 and labels in {C1, C2}. History row 0 holds the loss at
    initialization.
    """
    x, y = np.asarray(train_set[0], dtype=np.float32), np.asarray(train_set[1])
    vx, vy = np.asarray(val_set[0], dtype=np.float32), np.asarray(val_set[1])
    if x.ndim == 3:
        x = x[:, None]
    if vx.ndim == 3:
        vx = vx[:, None]
    if len(x) == 0:
        raise DataError("empty patch training set")
    if not (np.any(y == C1) and np.any(y == C2)):
        raise DataError("patch training set holds a single class; sensitivity/specificity undefined")
    spec = build_classifier()
    net = Network(spec, init_weights(spec, config.init_seed("init_clf")))
    state = AdamState()
    data_rng = config.rng_streams()["data"]
    targets = one_hot(y)

    history = [{"epoch": 0, "train_loss": dataset_loss(net, x, y)}]
    best, best_weights = -1.0, net.weights.copy()
    for epoch in range(1, config.epochs_stage2 + 1):
        order = data_rng.permutation(len(x))
        losses = []
        for start in range(0, len(x), config.batch_size):
            idx = order[start : start + config.batch_size]
            net.weights.zero_grad()
            probs = net(Tensor(x[idx]))
            loss = cross_entropy(probs, targets[idx])
            if not np.isfinite(loss.data):
                raise NumericalError(f"non-finite classifier loss at epoch {epoch}")
            backward(loss)
            adam_step(net.weights.trainable(), state, config.learning_rate, config.betas, config.adam_eps)
            losses.append(float(loss.data) * len(idx))
        row = {"epoch": epoch, "train_loss": sum(losses) / len(x)}
        if len(vx):
            pred = classify(net, vx).argmax(axis=1)
            rep = classification_report(pred, vy)
            row.update(val_accuracy=rep.accuracy, val_sensitivity=rep.sensitivity, val_specificity=rep.specificity)
            if rep.accuracy > best:
                best, best_weights = rep.accuracy, net.weights.copy()
        history.append(row)
        if progress is not None:
            progress(epoch, row)
    return Stage2Result(best_weights if len(vx) else net.weights, history, best)
