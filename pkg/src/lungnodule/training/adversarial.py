"""Stage 1: adversarial training of the segmenter against a pair discriminator.

Each iteration first updates the discriminator on shuffled
(ground truth, prediction) pairs, then updates the segmenter on
``J_net = J_seg - alpha * J_adv`` with the discriminator frozen.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import DataError, NumericalError, ShapeError
from ..metrics import binarize, dice
from ..nn.functional import concat_channels
from ..nn.network import Network
from ..nn.spec import build_discriminator, build_segmenter
from ..nn.weights import WeightStore, init_weights
from ..tensor import Tensor, backward, no_grad, scale, where
from .adam import AdamState, adam_step
from .config import TrainConfig
from .losses import adv_loss, seg_loss

HISTORY_FIELDS = ("iter", "j_seg", "j_adv", "j_net", "disc_acc", "val_dice")


@dataclass
class DiscriminatorBatch:
    """Channel-stacked pairs and their one-hot order labels.

    ``t_d[i] == [1, 0]`` means channel 0 of pair ``i`` holds the ground truth.
    """

    pair: Tensor
    t_d: np.ndarray


@dataclass
class LossReport:
    j_seg: float
    j_adv: float
    j_net: float
    disc_acc: float


def _as_nchw(x) -> np.ndarray:
    x = np.asarray(x.data if isinstance(x, Tensor) else x)
    if x.ndim == 2:
        return x[None, None]
    if x.ndim == 3:
        return x[:, None]
    return x


def shuffle_concat(gt_mask, pred_map, rng) -> DiscriminatorBatch:
    """Stack ground truth and prediction along channels in random order.

    One ``rng.random()`` draw per pair; ``< 0.5`` puts the ground truth first.
    Gradients flow into ``pred_map`` when it is a tensor. Accepts a single
    H x W pair (giving a 2 x H x W stack) or batches shaped N x H x W or
    N x 1 x H x W (giving N x 2 x H x W).
    """
    single = np.ndim(gt_mask.data if isinstance(gt_mask, Tensor) else gt_mask) == 2
    pred = pred_map if isinstance(pred_map, Tensor) else Tensor(np.asarray(pred_map))
    if pred.ndim == 2:
        pred = pred.reshape((1, 1) + pred.shape)
    elif pred.ndim == 3:
        pred = pred.reshape((pred.shape[0], 1) + pred.shape[1:])
    gt = _as_nchw(gt_mask).astype(pred.dtype)
    if gt.shape != pred.shape:
        raise ShapeError(f"shuffle_concat: ground truth {gt.shape} vs prediction {pred.shape}")
    n = gt.shape[0]
    gt_first = np.array([rng.random() < 0.5 for _ in range(n)], dtype=bool)
    cond = np.broadcast_to(gt_first[:, None, None, None], gt.shape)
    gt_t = Tensor(gt)
    first = where(cond, gt_t, pred)
    second = where(cond, pred, gt_t)
    pair = concat_channels([first, second])
    if single:
        pair = pair.reshape(pair.shape[1:])
    t_d = np.where(gt_first[:, None], [1.0, 0.0], [0.0, 1.0])
    return DiscriminatorBatch(pair, t_d[0] if single else t_d)


def _accuracy(o: np.ndarray, t_d: np.ndarray) -> float:
    return float(np.mean(o.reshape(-1, 2).argmax(axis=1) == t_d.reshape(-1, 2).argmax(axis=1)))


def train_discriminator_step(seg_net, disc_net, images, gts, disc_state: AdamState, config: TrainConfig, rng):
    """Update the discriminator only. Returns ``(j_adv, accuracy)``.

    The segmenter runs with batch statistics but neither records a graph nor
    touches its running statistics, so its weights stay bitwise unchanged.
    """
    with no_grad():
        pred = seg_net.forward(Tensor(_as_nchw(images)), train=True, update_stats=False).data
    batch = shuffle_concat(gts, pred, rng)
    disc_net.weights.zero_grad()
    o = disc_net(batch.pair, train=True, update_stats=True)
    j_adv = adv_loss(o, batch.t_d)
    _check_finite(j_adv, "J_adv")
    backward(j_adv)
    adam_step(disc_net.weights.trainable(), disc_state, config.learning_rate, config.betas, config.adam_eps)
    return float(j_adv.data), _accuracy(o.data, batch.t_d)


def train_segmenter_step(seg_net, disc_net, images, gts, seg_state: AdamState, config: TrainConfig, rng) -> LossReport:
    """Update the segmenter on ``J_seg - alpha * J_adv``; the discriminator is frozen.

    With ``alpha == 0`` the adversarial term is evaluated for logging only,
    outside the graph, so the update equals plain segmentation training.
    """
    seg_net.weights.zero_grad()
    pred = seg_net(Tensor(_as_nchw(images)), train=True, update_stats=True)
    gt = _as_nchw(gts)
    j_seg = seg_loss(pred, gt)
    alpha = config.alpha
    if alpha != 0:
        batch = shuffle_concat(gt, pred, rng)
        o = disc_net(batch.pair, train=True, update_stats=False)
        j_adv = adv_loss(o, batch.t_d)
        j_net = j_seg + scale(j_adv, -alpha)
    else:
        with no_grad():
            batch = shuffle_concat(gt, pred.data, rng)
            o = disc_net(batch.pair, train=True, update_stats=False)
            j_adv = adv_loss(o, batch.t_d)
        j_net = j_seg
    _check_finite(j_net, "J_net")
    backward(j_net)
    adam_step(seg_net.weights.trainable(), seg_state, config.learning_rate, config.betas, config.adam_eps)
    return LossReport(float(j_seg.data), float(j_adv.data), float(j_net.data), _accuracy(o.data, batch.t_d))


def _check_finite(t: Tensor, name: str) -> None:
    if not np.all(np.isfinite(t.data)):
        raise NumericalError(f"{name} is not finite")


def predict_maps(net: Network, images, batch_size: int = 16) -> np.ndarray:
    """Eval-mode probability maps, shape N x H x W."""
    return net.predict(_as_nchw(images).astype(np.float32), batch_size=batch_size)[:, 0]


def mean_dice(net: Network, images, masks) -> float:
    maps = predict_maps(net, images)
    return float(np.mean([dice(binarize(p), m) for p, m in zip(maps, np.asarray(masks))]))


@dataclass
class Stage1Result:
    seg_weights: WeightStore
    disc_weights: Optional[WeightStore]
    history: List[Dict[str, float]] = field(default_factory=list)
    best_val_dice: float = float("nan")
    final_weights: Optional[WeightStore] = None


def _epoch_batches(n: int, batch_size: int, rng):
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_stage1(train_set, val_set, config: TrainConfig, adversarial: bool = True, progress=None) -> Stage1Result:
    """Alternate discriminator and segmenter updates; keep the best-validation weights.

    ``train_set`` and ``val_set`` are ``(images, masks)`` pairs of N x H x W
    arrays. With ``adversarial=False`` no discriminator exists and only the
    segmenter step runs (the reference loop for the alpha = 0 reduction).
    Validation Dice is recorded at every epoch end and after the last
    iteration.
    """
    images, masks = (np.asarray(a) for a in train_set)
    if len(images) == 0:
        raise DataError("empty training set")
    if images.shape != masks.shape:
        raise ShapeError(f"images {images.shape} vs masks {masks.shape}")
    val_images, val_masks = (np.asarray(a) for a in val_set)
    images = images.astype(np.float32)
    masks = masks.astype(np.float32)

    streams = config.rng_streams()
    seg_net = Network(build_segmenter(config.scale), init_weights(build_segmenter(config.scale), config.init_seed("init_seg")))
    disc_net = None
    if adversarial:
        dspec = build_discriminator(config.scale, images.shape[-1])
        disc_net = Network(dspec, init_weights(dspec, config.init_seed("init_disc")))
    seg_state, disc_state = AdamState(), AdamState()

    n = len(images)
    per_epoch = -(-n // config.batch_size)
    total = config.iterations if config.iterations is not None else per_epoch * config.epochs_stage1
    history: List[Dict[str, float]] = []
    accs: List[float] = []
    best, best_weights = -1.0, seg_net.weights.copy()
    it = 0
    while it < total:
        for idx in _epoch_batches(n, config.batch_size, streams["data"]):
            x, y = images[idx], masks[idx]
            if disc_net is not None:
                _, acc = train_discriminator_step(seg_net, disc_net, x, y, disc_state, config, streams["shuffle"])
                rep = train_segmenter_step(seg_net, disc_net, x, y, seg_state, config, streams["shuffle"])
                accs.append(acc)
            else:
                rep = _plain_segmenter_step(seg_net, x, y, seg_state, config)
            it += 1
            window = accs[-config.disc_window :]
            row = {
                "iter": it,
                "j_seg": rep.j_seg,
                "j_adv": rep.j_adv,
                "j_net": rep.j_net,
                "disc_acc": float(np.mean(window)) if window else float("nan"),
                "val_dice": float("nan"),
            }
            history.append(row)
            if it >= total:
                break
        if len(val_images):
            vd = mean_dice(seg_net, val_images, val_masks)
            history[-1]["val_dice"] = vd
            if vd > best:
                best, best_weights = vd, seg_net.weights.copy()
        if progress is not None:
            progress(it, total, history[-1])
    return Stage1Result(
        seg_weights=best_weights if len(val_images) else seg_net.weights,
        disc_weights=disc_net.weights if disc_net is not None else None,
        history=history,
        best_val_dice=best,
        final_weights=seg_net.weights,
    )


def _plain_segmenter_step(seg_net, images, gts, seg_state, config) -> LossReport:
    seg_net.weights.zero_grad()
    pred = seg_net(Tensor(_as_nchw(images)), train=True, update_stats=True)
    j_seg = seg_loss(pred, _as_nchw(gts))
    _check_finite(j_seg, "J_seg")
    backward(j_seg)
    adam_step(seg_net.weights.trainable(), seg_state, config.learning_rate, config.betas, config.adam_eps)
    v = float(j_seg.data)
    return LossReport(v, 0.0, v, float("nan"))


def history_to_csv(history) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_FIELDS)
    for row in history:
        out = []
        for k in HISTORY_FIELDS:
            v = row.get(k)
            if k == "iter":
                out.append(str(int(v)))
            elif v is None or (isinstance(v, float) and np.isnan(v)):
                out.append("")
            else:
                out.append(repr(float(v)))
        writer.writerow(out)
    return buf.getvalue()


def history_from_csv(text: str) -> List[Dict[str, float]]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({k: (int(v) if k == "iter" else (float(v) if v != "" else float("nan"))) for k, v in rec.items()})
    return rows
