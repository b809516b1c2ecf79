"""Command-line entry point: ``lungnodule <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure. Every run writes ``run.json`` (the resolved flags and configs) into
its output directory; ``--config run.json`` replays it, and explicit flags
override values from the file.

Data directory layout (written by ``gen-data``, read by ``prep``)::

    images/<uid>.mhd + .raw   CT or phantom volume (MET_SHORT is HU-windowed)
    lungs/<uid>.mhd + .raw    lung mask volume (nonzero = lung)
    annotations.csv           seriesuid,coordX,coordY,coordZ,diameter_mm
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .cost import count_flops, count_params
from .data.patches import balance_patches, extract_patches, patches_to_arrays, read_patches, write_patches
from .data.phantom import PhantomConfig, phantom_dataset
from .data.postprocess import postprocess_mask, write_pgm
from .data.sampling import kfold_split, systematic_sample
from .data.volume import VolumeMeta, hu_window, read_annotations, read_mhd, volume_nodule_masks, write_annotations, write_mhd
from .determinism import deterministic
from .errors import DataError, NumericalError, ShapeError
from .explain import RiseConfig, rise_saliency, saliency_to_csv
from .metrics import C1, MetricsReport, classification_report, segmentation_report
from .nn.network import Network
from .nn.spec import build_classifier, build_discriminator, build_segmenter, build_vgg16_convs
from .nn.weights import load_weights, save_weights
from .tensor import load_tensor, save_tensor
from .training.adversarial import history_to_csv, predict_maps, train_stage1
from .training.classifier import STAGE2_FIELDS, classify, train_stage2
from .training.config import TrainConfig

log = logging.getLogger("lungnodule")

OUT_ENV = "LUNGNODULE_OUT"
SPLITS = ("train", "val", "test")
GEN_DEFAULTS = {"count": 10, "slices": 8, "size": 64}
# desk-scale pipeline: 96 px slices give up to four 64 px windows per slice
TINY_PIPELINE = {"count": 20, "slices": 16, "size": 96, "iterations": 150, "clf_epochs": 15, "learning_rate": 1e-3}
SLICE_SPACING_MM = 10.0  # phantom slices are independent; keep nodule spheres within one slice
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- helpers


def _size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return h, w


def _need_dir(path, what):
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"{what} directory {p} does not exist")
    return p


def _need_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} file {p} does not exist")
    return p


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _train_config(args, **overrides) -> TrainConfig:
    vals = {f.name: getattr(args, f.name) for f in fields(TrainConfig) if getattr(args, f.name, None) is not None}
    vals.update(overrides)
    vals["seed"] = args.seed
    return TrainConfig(**vals)


def _phantom_config(args) -> PhantomConfig:
    return PhantomConfig(size=args.size, seed=args.seed)


def _baseline(text):
    if text == "mean" or isinstance(text, (int, float)):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'mean', got {text!r}") from None


def _rise_config(args) -> RiseConfig:
    return RiseConfig(n_masks=args.n_masks, grid=args.grid, p1=args.p1, seed=args.seed, baseline=args.baseline)


def _metrics_csv(reports) -> str:
    """One row per named :class:`MetricsReport`; absent values left empty."""
    names = [f.name for f in fields(MetricsReport)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stage"] + names)
    for stage, rep in reports.items():
        row = []
        for k in names:
            v = getattr(rep, k)
            row.append("" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v)))
        w.writerow([stage] + row)
    return buf.getvalue()


def _stage2_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STAGE2_FIELDS)
    for row in history:
        w.writerow([("" if k not in row else (repr(row[k]) if isinstance(row[k], float) else row[k])) for k in STAGE2_FIELDS])
    return buf.getvalue()


def _load_split(prep_dir, split):
    prep = _need_dir(prep_dir, "prepared data")
    images = load_tensor(_need_file(prep / f"seg_{split}_images.ten", "image")).data
    lungs = load_tensor(_need_file(prep / f"seg_{split}_lungs.ten", "lung mask")).data
    nodules = load_tensor(_need_file(prep / f"seg_{split}_nodules.ten", "nodule mask")).data
    return images, lungs, nodules


def _progress_stage1(it, total, row):
    log.info("stage 1 iter %d/%d j_net %.5f val_dice %s", it, total, row["j_net"], row["val_dice"])


def _progress_stage2(epoch, row):
    log.info("stage 2 epoch %d loss %.5f val_acc %s", epoch, row["train_loss"], row.get("val_accuracy"))


# ---------------------------------------------------------------- subcommands


def cmd_gen_data(args, out: Path) -> dict:
    """Phantom volumes: ``count`` volumes of ``slices`` independent slices each."""
    base = _phantom_config(args)
    seeds = np.random.SeedSequence(args.seed & 0xFFFFFFFFFFFFFFFF).generate_state(args.count, dtype=np.uint64)
    annotations = []
    for v, s in enumerate(seeds):
        uid = f"vol{v:03d}"
        cfg = PhantomConfig(**{**base.to_dict(), "seed": int(s)})
        images, lungs, _, anns = phantom_dataset(cfg, args.slices)
        meta = VolumeMeta((args.size, args.size, args.slices), (1.0, 1.0, SLICE_SPACING_MM), element_type="MET_FLOAT", series_uid=uid)
        write_mhd(out / "images" / f"{uid}.mhd", meta, images)
        lmeta = VolumeMeta(meta.dims, meta.spacing, element_type="MET_UCHAR", series_uid=uid)
        write_mhd(out / "lungs" / f"{uid}.mhd", lmeta, lungs.astype(np.uint8))
        for a in anns:
            x, y, z = a.center
            annotations.append(type(a)(uid, (x, y, z * SLICE_SPACING_MM), a.diameter))
    write_annotations(out / "annotations.csv", annotations)
    log.info("wrote %d volumes, %d nodules to %s", args.count, len(annotations), out)
    return {"volumes": args.count, "nodules": len(annotations)}


def _read_volume(data_dir: Path, uid: str, annotations):
    meta, vox = read_mhd(data_dir / "images" / f"{uid}.mhd")
    _, lung = read_mhd(data_dir / "lungs" / f"{uid}.mhd")
    if lung.shape != vox.shape:
        raise DataError(f"{uid}: lung mask shape {lung.shape} vs volume {vox.shape}")
    images = hu_window(vox) if meta.element_type in ("MET_SHORT", "MET_INT") else vox.astype(np.float32)
    nodules = volume_nodule_masks([a for a in annotations if a.series_uid == uid], meta)
    return images, lung > 0, nodules


def cmd_prep(args, out: Path) -> dict:
    """Split volumes by subject, balance training slices, extract patches."""
    data = _need_dir(args.data, "data")
    annotations = read_annotations(_need_file(data / "annotations.csv", "annotation"))
    uids = sorted(p.stem for p in (data / "images").glob("*.mhd"))
    if not uids:
        raise DataError(f"no .mhd volumes under {data / 'images'}")
    parts = dict(zip(SPLITS, kfold_split(uids, args.folds, args.fold)))
    summary = {"subjects": {k: list(v) for k, v in parts.items()}}
    for split, members in parts.items():
        vols = [_read_volume(data, uid, annotations) for uid in members]
        images = np.concatenate([v[0] for v in vols])
        lungs = np.concatenate([v[1] for v in vols])
        nodules = np.concatenate([v[2] for v in vols])
        if split == "train":
            try:
                keep = systematic_sample(list(range(len(images))), nodules)
            except DataError as exc:
                log.warning("train slices not balanced: %s", exc)
                keep = list(range(len(images)))
            images, lungs, nodules = images[keep], lungs[keep], nodules[keep]
        save_tensor(out / f"seg_{split}_images.ten", images.astype(np.float32))
        save_tensor(out / f"seg_{split}_lungs.ten", lungs.astype(np.float32))
        save_tensor(out / f"seg_{split}_nodules.ten", nodules.astype(np.float32))
        records = []
        for i, (img, lung, nod) in enumerate(zip(images, lungs, nodules)):
            records += extract_patches(img, lung, nod, stride=args.stride, slice_index=i)
        try:
            records = balance_patches(records, seed=args.seed)
        except DataError as exc:
            log.warning("%s patches not balanced: %s", split, exc)
        write_patches(out / f"patches_{split}.pch", records)
        summary[split] = {"slices": int(len(images)), "patches": len(records), "c1_patches": sum(r.label == C1 for r in records)}
        log.info("%s: %d slices, %d patches", split, len(images), len(records))
    _write_json(out / "prep.json", summary)
    return summary


def cmd_train_seg(args, out: Path) -> dict:
    config = _train_config(args, epochs_stage1=args.epochs) if args.epochs else _train_config(args)
    train = _load_split(args.data, "train")
    val = _load_split(args.data, "val")
    result = train_stage1(train[:2], val[:2], config, adversarial=not args.no_adversarial, progress=_progress_stage1)
    save_weights(result.seg_weights, out / "segmenter.wts")
    if result.disc_weights is not None:
        save_weights(result.disc_weights, out / "discriminator.wts")
    atomic_write_text(out / "history.csv", history_to_csv(result.history))
    return {"train": config.to_dict(), "best_val_dice": result.best_val_dice}


def _open_patches(prep_dir, split):
    records = read_patches(_need_file(Path(prep_dir) / f"patches_{split}.pch", "patch"))
    if not records:
        raise DataError(f"no {split} patches in {prep_dir}")
    return patches_to_arrays(records)


def cmd_train_clf(args, out: Path) -> dict:
    config = _train_config(args, epochs_stage2=args.epochs) if args.epochs else _train_config(args)
    train = _open_patches(args.data, "train")
    val = _open_patches(args.data, "val")
    result = train_stage2(train, val, config, progress=_progress_stage2)
    save_weights(result.weights, out / "classifier.wts")
    atomic_write_text(out / "history.csv", _stage2_csv(result.history))
    return {"train": config.to_dict(), "best_val_accuracy": result.best_val_accuracy}


def _segmenter(args, weights_path) -> Network:
    return Network(build_segmenter(args.scale), load_weights(_need_file(weights_path, "weights")))


def cmd_eval_seg(args, out: Path) -> dict:
    images, lungs, _ = _load_split(args.data, args.split)
    net = _segmenter(args, args.weights)
    maps = predict_maps(net, images)
    report = segmentation_report(maps, lungs)
    atomic_write_text(out / "metrics.csv", report.to_csv())
    atomic_write_text(out / "metrics.txt", report.to_text())
    for i in range(min(args.save_maps, len(maps))):
        write_pgm(out / f"pred_{i:03d}.pgm", postprocess_mask(maps[i]), 0, 1)
    print(report.to_text(), end="")
    return {"dsc": report.dsc}


def cmd_eval_clf(args, out: Path) -> dict:
    x, y = _open_patches(args.data, args.split)
    net = Network(build_classifier(), load_weights(_need_file(args.weights, "weights")))
    report = classification_report(classify(net, x).argmax(axis=1), y)
    atomic_write_text(out / "metrics.csv", report.to_csv())
    atomic_write_text(out / "metrics.txt", report.to_text())
    print(report.to_text(), end="")
    return {"accuracy": report.accuracy}


def cmd_saliency(args, out: Path) -> dict:
    records = read_patches(_need_file(args.patches, "patch"))
    if not 0 <= args.index < len(records):
        raise DataError(f"patch index {args.index} outside [0, {len(records)})")
    rec = records[args.index]
    net = Network(build_classifier(), load_weights(_need_file(args.weights, "weights")))
    sal = rise_saliency(net.predict, rec.pixels, _rise_config(args))
    write_pgm(out / "patch.pgm", rec.pixels, 0, 1)
    write_pgm(out / "saliency.pgm", sal)
    atomic_write_text(out / "saliency.csv", saliency_to_csv(sal))
    r, c = np.unravel_index(int(np.argmax(sal)), sal.shape)
    return {"patch_label": rec.label, "argmax": [int(r), int(c)]}


NETWORKS = {
    "segmenter": lambda scale: build_segmenter(scale),
    "discriminator": lambda scale: build_discriminator(scale),
    "classifier": lambda scale: build_classifier(),
    "vgg16": lambda scale: build_vgg16_convs(),
}


def cmd_cost(args, out: Path) -> dict:
    spec = NETWORKS[args.net](args.scale)
    shape = spec.input_shape if args.input_size is None else (spec.input_shape[0],) + tuple(args.input_size)
    report = count_flops(spec, shape, macs_only=args.macs_only)
    text = report.to_text()
    if args.weights:
        size = _need_file(args.weights, "weights").stat().st_size
        text += f"# weights file: {size:,} bytes\n"
    print(text, end="")
    atomic_write_text(out / "cost.txt", text)
    atomic_write_text(out / "cost.csv", report.to_csv())
    return {"params": count_params(spec), "flops": report.total_flops}


def cmd_pipeline(args, out: Path) -> dict:
    """gen-data or --data, prep, Stage 1, Stage 2, then per-slice verdicts on the test split."""
    if args.phantom:
        data = out / "data"
        cmd_gen_data(args, data)
    else:
        data = _need_dir(args.data, "data")
    prep = out / "prep"
    prep_args = argparse.Namespace(**{**vars(args), "data": data})
    cmd_prep(prep_args, prep)
    sub = argparse.Namespace(**{**vars(args), "data": prep, "epochs": None})
    seg = cmd_train_seg(argparse.Namespace(**{**vars(sub), "epochs": args.seg_epochs}), out / "seg")
    clf = cmd_train_clf(argparse.Namespace(**{**vars(sub), "epochs": args.clf_epochs}), out / "clf")

    images, lungs, nodules = _load_split(prep, "test")
    seg_net = _segmenter(args, out / "seg" / "segmenter.wts")
    clf_net = Network(build_classifier(), load_weights(out / "clf" / "classifier.wts"))
    maps = predict_maps(seg_net, images)
    verdicts, truth, patch_pred, patch_true = [], [], [], []
    rows = [("slice", "has_nodule", "flagged", "patches", "c1_patches")]
    for i, (img, prob, nod) in enumerate(zip(images, maps, nodules)):
        lung = postprocess_mask(prob)
        recs = extract_patches(img, lung, nod > 0, stride=args.stride, slice_index=i)
        pred = classify(clf_net, patches_to_arrays(recs)[0]).argmax(axis=1) if recs else np.zeros(0, int)
        flagged = bool(np.any(pred == C1))
        verdicts.append(0 if flagged else 1)
        truth.append(0 if nod.any() else 1)
        patch_pred += pred.tolist()
        patch_true += [r.label for r in recs]
        rows.append((i, int(nod.any()), int(flagged), len(recs), int(np.sum(pred == C1))))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    atomic_write_text(out / "verdicts.csv", buf.getvalue())
    reports = {"segmentation": segmentation_report(maps, lungs)}
    if patch_pred:
        reports["patches"] = classification_report(patch_pred, patch_true)
    reports["slices"] = classification_report(verdicts, truth)
    atomic_write_text(out / "metrics.csv", _metrics_csv(reports))
    print(_metrics_csv(reports), end="")
    return {"stage1": seg, "stage2": clf}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lungnodule", description="Two-stage lung segmentation and nodule classification.")
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<subcommand> or runs/<subcommand>)")
    common.add_argument("--config", help="JSON file of flag values (e.g. a previous run.json); flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deterministic", action="store_true", help="single-threaded BLAS for bitwise-reproducible output")
    common.add_argument("-v", "--verbose", action="store_true")

    train = _Parser(add_help=False)
    train.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--epochs", type=int)
    train.add_argument("--scale", choices=("tiny", "full"), default="tiny")

    gen = _Parser(add_help=False)
    gen.add_argument("--count", type=int, help=f"number of volumes (default {GEN_DEFAULTS['count']})")
    gen.add_argument("--slices", type=int, help=f"slices per volume (default {GEN_DEFAULTS['slices']})")
    gen.add_argument("--size", type=int, help=f"slice side in pixels (default {GEN_DEFAULTS['size']})")

    prep = _Parser(add_help=False)
    prep.add_argument("--stride", type=int, default=32)
    prep.add_argument("--folds", type=int, default=10)
    prep.add_argument("--fold", type=int, default=0)

    seg = _Parser(add_help=False)
    seg.add_argument("--alpha", type=float)
    seg.add_argument("--iterations", type=int)
    seg.add_argument("--no-adversarial", action="store_true", help="train the segmenter alone")

    rise = _Parser(add_help=False)
    rise.add_argument("--n-masks", type=int, default=1000)
    rise.add_argument("--grid", type=int, default=8)
    rise.add_argument("--p1", type=float, default=0.5)
    rise.add_argument("--baseline", type=_baseline, default="mean", help="fill for masked pixels: a number or 'mean' (patch mean)")

    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen-data", parents=[common, gen], help="write phantom volumes")
    s = sub.add_parser("prep", parents=[common, prep], help="split, balance and extract patches")
    s.add_argument("--data", required=True)
    s = sub.add_parser("train-seg", parents=[common, train, seg], help="Stage 1 adversarial segmentation")
    s.add_argument("--data", required=True, help="prep output directory")
    s = sub.add_parser("train-clf", parents=[common, train], help="Stage 2 patch classifier")
    s.add_argument("--data", required=True, help="prep output directory")
    s = sub.add_parser("eval-seg", parents=[common], help="segmentation metrics on a split")
    s.add_argument("--data", required=True)
    s.add_argument("--weights", required=True)
    s.add_argument("--split", choices=SPLITS, default="test")
    s.add_argument("--scale", choices=("tiny", "full"), default="tiny")
    s.add_argument("--save-maps", type=int, default=4, help="post-processed masks to export as PGM")
    s = sub.add_parser("eval-clf", parents=[common], help="patch classification metrics on a split")
    s.add_argument("--data", required=True)
    s.add_argument("--weights", required=True)
    s.add_argument("--split", choices=SPLITS, default="test")
    s = sub.add_parser("saliency", parents=[common, rise], help="RISE map for one patch")
    s.add_argument("--weights", required=True)
    s.add_argument("--patches", required=True, help=".pch file")
    s.add_argument("--index", type=int, default=0)
    s = sub.add_parser("cost", parents=[common], help="parameter and FLOP table")
    s.add_argument("--net", choices=sorted(NETWORKS), default="segmenter")
    s.add_argument("--scale", choices=("tiny", "full"), default="full")
    s.add_argument("--input-size", type=_size, help="HxW (default: the network's own input size)")
    s.add_argument("--macs-only", action="store_true", help="report conv/linear MACs only")
    s.add_argument("--weights", help="also report this .wts file's size")
    s = sub.add_parser("pipeline", parents=[common, train, gen, prep, seg], help="end-to-end run")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--phantom", action="store_true", help="generate phantom data first")
    src.add_argument("--data", help="data directory in gen-data layout")
    s.add_argument("--tiny", action="store_true", help="desk-scale defaults (tiny networks, short training)")
    s.add_argument("--seg-epochs", type=int)
    s.add_argument("--clf-epochs", type=int)
    return p



COMMANDS = {
    "gen-data": cmd_gen_data,
    "prep": cmd_prep,
    "train-seg": cmd_train_seg,
    "train-clf": cmd_train_clf,
    "eval-seg": cmd_eval_seg,
    "eval-clf": cmd_eval_clf,
    "saliency": cmd_saliency,
    "cost": cmd_cost,
    "pipeline": cmd_pipeline,
}

_NOT_RECORDED = ("out", "config", "verbose")


def _load_config(path, command, sub) -> dict:
    try:
        loaded = json.loads(_need_file(path, "config").read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from None
    values = loaded.get("args", loaded)
    if values.get("command", command) != command:
        raise DataError(f"config is for {values['command']!r}, not {command!r}")
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(values) - known - {"command"})
    if unknown:
        raise DataError(f"config has unknown keys {unknown}")
    return {k: v for k, v in values.items() if k != "command"}


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    early, _ = pre.parse_known_args(argv)
    if early.config and argv and argv[0] in COMMANDS:
        # file values become defaults so explicit flags win; flags the file
        # supplies are no longer required on the command line
        sub = parser._subparsers._group_actions[0].choices[argv[0]]
        values = _load_config(early.config, argv[0], sub)
        for action in sub._actions:
            if action.dest in values:
                action.required = False
        sub.set_defaults(**values)
    args = parser.parse_args(argv)
    if args.command == "pipeline" and bool(args.phantom) == bool(args.data):
        parser.error("pipeline needs exactly one of --phantom or --data")
    if args.command == "pipeline" and args.tiny:
        for k, v in TINY_PIPELINE.items():
            if getattr(args, k) is None:
                setattr(args, k, v)
        args.scale = "tiny"
    for k, v in GEN_DEFAULTS.items():
        if getattr(args, k, v) is None:
            setattr(args, k, v)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except DataError as exc:
        print(f"lungnodule: {exc}", file=sys.stderr)
        return EXIT_DATA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr)
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "runs")) / args.command
    try:
        out.mkdir(parents=True, exist_ok=True)
        record = {"command": args.command, **{k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}}
        record = {k: (str(v) if isinstance(v, Path) else list(v) if isinstance(v, tuple) else v) for k, v in record.items()}
        with deterministic(args.deterministic):
            result = COMMANDS[args.command](args, out)
        _write_json(out / "run.json", {"args": record, "result": _jsonable(result)})
    except (DataError, ShapeError, FileNotFoundError) as exc:
        print(f"lungnodule: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"lungnodule: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


if __name__ == "__main__":
    sys.exit(main())
