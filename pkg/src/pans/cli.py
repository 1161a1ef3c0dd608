"""Command-line pipeline: gen -> train -> score -> eval, plus ablate and iou.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import anomaly, classifier, formats, metrics, synth
from .errors import (FormatError, InvalidConfigError, InvalidInputError, InvalidModelError,
                     NonFiniteError, UndefinedMetricError)
from .grids import ANOMALY_ID, COSINE, LINEAR

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SCORERS = ("msp", "raw", "cosine-softmax", "pans")
_MODES = {"held-out": synth.HELD_OUT, "uniform": synth.UNIFORM}


class UsageError(Exception):
    """Bad flag combination detected after argparse."""


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _load_manifest(path, want: str):
    train_pairs, eval_pairs = formats.read_manifest(path)
    pairs = train_pairs if want == "train" else eval_pairs
    if not pairs:
        raise InvalidInputError(f"{path}: manifest lists no {want} scenes")
    return pairs


def _pooled_eval(amaps, masks) -> metrics.EvalReport:
    for amap, mask in zip(amaps, masks):
        if (amap.height, amap.width) != (mask.height, mask.width):
            raise InvalidInputError(
                f"score map {amap.height}x{amap.width} does not match "
                f"mask {mask.height}x{mask.width}")
    scores = np.concatenate([a.data.reshape(-1) for a in amaps])
    positive = np.concatenate([(m.labels == ANOMALY_ID).reshape(-1) for m in masks])
    return metrics.evaluate_pixels(scores, positive)


def _score_maps(score_maps, scorer: str, tau: float):
    if scorer == "msp":
        return [anomaly.msp(s) for s in score_maps]
    if scorer == "raw":
        return [anomaly.raw_score(s) for s in score_maps]
    if scorer == "cosine-softmax":
        return [anomaly.cosine_softmax(s, tau) for s in score_maps]
    return [anomaly.pans(s) for s in score_maps]


def cmd_gen(args) -> int:
    config = synth.SynthConfig(
        height=args.height, width=args.width, classes=args.classes, dim=args.dim,
        noise_std=args.noise_std, anomaly_fraction=args.anomaly_fraction,
        region_granularity=args.region_size, anomaly_mode=_MODES[args.mode],
        seed=args.seed, n_train=args.n_train, n_eval=args.n_eval)
    train_scenes, eval_scenes = synth.generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pairs = {"train": [], "eval": []}
    for kind, scenes in (("train", train_scenes), ("eval", eval_scenes)):
        for i, (fm, mask) in enumerate(scenes):
            fname, mname = f"{kind}_{i:03d}.feat", f"{kind}_{i:03d}.pgm"
            formats.write_features(out / fname, fm)
            formats.write_mask(out / mname, mask)
            pairs[kind].append((fname, mname))
    formats.write_manifest(out / "manifest.txt", pairs["train"], pairs["eval"])
    print(f"wrote {len(pairs['train'])} train + {len(pairs['eval'])} eval scenes to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    pairs = _load_manifest(args.manifest, "train")
    features = [formats.read_features(f) for f, _ in pairs]
    masks = [formats.read_mask(m) for _, m in pairs]
    tau = args.tau if args.tau is not None else (10.0 if args.head == COSINE else 1.0)
    config = classifier.TrainConfig(
        tau=tau, learning_rate=args.lr, epochs=args.epochs, lr_schedule=args.lr_schedule,
        lr_power=args.lr_power, seed=args.seed, l2_weight=args.l2)
    report = classifier.train(features, masks, config, head_kind=args.head)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / f"model_{args.head}.bin"
    formats.write_model(model_path, report.bank, config.tau)
    rows = [(t, float(report.losses[t]), float(report.accuracies[t]))
            for t in range(report.epochs)]
    _write_csv(out / f"training_{args.head}.csv", ("epoch", "loss", "accuracy"), rows)
    print(f"trained {args.head} head: final loss {report.losses[-1]:.6f}, "
          f"accuracy {report.accuracies[-1]:.4f} -> {model_path}")
    return EXIT_OK


def cmd_score(args) -> int:
    bank, model_tau = formats.read_model(args.model)
    if args.scorer in ("pans", "cosine-softmax") and bank.head_kind != COSINE:
        raise UsageError(
            f"scorer {args.scorer!r} needs a cosine-head model but {args.model} holds a "
            f"{bank.head_kind} head; retrain with --head cosine or use msp/raw")
    pairs = _load_manifest(args.manifest, "eval")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (fpath, _) in enumerate(pairs):
        fm = formats.read_features(fpath)
        smap = classifier.scores_for(fm, bank)
        amap = _score_maps([smap], args.scorer, model_tau)[0]
        formats.write_scores(out / f"eval_{i:03d}.score", amap)
    print(f"wrote {len(pairs)} {args.scorer} score maps to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pairs = _load_manifest(args.manifest, "eval")
    scores_dir = Path(args.scores)
    masks = [formats.read_mask(m) for _, m in pairs]
    amaps = [formats.read_scores(scores_dir / f"eval_{i:03d}.score") for i in range(len(pairs))]
    report = _pooled_eval(amaps, masks)
    label = args.label or scores_dir.name
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "metrics.csv",
               ("scorer", "auroc", "aupr", "fpr95", "positives", "negatives"),
               [(label, report.auroc, report.aupr, report.fpr95,
                 report.positives, report.negatives)])
    print(f"{label}: auroc={report.auroc:.4f} aupr={report.aupr:.4f} "
          f"fpr95={report.fpr95:.4f} ({report.positives} pos / {report.negatives} neg)")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cos_bank, cos_tau = formats.read_model(args.cosine_model)
    lin_bank, _ = formats.read_model(args.linear_model)
    if cos_bank.head_kind != COSINE:
        raise UsageError(f"--cosine-model {args.cosine_model} does not hold a cosine head")
    if lin_bank.head_kind != LINEAR:
        raise UsageError(f"--linear-model {args.linear_model} does not hold a linear head")
    pairs = _load_manifest(args.manifest, "eval")
    features = [formats.read_features(f) for f, _ in pairs]
    masks = [formats.read_mask(m) for _, m in pairs]
    cos_maps = [classifier.cosine_scores(fm, cos_bank) for fm in features]
    lin_maps = [classifier.linear_scores(fm, lin_bank) for fm in features]
    variants = (
        ("msp", "linear", _score_maps(lin_maps, "msp", 1.0)),
        ("class-scores", "linear", _score_maps(lin_maps, "raw", 1.0)),
        ("cosine-softmax", "cosine", _score_maps(cos_maps, "cosine-softmax", cos_tau)),
        ("pans", "cosine", _score_maps(cos_maps, "pans", cos_tau)),
    )
    rows = []
    for name, head, amaps in variants:
        report = _pooled_eval(amaps, masks)
        rows.append((name, head, report.auroc, report.aupr, report.fpr95))
        print(f"{name:>15} ({head:>6}): auroc={report.auroc:.4f} "
              f"aupr={report.aupr:.4f} fpr95={report.fpr95:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "ablation.csv", ("scorer", "head", "auroc", "aupr", "fpr95"), rows)
    return EXIT_OK


def _iou_row(model_path, pairs):
    bank, _ = formats.read_model(model_path)
    preds, truths = [], []
    for fpath, mpath in pairs:
        fm = formats.read_features(fpath)
        preds.append(classifier.predict_labels(classifier.scores_for(fm, bank)))
        truths.append(formats.read_mask(mpath))
    return bank, metrics.iou_pooled(preds, truths, bank.classes)


def cmd_iou(args) -> int:
    pairs = _load_manifest(args.manifest, "eval")
    bank, report = _iou_row(args.model, pairs)
    rows = [[bank.head_kind, report.miou] + [float(v) for v in report.per_class_iou]]
    print(f"mIoU[{bank.head_kind}] = {report.miou:.4f}")
    if args.compare:
        other_bank, other = _iou_row(args.compare, pairs)
        if other_bank.classes != bank.classes:
            raise InvalidInputError("models under comparison have different class counts")
        rows.append([other_bank.head_kind, other.miou] + [float(v) for v in other.per_class_iou])
        print(f"mIoU[{other_bank.head_kind}] = {other.miou:.4f} "
              f"(delta {report.miou - other.miou:+.4f})")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["head", "miou"] + [f"class_{c}" for c in range(bank.classes)]
    _write_csv(out / "iou.csv", header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pans",
        description="Prototype-based anomaly segmentation on synthetic or imported feature maps.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic benchmark")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--height", type=int, default=64)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--classes", type=int, default=8)
    g.add_argument("--dim", type=int, default=16)
    g.add_argument("--noise-std", type=float, default=0.15)
    g.add_argument("--anomaly-fraction", type=float, default=0.05)
    g.add_argument("--region-size", type=int, default=100,
                   help="expected region size in pixels")
    g.add_argument("--mode", choices=sorted(_MODES), default="held-out",
                   help="anomaly feature mode")
    g.add_argument("--n-train", type=int, default=20)
    g.add_argument("--n-eval", type=int, default=10)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a classification head on the train scenes")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--head", choices=(COSINE, LINEAR), default=COSINE)
    t.add_argument("--tau", type=float, default=None,
                   help="softmax temperature (default: 10 cosine, 1 linear)")
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--lr-schedule", choices=(classifier.POLY, classifier.CONSTANT),
                   default=classifier.POLY)
    t.add_argument("--lr-power", type=float, default=0.9)
    t.add_argument("--l2", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="write per-pixel anomaly scores for the eval scenes")
    s.add_argument("--manifest", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--scorer", choices=SCORERS, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="pool eval pixels and report AUROC/AUPR/FPR95")
    e.add_argument("--manifest", required=True)
    e.add_argument("--scores", required=True, help="directory written by `pans score`")
    e.add_argument("--out", required=True)
    e.add_argument("--label", default=None, help="row label (default: scores dir name)")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="compare the four anomaly scorers")
    a.add_argument("--manifest", required=True)
    a.add_argument("--cosine-model", required=True)
    a.add_argument("--linear-model", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    i = sub.add_parser("iou", help="per-class IoU of argmax predictions on eval scenes")
    i.add_argument("--manifest", required=True)
    i.add_argument("--model", required=True)
    i.add_argument("--compare", default=None, help="second model for a delta row")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_iou)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, InvalidConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, InvalidInputError, InvalidModelError,
            UndefinedMetricError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
