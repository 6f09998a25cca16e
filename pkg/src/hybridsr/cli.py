"""Command-line entry point.

Subcommands: prepare-data, train, super-resolve, evaluate, params.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import sys
from pathlib import Path

from . import arch, data, interp, metrics
from . import train as train_mod
from .interp import InterpKind

_BASELINES = {
    "bicubic": InterpKind.BICUBIC,
    "bilinear": InterpKind.BILINEAR,
    "nearest": InterpKind.NEAREST,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridsr",
        description="Hybrid interpolation + CNN single-image super-resolution.",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on worker counts (processing is sequential per worker)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="extract an aligned LR/HR patch dataset")
    p.add_argument("--images", required=True, help="directory of 8-bit RGB PNG/BMP images")
    p.add_argument("--scale", type=int, choices=(2, 4), default=2)
    p.add_argument("--degradations", default="bicubic",
                   help="comma-separated: bicubic, bilinear, nearest, pyramid; "
                        "append +blur for a 5x5 Gaussian pre-blur")
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--limit", type=int, default=None,
                   help="max pairs per image per degradation")
    p.add_argument("--out", required=True, help="dataset base path (writes .manifest and .hsrp)")

    p = sub.add_parser("train", help="train an architecture on a prepared dataset")
    p.add_argument("--arch", required=True, choices=sorted(arch.ARCH_SCALES))
    p.add_argument("--scale", type=int, choices=(2, 4), default=2)
    p.add_argument("--data", required=True, help="dataset base path from prepare-data")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--val-fraction", type=float, default=0.05)
    p.add_argument("--final-relu", action="store_true",
                   help="apply ReLU after the last conv layer as well")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log path (default: <out>.log)")

    p = sub.add_parser("super-resolve", help="upscale one image with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input_path", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="PSNR/SSIM table over a directory of images")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="trained model file")
    group.add_argument("--baseline", choices=sorted(_BASELINES),
                       help="evaluate a plain interpolation instead of a model")
    p.add_argument("--images", required=True)
    p.add_argument("--scale", type=int, choices=(2, 4), default=2)
    p.add_argument("--degradation", default="bicubic")
    p.add_argument("--report", required=True, help="report path (writes .tsv and .kv)")

    p = sub.add_parser("params", help="per-layer parameter and MAC table")
    p.add_argument("--arch", required=True, choices=sorted(arch.ARCH_SCALES))
    p.add_argument("--scale", type=int, choices=(2, 4), default=None,
                   help="default: the architecture's native scale")
    p.add_argument("--input-dims", default="16x16", help="input HxW for MAC accounting")

    return parser


def _parse_degradations(parser, text):
    out = []
    for part in text.split(","):
        try:
            out.append(data.Degradation.parse(part))
        except ValueError as exc:
            parser.error(str(exc))
    return out


def _load_images(directory):
    paths = sorted(
        p for p in Path(directory).iterdir()
        if p.is_file() and p.suffix.lower() in (".png", ".bmp")
    )
    return [(p.name, data.load_image(p)) for p in paths]


def _cmd_prepare_data(parser, args) -> int:
    degradations = _parse_degradations(parser, args.degradations)
    manifest = data.build_dataset(
        args.images, degradations, args.scale, args.stride, args.seed,
        args.out, limit_per_image=args.limit,
    )
    print(f"pairs: {manifest['pair_count']}")
    return 0


def _cmd_train(args) -> int:
    config = train_mod.TrainConfig(
        architecture=args.arch,
        scale=args.scale,
        dataset=args.data,
        checkpoint=args.out,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        learning_rate=args.lr,
        val_fraction=args.val_fraction,
        final_relu=args.final_relu,
        log_path=args.log if args.log is not None else f"{args.out}.log",
    )

    def report(rec):
        print(f"epoch {rec.epoch}\ttrain {rec.train_loss:.6f}\t"
              f"val {rec.val_loss:.6f}\t{rec.seconds:.2f}s")

    _, log = train_mod.train(config, progress=report)
    print(f"saved {args.out} ({len(log.records)} epochs)")
    return 0


def _cmd_super_resolve(args) -> int:
    model = arch.load(args.model)
    image = data.load_image(args.input_path)
    output = arch.forward(model, image)
    data.save_image(output, args.out)
    h, w, _ = output.shape
    print(f"wrote {args.out} ({w}x{h})")
    return 0


def _cmd_evaluate(parser, args) -> int:
    degradation = None
    if args.degradation != "none":
        try:
            degradation = data.Degradation.parse(args.degradation)
        except ValueError as exc:
            parser.error(str(exc))
    if args.model:
        model = arch.load(args.model)
        if model.spec.scale != args.scale:
            raise ValueError(
                f"model upscales by {model.spec.scale}, requested scale {args.scale}"
            )
        upscale = lambda img: arch.forward(model, img)  # noqa: E731
    else:
        kind = _BASELINES[args.baseline]
        upscale = lambda img: interp.resample(img, kind, args.scale)  # noqa: E731
    images = _load_images(args.images)
    if not images:
        raise ValueError(f"no PNG/BMP images found in {args.images}")
    report = metrics.evaluate(upscale, images, degradation, args.scale)
    base = Path(args.report)
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".tsv").write_text(report.to_tsv(), encoding="utf-8")
    base.with_suffix(".kv").write_text(report.to_kv(), encoding="utf-8")
    mean = "\t".join(f"{f}={report.mean[f]:.4f}" for f in metrics.METRIC_FIELDS)
    print(f"images: {len(report.per_image)}")
    print(f"mean: {mean}")
    return 0


def _cmd_params(parser, args) -> int:
    scale = args.scale if args.scale is not None else arch.ARCH_SCALES[args.arch]
    try:
        h, w = (int(v) for v in args.input_dims.lower().split("x"))
    except ValueError:
        parser.error(f"--input-dims must look like 16x16, got {args.input_dims!r}")
    model = arch.build(args.arch, scale, seed=0)
    report = arch.model_complexity(model, (h, w))
    print(f"{args.arch} (scale {scale}, input {h}x{w})")
    print("layer\tin_ch\tkernel\tfilters\tout_map\tparams\tmacs")
    for i, d in enumerate(report.layers, 1):
        print(f"{i}\t{d.in_channels}\t{d.kernel_size}\t{d.out_filters}\t"
              f"{d.out_h}x{d.out_w}\t{d.parameter_count}\t{d.mac_count}")
    print(f"total\t\t\t\t\t{report.total_parameters}\t{report.total_macs}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "prepare-data":
            return _cmd_prepare_data(parser, args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "super-resolve":
            return _cmd_super_resolve(args)
        if args.command == "evaluate":
            return _cmd_evaluate(parser, args)
        if args.command == "params":
            return _cmd_params(parser, args)
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"hybridsr: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
