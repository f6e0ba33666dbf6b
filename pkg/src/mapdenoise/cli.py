"""Command-line interface.

Subcommands: ``train``, ``denoise``, ``noise``, ``eval`` (psnr / sweep /
variant), ``serve``. Noise levels on the command line are always in 8-bit
sigma units [0, 75]; maps and model files use the package's documented
binary formats. Exit codes: 0 success, 1 runtime failure (bad data,
training failure, I/O), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import load_manifest, load_image, save_image
from .errors import ContractError, DataError, TrainingError
from .metrics import (
    format_db,
    psnr,
    sensitivity_sweep,
    sweep_csv,
    sweep_table,
    variant_noise_report,
)
from .model import ModelConfig, denoise, load_model, save_model
from .noise import (
    SIGMA_MAX,
    NoiseSpec,
    RegionAnchor,
    add_awgn,
    anchored_map,
    gradient_map,
    load_map,
    uniform_map,
)
from .optim import TrainPlan, train


def sigma_value(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= value <= SIGMA_MAX:
        raise argparse.ArgumentTypeError(
            f"sigma must be in [0, {SIGMA_MAX:g}], got {value:g}")
    return value


def parse_anchors(text: str) -> list[RegionAnchor]:
    """``row,col,sigma;row,col,sigma;...`` with sigma in [0, 75]."""
    anchors = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(
                f"anchor must be row,col,sigma - got {chunk!r}")
        try:
            row, col = int(parts[0]), int(parts[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad anchor position in {chunk!r}")
        sigma = sigma_value(parts[2])
        try:
            anchors.append(RegionAnchor(row, col, sigma))
        except ContractError as e:
            raise argparse.ArgumentTypeError(str(e))
    if not anchors:
        raise argparse.ArgumentTypeError("no anchors given")
    return anchors


def parse_sigma_list(text: str) -> list[float]:
    try:
        return [sigma_value(t) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError:
        raise
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sigma list {text!r}")


def parse_range(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"range must be lo,hi - got {text!r}")
    return sigma_value(parts[0]), sigma_value(parts[1])


def parse_gradient(text: str) -> tuple[float, float, str]:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) == 2:
        parts.append("x")
    if len(parts) != 3 or parts[2] not in ("x", "y"):
        raise argparse.ArgumentTypeError(
            f"gradient must be lo,hi or lo,hi,axis with axis x|y - got {text!r}")
    return sigma_value(parts[0]), sigma_value(parts[1]), parts[2]


def add_map_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--sigma", type=sigma_value, metavar="S",
                       help="uniform noise level in [0, 75]")
    group.add_argument("--map", type=Path, metavar="FILE",
                       help="noise level map file (.nlm)")
    group.add_argument("--anchors", type=parse_anchors, metavar="R,C,S;...",
                       help="interpolate the map from row,col,sigma anchors")


def resolve_map(args, height: int, width: int):
    if args.sigma is not None:
        return uniform_map(height, width, args.sigma)
    if args.map is not None:
        m = load_map(args.map)
        if m.shape != (height, width):
            raise DataError(
                f"{args.map}: map is {m.shape[1]}x{m.shape[0]}, image is "
                f"{width}x{height}")
        return m
    return anchored_map(height, width, args.anchors)


def cmd_train(args) -> int:
    manifest = load_manifest(
        args.manifest, patch_size=args.patch_size,
        clipped=args.clipped, augment=not args.no_augment)
    in_channels = 3 if args.color else 1
    layers = args.layers if args.layers is not None else (12 if args.color else 15)
    channels = args.channels if args.channels is not None else (96 if args.color else 64)
    config = ModelConfig(num_layers=layers, num_channels=channels, in_channels=in_channels)
    plan = TrainPlan(
        batch_size=args.batch_size,
        patches_per_epoch=args.patches_per_epoch,
        noise_range=args.noise_range,
        augment=not args.no_augment,
        finetune_epochs=args.finetune_epochs,
        max_epochs=args.epochs,
    )
    log_path = args.log if args.log is not None else Path(str(args.out) + ".log")
    result = train(plan, manifest, config, seed=args.seed, log_fn=print)
    save_model(args.out, result.params)
    log_path.write_text("\n".join(result.log) + "\n")
    return 0


def cmd_denoise(args) -> int:
    params = load_model(args.model)
    image = load_image(args.input)
    h, w = image.shape[2], image.shape[3]
    noise_map = resolve_map(args, h, w)
    restored = denoise(params, image, noise_map)
    save_image(args.out, restored)
    return 0


def cmd_noise(args) -> int:
    image = load_image(args.input)
    h, w = image.shape[2], image.shape[3]
    noise_map = resolve_map(args, h, w)
    noisy = add_awgn(image, NoiseSpec(noise_map, clipped=args.clipped, seed=args.seed))
    save_image(args.out, noisy)
    return 0


def cmd_eval_psnr(args) -> int:
    a = load_image(args.reference)
    b = load_image(args.test)
    print(format_db(psnr(a, b, quantize=args.quantize)))
    return 0


def cmd_eval_sweep(args) -> int:
    params = load_model(args.model)
    clean = load_image(args.image)
    rows = sensitivity_sweep(
        params, clean, args.true_sigma, args.inputs,
        seed=args.seed, quantize=args.quantize)
    render = sweep_table if args.table else sweep_csv
    sys.stdout.write(render(rows))
    return 0


def cmd_eval_variant(args) -> int:
    params = load_model(args.model)
    clean = load_image(args.image)
    h, w = clean.shape[2], clean.shape[3]
    if args.map is not None:
        true_map = load_map(args.map)
        if true_map.shape != (h, w):
            raise DataError(
                f"{args.map}: map is {true_map.shape[1]}x{true_map.shape[0]}, "
                f"image is {w}x{h}")
    else:
        lo, hi, axis = args.gradient
        true_map = gradient_map(h, w, lo, hi, axis=axis)
    matched, flat = variant_noise_report(
        params, clean, true_map, seed=args.seed, quantize=args.quantize)
    print(f"matched {format_db(matched)}")
    print(f"uniform_mean {format_db(flat)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    params = load_model(args.model)
    app = create_app(params, max_pixels=args.max_pixels)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapdenoise",
        description="Noise-level-map conditioned image denoiser.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a dataset manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="model file to write")
    p.add_argument("--log", type=Path, help="loss log path (default: OUT.log)")
    p.add_argument("--layers", type=int, help="conv layer count (default 15, 12 with --color)")
    p.add_argument("--channels", type=int, help="feature channels (default 64, 96 with --color)")
    p.add_argument("--color", action="store_true", help="train a 3-channel model")
    p.add_argument("--epochs", type=int, required=True, help="total epoch budget")
    p.add_argument("--finetune-epochs", type=int, default=50)
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--patches-per-epoch", type=int, default=1536)
    p.add_argument("--noise-range", type=parse_range, default=(0.0, 75.0),
                   metavar="LO,HI")
    p.add_argument("--clipped", action="store_true",
                   help="train on clamped, 8-bit quantized noisy patches")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise an image with a trained model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    add_map_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("noise", help="corrupt an image with synthetic noise")
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    add_map_flags(p)
    p.add_argument("--clipped", action="store_true",
                   help="clamp to [0,1] and quantize to 8-bit after adding noise")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("eval", help="evaluation reports")
    esub = p.add_subparsers(dest="eval_command", required=True)

    e = esub.add_parser("psnr", help="PSNR between two images")
    e.add_argument("reference", type=Path)
    e.add_argument("test", type=Path)
    e.add_argument("--quantize", action="store_true",
                   help="snap both images to 8-bit levels first")
    e.set_defaults(func=cmd_eval_psnr)

    e = esub.add_parser("sweep", help="noise level sensitivity sweep")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--image", type=Path, required=True, help="clean reference image")
    e.add_argument("--true-sigma", type=sigma_value, required=True)
    e.add_argument("--inputs", type=parse_sigma_list, required=True,
                   metavar="S1,S2,...", help="assumed noise levels to try")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--quantize", action="store_true")
    e.add_argument("--table", action="store_true", help="text table instead of CSV")
    e.set_defaults(func=cmd_eval_sweep)

    e = esub.add_parser("variant", help="matched vs mean-uniform map comparison")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--image", type=Path, required=True, help="clean reference image")
    group = e.add_mutually_exclusive_group(required=True)
    group.add_argument("--map", type=Path, help="true noise level map (.nlm)")
    group.add_argument("--gradient", type=parse_gradient, metavar="LO,HI[,AXIS]",
                       help="linear-ramp true map")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--quantize", action="store_true")
    e.set_defaults(func=cmd_eval_variant)

    p = sub.add_parser("serve", help="start the HTTP denoising service")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-pixels", type=int, default=4_000_000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, DataError, TrainingError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
