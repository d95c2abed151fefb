"""Command-line interface: explain, train-builtin, serve.

Exit codes: 0 success, 2 bad arguments, 3 data errors, 4 predictor failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    EmptyCategory,
    EmptyDataset,
    ExternalPredictorFailure,
    IndexOutOfRange,
    LabelImageCountMismatch,
    LimevisError,
    MalformedFile,
    TruncatedData,
    UnsupportedFormat,
)
from .imaging import write_ppm
from .lime import ExplainConfig
from .predictor import (
    BuiltinPredictor,
    ExternalHttpPredictor,
    ExternalProcessPredictor,
    model_from_bytes,
    model_to_bytes,
    train_builtin,
    training_accuracy,
)
from .segmentation import segmentation_params
from .session import execute_category, load_dataset, session_summary

DATA_ERRORS = (
    MalformedFile,
    TruncatedData,
    UnsupportedFormat,
    LabelImageCountMismatch,
    EmptyDataset,
    EmptyCategory,
    IndexOutOfRange,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_PREDICTOR = 4


def _bool_arg(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _hide_color_arg(value: str):
    if value.strip().lower() == "mean":
        return None
    parts = value.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("hide color must be 'mean' or 'R,G,B'")
    try:
        rgb = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("hide color samples must be integers") from None
    if any(c < 0 or c > 255 for c in rgb):
        raise argparse.ArgumentTypeError("hide color samples must be in 0..255")
    return rgb


def _add_dataset_args(parser):
    parser.add_argument("--dataset", required=True, help="dataset path")
    parser.add_argument(
        "--format",
        default="ppmdir",
        choices=["stl10", "ppmdir", "stl10-binary", "ppm-directory"],
        help="dataset layout (default: ppmdir)",
    )


def _add_model_args(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="builtin model file (.lvm)")
    group.add_argument("--external-cmd", help="external predictor command (stdio protocol)")
    group.add_argument("--external-url", help="external predictor base URL (HTTP protocol)")
    parser.add_argument(
        "--timeout", type=float, default=30.0, help="external predictor timeout in seconds"
    )


def _segmentation_from_args(args):
    if args.segmentation == "slic":
        return segmentation_params(
            "slic",
            n_segments=args.n_segments,
            compactness=args.compactness,
            max_iter=args.max_iter,
        )
    if args.segmentation == "felzenszwalb":
        return segmentation_params(
            "felzenszwalb", scale=args.scale, sigma=args.sigma, min_size=args.min_size
        )
    return segmentation_params(
        "quickshift", ratio=args.ratio, kernel_size=args.kernel_size, max_dist=args.max_dist
    )


def _open_predictor(args, class_names):
    if args.model:
        model = model_from_bytes(Path(args.model).read_bytes(), class_names=class_names)
        if class_names and len(class_names) != model.class_count:
            raise MalformedFile(
                f"model has {model.class_count} classes, dataset has {len(class_names)}"
            )
        return BuiltinPredictor(model)
    if args.external_cmd:
        return ExternalProcessPredictor(args.external_cmd, timeout=args.timeout)
    return ExternalHttpPredictor(args.external_url, timeout=args.timeout)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limevis",
        description="Batch LIME superpixel explanations with an interactive workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    explain = sub.add_parser("explain", help="run batch analysis and write reports")
    _add_dataset_args(explain)
    explain.add_argument("--category", required=True, help="category name or index")
    explain.add_argument(
        "--segmentation",
        default="quickshift",
        choices=["slic", "felzenszwalb", "quickshift"],
    )
    explain.add_argument("--n-segments", type=int, default=50)
    explain.add_argument("--compactness", type=float, default=10.0)
    explain.add_argument("--max-iter", type=int, default=10)
    explain.add_argument("--scale", type=float, default=100.0)
    explain.add_argument("--sigma", type=float, default=0.8)
    explain.add_argument("--min-size", type=int, default=20)
    explain.add_argument("--ratio", type=float, default=0.2)
    explain.add_argument("--kernel-size", type=float, default=4.0)
    explain.add_argument("--max-dist", type=float, default=8.0)
    explain.add_argument("--num-samples", type=int, default=1000)
    explain.add_argument("--num-features", type=int, default=5)
    explain.add_argument("--positive-only", type=_bool_arg, default=True, metavar="BOOL")
    explain.add_argument("--hide-rest", type=_bool_arg, default=False, metavar="BOOL")
    explain.add_argument("--kernel-width", type=float, default=0.25)
    explain.add_argument("--ridge-lambda", type=float, default=1.0)
    explain.add_argument(
        "--hide-color",
        type=_hide_color_arg,
        default="mean",
        help="'mean' or 'R,G,B' fill for hidden superpixels during sampling",
    )
    explain.add_argument("--seed", type=int, default=0)
    explain.add_argument("--limit", type=int, default=100, help="images per session")
    explain.add_argument("--shuffle-seed", type=int, default=None)
    explain.add_argument("--workers", type=int, default=1)
    explain.add_argument("--no-figures", action="store_true", help="skip PNG report figures")
    explain.add_argument("--out", required=True, help="output directory")
    _add_model_args(explain)

    train = sub.add_parser("train-builtin", help="train the builtin softmax model")
    _add_dataset_args(train)
    train.add_argument("--epochs", type=int, default=50)
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True, help="model output path (.lvm)")
    train.add_argument("--loss-curve", default=None, help="optional loss curve PNG path")

    serve = sub.add_parser("serve", help="serve the HTTP API (and frontend, if built)")
    _add_dataset_args(serve)
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--workers", type=int, default=1, help="threads per executed session")
    serve.add_argument("--frontend-dir", default=None, help="static frontend directory")
    _add_model_args(serve)

    return parser


def run_explain(args) -> int:
    dataset = load_dataset(args.dataset, args.format)
    config = ExplainConfig(
        segmentation=_segmentation_from_args(args),
        num_samples=args.num_samples,
        kernel_width=args.kernel_width,
        ridge_lambda=args.ridge_lambda,
        positive_only=args.positive_only,
        num_features=args.num_features,
        hide_rest=args.hide_rest,
        hide_color=args.hide_color,
        seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _open_predictor(args, dataset.category_names) as predictor:
        session = execute_category(
            dataset,
            args.category,
            config,
            predictor,
            limit=args.limit,
            shuffle_seed=args.shuffle_seed,
            workers=args.workers,
        )

    from .embedding import embedding_csv

    for entry in session.entries:
        (out_dir / f"lime_{entry.image_id}.ppm").write_bytes(write_ppm(entry.lime_image))
        payload = entry.explanation.to_json_dict(config)
        payload["image_id"] = entry.image_id
        payload["predicted_class"] = entry.predicted_class
        payload["correct"] = entry.correct
        (out_dir / f"explanation_{entry.image_id}.json").write_text(
            json.dumps(payload, indent=2) + "\n"
        )
    (out_dir / "embedding.csv").write_text(
        embedding_csv(
            [e.image_id for e in session.entries],
            session.embedding.coords,
            [e.correct for e in session.entries],
        )
    )
    summary = session_summary(session)
    summary["config"] = config.to_json_dict()
    summary["dataset"] = {"path": args.dataset, "format": args.format, "source": dataset.source}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    if not args.no_figures:
        from .report import save_embedding_figure, save_overview_figure

        save_overview_figure(session, out_dir / "overview.png", mode="lime")
        save_embedding_figure(session, out_dir / "embedding.png")

    print(
        f"analyzed {summary['num_images']} images of {summary['category_name']!r}: "
        f"{summary['correct_count']} correct, {summary['incorrect_count']} incorrect "
        f"(accuracy {summary['accuracy']:.2%}) -> {out_dir}"
    )
    return EXIT_OK


def run_train(args) -> int:
    dataset = load_dataset(args.dataset, args.format)
    result = train_builtin(dataset, epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    Path(args.out).write_bytes(model_to_bytes(result.model))
    accuracy = training_accuracy(result.model, dataset)
    if args.loss_curve:
        from .report import save_loss_curve

        save_loss_curve(result.epoch_losses, args.loss_curve)
    print(
        f"trained {result.model.class_count}-class model on {len(dataset)} images: "
        f"final loss {result.epoch_losses[-1]:.4f}, training accuracy {accuracy:.2%} "
        f"-> {args.out}"
    )
    return EXIT_OK


def run_serve(args) -> int:
    import uvicorn

    from .service import create_app

    dataset = load_dataset(args.dataset, args.format)
    predictor = _open_predictor(args, dataset.category_names)
    frontend = args.frontend_dir if args.frontend_dir and Path(args.frontend_dir).is_dir() else None
    app = create_app(dataset, predictor, workers=args.workers, frontend_dir=frontend)
    print(f"serving {len(dataset)} images on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "explain":
            return run_explain(args)
        if args.command == "train-builtin":
            return run_train(args)
        return run_serve(args)
    except ExternalPredictorFailure as exc:
        print(f"predictor failure: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LimevisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
