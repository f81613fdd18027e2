"""Command-line interface.

Subcommands: ``synth`` (generate a synthetic dataset), ``train`` (fit a
model bundle), ``eval`` (score a bundle, fuse streams, tabulate
accuracies), ``sweep`` (train+eval over methods or sample counts).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from vidagg import fusion, pipeline, sampling, store, svm, synth
from vidagg.errors import VidaggError


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {value}")
    return value


def _non_negative(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _samples(text: str) -> int | None:
    if text == sampling.DENSE:
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a positive integer or 'dense', got {text!r}"
        ) from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"sample count must be >= 1, got {value}")
    return value


def _weights(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad weight list {text!r}") from None
    if not values or any(w < 0 for w in values) or not any(w > 0 for w in values):
        raise argparse.ArgumentTypeError(
            "weights must be non-negative with at least one positive"
        )
    return values


def _csv_list(text: str) -> list[str]:
    values = [v.strip() for v in text.split(",") if v.strip()]
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=pipeline.METHODS, default="max")
    p.add_argument("--samples", type=_samples, default=pipeline.DEFAULT_SAMPLES,
                   help="local features per video, or 'dense' for all")
    p.add_argument("--segments", type=_positive_int, default=None,
                   help="temporal segments (default: 3 for poolers, 1 for encoders)")
    p.add_argument("--kernel", choices=("auto",) + svm.KERNEL_KINDS, default="auto")
    p.add_argument("--C", type=float, default=svm.DEFAULT_C, dest="C")
    p.add_argument("--pca-dim", type=_positive_int, default=pipeline.DEFAULT_PCA_DIM)
    p.add_argument("--clusters", type=_positive_int, default=pipeline.DEFAULT_CLUSTERS)
    p.add_argument("--pca-whiten", action="store_true")
    p.add_argument("--feature-set", default=None)
    p.add_argument("--seed", type=int, default=0)


def _train_config(args) -> pipeline.TrainConfig:
    return pipeline.TrainConfig(
        method=args.method,
        samples=args.samples,
        segments=args.segments,
        kernel=args.kernel,
        C=args.C,
        pca_dim=args.pca_dim,
        clusters=args.clusters,
        pca_whiten=args.pca_whiten,
        seed=args.seed,
        feature_set=args.feature_set,
    )


def cmd_synth(args) -> int:
    config = synth.SynthConfig(
        classes=args.classes,
        videos_per_class=args.videos_per_class,
        frames=args.frames,
        dim=args.dim,
        action_fraction=args.action_fraction,
        noise_scale=args.noise,
        seed=args.seed,
    )
    manifest = synth.generate(config, args.out)
    print(f"wrote {len(manifest.records)} records to {args.out}/manifest.txt")
    return 0


def cmd_train(args) -> int:
    manifest = store.load_manifest(args.manifest)
    pipeline.train_bundle(manifest, args.manifest, _train_config(args), args.out)
    print(f"bundle written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    manifest = store.load_manifest(args.manifest)
    result = pipeline.eval_bundle(
        manifest,
        args.manifest,
        args.bundle,
        weights=args.fusion_weights,
        external_scores_path=args.external_scores,
        external_weight=args.external_weight,
        out_dir=args.out,
        force=args.force,
    )
    print(pipeline.render_accuracy_table(result))
    return 0


def cmd_sweep(args) -> int:
    manifest = store.load_manifest(args.manifest)
    base = _train_config(args)
    result = pipeline.run_sweep(
        manifest, args.manifest, args.axis, args.values, base, args.out,
        weights=args.fusion_weights,
    )
    print(result["csv"], end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidagg",
        description="Aggregate local video features, classify, fuse and evaluate.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic two-stream dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=_positive_int, default=10)
    p.add_argument("--videos-per-class", type=_positive_int, default=40)
    p.add_argument("--frames", type=_positive_int, default=60)
    p.add_argument("--dim", type=_positive_int, default=32)
    p.add_argument("--action-fraction", type=_fraction, default=0.25)
    p.add_argument("--noise", type=_non_negative, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model bundle from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a bundle: per-stream and fused accuracy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--fusion-weights", type=_weights,
                   default=fusion.DEFAULT_FUSION_WEIGHTS)
    p.add_argument("--external-scores", default=None,
                   help="CSV of externally produced scores to fuse in")
    p.add_argument("--external-weight", type=_non_negative, default=1.0)
    p.add_argument("--force", action="store_true",
                   help="evaluate even if the manifest hash differs from training")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train+eval over one axis, emit one table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--axis", choices=("method", "samples"), required=True)
    p.add_argument("--values", type=_csv_list, required=True,
                   help="comma-separated methods or sample counts")
    p.add_argument("--fusion-weights", type=_weights,
                   default=fusion.DEFAULT_FUSION_WEIGHTS)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (VidaggError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
