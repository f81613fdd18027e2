"""End-to-end orchestration: train model bundles, evaluate, sweep.

A bundle is a directory holding, per (split, stream): optional PCA +
codebook models, a trained classifier, plus ``meta.json`` (the full
training configuration and a hash of the training manifest) and
``train_log.txt`` (resolved constants and per-iteration fit curves).
Evaluation refuses a bundle trained on a different manifest unless forced,
and re-derives test features with the exact configuration recorded in the
bundle. Codebooks are pushed through float32 quantization before use so
train-time and eval-time encodings match bit for bit.

All randomness flows from one seed through named sub-seeds.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from vidagg import aggregate, codebook, encode, fusion, sampling, store, svm
from vidagg.errors import IntegrityError

logger = logging.getLogger(__name__)

DEFAULT_PCA_DIM = 256
DEFAULT_CLUSTERS = 256
DEFAULT_SAMPLES = 25

METHODS = ("mean", "max", "mean_std", "bow", "vlad", "fv")
_ENCODER_METHODS = ("bow", "vlad", "fv")


def subseed(seed: int, name: str) -> int:
    """Deterministic named sub-seed derived from the master seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def manifest_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class TrainConfig:
    method: str
    samples: int | None = DEFAULT_SAMPLES  # None: use every local feature
    segments: int | None = None  # None: 3 for poolers, 1 for encoders
    kernel: str = "auto"  # auto: linear for fv/vlad, chi2 otherwise
    C: float = svm.DEFAULT_C
    pca_dim: int = DEFAULT_PCA_DIM
    clusters: int = DEFAULT_CLUSTERS
    pca_whiten: bool = False
    seed: int = 0
    feature_set: str | None = None  # None: the manifest's only feature set

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.samples is not None and self.samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.samples}")
        if self.segments is not None and self.segments < 1:
            raise ValueError(f"segment count must be >= 1, got {self.segments}")

    @property
    def is_encoder(self) -> bool:
        return self.method in _ENCODER_METHODS

    @property
    def effective_segments(self) -> int:
        if self.segments is not None:
            return self.segments
        return 1 if self.is_encoder else aggregate.DEFAULT_SEGMENTS

    def resolved_kernel_kind(self) -> str:
        if self.kernel != "auto":
            return self.kernel
        return "linear" if self.method in ("fv", "vlad") else "chi2"


def _resolve_feature_set(manifest: store.Manifest, cfg: TrainConfig) -> str:
    available = manifest.feature_sets()
    if cfg.feature_set is not None:
        if cfg.feature_set not in available:
            raise IntegrityError(
                f"feature set {cfg.feature_set!r} not in manifest ({available})"
            )
        return cfg.feature_set
    if len(available) != 1:
        raise IntegrityError(
            f"manifest has multiple feature sets {available}; pass --feature-set"
        )
    return available[0]


def _load_sequences(manifest: store.Manifest, records) -> list[np.ndarray]:
    return [
        np.asarray(store.load_feature_matrix(manifest.root / rec.path), dtype=np.float64)
        for rec in records
    ]


def _sampled(seq: np.ndarray, samples: int | None) -> np.ndarray:
    if samples is None:
        return sampling.dense_plan(seq)
    return sampling.sample_evenly(seq, samples)


def _encode_features(spec: encode.EncoderSpec, sequences, segments: int) -> np.ndarray:
    rows = []
    for seq in sequences:
        if segments > 1:
            rows.append(
                aggregate.aggregate_segmented(
                    seq, segments, lambda part: encode.encode(spec, part), method=spec.kind
                ).data
            )
        else:
            rows.append(encode.encode(spec, seq))
    return np.vstack(rows)


def _pool_features(method: str, sequences, segments: int) -> np.ndarray:
    pooler = aggregate.POOLERS[method]
    return np.vstack(
        [
            aggregate.aggregate_segmented(seq, segments, pooler, method=method).data
            for seq in sequences
        ]
    )


class _TrainLog:
    def __init__(self):
        self.lines: list[str] = []

    def add(self, text: str):
        self.lines.append(text)
        logger.info("%s", text)

    def write(self, path: Path):
        path.write_text("\n".join(self.lines) + "\n", encoding="utf-8")


def _model_stem(split: str, stream: str) -> str:
    return f"{split}__{stream}"


def train_bundle(manifest: store.Manifest, manifest_path, cfg: TrainConfig, out_dir) -> dict:
    """Train codebooks and classifiers for every (split, stream); write bundle."""
    out_dir = Path(out_dir)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    feature_set = _resolve_feature_set(manifest, cfg)
    streams = manifest.streams()
    if not streams:
        raise IntegrityError("manifest has no records")
    log = _TrainLog()
    log.add(
        f"config: method={cfg.method} samples={cfg.samples if cfg.samples is not None else 'dense'} "
        f"segments={cfg.effective_segments} kernel={cfg.resolved_kernel_kind()} C={cfg.C} "
        f"pca_dim={cfg.pca_dim} clusters={cfg.clusters} seed={cfg.seed} "
        f"feature_set={feature_set}"
    )
    log.add(
        f"defaults: C={svm.DEFAULT_C} pca_dim={DEFAULT_PCA_DIM} clusters={DEFAULT_CLUSTERS} "
        f"fusion_weights={fusion.DEFAULT_FUSION_WEIGHTS[0]}:{fusion.DEFAULT_FUSION_WEIGHTS[1]}"
    )
    if cfg.samples is not None and cfg.effective_segments >= 1:
        sizes = [length for _, length in aggregate.segment_bounds(cfg.samples, cfg.effective_segments)]
        log.add(f"segmentation: {cfg.samples} samples -> sizes {sizes}")

    meta: dict = {
        "config": {**asdict(cfg), "feature_set": feature_set},
        "manifest_hash": manifest_hash(manifest_path),
        "classes": list(manifest.classes),
        "splits": list(manifest.splits),
        "streams": streams,
        "per_stream": {},
    }

    for split in manifest.splits:
        for stream in streams:
            records = manifest.select(split, "train", stream, feature_set)
            if not records:
                raise IntegrityError(f"no training records for {split}/{stream}")
            sequences = [
                _sampled(seq, cfg.samples)
                for seq in _load_sequences(manifest, records)
            ]
            labels = np.array([rec.label for rec in records], dtype=np.int64)
            stem = _model_stem(split, stream)
            entry: dict = {}

            if cfg.is_encoder:
                stacked = np.vstack(sequences)
                stacked = codebook.subsample_rows(
                    stacked, codebook.TRAINING_ROW_CAP, subseed(cfg.seed, f"cap:{stem}")
                )
                m, d = stacked.shape
                p_eff = min(cfg.pca_dim, d, m - 1)
                if p_eff != cfg.pca_dim:
                    log.add(
                        f"[{stem}] pca dim clamped {cfg.pca_dim} -> {p_eff} "
                        f"for {m}x{d} training features"
                    )
                pca = codebook.quantized(
                    codebook.fit_pca(stacked, p_eff, whiten=cfg.pca_whiten)
                )
                projected = codebook.pca_project(pca, stacked)
                if cfg.method == "fv":
                    model = codebook.fit_gmm(
                        projected, cfg.clusters, subseed(cfg.seed, f"gmm:{stem}")
                    )
                    log.add(
                        f"[{stem}] gmm mean log-likelihood: "
                        + " ".join(repr(v) for v in model.log_likelihood_history)
                    )
                else:
                    model = codebook.fit_kmeans(
                        projected, cfg.clusters, subseed(cfg.seed, f"kmeans:{stem}")
                    )
                    log.add(
                        f"[{stem}] kmeans inertia: "
                        + " ".join(repr(v) for v in model.inertia_history)
                    )
                model = codebook.quantized(model)
                codebook.save_model(pca, models_dir / f"{stem}__pca.dovm")
                codebook.save_model(model, models_dir / f"{stem}__codebook.dovm")
                spec = encode.EncoderSpec(cfg.method, model, pca)
                features = _encode_features(spec, sequences, cfg.effective_segments)
                entry["pca_dim"] = p_eff
            else:
                features = _pool_features(cfg.method, sequences, cfg.effective_segments)

            kernel = svm.KernelSpec(cfg.resolved_kernel_kind())
            classifier = svm.train_ovr(
                features, labels, kernel, C=cfg.C, seed=subseed(cfg.seed, f"svm:{stem}")
            )
            if set(classifier.classes) != set(range(len(manifest.classes))):
                raise IntegrityError(
                    f"{split}/{stream}: training data covers classes "
                    f"{sorted(classifier.classes)}, manifest declares "
                    f"{len(manifest.classes)}"
                )
            svm.save_classifier(classifier, models_dir / f"{stem}__classifier.dovc")
            entry["gamma"] = classifier.kernel.gamma
            entry["train_videos"] = len(records)
            entry["feature_dim"] = int(features.shape[1])
            meta["per_stream"][stem] = entry
            log.add(
                f"[{stem}] trained {cfg.method} on {len(records)} videos, "
                f"feature dim {features.shape[1]}, kernel {classifier.kernel.kind} "
                f"gamma={classifier.kernel.gamma}"
            )

    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    log.write(out_dir / "train_log.txt")
    return meta


def _load_bundle_meta(bundle_dir: Path) -> dict:
    meta_path = bundle_dir / "meta.json"
    if not meta_path.exists():
        raise IntegrityError(f"{bundle_dir} is not a bundle (missing meta.json)")
    return json.loads(meta_path.read_text(encoding="utf-8"))


def _test_features_for(
    manifest: store.Manifest, cfg: TrainConfig, bundle_dir: Path, split: str, stream: str,
    feature_set: str,
):
    records = manifest.select(split, "test", stream, feature_set)
    if not records:
        raise IntegrityError(f"no test records for {split}/{stream}")
    video_ids = [rec.video_id for rec in records]
    sequences = [_sampled(seq, cfg.samples) for seq in _load_sequences(manifest, records)]
    stem = _model_stem(split, stream)
    if cfg.is_encoder:
        pca = codebook.load_model(bundle_dir / "models" / f"{stem}__pca.dovm")
        model = codebook.load_model(bundle_dir / "models" / f"{stem}__codebook.dovm")
        spec = encode.EncoderSpec(cfg.method, model, pca)
        features = _encode_features(spec, sequences, cfg.effective_segments)
    else:
        features = _pool_features(cfg.method, sequences, cfg.effective_segments)
    return features, video_ids


def _config_from_meta(meta: dict) -> TrainConfig:
    raw = dict(meta["config"])
    return TrainConfig(**raw)


def eval_bundle(
    manifest: store.Manifest,
    manifest_path,
    bundle_dir,
    weights=fusion.DEFAULT_FUSION_WEIGHTS,
    external_scores_path=None,
    external_weight: float = 1.0,
    out_dir=None,
    force: bool = False,
) -> dict:
    """Score test videos per stream, fuse, and tabulate accuracies.

    Returns {"columns": [...], "rows": [(split, {col: acc})...],
    "mean": {col: acc}} and, when out_dir is given, writes per-stream and
    fused score CSVs plus accuracy.csv with exactly the printed numbers.
    """
    bundle_dir = Path(bundle_dir)
    meta = _load_bundle_meta(bundle_dir)
    current = manifest_hash(manifest_path)
    if meta["manifest_hash"] != current:
        if not force:
            raise IntegrityError(
                "bundle was trained on a different manifest "
                f"({meta['manifest_hash'][:12]}... vs {current[:12]}...); "
                "pass force to evaluate anyway"
            )
        logger.warning("manifest hash mismatch ignored (force)")
    cfg = _config_from_meta(meta)
    feature_set = meta["config"]["feature_set"]
    streams = meta["streams"]
    if len(weights) < len(streams):
        raise ValueError(f"{len(streams)} streams but only {len(weights)} fusion weights")

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    external = None
    if external_scores_path is not None:
        external = store.load_scores(external_scores_path)

    columns = list(streams)
    if len(streams) > 1:
        columns.append("fused")
    if external is not None:
        columns.append("fused_external")

    rows = []
    for split in meta["splits"]:
        per_stream: dict[str, store.ScoreMatrix] = {}
        accs: dict[str, float] = {}
        for stream in streams:
            stem = _model_stem(split, stream)
            classifier = svm.load_classifier(bundle_dir / "models" / f"{stem}__classifier.dovc")
            features, video_ids = _test_features_for(
                manifest, cfg, bundle_dir, split, stream, feature_set
            )
            scores = svm.predict_scores(classifier, features, video_ids)
            per_stream[stream] = scores
            accs[stream] = fusion.accuracy(scores, manifest, split)
            if out_dir is not None:
                store.write_scores(scores, out_dir / f"scores__{split}__{stream}.csv")
        combined = (
            fusion.fuse([(per_stream[s], w) for s, w in zip(streams, weights)])
            if len(streams) > 1
            else per_stream[streams[0]]
        )
        if len(streams) > 1:
            accs["fused"] = fusion.accuracy(combined, manifest, split)
            if out_dir is not None:
                store.write_scores(combined, out_dir / f"scores__{split}__fused.csv")
        if external is not None:
            aligned = fusion.normalize_rows_minmax(
                fusion.align_external(external, manifest, split)
            )
            total = fusion.fuse([(combined, 1.0), (aligned, external_weight)])
            accs["fused_external"] = fusion.accuracy(total, manifest, split)
            if out_dir is not None:
                store.write_scores(total, out_dir / f"scores__{split}__fused_external.csv")
        rows.append((split, accs))

    mean_row = {
        col: fusion.mean_over_splits([accs[col] for _, accs in rows]) for col in columns
    }
    result = {"columns": columns, "rows": rows, "mean": mean_row}
    if out_dir is not None:
        (out_dir / "accuracy.csv").write_text(
            render_accuracy_csv(result), encoding="utf-8"
        )
    return result


def render_accuracy_csv(result: dict) -> str:
    lines = ["split," + ",".join(result["columns"])]
    for split, accs in result["rows"]:
        lines.append(split + "," + ",".join(repr(accs[c]) for c in result["columns"]))
    lines.append("mean," + ",".join(repr(result["mean"][c]) for c in result["columns"]))
    return "\n".join(lines) + "\n"


def render_accuracy_table(result: dict) -> str:
    width = max(21, max(len(c) for c in result["columns"]) + 2)
    header = "split".ljust(12) + "".join(c.rjust(width) for c in result["columns"])
    lines = [header]
    for split, accs in result["rows"]:
        lines.append(
            split.ljust(12) + "".join(repr(accs[c]).rjust(width) for c in result["columns"])
        )
    lines.append(
        "mean".ljust(12)
        + "".join(repr(result["mean"][c]).rjust(width) for c in result["columns"])
    )
    return "\n".join(lines)


def run_sweep(
    manifest: store.Manifest,
    manifest_path,
    axis: str,
    values: list[str],
    base_cfg: TrainConfig,
    out_dir,
    weights=fusion.DEFAULT_FUSION_WEIGHTS,
) -> dict:
    """Train + evaluate once per value; collect one row per value.

    Failed cells are recorded as ERR and do not abort the sweep.
    """
    if axis not in ("method", "samples"):
        raise ValueError(f"sweep axis must be 'method' or 'samples', got {axis!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = manifest.streams()
    columns = list(streams) + (["fused"] if len(streams) > 1 else [])
    rows = []
    for value in values:
        if axis == "method":
            cfg = _replace_cfg(base_cfg, method=value)
        else:
            samples = None if value == sampling.DENSE else int(value)
            cfg = _replace_cfg(base_cfg, samples=samples)
        bundle = out_dir / f"bundle__{axis}__{value}"
        try:
            train_bundle(manifest, manifest_path, cfg, bundle)
            result = eval_bundle(
                manifest, manifest_path, bundle, weights=weights,
                out_dir=out_dir / f"eval__{axis}__{value}",
            )
            rows.append((value, {c: result["mean"][c] for c in columns}))
        except Exception as exc:  # noqa: BLE001 - cell failures must not kill the sweep
            logger.error("sweep cell %s=%s failed: %s", axis, value, exc)
            rows.append((value, None))
    csv_lines = [axis + "," + ",".join(columns)]
    for value, accs in rows:
        if accs is None:
            csv_lines.append(value + "," + ",".join("ERR" for _ in columns))
        else:
            csv_lines.append(value + "," + ",".join(repr(accs[c]) for c in columns))
    csv_text = "\n".join(csv_lines) + "\n"
    (out_dir / "sweep.csv").write_text(csv_text, encoding="utf-8")
    return {"columns": columns, "rows": rows, "csv": csv_text}


def _replace_cfg(cfg: TrainConfig, **changes) -> TrainConfig:
    data = asdict(cfg)
    data.update(changes)
    return TrainConfig(**data)
