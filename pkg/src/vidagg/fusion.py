"""Weighted late fusion of score matrices and accuracy evaluation."""

from __future__ import annotations

import numpy as np

from vidagg.errors import IntegrityError
from vidagg.store import Manifest, ScoreMatrix

#: Stream fusion weights from the two-stream recipe: spatial 1, temporal 1.5.
DEFAULT_FUSION_WEIGHTS = (1.0, 1.5)


def fuse(items) -> ScoreMatrix:
    """Weighted sum of score matrices: sum_i w_i * S_i, no renormalization.

    All matrices must share video id order and class count; weights must be
    non-negative and not all zero.
    """
    items = list(items)
    if not items:
        raise ValueError("need at least one score matrix")
    weights = [w for _, w in items]
    if any(w < 0 for w in weights):
        raise ValueError(f"weights must be non-negative, got {weights}")
    if not any(w > 0 for w in weights):
        raise ValueError("at least one weight must be positive")
    first = items[0][0]
    total = np.zeros_like(first.scores)
    for matrix, weight in items:
        if matrix.video_ids != first.video_ids:
            raise IntegrityError("score matrices have mismatched video id order")
        if matrix.class_count != first.class_count:
            raise IntegrityError(
                f"class count mismatch: {matrix.class_count} != {first.class_count}"
            )
        total = total + weight * matrix.scores
    return ScoreMatrix(first.video_ids, total)


def align_external(scores: ScoreMatrix, manifest: Manifest, split: str) -> ScoreMatrix:
    """Reorder external scores to the manifest's test-video order."""
    want = manifest.video_ids(split, "test")
    if not want:
        raise IntegrityError(f"split {split!r} has no test videos")
    if scores.class_count != len(manifest.classes):
        raise IntegrityError(
            f"external scores have {scores.class_count} classes, "
            f"manifest declares {len(manifest.classes)}"
        )
    index = {vid: i for i, vid in enumerate(scores.video_ids)}
    missing = [vid for vid in want if vid not in index]
    if missing:
        raise IntegrityError(f"external scores missing videos: {missing}")
    rows = np.array([index[vid] for vid in want], dtype=np.int64)
    return ScoreMatrix(tuple(want), scores.scores[rows])


def normalize_rows_minmax(scores: ScoreMatrix) -> ScoreMatrix:
    """Min-max each row to [0, 1]; a constant row becomes uniform 0.5."""
    lo = scores.scores.min(axis=1, keepdims=True)
    hi = scores.scores.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.where(span > 0, (scores.scores - lo) / np.where(span > 0, span, 1.0), 0.5)
    return ScoreMatrix(scores.video_ids, out)


def accuracy(scores: ScoreMatrix, manifest: Manifest, split: str) -> float:
    """Fraction of the split's test videos whose argmax matches the label.

    Argmax ties break toward the lowest class index.
    """
    want = manifest.video_ids(split, "test")
    if not want:
        raise IntegrityError(f"split {split!r} has no test videos")
    index = {vid: i for i, vid in enumerate(scores.video_ids)}
    missing = [vid for vid in want if vid not in index]
    if missing:
        raise IntegrityError(f"scores do not cover test videos: {missing}")
    if scores.class_count != len(manifest.classes):
        raise IntegrityError(
            f"scores have {scores.class_count} classes, "
            f"manifest declares {len(manifest.classes)}"
        )
    labels = manifest.labels_for(want)
    predicted = np.argmax(scores.scores[[index[v] for v in want]], axis=1)
    return float((predicted == labels).mean())


def mean_over_splits(values) -> float:
    values = list(values)
    if not values:
        raise ValueError("need at least one per-split accuracy")
    return float(np.mean(values))
