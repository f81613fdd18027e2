"""Pooling of local feature sequences into fixed-length global features.

Poolers map an (n, d) sequence to a vector; ``aggregate_segmented`` wraps
any of them (or an encoder closure) over contiguous temporal segments and
concatenates the per-segment outputs. Standard deviations are population
(divide by n) so a single row yields zeros rather than NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_SEGMENTS = 3


@dataclass(frozen=True)
class GlobalFeature:
    """Aggregated per-video feature with provenance tags."""

    data: np.ndarray
    method: str
    segments: int = 1
    video_id: str = ""
    stream: str = ""
    feature_set: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 1:
            raise ValueError(f"global feature must be 1-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("global feature contains non-finite values")
        object.__setattr__(self, "data", data)


def _check_seq(seq) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, d) sequence, got shape {seq.shape}")
    return seq


def pool_mean(seq: np.ndarray) -> np.ndarray:
    return _check_seq(seq).mean(axis=0)


def pool_max(seq: np.ndarray) -> np.ndarray:
    return _check_seq(seq).max(axis=0)


def pool_mean_std(seq: np.ndarray) -> np.ndarray:
    """Per-dimension mean followed by per-dimension population std."""
    seq = _check_seq(seq)
    return np.concatenate([seq.mean(axis=0), seq.std(axis=0)])


POOLERS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "mean": pool_mean,
    "max": pool_max,
    "mean_std": pool_mean_std,
}


def segment_bounds(n: int, s: int) -> list[tuple[int, int]]:
    """Split n items into s contiguous (start, length) spans.

    Outer segments get floor(n/s) items; interior segments absorb the
    remainder, centermost first. For s=3 this gives the 8/9/8 split of 25.
    """
    if s < 1:
        raise ValueError(f"segment count must be >= 1, got {s}")
    if n < s:
        raise ValueError(f"cannot split {n} items into {s} segments")
    base = n // s
    sizes = [base] * s
    extra = n - base * s
    if extra:
        interior = list(range(1, s - 1)) if s > 2 else list(range(s))
        center = (s - 1) / 2.0
        interior.sort(key=lambda i: (abs(i - center), i))
        while extra:
            for i in interior:
                if not extra:
                    break
                sizes[i] += 1
                extra -= 1
    bounds = []
    start = 0
    for size in sizes:
        bounds.append((start, size))
        start += size
    return bounds


def aggregate_segmented(
    seq: np.ndarray,
    segments: int,
    pooler: Callable[[np.ndarray], np.ndarray],
    method: str = "",
    **tags,
) -> GlobalFeature:
    """Apply pooler per temporal segment and concatenate the outputs."""
    seq = _check_seq(seq)
    parts = [
        pooler(seq[start : start + length])
        for start, length in segment_bounds(seq.shape[0], segments)
    ]
    return GlobalFeature(
        data=np.concatenate(parts), method=method, segments=segments, **tags
    )
