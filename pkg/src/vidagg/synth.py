"""Synthetic two-stream datasets with controllable label noise.

Each class and stream gets a random prototype vector; every video carries
one contiguous action segment (a rho-fraction of its frames, at a random
offset) drawn around its class prototype, while the remaining frames are
drawn around a background prototype shared by all classes. The shared
background is what makes frame-level labels unreliable: most frames of a
video carry no class information. Generation is fully deterministic per
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vidagg.store import (
    Manifest,
    VideoRecord,
    load_manifest,
    write_feature_matrix,
    write_manifest,
)

STREAMS = ("spatial", "temporal")


@dataclass(frozen=True)
class SynthConfig:
    classes: int
    videos_per_class: int
    frames: int  # local features per video
    dim: int
    action_fraction: float  # rho in (0, 1]
    noise_scale: float  # sigma_n >= 0
    seed: int = 0
    feature_set: str = "synth"
    split: str = "split1"

    def __post_init__(self):
        if min(self.classes, self.videos_per_class, self.frames, self.dim) < 1:
            raise ValueError("classes, videos_per_class, frames and dim must be >= 1")
        if not 0.0 < self.action_fraction <= 1.0:
            raise ValueError(
                f"action fraction must be in (0, 1], got {self.action_fraction}"
            )
        if self.noise_scale < 0:
            raise ValueError(f"noise scale must be >= 0, got {self.noise_scale}")

    @property
    def action_frames(self) -> int:
        return min(self.frames, max(1, math.floor(self.action_fraction * self.frames + 0.5)))


def generate(config: SynthConfig, out_dir) -> Manifest:
    """Write feature files plus a manifest under out_dir; return the manifest.

    Draw order (one RNG, fixed): per-class train/test permutations, class
    prototypes, background prototypes, then per video its action offset and
    per-stream frame noise. The split is 50/50 per class (odd counts give
    the extra video to train).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(exist_ok=True)  # parent must already exist
    feature_dir = out_dir / "features"
    feature_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(config.seed)
    c, v, n, d = config.classes, config.videos_per_class, config.frames, config.dim

    train_count = (v + 1) // 2
    roles_by_class = []
    for _ in range(c):
        order = rng.permutation(v)
        roles = np.array(["test"] * v, dtype=object)
        roles[order[:train_count]] = "train"
        roles_by_class.append(roles)

    prototypes = rng.normal(0.0, 1.0, size=(len(STREAMS), c, d))
    background = rng.normal(0.0, 1.0, size=(len(STREAMS), d))

    length = config.action_frames
    records = []
    for cls in range(c):
        for vid in range(v):
            video_id = f"c{cls:02d}_v{vid:03d}"
            offset = int(rng.integers(0, n - length + 1))
            for s, stream in enumerate(STREAMS):
                frames = np.tile(background[s], (n, 1))
                frames[offset : offset + length] = prototypes[s, cls]
                frames += rng.normal(0.0, config.noise_scale, size=(n, d))
                rel = f"features/{video_id}_{stream}.dovf"
                write_feature_matrix(frames.astype(np.float32), out_dir / rel)
                records.append(
                    VideoRecord(
                        video_id=video_id,
                        label=cls,
                        split=config.split,
                        role=str(roles_by_class[cls][vid]),
                        stream=stream,
                        feature_set=config.feature_set,
                        path=rel,
                    )
                )

    manifest = Manifest(
        classes=tuple(f"class{i:02d}" for i in range(c)),
        splits=(config.split,),
        records=tuple(records),
        root=out_dir,
    )
    manifest.validate()
    write_manifest(manifest, out_dir / "manifest.txt")
    return load_manifest(out_dir / "manifest.txt")
