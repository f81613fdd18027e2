"""On-disk dataset model: feature matrix files, manifests, score CSVs.

Formats:
  feature matrix  magic ``DOVF``, version u8=1, u32 n, u32 d, then n*d
                  float32 values, little-endian, row-major
  manifest        UTF-8 text; ``#classes: a,b,...`` header, ``#split NAME``
                  declarations, then one record per line:
                  ``video_id,label,split,train|test,spatial|temporal,feature_set,relpath``
  scores          CSV with header ``video_id,score_0,...,score_{c-1}``

Loaded objects are immutable; share them freely across threads.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vidagg.errors import FormatError, IntegrityError

FEATURE_MAGIC = b"DOVF"
FEATURE_VERSION = 1

STREAMS = ("spatial", "temporal")
ROLES = ("train", "test")


def load_feature_matrix(path) -> np.ndarray:
    """Read a feature matrix file into an (n, d) float32 array."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 13:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    version = raw[4]
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    n, d = struct.unpack_from("<II", raw, 5)
    if n == 0 or d == 0:
        raise FormatError(f"{path}: empty matrix ({n}x{d})")
    expected = 13 + 4 * n * d
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - 13} bytes, expected {expected - 13}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=13).reshape(n, d)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite values in payload")
    return np.ascontiguousarray(data)


def write_feature_matrix(matrix: np.ndarray, path) -> None:
    """Write an (n, d) matrix; float32 values round-trip bit-exactly."""
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite values")
    n, d = m.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<BII", FEATURE_VERSION, n, d))
        fh.write(m.astype("<f4", copy=False).tobytes())


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    label: int
    split: str
    role: str  # train | test
    stream: str  # spatial | temporal
    feature_set: str
    path: str  # relative to the manifest directory

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.video_id, self.stream, self.feature_set)


@dataclass(frozen=True)
class Manifest:
    classes: tuple[str, ...]
    splits: tuple[str, ...]
    records: tuple[VideoRecord, ...]
    root: Path = field(default=Path("."), compare=False)

    def validate(self) -> None:
        seen: set[tuple[str, str, str]] = set()
        labels: dict[str, int] = {}
        declared = set(self.splits)
        for rec in self.records:
            if rec.key in seen:
                raise IntegrityError(f"duplicate record key {rec.key}")
            seen.add(rec.key)
            if not 0 <= rec.label < len(self.classes):
                raise IntegrityError(
                    f"{rec.video_id}: label {rec.label} out of range "
                    f"for {len(self.classes)} classes"
                )
            if rec.split not in declared:
                raise IntegrityError(f"{rec.video_id}: undeclared split {rec.split!r}")
            prev = labels.setdefault(rec.video_id, rec.label)
            if prev != rec.label:
                raise IntegrityError(
                    f"{rec.video_id}: conflicting labels {prev} and {rec.label}"
                )
        for split in self.splits:
            train = {r.video_id for r in self.records if r.split == split and r.role == "train"}
            test = {r.video_id for r in self.records if r.split == split and r.role == "test"}
            overlap = train & test
            if overlap:
                raise IntegrityError(
                    f"split {split!r}: videos in both train and test: {sorted(overlap)[:5]}"
                )

    def select(self, split: str, role: str, stream: str | None = None,
               feature_set: str | None = None) -> list[VideoRecord]:
        """Records of one split/role, in manifest order, optionally filtered."""
        out = []
        for rec in self.records:
            if rec.split != split or rec.role != role:
                continue
            if stream is not None and rec.stream != stream:
                continue
            if feature_set is not None and rec.feature_set != feature_set:
                continue
            out.append(rec)
        return out

    def video_ids(self, split: str, role: str) -> list[str]:
        """Unique video ids of a split/role, in first-appearance order."""
        seen: dict[str, None] = {}
        for rec in self.records:
            if rec.split == split and rec.role == role:
                seen.setdefault(rec.video_id, None)
        return list(seen)

    def labels_for(self, video_ids) -> np.ndarray:
        table = {r.video_id: r.label for r in self.records}
        try:
            return np.array([table[v] for v in video_ids], dtype=np.int64)
        except KeyError as exc:
            raise IntegrityError(f"video id {exc.args[0]!r} not in manifest") from None

    def streams(self) -> list[str]:
        present = {r.stream for r in self.records}
        return [s for s in STREAMS if s in present]

    def feature_sets(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.feature_set, None)
        return list(seen)


def _parse_record(line: str, lineno: int, path: Path) -> VideoRecord:
    parts = line.split(",")
    if len(parts) != 7:
        raise FormatError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
    video_id, label_s, split, role, stream, feature_set, rel = (p.strip() for p in parts)
    if not video_id:
        raise FormatError(f"{path}:{lineno}: empty video_id")
    try:
        label = int(label_s)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: label {label_s!r} is not an integer") from None
    if label < 0:
        raise FormatError(f"{path}:{lineno}: negative label {label}")
    if role not in ROLES:
        raise FormatError(f"{path}:{lineno}: role must be train|test, got {role!r}")
    if stream not in STREAMS:
        raise FormatError(f"{path}:{lineno}: stream must be spatial|temporal, got {stream!r}")
    return VideoRecord(video_id, label, split, role, stream, feature_set, rel)


def load_manifest(path) -> Manifest:
    """Parse and validate a manifest file."""
    path = Path(path)
    classes: tuple[str, ...] | None = None
    splits: list[str] = []
    records: list[VideoRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#classes:"):
                if classes is not None:
                    raise FormatError(f"{path}:{lineno}: duplicate #classes header")
                names = [c.strip() for c in line[len("#classes:"):].split(",")]
                if not names or any(not n for n in names):
                    raise FormatError(f"{path}:{lineno}: malformed class list")
                classes = tuple(names)
            elif line.startswith("#split "):
                name = line[len("#split "):].strip()
                if not name:
                    raise FormatError(f"{path}:{lineno}: empty split name")
                if name in splits:
                    raise FormatError(f"{path}:{lineno}: duplicate split {name!r}")
                splits.append(name)
            elif line.startswith("#"):
                raise FormatError(f"{path}:{lineno}: unknown directive {line.split()[0]!r}")
            else:
                records.append(_parse_record(line, lineno, path))
    if classes is None:
        raise FormatError(f"{path}: missing #classes header")
    manifest = Manifest(classes, tuple(splits), tuple(records), root=path.parent)
    manifest.validate()
    return manifest


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    lines = ["#classes: " + ",".join(manifest.classes)]
    lines += [f"#split {s}" for s in manifest.splits]
    for r in manifest.records:
        lines.append(
            f"{r.video_id},{r.label},{r.split},{r.role},{r.stream},{r.feature_set},{r.path}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ScoreMatrix:
    video_ids: tuple[str, ...]
    scores: np.ndarray  # (len(video_ids), class_count) float64

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 2 or scores.shape[0] != len(self.video_ids):
            raise ValueError(
                f"scores shape {scores.shape} does not match {len(self.video_ids)} video ids"
            )
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores contain non-finite values")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "video_ids", tuple(self.video_ids))

    @property
    def class_count(self) -> int:
        return self.scores.shape[1]

    def row(self, video_id: str) -> np.ndarray:
        try:
            return self.scores[self.video_ids.index(video_id)]
        except ValueError:
            raise IntegrityError(f"video id {video_id!r} not in score matrix") from None


def load_scores(path) -> ScoreMatrix:
    """Read a score CSV into a ScoreMatrix."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "video_id":
            raise FormatError(f"{path}:1: expected header 'video_id,score_0,...'")
        width = len(header)
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise FormatError(
                    f"{path}:{lineno}: ragged row ({len(row)} fields, header has {width})"
                )
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric score") from None
    if not ids:
        raise FormatError(f"{path}: no score rows")
    scores = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise FormatError(f"{path}: non-finite score values")
    return ScoreMatrix(tuple(ids), scores)


def write_scores(matrix: ScoreMatrix, path) -> None:
    """Write a score CSV; values use repr so re-parsing is exact."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id"] + [f"score_{i}" for i in range(matrix.class_count)])
        for vid, row in zip(matrix.video_ids, matrix.scores):
            writer.writerow([vid] + [repr(float(v)) for v in row])
