"""One-vs-rest C-SVM with chi-square and linear kernels.

The binary subproblems are solved in the dual by SMO with maximal-
violating-pair working-set selection, stopping at KKT gap 1e-3 (capped at
1e5 pair updates). The default C is 100. The chi-square kernel is the
exponential variant exp(-gamma * chi2(x, y)); the additive variant
sum 2xy/(x+y+eps) is available as ``chi2_additive``. When gamma is left
unresolved it defaults to 1 / (mean pairwise chi-square distance) over a
seeded subsample of the training features.

Features are normalized per kernel before training and the same transform
is reapplied at prediction time: L2 per row for the linear kernel; for the
chi-square family, a global shift by the (negative) training minimum, a
clamp at zero, then L1 per row.

Trained ensembles serialize to a binary format (magic ``DOVC``) with a
float64 payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from vidagg._core import chi2_distance_matrix
from vidagg.errors import ConvergenceError, FormatError
from vidagg.store import ScoreMatrix

CHI2_EPSILON = 1e-10
DEFAULT_C = 100.0
KKT_TOL = 1e-3
MAX_SMO_ITER = 100_000
GAMMA_SAMPLE_CAP = 1000

KERNEL_KINDS = ("linear", "chi2", "chi2_additive")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    gamma: float | None = None  # chi2 only; None resolves from training data
    epsilon: float = CHI2_EPSILON

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class FeatureTransform:
    mode: str  # "l2" | "shift_l1"
    shift: float = 0.0


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray  # (n_sv, dim)
    coef: np.ndarray  # (n_sv,), alpha_i * y_i
    bias: float


@dataclass(frozen=True)
class TrainedClassifier:
    classes: tuple[int, ...]
    binaries: tuple[BinarySvm, ...]
    kernel: KernelSpec
    transform: FeatureTransform
    C: float = DEFAULT_C


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"expected equal-length vectors, got {x.shape} and {y.shape}")
    return x, y


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Kernel value for a single pair of vectors."""
    x, y = _check_pair(x, y)
    if spec.kind == "linear":
        return float(x @ y)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("chi-square kernels require non-negative inputs")
    if spec.gamma is None and spec.kind == "chi2":
        raise ValueError("gamma unresolved; call resolve_gamma or set it explicitly")
    if spec.kind == "chi2":
        d = ((x - y) ** 2 / (x + y + spec.epsilon)).sum()
        return float(np.exp(-spec.gamma * d))
    return float((2.0 * x * y / (x + y + spec.epsilon)).sum())


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel values for all row pairs, shape (len(a), len(b))."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} != {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("chi-square kernels require non-negative inputs")
    if spec.kind == "chi2":
        if spec.gamma is None:
            raise ValueError("gamma unresolved; call resolve_gamma or set it explicitly")
        return np.exp(-spec.gamma * chi2_distance_matrix(a, b, spec.epsilon))
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for i in range(a.shape[0]):
        out[i] = (2.0 * a[i][None, :] * b / (a[i][None, :] + b + spec.epsilon)).sum(axis=1)
    return out


def resolve_gamma(features: np.ndarray, seed=0, epsilon: float = CHI2_EPSILON) -> float:
    """1 / mean pairwise chi-square distance, over at most 1000 sampled rows.

    Identical features (mean distance 0) fall back to gamma = 1.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ValueError(f"need at least 2 feature rows, got shape {features.shape}")
    if features.shape[0] > GAMMA_SAMPLE_CAP:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(features.shape[0], size=GAMMA_SAMPLE_CAP, replace=False))
        features = features[idx]
    dist = chi2_distance_matrix(features, features, epsilon)
    n = dist.shape[0]
    mean = dist[np.triu_indices(n, k=1)].mean()
    return 1.0 / mean if mean > 0 else 1.0


def fit_feature_transform(features: np.ndarray, kernel: KernelSpec) -> FeatureTransform:
    """Transform parameters from training features only."""
    features = np.asarray(features, dtype=np.float64)
    if kernel.kind == "linear":
        return FeatureTransform(mode="l2")
    lowest = float(features.min())
    return FeatureTransform(mode="shift_l1", shift=-lowest if lowest < 0 else 0.0)


def apply_feature_transform(transform: FeatureTransform, features: np.ndarray) -> np.ndarray:
    """Normalize rows; zero rows are left as zero."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    rows = features[None, :] if single else features
    if transform.mode == "l2":
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        out = rows / np.where(norms > 0, norms, 1.0)
    elif transform.mode == "shift_l1":
        # the training shift, not the test minimum; clamp guards test rows
        # that dip below the training minimum
        out = np.maximum(rows + transform.shift, 0.0)
        sums = out.sum(axis=1, keepdims=True)
        out = out / np.where(sums > 0, sums, 1.0)
    else:
        raise ValueError(f"unknown transform mode {transform.mode!r}")
    return out[0] if single else out


def smo_solve(
    kmat: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = KKT_TOL,
    max_iter: int = MAX_SMO_ITER,
) -> tuple[np.ndarray, float, int]:
    """Solve the binary C-SVM dual for a precomputed kernel matrix.

    min 0.5 a'Qa - e'a  s.t.  0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij.

    Maximal-violating-pair selection; returns (alpha, bias, iterations).
    Raises ConvergenceError when the KKT gap is still above tol after
    max_iter pair updates.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if kmat.shape != (n, n):
        raise ValueError(f"kernel matrix {kmat.shape} does not match {n} labels")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +1/-1")
    alpha = np.zeros(n, dtype=np.float64)
    grad = -np.ones(n, dtype=np.float64)  # gradient of the dual objective
    yk = y[:, None] * kmat * y[None, :]  # Q
    for it in range(max_iter):
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        up_idx = np.flatnonzero(up)
        low_idx = np.flatnonzero(low)
        i = up_idx[np.argmax(neg_yg[up_idx])]
        j = low_idx[np.argmin(neg_yg[low_idx])]
        gap = neg_yg[i] - neg_yg[j]
        if gap <= tol:
            return alpha, 0.5 * (neg_yg[i] + neg_yg[j]), it
        quad = max(kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j], 1e-12)
        step = gap / quad
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min(step, room_i, room_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        grad += step * (y[i] * yk[:, i] - y[j] * yk[:, j])
    raise ConvergenceError(
        f"SMO did not reach KKT gap {tol} within {max_iter} iterations"
    )


def kkt_residual(
    kmat: np.ndarray, y: np.ndarray, alpha: np.ndarray, bias: float, C: float
) -> float:
    """Worst KKT violation, with margins recomputed from scratch.

    alpha=0 rows need y*f >= 1, bound rows y*f <= 1, free rows y*f = 1.
    """
    y = np.asarray(y, dtype=np.float64)
    f = kmat @ (alpha * y) + bias
    yf = y * f
    res = np.zeros_like(yf)
    at_zero = alpha <= 1e-12
    at_c = alpha >= C - 1e-12
    free = ~(at_zero | at_c)
    res[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    res[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
    res[free] = np.abs(yf[free] - 1.0)
    return float(res.max()) if res.size else 0.0


def train_ovr(
    features: np.ndarray,
    labels: np.ndarray,
    kernel: KernelSpec,
    C: float = DEFAULT_C,
    seed=0,
) -> TrainedClassifier:
    """One binary C-SVM per class (class vs rest), sharing one kernel matrix."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ValueError(
            f"features {features.shape} do not match {labels.shape[0]} labels"
        )
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    classes = tuple(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    transform = fit_feature_transform(features, kernel)
    x = apply_feature_transform(transform, features)
    if kernel.kind == "chi2" and kernel.gamma is None:
        kernel = replace(kernel, gamma=resolve_gamma(x, seed=seed, epsilon=kernel.epsilon))
    kmat = kernel_matrix(kernel, x, x)
    binaries = []
    for cls in classes:
        y = np.where(labels == cls, 1.0, -1.0)
        alpha, bias, _ = smo_solve(kmat, y, C)
        sv = alpha > 1e-12
        binaries.append(BinarySvm(x[sv].copy(), (alpha * y)[sv], float(bias)))
    return TrainedClassifier(classes, tuple(binaries), kernel, transform, C)


def decision_values(model: TrainedClassifier, features: np.ndarray) -> np.ndarray:
    """Raw per-class decision values f_c(x), shape (n, n_classes)."""
    x = apply_feature_transform(model.transform, np.asarray(features, dtype=np.float64))
    out = np.empty((x.shape[0], len(model.binaries)), dtype=np.float64)
    for c, svm in enumerate(model.binaries):
        out[:, c] = kernel_matrix(model.kernel, x, svm.support_vectors) @ svm.coef + svm.bias
    return out


def _softmax_rows(a: np.ndarray) -> np.ndarray:
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_scores(
    model: TrainedClassifier, features: np.ndarray, video_ids
) -> ScoreMatrix:
    """Per-class scores: softmax over decision values, one row per video."""
    return ScoreMatrix(tuple(video_ids), _softmax_rows(decision_values(model, features)))


# -- serialization --------------------------------------------------------

CLASSIFIER_MAGIC = b"DOVC"
CLASSIFIER_VERSION = 1
_KERNEL_TAGS = {"linear": 0, "chi2": 1, "chi2_additive": 2}
_TRANSFORM_TAGS = {"l2": 0, "shift_l1": 1}


def save_classifier(model: TrainedClassifier, path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(CLASSIFIER_MAGIC)
        fh.write(struct.pack("<B", CLASSIFIER_VERSION))
        gamma = model.kernel.gamma if model.kernel.gamma is not None else -1.0
        fh.write(
            struct.pack(
                "<BddBdd",
                _KERNEL_TAGS[model.kernel.kind],
                gamma,
                model.kernel.epsilon,
                _TRANSFORM_TAGS[model.transform.mode],
                model.transform.shift,
                model.C,
            )
        )
        fh.write(struct.pack("<I", len(model.classes)))
        for cls, svm in zip(model.classes, model.binaries):
            n_sv, dim = svm.support_vectors.shape
            fh.write(struct.pack("<iIId", cls, n_sv, dim, svm.bias))
            fh.write(np.ascontiguousarray(svm.coef, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(svm.support_vectors, dtype="<f8").tobytes())


def load_classifier(path) -> TrainedClassifier:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 5 or raw[:4] != CLASSIFIER_MAGIC:
        raise FormatError(f"{path}: not a classifier file")
    if raw[4] != CLASSIFIER_VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]}")
    try:
        ktag, gamma, eps, ttag, shift, c_value = struct.unpack_from("<BddBdd", raw, 5)
        off = 5 + struct.calcsize("<BddBdd")
        (n_classes,) = struct.unpack_from("<I", raw, off)
        off += 4
        kinds = {v: k for k, v in _KERNEL_TAGS.items()}
        modes = {v: k for k, v in _TRANSFORM_TAGS.items()}
        classes = []
        binaries = []
        for _ in range(n_classes):
            cls, n_sv, dim, bias = struct.unpack_from("<iIId", raw, off)
            off += struct.calcsize("<iIId")
            coef = np.frombuffer(raw, dtype="<f8", count=n_sv, offset=off).copy()
            off += 8 * n_sv
            sv = (
                np.frombuffer(raw, dtype="<f8", count=n_sv * dim, offset=off)
                .reshape(n_sv, dim)
                .copy()
            )
            off += 8 * n_sv * dim
            classes.append(int(cls))
            binaries.append(BinarySvm(sv, coef, float(bias)))
        kernel = KernelSpec(
            kinds[ktag], gamma=None if gamma < 0 else float(gamma), epsilon=float(eps)
        )
        transform = FeatureTransform(mode=modes[ttag], shift=float(shift))
    except (struct.error, KeyError) as exc:
        raise FormatError(f"{path}: corrupt classifier file ({exc})") from None
    return TrainedClassifier(tuple(classes), tuple(binaries), kernel, transform, float(c_value))
