"""Unsupervised models backing the encoders: PCA, k-means, diagonal GMM.

All fits are deterministic for a fixed seed and record their per-iteration
objective (inertia / mean log-likelihood), which the training log exposes.
Monotonicity of those objectives is checked at every step and a violation
beyond 1e-9 raises, since it indicates a numerical defect rather than a
modelling choice.

Trained models serialize to a small binary format (magic ``DOVM``) with a
float32 payload; reloading therefore quantizes parameters to float32
precision. Objective histories are training-time metadata and are not
serialized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vidagg._core import gmm_log_joint, sqdist_matrix
from vidagg.errors import FormatError

MODEL_MAGIC = b"DOVM"
MODEL_VERSION = 1
_TYPE_PCA = 1
_TYPE_KMEANS = 2
_TYPE_GMM = 3

VARIANCE_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-4
KMEANS_TOL = 1e-6
GMM_REL_TOL = 1e-6
MAX_ITER = 100
MONOTONE_TOL = 1e-9

#: Cap on codebook training rows; larger sets are uniformly subsampled.
TRAINING_ROW_CAP = 200_000


def subsample_rows(data: np.ndarray, cap: int, seed) -> np.ndarray:
    """Uniform row subsample (original order kept) when data exceeds cap."""
    data = np.asarray(data)
    if data.shape[0] <= cap:
        return data
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(data.shape[0], size=cap, replace=False))
    return data[idx]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    basis: np.ndarray  # (p, d), orthonormal rows, decreasing variance
    explained_variance: np.ndarray  # (p,), population convention
    whiten: bool = False

    @property
    def input_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def output_dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class KmeansModel:
    centroids: np.ndarray  # (k, p)
    inertia: float
    inertia_history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # (k,), simplex
    means: np.ndarray  # (k, p)
    variances: np.ndarray  # (k, p), diagonal, floored
    log_likelihood: float  # final mean per-point log-likelihood
    log_likelihood_history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def fit_pca(data: np.ndarray, p: int, whiten: bool = False) -> PcaModel:
    """Top-p principal directions of mean-centered data via SVD.

    Requires 1 <= p <= min(m-1, d). Zero-variance data yields an arbitrary
    orthonormal basis with zero explained variances.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError(f"need at least 2 rows, got shape {data.shape}")
    m, d = data.shape
    if not 1 <= p <= min(m - 1, d):
        raise ValueError(f"target dim {p} outside [1, {min(m - 1, d)}] for {m}x{d} data")
    mean = data.mean(axis=0)
    centered = data - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:p].copy()
    # deterministic sign: the largest-magnitude entry of each row is positive
    for row in basis:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    explained = svals[:p] ** 2 / m
    return PcaModel(mean=mean, basis=basis, explained_variance=explained, whiten=whiten)


def pca_project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project a vector or row matrix onto the PCA basis."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.shape[1] != model.input_dim:
        raise ValueError(f"dimension mismatch: {rows.shape[1]} != {model.input_dim}")
    out = (rows - model.mean) @ model.basis.T
    if model.whiten:
        out = out / np.sqrt(model.explained_variance + 1e-12)
    return out[0] if single else out


def _plus_plus_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; falls back to uniform picks when all distances are 0."""
    m = data.shape[0]
    chosen = [int(rng.integers(m))]
    d2 = sqdist_matrix(data, data[chosen[-1]][None, :])[:, 0]
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(m, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(m), np.array(chosen, dtype=np.int64))
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d2 = np.minimum(d2, sqdist_matrix(data, data[idx][None, :])[:, 0])
    return data[np.array(chosen, dtype=np.int64)].copy()


def _exact_inertia(data, centroids, assign) -> float:
    diff = data - centroids[assign]
    return float(np.einsum("ij,ij->", diff, diff))


def _assign_with_repair(data, centroids):
    """Nearest-centroid assignment; empty clusters steal the farthest point."""
    assign = np.argmin(sqdist_matrix(data, centroids), axis=1)
    counts = np.bincount(assign, minlength=centroids.shape[0])
    if np.any(counts == 0):
        diff = data - centroids[assign]
        dist_own = np.einsum("ij,ij->i", diff, diff)
        for c in np.flatnonzero(counts == 0):
            idx = int(np.argmax(dist_own))
            centroids[c] = data[idx]
            assign[idx] = c
            dist_own[idx] = 0.0
    return assign, centroids


def fit_kmeans(data: np.ndarray, k: int, seed) -> KmeansModel:
    """Lloyd's algorithm with k-means++ init.

    Stops when the largest centroid movement falls below 1e-6 or after 100
    iterations. Inertia is recorded once per iteration (after assignment)
    and must be non-increasing.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"expected (m, p) data, got shape {data.shape}")
    m = data.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"cluster count {k} outside [1, {m}]")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(data, k, rng)
    history: list[float] = []
    for _ in range(MAX_ITER):
        assign, centroids = _assign_with_repair(data, centroids)
        inertia = _exact_inertia(data, centroids, assign)
        if history and inertia > history[-1] + MONOTONE_TOL:
            raise RuntimeError(
                f"k-means inertia increased: {history[-1]!r} -> {inertia!r}"
            )
        history.append(inertia)
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            new_centroids[c] = data[assign == c].mean(axis=0)
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        if shift < KMEANS_TOL:
            break
        centroids = new_centroids
    return KmeansModel(
        centroids=centroids, inertia=history[-1], inertia_history=tuple(history)
    )


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    peak = a.max(axis=1, keepdims=True)
    return (peak + np.log(np.exp(a - peak).sum(axis=1, keepdims=True)))[:, 0]


def fit_gmm(data: np.ndarray, k: int, seed) -> GmmModel:
    """Diagonal-covariance EM initialized from a k-means fit.

    Initial means are the centroids, variances the per-cluster population
    variances (floored), weights the cluster fractions (floored then
    renormalized). EM stops when the relative improvement of the mean
    per-point log-likelihood drops below 1e-6 or after 100 iterations; the
    log-likelihood must never decrease by more than 1e-9.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"expected (m, p) data, got shape {data.shape}")
    m, p = data.shape
    if not 1 <= k <= m:
        raise ValueError(f"component count {k} outside [1, {m}]")

    km = fit_kmeans(data, k, seed)
    assign = np.argmin(sqdist_matrix(data, km.centroids), axis=1)
    means = km.centroids.copy()
    variances = np.empty((k, p), dtype=np.float64)
    counts = np.empty(k, dtype=np.float64)
    for c in range(k):
        members = data[assign == c]
        counts[c] = members.shape[0]
        variances[c] = members.var(axis=0) if members.shape[0] else 0.0
    variances = np.maximum(variances, VARIANCE_FLOOR)
    weights = np.maximum(counts / m, WEIGHT_FLOOR)
    weights /= weights.sum()

    history: list[float] = []
    for it in range(MAX_ITER):
        log_joint = gmm_log_joint(data, means, variances, np.log(weights))
        log_norm = _logsumexp_rows(log_joint)
        ll = float(log_norm.mean())
        converged = False
        if history:
            if ll < history[-1] - MONOTONE_TOL:
                raise RuntimeError(
                    f"GMM log-likelihood decreased: {history[-1]!r} -> {ll!r}"
                )
            converged = abs(ll - history[-1]) < GMM_REL_TOL * max(abs(history[-1]), 1e-12)
        history.append(ll)
        if converged or it == MAX_ITER - 1:
            break
        gamma = np.exp(log_joint - log_norm[:, None])
        mass = gamma.sum(axis=0)
        live = mass > 1e-12
        weights = np.maximum(mass / m, WEIGHT_FLOOR)
        weights /= weights.sum()
        for c in np.flatnonzero(live):
            mu = gamma[:, c] @ data / mass[c]
            diff = data - mu
            var = gamma[:, c] @ (diff * diff) / mass[c]
            means[c] = mu
            variances[c] = np.maximum(var, VARIANCE_FLOOR)
        # dead components keep their previous parameters
    return GmmModel(
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood=history[-1],
        log_likelihood_history=tuple(history),
    )


def gmm_log_posteriors(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """Row-wise log responsibilities, shape (n, k); log-space stabilized."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = x[None, :] if single else x
    if rows.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: {rows.shape[1]} != {model.dim}")
    log_joint = gmm_log_joint(rows, model.means, model.variances, np.log(model.weights))
    out = log_joint - _logsumexp_rows(log_joint)[:, None]
    return out[0] if single else out


def gmm_posteriors(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """Responsibilities gamma, normalized to sum to 1 per row."""
    return np.exp(gmm_log_posteriors(model, x))


# -- serialization --------------------------------------------------------


def _pack_arrays(*arrays) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)


def save_model(model, path) -> None:
    """Write a PCA / k-means / GMM model to the DOVM binary format."""
    path = Path(path)
    if isinstance(model, PcaModel):
        head = struct.pack(
            "<BII B", _TYPE_PCA, model.output_dim, model.input_dim, int(model.whiten)
        )
        payload = _pack_arrays(model.mean, model.basis, model.explained_variance)
    elif isinstance(model, KmeansModel):
        head = struct.pack("<BII d", _TYPE_KMEANS, model.k, model.dim, model.inertia)
        payload = _pack_arrays(model.centroids)
    elif isinstance(model, GmmModel):
        head = struct.pack("<BII d", _TYPE_GMM, model.k, model.dim, model.log_likelihood)
        payload = _pack_arrays(model.weights, model.means, model.variances)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<B", MODEL_VERSION))
        fh.write(head)
        fh.write(payload)


def _read_f4(raw: bytes, offset: int, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape))
    end = offset + 4 * count
    if end > len(raw):
        raise FormatError("model file truncated")
    arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    return arr.astype(np.float64).reshape(shape), end


def load_model(path):
    """Read a DOVM file back into the matching model type."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 6 or raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file")
    if raw[4] != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported version {raw[4]}")
    kind = raw[5]
    if kind == _TYPE_PCA:
        p, d, whiten = struct.unpack_from("<IIB", raw, 6)
        off = 6 + 9
        mean, off = _read_f4(raw, off, (d,))
        basis, off = _read_f4(raw, off, (p, d))
        explained, off = _read_f4(raw, off, (p,))
        return PcaModel(mean, basis, explained, whiten=bool(whiten))
    if kind == _TYPE_KMEANS:
        k, p = struct.unpack_from("<II", raw, 6)
        (inertia,) = struct.unpack_from("<d", raw, 14)
        centroids, _ = _read_f4(raw, 22, (k, p))
        return KmeansModel(centroids, inertia)
    if kind == _TYPE_GMM:
        k, p = struct.unpack_from("<II", raw, 6)
        (ll,) = struct.unpack_from("<d", raw, 14)
        off = 22
        weights, off = _read_f4(raw, off, (k,))
        means, off = _read_f4(raw, off, (k, p))
        variances, off = _read_f4(raw, off, (k, p))
        weights = weights / weights.sum()  # restore exact simplex after quantization
        return GmmModel(weights, means, variances, log_likelihood=ll)
    raise FormatError(f"{path}: unknown model type tag {kind}")


def quantized(model):
    """Model as it would look after a save/load round-trip.

    The pipeline trains in float64 but stores float32; pushing a freshly
    trained codebook through this keeps train-time and eval-time encodings
    identical.
    """
    if isinstance(model, PcaModel):
        return PcaModel(
            _f32(model.mean), _f32(model.basis), _f32(model.explained_variance),
            whiten=model.whiten,
        )
    if isinstance(model, KmeansModel):
        return KmeansModel(_f32(model.centroids), model.inertia)
    if isinstance(model, GmmModel):
        w = _f32(model.weights)
        return GmmModel(w / w.sum(), _f32(model.means), _f32(model.variances),
                        log_likelihood=model.log_likelihood)
    raise TypeError(f"cannot quantize {type(model).__name__}")


def _f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).astype(np.float32).astype(np.float64)
