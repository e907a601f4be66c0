"""Feature standardization and the three input transforms.

Stream transforms (differential, temporal averaging) assume rows are in
capture order; the batch transform (a type-I cosine transform) runs on
fixed-size model input batches. Standardization always happens before any
transform: raw flow features differ by orders of magnitude between
columns and training on them directly diverges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ingest import DatasetSplit

TRANSFORM_KINDS = ("none", "differential", "temporal_average", "dct")


@dataclass(frozen=True)
class TransformSpec:
    """Which input transform to apply and its parameters."""

    kind: str = "none"
    window_n: int = 10

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "temporal_average" and self.window_n < 1:
            raise ValueError("window_n must be >= 1 for temporal averaging")

    @property
    def scope(self) -> str:
        """'batch' for the cosine transform, 'stream' otherwise."""
        return "batch" if self.kind == "dct" else "stream"


@dataclass(frozen=True)
class Standardizer:
    """Per-column mean/std fit on a training partition.

    Zero-variance columns keep std 1 and are flagged; their transformed
    values come out as exactly 0.
    """

    mean: np.ndarray
    std: np.ndarray
    constant_mask: np.ndarray

    @property
    def n_constant(self) -> int:
        return int(self.constant_mask.sum())


def standardize_fit(features: np.ndarray) -> Standardizer:
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        raise ValueError("cannot fit a standardizer on an empty set")
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return Standardizer(mean, std, constant)


def standardize_apply(standardizer: Standardizer, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    return (features - standardizer.mean) / standardizer.std


def differential(stream: np.ndarray) -> np.ndarray:
    """Per-row difference with the previous row; the first row becomes 0.

    The zero convention for row 0 keeps output length equal to input
    length so labels stay aligned. The transform is invertible by prefix
    summation (`undo_differential`).
    """
    x = np.asarray(stream, dtype=np.float64)
    if x.shape[0] == 0:
        return x.copy()
    y = np.empty_like(x)
    y[0] = 0.0
    y[1:] = x[1:] - x[:-1]
    return y


def undo_differential(diff_stream: np.ndarray, first_row: np.ndarray) -> np.ndarray:
    """Inverse of `differential`: cumulative sum seeded with the first row."""
    y = np.asarray(diff_stream, dtype=np.float64)
    if y.shape[0] == 0:
        return y.copy()
    out = np.empty_like(y)
    out[0] = first_row
    for t in range(1, y.shape[0]):
        out[t] = out[t - 1] + y[t]
    return out


def temporal_average(stream: np.ndarray, n: int) -> np.ndarray:
    """Mean of the trailing window of n rows (current row included).

    Rows before a full window exists get the mean of the available
    prefix, so early records of rare classes are not dropped.
    """
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    x = np.asarray(stream, dtype=np.float64)
    rows = x.shape[0]
    if rows == 0 or n == 1:
        return x.copy()
    y = np.empty_like(x)
    head = min(n - 1, rows)
    cum = np.cumsum(x[:head], axis=0)
    y[:head] = cum / np.arange(1, head + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    if rows >= n:
        windows = np.lib.stride_tricks.sliding_window_view(x, n, axis=0)
        y[n - 1 :] = windows.mean(axis=-1)
    return y


@lru_cache(maxsize=128)
def _dct_matrix(n: int) -> np.ndarray:
    # M[t, 0] = 1, M[t, n-1] = (-1)^t, M[t, k] = 2 cos(pi t k / (n-1)) else.
    t = np.arange(n).reshape(-1, 1)
    k = np.arange(n).reshape(1, -1)
    m = 2.0 * np.cos(np.pi * t * k / (n - 1))
    m[:, 0] = 1.0
    m[:, n - 1] = np.where(t[:, 0] % 2 == 0, 1.0, -1.0)
    return m


def dct_batch(batch: np.ndarray) -> np.ndarray:
    """Type-I cosine transform along the batch axis, per feature column.

    For a batch of length N the t-th output row is
    x_0 + (-1)^t x_{N-1} + 2 * sum_{k=1}^{N-2} x_k cos(pi t k / (N-1)),
    evaluated independently for every feature column.
    """
    x = np.asarray(batch, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"batch too small for cosine transform: {n} row(s)")
    return _dct_matrix(n) @ x


def dct_by_batches(features: np.ndarray, batch_size: int) -> np.ndarray:
    """Apply `dct_batch` to consecutive batches of a feature block.

    A final short batch is padded by repeating its last row up to
    `batch_size`, transformed, then truncated back, so every batch sees
    the same transform length.
    """
    if batch_size < 2:
        raise ValueError(f"batch_size must be >= 2 for the cosine transform, got {batch_size}")
    x = np.asarray(features, dtype=np.float64)
    rows = x.shape[0]
    if rows == 0:
        return x.copy()
    out = np.empty_like(x)
    for start in range(0, rows, batch_size):
        chunk = x[start : start + batch_size]
        if chunk.shape[0] < batch_size:
            pad = np.repeat(chunk[-1:], batch_size - chunk.shape[0], axis=0)
            padded = np.concatenate([chunk, pad], axis=0)
            out[start:] = dct_batch(padded)[: chunk.shape[0]]
        else:
            out[start : start + batch_size] = dct_batch(chunk)
    return out


def apply_stream_transform(spec: TransformSpec, features: np.ndarray) -> np.ndarray:
    """Dispatch a stream-scope transform; identity for kind='none'."""
    if spec.kind == "none":
        return np.asarray(features, dtype=np.float64).copy()
    if spec.kind == "differential":
        return differential(features)
    if spec.kind == "temporal_average":
        return temporal_average(features, spec.window_n)
    raise ValueError(f"{spec.kind!r} is not a stream transform")


def transform_split(split: DatasetSplit, spec: TransformSpec) -> DatasetSplit:
    """Standardize the whole stream and apply any stream-scope transform.

    Statistics are fit on the training partition only and applied to the
    full dataset in capture order, so the stream transforms see the
    original record sequence; partitions then re-slice by membership.
    Batch-scope transforms are left to the trainer, which owns batching.
    """
    std = standardize_fit(split.train.features)
    full = standardize_apply(std, split.dataset.features)
    if spec.scope == "stream":
        full = apply_stream_transform(spec, full)
    return split.with_dataset(split.dataset.with_features(full))
