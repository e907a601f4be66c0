"""Load, clean, split and cache flow-record datasets.

A dataset is held as one immutable block of arrays (`FlowDataset`) rather
than per-record objects; record order always matches the source CSV order
because the stream transforms downstream depend on capture order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import CacheError, SchemaError, UnusableColumnError
from .labels import FEATURE_NAMES, LabelMap, default_label_map

_CHUNK_ROWS = 65536

CACHE_MAGIC = b"ATFLOWS\x00"
CACHE_VERSION = 1


class FlowRecord(NamedTuple):
    """One network flow: a feature vector plus its class id."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class FlowDataset:
    """Column block of flow records; arrays are read-only after creation."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise SchemaError(f"features must be 2-D, got shape {feats.shape}")
        if labs.shape != (feats.shape[0],):
            raise SchemaError(
                f"labels shape {labs.shape} does not match {feats.shape[0]} rows"
            )
        if feats.shape[1] != len(self.feature_names):
            raise SchemaError(
                f"{feats.shape[1]} feature columns but {len(self.feature_names)} names"
            )
        feats.flags.writeable = False
        labs.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def record(self, i: int) -> FlowRecord:
        return FlowRecord(self.features[i], int(self.labels[i]))

    def subset(self, idx: np.ndarray) -> "FlowDataset":
        return FlowDataset(self.features[idx], self.labels[idx], self.feature_names)

    def with_features(self, features: np.ndarray) -> "FlowDataset":
        """Same records and labels, replaced feature block (for transforms)."""
        return FlowDataset(features, self.labels.copy(), self.feature_names)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def fingerprint(self) -> dict:
        h = hashlib.sha256()
        h.update(self.features.tobytes())
        h.update(self.labels.tobytes())
        return {"rows": len(self), "sha256": h.hexdigest()}


@dataclass
class CleanReport:
    """Per-column counts of value replacements applied by `clean`."""

    feature_names: tuple[str, ...]
    nan_replaced: np.ndarray
    posinf_replaced: np.ndarray
    neginf_replaced: np.ndarray

    @property
    def total(self) -> int:
        return int(
            self.nan_replaced.sum()
            + self.posinf_replaced.sum()
            + self.neginf_replaced.sum()
        )

    def per_column(self) -> dict[str, dict[str, int]]:
        out = {}
        for j, name in enumerate(self.feature_names):
            n, p, m = (
                int(self.nan_replaced[j]),
                int(self.posinf_replaced[j]),
                int(self.neginf_replaced[j]),
            )
            if n or p or m:
                out[name] = {"nan": n, "posinf": p, "neginf": m}
        return out


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/validation/test partition of one cleaned dataset.

    Partitions are stored as sorted index arrays into `dataset`, so each
    partition keeps the original record order and the union of the three
    index sets is exactly 0..n-1.
    """

    dataset: FlowDataset
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    fractions: tuple[float, float, float]
    seed: int

    @cached_property
    def train(self) -> FlowDataset:
        return self.dataset.subset(self.train_idx)

    @cached_property
    def validation(self) -> FlowDataset:
        return self.dataset.subset(self.val_idx)

    @cached_property
    def test(self) -> FlowDataset:
        return self.dataset.subset(self.test_idx)

    def with_dataset(self, dataset: FlowDataset) -> "DatasetSplit":
        """Same membership over a transformed copy of the dataset."""
        if len(dataset) != len(self.dataset):
            raise SchemaError("replacement dataset has a different row count")
        return DatasetSplit(
            dataset, self.train_idx, self.val_idx, self.test_idx, self.fractions, self.seed
        )


def _find_label_column(header: list[str]) -> int:
    for j, name in enumerate(header):
        if name.strip().casefold() == "label":
            return j
    raise SchemaError(f"no 'Label' column in header: {header!r}")


def _parse_chunk(rows: list[list[str]], first_row_number: int) -> np.ndarray:
    cleaned = [[cell if cell.strip() else "nan" for cell in row] for row in rows]
    try:
        return np.asarray(cleaned, dtype=np.float64)
    except ValueError:
        for offset, row in enumerate(cleaned):
            for j, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise SchemaError(
                        f"row {first_row_number + offset}: column {j} has "
                        f"non-numeric value {rows[offset][j]!r}"
                    ) from None
        raise


def load_csv(path: str | Path, label_map: LabelMap | None = None) -> FlowDataset:
    """Parse one flow CSV into a FlowDataset, preserving row order.

    The header must contain exactly 78 feature columns plus one label
    column (matched case-insensitively after trimming). Raises SchemaError
    for layout problems (with the offending 1-based row number) and
    LabelError for unknown label strings.
    """
    label_map = label_map or default_label_map()
    path = Path(path)
    feature_chunks: list[np.ndarray] = []
    label_chunks: list[np.ndarray] = []
    with path.open(newline="", encoding="utf-8", errors="replace") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        label_col = _find_label_column(header)
        names = tuple(c.strip() for j, c in enumerate(header) if j != label_col)
        names = _dedupe_names(names)
        n_cols = len(header)
        if len(names) != len(FEATURE_NAMES):
            raise SchemaError(
                f"{path}: expected {len(FEATURE_NAMES)} feature columns, found {len(names)}"
            )

        rows: list[list[str]] = []
        labels: list[int] = []
        row_number = 1  # header is row 1
        chunk_start = 2
        for row in reader:
            row_number += 1
            if not row:
                continue  # trailing blank line
            if len(row) != n_cols:
                raise SchemaError(
                    f"{path}: row {row_number} has {len(row)} columns, expected {n_cols}"
                )
            labels.append(label_map.id_for(row[label_col]))
            del row[label_col]
            rows.append(row)
            if len(rows) >= _CHUNK_ROWS:
                feature_chunks.append(_parse_chunk(rows, chunk_start))
                label_chunks.append(np.asarray(labels, dtype=np.int64))
                rows, labels = [], []
                chunk_start = row_number + 1
        if rows:
            feature_chunks.append(_parse_chunk(rows, chunk_start))
            label_chunks.append(np.asarray(labels, dtype=np.int64))

    if not feature_chunks:
        features = np.empty((0, len(names)), dtype=np.float64)
        label_arr = np.empty((0,), dtype=np.int64)
    else:
        features = np.concatenate(feature_chunks, axis=0)
        label_arr = np.concatenate(label_chunks, axis=0)
    return FlowDataset(features, label_arr, names)


def _dedupe_names(names: tuple[str, ...]) -> tuple[str, ...]:
    seen: dict[str, int] = {}
    out = []
    for name in names:
        if name in seen:
            seen[name] += 1
            out.append(f"{name}.{seen[name]}")
        else:
            seen[name] = 0
            out.append(name)
    return tuple(out)


def load_csvs(paths: Iterable[str | Path], label_map: LabelMap | None = None) -> FlowDataset:
    """Concatenate several flow CSVs in the given order."""
    paths = list(paths)
    parts = [load_csv(p, label_map) for p in paths]
    if not parts:
        raise SchemaError("no input files given")
    if len(parts) == 1:
        return parts[0]
    names = parts[0].feature_names
    for p, part in zip(paths, parts):
        if part.feature_names != names:
            warnings.warn(f"{p}: feature names differ from first file; keeping first")
    return FlowDataset(
        np.concatenate([p.features for p in parts], axis=0),
        np.concatenate([p.labels for p in parts], axis=0),
        names,
    )


def clean(dataset: FlowDataset) -> tuple[FlowDataset, CleanReport]:
    """Replace NaN with 0 and +/-Inf with the column's finite max/min.

    Never drops rows; rare attack classes must keep every record. A column
    with no finite value at all cannot be repaired and raises
    UnusableColumnError. Idempotent.
    """
    feats = dataset.features.copy()
    d = feats.shape[1]
    nan_counts = np.zeros(d, dtype=np.int64)
    pos_counts = np.zeros(d, dtype=np.int64)
    neg_counts = np.zeros(d, dtype=np.int64)

    if len(dataset):
        finite = np.isfinite(feats)
        bad_cols = np.where(~finite.any(axis=0))[0]
        if bad_cols.size:
            name = dataset.feature_names[bad_cols[0]]
            raise UnusableColumnError(
                f"column {bad_cols[0]} ({name!r}) has no finite values"
            )
        nan_mask = np.isnan(feats)
        pos_mask = np.isposinf(feats)
        neg_mask = np.isneginf(feats)
        nan_counts = nan_mask.sum(axis=0)
        pos_counts = pos_mask.sum(axis=0)
        neg_counts = neg_mask.sum(axis=0)
        if nan_mask.any():
            feats[nan_mask] = 0.0
        masked = np.where(finite, feats, np.nan)
        col_max = np.nanmax(masked, axis=0)
        col_min = np.nanmin(masked, axis=0)
        if pos_mask.any():
            feats[pos_mask] = np.broadcast_to(col_max, feats.shape)[pos_mask]
        if neg_mask.any():
            feats[neg_mask] = np.broadcast_to(col_min, feats.shape)[neg_mask]

    report = CleanReport(dataset.feature_names, nan_counts, pos_counts, neg_counts)
    return dataset.with_features(feats), report


def _allocate(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    # Largest-remainder rounding so the three parts always sum to n.
    exact = [n * f for f in fractions]
    base = [int(np.floor(e)) for e in exact]
    rem = n - sum(base)
    order = sorted(range(3), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:rem]:
        base[i] += 1
    return base[0], base[1], base[2]


def split(
    dataset: FlowDataset,
    fractions: tuple[float, float, float] = (0.6, 0.1, 0.3),
    seed: int = 0,
) -> DatasetSplit:
    """Stratified train/validation/test split, deterministic for a seed.

    Membership is drawn per class with largest-remainder allocation;
    inside each partition the original record order is retained. A class
    with fewer records than partitions goes entirely to train (with a
    warning) so that no record is ever dropped.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError(f"fractions must be three positive numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for class_id in sorted(dataset.class_counts()):
        idx = np.where(dataset.labels == class_id)[0]
        if len(idx) < 3:
            warnings.warn(
                f"class {class_id} has only {len(idx)} record(s); placing all in train"
            )
            train_parts.append(idx)
            continue
        n_train, n_val, n_test = _allocate(len(idx), fractions)
        perm = rng.permutation(len(idx))
        train_parts.append(idx[perm[:n_train]])
        val_parts.append(idx[perm[n_train : n_train + n_val]])
        test_parts.append(idx[perm[n_train + n_val :]])

    def _gather(parts: list[np.ndarray]) -> np.ndarray:
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(parts)).astype(np.int64)

    return DatasetSplit(
        dataset,
        _gather(train_parts),
        _gather(val_parts),
        _gather(test_parts),
        fractions,
        seed,
    )


def class_histogram(dataset: FlowDataset) -> dict[int, tuple[int, float]]:
    """Map class id -> (count, fraction of all records)."""
    counts = dataset.class_counts()
    total = sum(counts.values())
    if total == 0:
        return {}
    return {cid: (c, c / total) for cid, c in counts.items()}


def save_cache(path: str | Path, dataset: FlowDataset) -> None:
    """Write the parsed dataset to a versioned binary cache file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "rows": len(dataset),
        "n_features": dataset.n_features,
        "feature_names": list(dataset.feature_names),
        "features_dtype": "<f8",
        "labels_dtype": "<i8",
        "fingerprint": dataset.fingerprint(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<HI", CACHE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(dataset.features, "<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels, "<i8").tobytes())


def load_cache(path: str | Path) -> FlowDataset:
    """Read a dataset cache, verifying magic, version and content hash."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise CacheError(f"{path}: not a dataset cache (bad magic)")
        version, header_len = struct.unpack("<HI", fh.read(6))
        if version != CACHE_VERSION:
            raise CacheError(f"{path}: unsupported cache version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        rows, d = header["rows"], header["n_features"]
        feat_bytes = fh.read(rows * d * 8)
        label_bytes = fh.read(rows * 8)
    if len(feat_bytes) != rows * d * 8 or len(label_bytes) != rows * 8:
        raise CacheError(f"{path}: truncated cache file")
    feats = np.frombuffer(feat_bytes, dtype="<f8").reshape(rows, d)
    labels = np.frombuffer(label_bytes, dtype="<i8")
    ds = FlowDataset(feats.copy(), labels.copy(), tuple(header["feature_names"]))
    if ds.fingerprint() != header["fingerprint"]:
        raise CacheError(f"{path}: cache content hash mismatch")
    return ds
