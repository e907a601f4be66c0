"""Synthetic desk-scale datasets with known ground truth.

The real flow corpus is ~2.8M rows and externally licensed, so CI and the
test suite run on Gaussian-cluster stand-ins that keep the 78-column
schema. Each generator documents the structure it plants so tests can
assert recovery of that structure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import FlowDataset
from .labels import FEATURE_NAMES, N_FEATURES


@dataclass(frozen=True)
class FixtureTruth:
    """What the generator planted, for assertions and reports."""

    kind: str
    counts: dict[int, int]
    centers: dict[int, list[float]]
    informative: dict[int, list[int]]
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "counts": {str(k): v for k, v in self.counts.items()},
                "centers": {str(k): v for k, v in self.centers.items()},
                "informative": {str(k): v for k, v in self.informative.items()},
                "seed": self.seed,
            },
            indent=2,
            sort_keys=True,
        )


def _interleave(blocks: list[tuple[np.ndarray, int]], rng: np.random.Generator):
    """Stack per-class blocks and shuffle rows so classes mix in "capture" order."""
    feats = np.concatenate([b for b, _ in blocks], axis=0)
    labels = np.concatenate([np.full(len(b), lab, dtype=np.int64) for b, lab in blocks])
    perm = rng.permutation(len(labels))
    return feats[perm], labels[perm]


def gaussian_clusters(
    counts: dict[int, int],
    seed: int = 0,
    n_features: int = N_FEATURES,
    separation: float = 6.0,
    scale: float = 1.0,
    centers: dict[int, np.ndarray] | None = None,
) -> tuple[FlowDataset, FixtureTruth]:
    """One spherical Gaussian per class.

    Default centers put each class on its own axis at distance
    `separation`, so classes are linearly separable and a multi-class head
    should get near-perfect recall.
    """
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = {}
        for class_id in sorted(counts):
            c = np.zeros(n_features)
            if class_id > 0:
                axis = (class_id - 1) % n_features
                c[axis] = separation * (1 + (class_id - 1) // n_features)
            centers[class_id] = c
    blocks = []
    for class_id in sorted(counts):
        n = counts[class_id]
        blocks.append((centers[class_id] + scale * rng.normal(size=(n, n_features)), class_id))
    feats, labels = _interleave(blocks, rng)
    names = _fixture_feature_names(n_features)
    truth = FixtureTruth(
        kind="clusters",
        counts=dict(counts),
        centers={k: list(map(float, v)) for k, v in centers.items()},
        informative={},
        seed=seed,
    )
    return FlowDataset(feats, labels, names), truth


def transfer_fixture(
    seed: int = 0,
    n_benign: int = 2400,
    n_attack: int = 360,
    n_features: int = 12,
) -> tuple[FlowDataset, FixtureTruth]:
    """Three attacks where transfer is true or false by construction.

    Benign sits at the origin. Attacks 1 and 2 share one distribution
    (training on either must detect the other), attack 3 lives on the
    opposite side of benign (a benign-vs-1 boundary leaves it on the
    benign side, so recall stays near or below chance).
    """
    rng = np.random.default_rng(seed)
    shared = np.zeros(n_features)
    shared[0], shared[1], shared[2] = 6.0, 4.0, 4.0
    centers = {
        0: np.zeros(n_features),
        1: shared,
        2: shared.copy(),
        3: -shared,
    }
    counts = {0: n_benign, 1: n_attack, 2: n_attack, 3: n_attack}
    blocks = [
        (centers[c] + rng.normal(size=(counts[c], n_features)), c) for c in sorted(counts)
    ]
    feats, labels = _interleave(blocks, rng)
    truth = FixtureTruth(
        kind="transfer",
        counts=counts,
        centers={k: list(map(float, v)) for k, v in centers.items()},
        informative={},
        seed=seed,
    )
    return FlowDataset(feats, labels, _fixture_feature_names(n_features)), truth


def planted_features_fixture(
    seed: int = 0,
    n_benign: int = 1500,
    n_attack: int = 500,
    informative: dict[int, list[int]] | None = None,
    shift: float = 3.0,
    n_features: int = N_FEATURES,
) -> tuple[FlowDataset, FixtureTruth]:
    """Attacks that differ from benign only on a few planted feature columns.

    `informative` maps attack id -> list of feature indices carrying the
    mean shift; every other column is N(0,1) noise for all classes.
    """
    if informative is None:
        informative = {1: [3, 11, 25, 40, 66]}
    rng = np.random.default_rng(seed)
    counts = {0: n_benign, **{a: n_attack for a in informative}}
    centers = {0: np.zeros(n_features)}
    for attack, dims in informative.items():
        c = np.zeros(n_features)
        c[np.asarray(dims, dtype=int)] = shift
        centers[attack] = c
    blocks = [
        (centers[c] + rng.normal(size=(counts[c], n_features)), c) for c in sorted(counts)
    ]
    feats, labels = _interleave(blocks, rng)
    truth = FixtureTruth(
        kind="planted",
        counts=counts,
        centers={k: list(map(float, v)) for k, v in centers.items()},
        informative={k: list(map(int, v)) for k, v in informative.items()},
        seed=seed,
    )
    return FlowDataset(feats, labels, _fixture_feature_names(n_features)), truth


def _fixture_feature_names(n_features: int) -> tuple[str, ...]:
    if n_features == N_FEATURES:
        return FEATURE_NAMES
    return tuple(f"f{i:02d}" for i in range(n_features))


def write_fixture_csv(dataset: FlowDataset, path: str | Path, label_names=None) -> None:
    """Write a dataset in the raw-CSV layout the loader expects.

    Headers get a leading blank on every second column to mimic the messy
    source files (the loader must trim them).
    """
    from .labels import CLASS_NAMES

    label_names = label_names or CLASS_NAMES
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [
        (" " + name) if j % 2 else name for j, name in enumerate(dataset.feature_names)
    ] + [" Label"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(dataset)):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(label_names[int(dataset.labels[i])])
            writer.writerow(row)
