"""Balanced binary training sets: bootstrapping and synthetic oversampling.

Both resampling routines work on bare feature matrices (rows of one
class); `make_binary_trainset` assembles the benign-vs-attack set that
the transfer experiments train on. Augmentation only ever touches the
training partition: validation and test always hold real records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClassError, InsufficientSamplesError
from .ingest import DatasetSplit
from .labels import BENIGN
from .preprocess import Standardizer, standardize_apply, standardize_fit

AUGMENT_MODES = ("real", "bootstrap", "smote")


@dataclass(frozen=True)
class AugmentPlan:
    """How to balance the attack side of a binary training set.

    target_attack_count defaults to the benign count of the training
    partition, which yields the 50/50 benign/attack composition the
    transfer runs use.
    """

    mode: str = "real"
    k_neighbors: int = 5
    target_attack_count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in AUGMENT_MODES:
            raise ValueError(f"unknown augment mode {self.mode!r}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.target_attack_count is not None and self.target_attack_count < 1:
            raise ValueError("target_attack_count must be positive")


def k_nearest_indices(points: np.ndarray, k: int, chunk_budget: int = 1 << 25) -> np.ndarray:
    """Indices of the k nearest other rows for every row (Euclidean).

    Brute force in chunks; ties broken by lowest row index via a stable
    sort, which keeps neighbor choice deterministic.
    """
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k >= n:
        raise InsufficientSamplesError(f"need at least {k + 1} rows for k={k}, got {n}")
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, chunk_budget // max(1, n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf  # exclude self
        order = np.argsort(d2, axis=1, kind="stable")
        out[start:stop] = order[:, :k]
    return out


def smote_generate(
    attack_features: np.ndarray,
    k: int,
    count: int,
    seed: int,
    standardizer: Standardizer | None = None,
) -> np.ndarray:
    """Synthesize `count` rows by interpolating toward same-class neighbors.

    Each synthetic row is x + u * (x' - x) with x a uniformly drawn real
    row, x' one of its k nearest neighbors and u uniform on [0, 1].
    Neighbor distances are measured on z-scored features (fit on the given
    standardizer's partition, or on the inputs themselves when absent);
    interpolation runs in the original feature space.
    """
    x = np.asarray(attack_features, dtype=np.float64)
    n = x.shape[0]
    if count < 0:
        raise ValueError("count must be >= 0")
    if n < k + 1:
        raise InsufficientSamplesError(
            f"synthetic oversampling needs at least {k + 1} rows, got {n}"
        )
    if count == 0:
        return np.empty((0, x.shape[1]), dtype=np.float64)
    scaled = standardize_apply(standardizer or standardize_fit(x), x)
    neighbors = k_nearest_indices(scaled, k)
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n, size=count)
    pick = rng.integers(0, k, size=count)
    chosen = neighbors[src, pick]
    u = rng.random(count)
    return x[src] + u[:, None] * (x[chosen] - x[src])


def bootstrap_resample(attack_features: np.ndarray, count: int, seed: int) -> np.ndarray:
    """Draw `count` rows uniformly with replacement; rows are bit-identical
    to source rows."""
    x = np.asarray(attack_features, dtype=np.float64)
    if x.shape[0] == 0:
        raise InsufficientSamplesError("cannot bootstrap from an empty set")
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    return x[rng.integers(0, x.shape[0], size=count)]


def make_binary_trainset(
    split: DatasetSplit, attack_class: int, plan: AugmentPlan
) -> tuple[np.ndarray, np.ndarray]:
    """Benign + one attack class from the training partition, labels {0, 1}.

    mode='real' keeps the raw class counts; 'bootstrap' and 'smote' grow
    the attack side to the target count (benign count by default) for a
    50/50 composition. Real attack records are never discarded: if the
    attack side already meets the target under 'smote', nothing is added.
    Output order is shuffled deterministically by the plan seed.
    """
    if attack_class == BENIGN:
        raise ValueError("attack_class must not be the benign class")
    train = split.train
    benign = train.features[train.labels == BENIGN]
    attack = train.features[train.labels == attack_class]
    if len(attack) == 0:
        raise EmptyClassError(f"class {attack_class} has no training records")
    if len(benign) == 0:
        raise EmptyClassError("no benign training records")

    if plan.mode == "real":
        attack_out = attack
    else:
        target = plan.target_attack_count or len(benign)
        if plan.mode == "bootstrap":
            attack_out = bootstrap_resample(attack, target, plan.seed)
        else:
            need = max(0, target - len(attack))
            try:
                synthetic = smote_generate(
                    attack,
                    plan.k_neighbors,
                    need,
                    plan.seed,
                    standardizer=standardize_fit(train.features),
                )
            except InsufficientSamplesError as exc:
                raise InsufficientSamplesError(f"class {attack_class}: {exc}") from None
            attack_out = np.concatenate([attack, synthetic], axis=0)

    features = np.concatenate([benign, attack_out], axis=0)
    labels = np.concatenate(
        [np.zeros(len(benign), dtype=np.int64), np.ones(len(attack_out), dtype=np.int64)]
    )
    perm = np.random.default_rng(plan.seed).permutation(len(labels))
    return features[perm], labels[perm]
