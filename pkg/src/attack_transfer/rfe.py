"""Recursive feature elimination over benign-vs-attack separability.

The estimator is a class-weighted L2-regularized logistic scorer trained
by full-batch gradient descent on standardized features, so importances
(absolute weights) are well defined and every fit is deterministic.
Two entry points mirror the two experiment variants: one attack against
benign, or the union of two attacks against benign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClassError
from .ingest import DatasetSplit
from .labels import BENIGN
from .preprocess import standardize_apply, standardize_fit


@dataclass(frozen=True)
class EliminatedFeature:
    index: int
    name: str
    round: int
    importance: float


@dataclass
class FeatureRanking:
    """Full elimination trace plus the selected subset.

    `elimination` lists every feature in the order it was discarded; the
    final survivor closes the list with round = n_rounds + 1. The selected
    set is always a prefix of `survivor_order` (last-out-first ordering).
    """

    feature_names: tuple[str, ...]
    elimination: list[EliminatedFeature]
    scores: dict[int, float]  # retained-set size -> validation F1
    selected: tuple[int, ...]
    positive_classes: tuple[int, ...]

    @property
    def survivor_order(self) -> list[int]:
        return [e.index for e in reversed(self.elimination)]

    @property
    def n_rounds(self) -> int:
        return max((e.round for e in self.elimination[:-1]), default=0)

    @property
    def best_score(self) -> float:
        return max(self.scores.values())

    @property
    def selected_score(self) -> float:
        return self.scores[len(self.selected)]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_linear_scorer(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 1e-3,
    learning_rate: float | None = None,
    iterations: int = 300,
    momentum: float = 0.9,
) -> tuple[np.ndarray, float]:
    """Logistic weights/bias by deterministic full-batch gradient descent.

    Classes are weighted inversely to their frequency so the heavy benign
    majority cannot drown out a rare attack class. Zero init is fine: the
    problem is convex. The default step size comes from the curvature
    bound 0.25 * trace of the weighted second moment, which keeps
    heavy-ball descent stable even with strongly correlated columns.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = x.shape
    n_pos = y.sum()
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EmptyClassError("scorer needs both classes present")
    sample_w = np.where(y == 1.0, n / (2.0 * n_pos), n / (2.0 * n_neg))
    sample_w = sample_w / sample_w.sum()

    if learning_rate is None:
        curvature = 0.25 * float(sample_w @ np.einsum("ij,ij->i", x, x)) + l2 + 0.25
        learning_rate = 2.0 / curvature

    w = np.zeros(d)
    b = 0.0
    vw = np.zeros(d)
    vb = 0.0
    for _ in range(iterations):
        p = _sigmoid(x @ w + b)
        err = (p - y) * sample_w
        gw = x.T @ err + l2 * w
        gb = err.sum()
        vw = momentum * vw - learning_rate * gw
        vb = momentum * vb - learning_rate * gb
        w = w + vw
        b = b + vb
    return w, float(b)


def _f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def _removal_count(step: float, remaining: int) -> int:
    if remaining <= 1:
        return 0
    if step >= 1:
        count = int(step)
    else:
        count = int(np.floor(step * remaining))
    return max(1, min(count, remaining - 1))


def _binary_view(
    split: DatasetSplit, positives: tuple[int, ...], max_per_class: int | None, seed: int
):
    """Benign + positive-class rows from train and validation partitions."""
    rng = np.random.default_rng(seed)

    def build(part):
        keep_classes = (BENIGN, *positives)
        xs, ys = [], []
        for cls in keep_classes:
            idx = np.where(part.labels == cls)[0]
            if max_per_class is not None and len(idx) > max_per_class:
                idx = np.sort(rng.choice(idx, size=max_per_class, replace=False))
            xs.append(part.features[idx])
            ys.append(np.full(len(idx), 0 if cls == BENIGN else 1, dtype=np.int64))
        return np.concatenate(xs, axis=0), np.concatenate(ys)

    for cls in positives:
        if cls == BENIGN:
            raise ValueError("positive classes must be attacks")
        if not (split.train.labels == cls).any():
            raise EmptyClassError(f"class {cls} has no training records")
        if not (split.validation.labels == cls).any():
            raise EmptyClassError(f"class {cls} has no validation records")
    return build(split.train), build(split.validation)


def _run_rfe(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    feature_names: tuple[str, ...],
    positives: tuple[int, ...],
    step: float,
    tolerance: float,
) -> FeatureRanking:
    std = standardize_fit(x_train)
    xt = standardize_apply(std, x_train)
    xv = standardize_apply(std, x_val)

    remaining = list(range(xt.shape[1]))
    eliminated: list[EliminatedFeature] = []
    scores: dict[int, float] = {}
    round_num = 1
    while remaining:
        cols = np.asarray(remaining)
        w, b = fit_linear_scorer(xt[:, cols], y_train)
        preds = (_sigmoid(xv[:, cols] @ w + b) >= 0.5).astype(np.int64)
        scores[len(remaining)] = _f1(y_val, preds)
        importance = np.abs(w)
        if len(remaining) == 1:
            eliminated.append(
                EliminatedFeature(
                    remaining[0], feature_names[remaining[0]], round_num, float(importance[0])
                )
            )
            break
        k = _removal_count(step, len(remaining))
        order = np.argsort(importance, kind="stable")
        drop_positions = sorted(order[:k].tolist())
        for pos in drop_positions:
            feat = remaining[pos]
            eliminated.append(
                EliminatedFeature(feat, feature_names[feat], round_num, float(importance[pos]))
            )
        for pos in reversed(drop_positions):
            del remaining[pos]
        round_num += 1

    best = max(scores.values())
    selected_size = min(size for size, s in scores.items() if s >= best - tolerance)
    survivor_order = [e.index for e in reversed(eliminated)]
    return FeatureRanking(
        feature_names=feature_names,
        elimination=eliminated,
        scores=scores,
        selected=tuple(survivor_order[:selected_size]),
        positive_classes=positives,
    )


def rfe_single(
    split: DatasetSplit,
    attack: int,
    step: float = 1,
    tolerance: float = 0.01,
    max_per_class: int | None = None,
    seed: int = 0,
) -> FeatureRanking:
    """Rank features for separating one attack class from benign traffic.

    Eliminates the lowest-importance features round by round, then selects
    the smallest retained set whose validation F1 is within `tolerance` of
    the best score seen at any size.
    """
    (xt, yt), (xv, yv) = _binary_view(split, (attack,), max_per_class, seed)
    return _run_rfe(
        xt, yt, xv, yv, split.dataset.feature_names, (attack,), step, tolerance
    )


def rfe_pair(
    split: DatasetSplit,
    attack_a: int,
    attack_b: int,
    step: float = 1,
    tolerance: float = 0.01,
    max_per_class: int | None = None,
    seed: int = 0,
) -> FeatureRanking:
    """As rfe_single, with the positive class being the union of two attacks."""
    positives = (attack_a,) if attack_a == attack_b else (attack_a, attack_b)
    (xt, yt), (xv, yv) = _binary_view(split, positives, max_per_class, seed)
    return _run_rfe(
        xt, yt, xv, yv, split.dataset.feature_names, positives, step, tolerance
    )


def common_features(
    ranking_a: FeatureRanking, ranking_b: FeatureRanking
) -> tuple[set[int], float]:
    """Intersection of two selected sets and its Jaccard overlap ratio."""
    if ranking_a.feature_names != ranking_b.feature_names:
        raise ValueError("rankings cover different feature spaces")
    a, b = set(ranking_a.selected), set(ranking_b.selected)
    union = a | b
    inter = a & b
    ratio = len(inter) / len(union) if union else 1.0
    return inter, ratio
