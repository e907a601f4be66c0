"""Train-on-attack-i / test-on-attack-j grid and transfer relations.

Every grid cell trains its own binary model on benign + one attack class
(augmented per plan, transformed per spec) and evaluates it on real
benign + real records of a different attack class. Cells are independent
jobs over immutable dataset views, so a bounded thread pool can run them
in any order without changing results: each cell's seed is a stable hash
of (global seed, i, j, mode, transform).
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentPlan, make_binary_trainset
from .errors import EmptyClassError
from .ingest import DatasetSplit, FlowDataset
from .labels import BENIGN
from .nn import ModelConfig, evaluate, train
from .preprocess import TransformSpec, dct_by_batches, transform_split


@dataclass(frozen=True)
class TransferCellResult:
    train_attack: int
    test_attack: int
    augment_mode: str
    transform: str
    attack_recall: float
    benign_recall: float
    n_train: int
    n_test_attack: int
    n_test_benign: int
    seed: int
    status: str = "ok"
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.status != "ok"


@dataclass
class TransferMatrix:
    """Dense grid of cell results over an ordered attack list.

    Diagonal entries are placeholders (training and testing on the same
    attack belongs to the multiclass experiment), flagged rather than
    computed.
    """

    attacks: tuple[int, ...]
    augment_mode: str
    transform: str
    cells: dict[tuple[int, int], TransferCellResult] = field(default_factory=dict)

    def cell(self, i: int, j: int) -> TransferCellResult:
        return self.cells[(i, j)]

    def is_placeholder(self, i: int, j: int) -> bool:
        return i == j

    def is_complete(self) -> bool:
        return all(
            (i, j) in self.cells for i in self.attacks for j in self.attacks if i != j
        )

    def failed_cells(self) -> list[TransferCellResult]:
        return [c for c in self.cells.values() if c.failed]


@dataclass(frozen=True)
class TransferRelation:
    """Transferability between one unordered attack pair (i < j)."""

    pair: tuple[int, int]
    direction: str  # "both", "i_to_j" or "j_to_i"
    threshold: float

    @property
    def symmetric(self) -> bool:
        return self.direction == "both"


def cell_seed(global_seed: int, i: int, j: int, mode: str, transform: str) -> int:
    """Stable per-cell seed; reproducible under any scheduling order."""
    key = f"{global_seed}|{i}|{j}|{mode}|{transform}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") % (2**63)


def binarize_partition(part: FlowDataset, attack: int) -> tuple[np.ndarray, np.ndarray]:
    """Real benign + real attack records with labels collapsed to {0, 1}."""
    keep = (part.labels == BENIGN) | (part.labels == attack)
    feats = part.features[keep]
    labels = (part.labels[keep] == attack).astype(np.int64)
    return feats, labels


def run_cell(
    split: DatasetSplit,
    train_attack: int,
    test_attack: int,
    plan: AugmentPlan,
    transform: TransformSpec,
    config: ModelConfig,
    pretransformed: bool = False,
) -> TransferCellResult:
    """One grid cell: train on attack i, evaluate on attack j.

    plan.seed acts as the global seed; the cell derives its own from it.
    With pretransformed=True the split is assumed to already carry
    standardized (and stream-transformed) features, which lets a matrix
    run share that work across cells.
    """
    if train_attack == test_attack:
        raise ValueError("diagonal cells are placeholders; train and test attacks must differ")

    seed = cell_seed(plan.seed, train_attack, test_attack, plan.mode, transform.kind)
    tsplit = split if pretransformed else transform_split(split, transform)

    x_train, y_train = make_binary_trainset(tsplit, train_attack, replace(plan, seed=seed))
    x_val, y_val = binarize_partition(tsplit.validation, train_attack)
    x_test, y_test = binarize_partition(tsplit.test, test_attack)
    if int(y_test.sum()) == 0:
        raise EmptyClassError(f"class {test_attack} has no test records")
    if int((y_test == 0).sum()) == 0:
        raise EmptyClassError("no benign test records")

    if transform.kind == "dct":
        x_train = dct_by_batches(x_train, config.batch_size)
        if len(x_val):
            x_val = dct_by_batches(x_val, config.batch_size)
        x_test = dct_by_batches(x_test, config.batch_size)

    cell_config = replace(
        config, input_dim=x_train.shape[1], output_classes=2, seed=seed
    )
    params = train(cell_config, x_train, y_train, x_val, y_val)
    result = evaluate(params, x_test, y_test)
    return TransferCellResult(
        train_attack=train_attack,
        test_attack=test_attack,
        augment_mode=plan.mode,
        transform=transform.kind,
        attack_recall=result.attack_recall,
        benign_recall=result.benign_recall,
        n_train=len(y_train),
        n_test_attack=int(y_test.sum()),
        n_test_benign=int((y_test == 0).sum()),
        seed=seed,
    )


def _failed_cell(
    i: int, j: int, plan: AugmentPlan, transform: TransformSpec, exc: Exception
) -> TransferCellResult:
    return TransferCellResult(
        train_attack=i,
        test_attack=j,
        augment_mode=plan.mode,
        transform=transform.kind,
        attack_recall=float("nan"),
        benign_recall=float("nan"),
        n_train=0,
        n_test_attack=0,
        n_test_benign=0,
        seed=cell_seed(plan.seed, i, j, plan.mode, transform.kind),
        status="failed",
        error=f"{type(exc).__name__}: {exc}",
    )


def build_matrix(
    split: DatasetSplit,
    attacks: tuple[int, ...] | list[int],
    plan: AugmentPlan,
    transform: TransformSpec,
    config: ModelConfig,
    parallelism: int = 1,
    progress=None,
) -> TransferMatrix:
    """All off-diagonal cells for the given attack list.

    A cell that raises is recorded with status='failed' (never silently
    skipped); everything else proceeds. `progress` is an optional callback
    receiving each finished TransferCellResult.
    """
    attacks = tuple(int(a) for a in attacks)
    if len(attacks) < 2:
        raise ValueError("need at least two attack classes for a transfer matrix")
    tsplit = transform_split(split, transform)
    pairs = [(i, j) for i in attacks for j in attacks if i != j]

    def compute(pair: tuple[int, int]) -> TransferCellResult:
        i, j = pair
        try:
            return run_cell(tsplit, i, j, plan, transform, config, pretransformed=True)
        except Exception as exc:
            return _failed_cell(i, j, plan, transform, exc)

    matrix = TransferMatrix(attacks=attacks, augment_mode=plan.mode, transform=transform.kind)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(compute, pairs))
    else:
        results = [compute(p) for p in pairs]
    for res in results:
        matrix.cells[(res.train_attack, res.test_attack)] = res
        if progress is not None:
            progress(res)
    return matrix


def classify_relations(matrix: TransferMatrix, threshold: float) -> list[TransferRelation]:
    """Merge ordered transferable cells into per-pair relations.

    An ordered pair (i, j) counts as transferable when its attack recall
    meets the threshold; unordered pairs where at least one direction
    transfers become relations tagged symmetric ('both') or with the
    surviving direction.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")

    def transfers(i: int, j: int) -> bool:
        cell = matrix.cells.get((i, j))
        if cell is None or cell.failed:
            return False
        return cell.attack_recall >= threshold

    relations = []
    ordered = sorted(matrix.attacks)
    for a_pos, i in enumerate(ordered):
        for j in ordered[a_pos + 1 :]:
            fwd, back = transfers(i, j), transfers(j, i)
            if fwd and back:
                relations.append(TransferRelation((i, j), "both", threshold))
            elif fwd:
                relations.append(TransferRelation((i, j), "i_to_j", threshold))
            elif back:
                relations.append(TransferRelation((i, j), "j_to_i", threshold))
    return relations


def transferable_targets(relations: list[TransferRelation]) -> dict[int, list[int]]:
    """Per training attack, the attacks its model transfers to."""
    out: dict[int, list[int]] = {}
    for rel in relations:
        i, j = rel.pair
        if rel.direction in ("both", "i_to_j"):
            out.setdefault(i, []).append(j)
        if rel.direction in ("both", "j_to_i"):
            out.setdefault(j, []).append(i)
    return {k: sorted(v) for k, v in sorted(out.items())}
