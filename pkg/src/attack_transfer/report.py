"""Result rendering: CSV tables, self-contained SVG figures, run manifest.

Every figure has a companion table carrying the exact plotted numbers
(floats serialized with round-tripping repr). Data files never contain
timestamps, so re-rendering the same results is byte-identical; wall
clock times live in the manifest only.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .labels import CLASS_NAMES
from .nn import EvalResult
from .rfe import FeatureRanking
from .transfer import TransferCellResult, TransferMatrix, TransferRelation, transferable_targets

CELL_COLUMNS = (
    "train_attack",
    "test_attack",
    "augment_mode",
    "transform",
    "attack_recall",
    "benign_recall",
    "n_train",
    "n_test_attack",
    "n_test_benign",
    "seed",
    "status",
    "error",
)


def _fmt(value: float) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(value))


def _write_rows(path: Path, header: tuple[str, ...], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ----------------------------------------------------------------------
# SVG primitives


def _color(value: float) -> str:
    """White for 0 through dark blue for 1; gray for non-finite."""
    if not np.isfinite(value):
        return "#bbbbbb"
    v = min(max(float(value), 0.0), 1.0)
    r = round(255 + (8 - 255) * v)
    g = round(255 + (64 - 255) * v)
    b = round(255 + (140 - 255) * v)
    return f"#{r:02x}{g:02x}{b:02x}"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg_heatmap(
    values: np.ndarray,
    row_labels: list[str],
    col_labels: list[str],
    title: str,
    placeholder_mask: np.ndarray | None = None,
    cell_text: list[list[str]] | None = None,
    axis_names: tuple[str, str] = ("", ""),
) -> str:
    rows, cols = values.shape
    cell = 46
    left, top = 170, 120
    width = left + cols * cell + 30
    height = top + rows * cell + 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="24" font-size="15" text-anchor="middle">{_esc(title)}</text>',
    ]
    if axis_names[0]:
        parts.append(
            f'<text x="14" y="{top + rows * cell // 2}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + rows * cell // 2})">{_esc(axis_names[0])}</text>'
        )
    if axis_names[1]:
        parts.append(
            f'<text x="{left + cols * cell // 2}" y="44" font-size="12" '
            f'text-anchor="middle">{_esc(axis_names[1])}</text>'
        )
    for j, label in enumerate(col_labels):
        x = left + j * cell + cell // 2
        parts.append(
            f'<text x="{x}" y="{top - 8}" font-size="10" text-anchor="start" '
            f'transform="rotate(-45 {x} {top - 8})">{_esc(label)}</text>'
        )
    for i, label in enumerate(row_labels):
        y = top + i * cell + cell // 2 + 4
        parts.append(
            f'<text x="{left - 6}" y="{y}" font-size="10" text-anchor="end">{_esc(label)}</text>'
        )
    for i in range(rows):
        for j in range(cols):
            x, y = left + j * cell, top + i * cell
            if placeholder_mask is not None and placeholder_mask[i, j]:
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                    f'fill="#e6e6e6" stroke="#888"/>'
                )
                parts.append(
                    f'<line x1="{x}" y1="{y}" x2="{x + cell}" y2="{y + cell}" stroke="#999"/>'
                )
                parts.append(
                    f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" font-size="9" '
                    f'text-anchor="middle" fill="#666">n/a</text>'
                )
                continue
            value = values[i, j]
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_color(value)}" stroke="#888"/>'
            )
            text = (
                cell_text[i][j]
                if cell_text is not None
                else ("" if not np.isfinite(value) else f"{value:.2f}")
            )
            if text:
                fill = "#ffffff" if np.isfinite(value) and value > 0.6 else "#222222"
                parts.append(
                    f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" font-size="10" '
                    f'text-anchor="middle" fill="{fill}">{_esc(text)}</text>'
                )
    parts.append("</svg>")
    return "\n".join(parts)


_BAR_PALETTE = ("#3465a4", "#cc3333", "#2e8b57", "#e2a000", "#7b4fa6", "#5a5a5a")


def _svg_grouped_bars(
    group_labels: list[str],
    series_labels: list[str],
    values: np.ndarray,  # (n_series, n_groups), in [0, 1]
    title: str,
    y_label: str,
) -> str:
    n_series, n_groups = values.shape
    bar_w, gap = 18, 26
    group_w = n_series * bar_w + gap
    left, top, plot_h = 70, 70, 260
    width = left + n_groups * group_w + 200
    height = top + plot_h + 70
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="26" font-size="15" text-anchor="middle">{_esc(title)}</text>',
        f'<text x="16" y="{top + plot_h // 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h // 2})">{_esc(y_label)}</text>',
    ]
    for tick in range(0, 11, 2):
        frac = tick / 10
        y = top + plot_h - round(frac * plot_h)
        parts.append(
            f'<line x1="{left}" y1="{y}" x2="{left + n_groups * group_w}" y2="{y}" '
            f'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4}" font-size="10" text-anchor="end">{frac:.1f}</text>'
        )
    for g in range(n_groups):
        gx = left + g * group_w
        for s in range(n_series):
            v = values[s, g]
            if not np.isfinite(v):
                continue
            h = round(min(max(float(v), 0.0), 1.0) * plot_h)
            x = gx + s * bar_w
            parts.append(
                f'<rect x="{x}" y="{top + plot_h - h}" width="{bar_w - 2}" height="{h}" '
                f'fill="{_BAR_PALETTE[s % len(_BAR_PALETTE)]}"/>'
            )
        parts.append(
            f'<text x="{gx + (n_series * bar_w) // 2}" y="{top + plot_h + 18}" font-size="10" '
            f'text-anchor="middle">{_esc(group_labels[g])}</text>'
        )
    legend_x = left + n_groups * group_w + 20
    for s, label in enumerate(series_labels):
        y = top + 10 + s * 20
        parts.append(
            f'<rect x="{legend_x}" y="{y - 10}" width="14" height="14" '
            f'fill="{_BAR_PALETTE[s % len(_BAR_PALETTE)]}"/>'
        )
        parts.append(
            f'<text x="{legend_x + 20}" y="{y + 2}" font-size="11">{_esc(label)}</text>'
        )
    parts.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + n_groups * group_w}" '
                 f'y2="{top + plot_h}" stroke="#333"/>')
    parts.append("</svg>")
    return "\n".join(parts)


# ----------------------------------------------------------------------
# Confusion matrix


def emit_confusion(
    result: EvalResult,
    table_path: str | Path,
    image_path: str | Path,
    normalize: bool = True,
    class_names: tuple[str, ...] | None = None,
) -> None:
    """Write confusion counts (or row percentages) plus a heatmap image."""
    table_path, image_path = Path(table_path), Path(image_path)
    cm = result.confusion
    n = cm.shape[0]
    names = list(class_names or CLASS_NAMES[:n])
    row_sums = cm.sum(axis=1, keepdims=True)
    if normalize:
        with np.errstate(divide="ignore", invalid="ignore"):
            display = np.where(row_sums > 0, 100.0 * cm / row_sums, np.nan)
    else:
        display = cm.astype(np.float64)

    header = ("true_class", *names)
    rows = [
        (names[i], *(_fmt(v) for v in display[i]))
        for i in range(n)
    ]
    _write_rows(table_path, header, rows)

    scale = display / 100.0 if normalize else _safe_unit_scale(display)
    cell_text = [
        [("" if not np.isfinite(display[i, j]) else f"{display[i, j]:.1f}") for j in range(n)]
        for i in range(n)
    ]
    title = "Per-class confusion" + (" (%)" if normalize else " (counts)")
    svg = _svg_heatmap(
        scale,
        names,
        names,
        title,
        cell_text=cell_text,
        axis_names=("true class", "predicted class"),
    )
    image_path.parent.mkdir(parents=True, exist_ok=True)
    image_path.write_text(svg, encoding="utf-8")


def _safe_unit_scale(values: np.ndarray) -> np.ndarray:
    top = np.nanmax(values) if np.isfinite(values).any() else 1.0
    return values / top if top > 0 else values


# ----------------------------------------------------------------------
# Transfer matrices


def emit_transfer_matrix(
    matrix: TransferMatrix,
    table_path: str | Path,
    image_path: str | Path,
    class_names: tuple[str, ...] | None = None,
) -> None:
    """One CSV row per computed cell plus a heatmap with placeholder diagonal."""
    table_path, image_path = Path(table_path), Path(image_path)
    rows = []
    for i in matrix.attacks:
        for j in matrix.attacks:
            if i == j:
                continue
            cell = matrix.cells[(i, j)]
            rows.append(
                (
                    cell.train_attack,
                    cell.test_attack,
                    cell.augment_mode,
                    cell.transform,
                    _fmt(cell.attack_recall),
                    _fmt(cell.benign_recall),
                    cell.n_train,
                    cell.n_test_attack,
                    cell.n_test_benign,
                    cell.seed,
                    cell.status,
                    cell.error,
                )
            )
    _write_rows(table_path, CELL_COLUMNS, rows)

    names = class_names or CLASS_NAMES
    k = len(matrix.attacks)
    values = np.full((k, k), np.nan)
    mask = np.zeros((k, k), dtype=bool)
    for a, i in enumerate(matrix.attacks):
        for b, j in enumerate(matrix.attacks):
            if i == j:
                mask[a, b] = True
            else:
                values[a, b] = matrix.cells[(i, j)].attack_recall
    labels = [f"{names[i]} ({i})" if i < len(names) else str(i) for i in matrix.attacks]
    svg = _svg_heatmap(
        values,
        labels,
        labels,
        f"Attack recall, training={matrix.augment_mode}, transform={matrix.transform}",
        placeholder_mask=mask,
        axis_names=("training attack", "test attack"),
    )
    image_path.parent.mkdir(parents=True, exist_ok=True)
    image_path.write_text(svg, encoding="utf-8")


def load_matrix_csv(path: str | Path) -> TransferMatrix:
    """Rebuild a TransferMatrix from its cells table."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cells = []
        for row in reader:
            cells.append(
                TransferCellResult(
                    train_attack=int(row["train_attack"]),
                    test_attack=int(row["test_attack"]),
                    augment_mode=row["augment_mode"],
                    transform=row["transform"],
                    attack_recall=float(row["attack_recall"]),
                    benign_recall=float(row["benign_recall"]),
                    n_train=int(row["n_train"]),
                    n_test_attack=int(row["n_test_attack"]),
                    n_test_benign=int(row["n_test_benign"]),
                    seed=int(row["seed"]),
                    status=row["status"],
                    error=row["error"],
                )
            )
    if not cells:
        raise ValueError(f"{path}: no cells")
    attacks = []
    for c in cells:
        if c.train_attack not in attacks:
            attacks.append(c.train_attack)
    matrix = TransferMatrix(
        attacks=tuple(attacks),
        augment_mode=cells[0].augment_mode,
        transform=cells[0].transform,
    )
    for c in cells:
        matrix.cells[(c.train_attack, c.test_attack)] = c
    return matrix


def emit_relations(
    relations: list[TransferRelation],
    matrix: TransferMatrix,
    table_path: str | Path,
    class_names: tuple[str, ...] | None = None,
) -> None:
    """Per training attack: the attacks it transfers to, tagged by symmetry."""
    names = class_names or CLASS_NAMES
    targets = transferable_targets(relations)
    sym_pairs = {rel.pair for rel in relations if rel.symmetric}

    def name(i: int) -> str:
        return names[i] if i < len(names) else str(i)

    rows = []
    for train_attack, tos in targets.items():
        annotated = []
        for j in tos:
            pair = (min(train_attack, j), max(train_attack, j))
            tag = "symmetric" if pair in sym_pairs else "one-way"
            annotated.append(f"{name(j)} ({j}, {tag})")
        rows.append((train_attack, name(train_attack), "; ".join(annotated)))
    _write_rows(
        Path(table_path),
        ("train_attack", "train_attack_name", "transfers_to"),
        rows,
    )


def emit_comparison(
    matrices: dict[str, TransferMatrix],
    pairs: list[tuple[int, int]],
    table_path: str | Path,
    image_path: str | Path,
    class_names: tuple[str, ...] | None = None,
) -> None:
    """Attack recall of selected (train, test) pairs across training regimes."""
    names = class_names or CLASS_NAMES
    series = list(matrices.keys())
    values = np.full((len(series), len(pairs)), np.nan)
    rows = []
    for s, label in enumerate(series):
        matrix = matrices[label]
        for g, (i, j) in enumerate(pairs):
            cell = matrix.cells.get((i, j))
            if cell is not None and not cell.failed:
                values[s, g] = cell.attack_recall
            rows.append(
                (
                    label,
                    i,
                    j,
                    _fmt(values[s, g]),
                )
            )
    _write_rows(
        Path(table_path), ("regime", "train_attack", "test_attack", "attack_recall"), rows
    )
    group_labels = [f"{i}→{j}" for i, j in pairs]
    svg = _svg_grouped_bars(
        group_labels,
        series,
        values,
        "Attack recall on selected train/test pairs",
        "attack recall",
    )
    image_path = Path(image_path)
    image_path.parent.mkdir(parents=True, exist_ok=True)
    image_path.write_text(svg, encoding="utf-8")


# ----------------------------------------------------------------------
# Feature rankings


def emit_rfe_ranking(ranking: FeatureRanking, table_path: str | Path) -> None:
    """Full elimination trace: one row per feature."""
    selected = set(ranking.selected)
    rows = [
        (
            e.index,
            e.name,
            e.round,
            "yes" if e.index in selected else "no",
            _fmt(e.importance),
        )
        for e in ranking.elimination
    ]
    _write_rows(
        Path(table_path),
        ("feature_index", "feature_name", "elimination_round", "selected", "importance"),
        rows,
    )


def emit_rfe_summary(
    rankings: dict[tuple[int, ...], FeatureRanking], table_path: str | Path
) -> None:
    """Selected-set sizes and scores for a batch of rankings."""
    rows = []
    for classes, ranking in rankings.items():
        rows.append(
            (
                "+".join(str(c) for c in classes),
                len(ranking.selected),
                _fmt(ranking.selected_score),
                _fmt(ranking.best_score),
                "; ".join(ranking.feature_names[i] for i in ranking.selected),
            )
        )
    _write_rows(
        Path(table_path),
        ("positive_classes", "n_selected", "selected_score", "best_score", "selected_features"),
        rows,
    )


# ----------------------------------------------------------------------
# Manifest


@dataclass
class RunManifest:
    """Provenance record for one results directory."""

    run_id: str
    tool_version: str
    config: dict
    dataset_fingerprint: dict
    seeds: dict
    created_utc: str = ""
    artifacts: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.created_utc:
            self.created_utc = datetime.now(timezone.utc).isoformat()

    @property
    def config_sha256(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def add_artifact(self, path: str | Path, base: str | Path) -> None:
        self.artifacts.append(str(Path(path).relative_to(base)))

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "run_id": self.run_id,
            "created_utc": self.created_utc,
            "tool_version": self.tool_version,
            "config": self.config,
            "config_sha256": self.config_sha256,
            "dataset_fingerprint": self.dataset_fingerprint,
            "seeds": self.seeds,
            "artifacts": sorted(self.artifacts),
            "notes": self.notes,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def run_layout(base: str | Path, run_id: str) -> dict[str, Path]:
    """Create and return the standard results directory layout."""
    root = Path(base) / run_id
    layout = {
        "root": root,
        "matrices": root / "matrices",
        "confusion": root / "confusion",
        "rfe": root / "rfe",
        "figures": root / "figures",
    }
    for p in layout.values():
        p.mkdir(parents=True, exist_ok=True)
    return layout
