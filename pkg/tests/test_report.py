import csv
import json
import math

import numpy as np

from attack_transfer.nn import EvalResult
from attack_transfer.report import (
    RunManifest,
    emit_comparison,
    emit_confusion,
    emit_relations,
    emit_rfe_ranking,
    emit_rfe_summary,
    emit_transfer_matrix,
    load_matrix_csv,
    run_layout,
)
from attack_transfer.rfe import EliminatedFeature, FeatureRanking
from attack_transfer.transfer import classify_relations

from test_transfer import fake_matrix


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestConfusion:
    def test_identity_confusion_has_diagonal_100(self, tmp_path):
        cm = np.diag([10, 20, 30])
        result = EvalResult(cm, np.ones(3), 1.0)
        table = tmp_path / "c.csv"
        emit_confusion(result, table, tmp_path / "c.svg", normalize=True,
                       class_names=("a", "b", "c"))
        rows = read_csv(table)
        assert rows[0] == ["true_class", "a", "b", "c"]
        for i, row in enumerate(rows[1:]):
            values = [float(v) for v in row[1:]]
            assert values[i] == 100.0

    def test_percentage_rows_sum_to_100(self, tmp_path):
        rng = np.random.default_rng(0)
        cm = rng.integers(1, 50, size=(4, 4))
        result = EvalResult(cm, np.ones(4), 0.5)
        table = tmp_path / "c.csv"
        emit_confusion(result, table, tmp_path / "c.svg",
                       class_names=("a", "b", "c", "d"))
        for row in read_csv(table)[1:]:
            assert math.isclose(sum(float(v) for v in row[1:]), 100.0, abs_tol=0.01)

    def test_counts_mode(self, tmp_path):
        cm = np.array([[5, 1], [2, 8]])
        result = EvalResult(cm, np.array([5 / 6, 0.8]), 13 / 16)
        table = tmp_path / "c.csv"
        emit_confusion(result, table, tmp_path / "c.svg", normalize=False,
                       class_names=("benign", "attack"))
        rows = read_csv(table)
        assert [float(v) for v in rows[1][1:]] == [5.0, 1.0]

    def test_svg_written(self, tmp_path):
        cm = np.eye(2, dtype=np.int64) * 4
        emit_confusion(EvalResult(cm, np.ones(2), 1.0), tmp_path / "c.csv",
                       tmp_path / "c.svg", class_names=("x", "y"))
        svg = (tmp_path / "c.svg").read_text()
        assert svg.startswith("<svg")
        assert svg.count("<rect") >= 4


class TestTransferMatrixTable:
    def test_bit_exact_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        recalls = {
            (i, j): float(rng.random()) for i in (1, 2, 3) for j in (1, 2, 3) if i != j
        }
        matrix = fake_matrix(recalls)
        table = tmp_path / "m.csv"
        emit_transfer_matrix(matrix, table, tmp_path / "m.svg")
        loaded = load_matrix_csv(table)
        assert loaded.attacks == matrix.attacks
        assert loaded.augment_mode == matrix.augment_mode
        for key, cell in matrix.cells.items():
            other = loaded.cells[key]
            assert other.attack_recall == cell.attack_recall  # bit-exact
            assert other.benign_recall == cell.benign_recall
            assert other.seed == cell.seed

    def test_placeholder_diagonal_in_figure(self, tmp_path):
        matrix = fake_matrix({})
        emit_transfer_matrix(matrix, tmp_path / "m.csv", tmp_path / "m.svg")
        svg = (tmp_path / "m.svg").read_text()
        assert svg.count(">n/a<") == len(matrix.attacks)

    def test_rerender_byte_identical(self, tmp_path):
        matrix = fake_matrix({(1, 2): 0.512345678901234})
        emit_transfer_matrix(matrix, tmp_path / "a.csv", tmp_path / "a.svg")
        emit_transfer_matrix(matrix, tmp_path / "b.csv", tmp_path / "b.svg")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_failed_cell_round_trips(self, tmp_path):
        matrix = fake_matrix({(1, 2): 0.9})
        bad = matrix.cells[(2, 1)]
        matrix.cells[(2, 1)] = type(bad)(
            **{**bad.__dict__, "status": "failed", "error": "EmptyClassError: no rows",
               "attack_recall": float("nan"), "benign_recall": float("nan")}
        )
        table = tmp_path / "m.csv"
        emit_transfer_matrix(matrix, table, tmp_path / "m.svg")
        loaded = load_matrix_csv(table)
        assert loaded.cells[(2, 1)].failed
        assert math.isnan(loaded.cells[(2, 1)].attack_recall)
        assert "EmptyClassError" in loaded.cells[(2, 1)].error


class TestRelations:
    def test_empty_relations_header_only(self, tmp_path):
        matrix = fake_matrix({})
        emit_relations([], matrix, tmp_path / "r.csv")
        rows = read_csv(tmp_path / "r.csv")
        assert rows == [["train_attack", "train_attack_name", "transfers_to"]]

    def test_rows_match_threshold(self, tmp_path):
        matrix = fake_matrix({(1, 2): 0.9, (2, 1): 0.8, (3, 1): 0.75})
        threshold = 0.7
        relations = classify_relations(matrix, threshold)
        emit_relations(relations, matrix, tmp_path / "r.csv")
        rows = read_csv(tmp_path / "r.csv")[1:]
        for row in rows:
            train_attack = int(row[0])
            for chunk in row[2].split("; "):
                target = int(chunk.split("(")[1].split(",")[0])
                cell = matrix.cells[(train_attack, target)]
                assert cell.attack_recall >= threshold

    def test_symmetry_annotation(self, tmp_path):
        matrix = fake_matrix({(1, 2): 0.9, (2, 1): 0.8, (3, 1): 0.9})
        relations = classify_relations(matrix, 0.7)
        emit_relations(relations, matrix, tmp_path / "r.csv")
        body = (tmp_path / "r.csv").read_text()
        assert "symmetric" in body
        assert "one-way" in body


class TestComparison:
    def test_table_and_figure(self, tmp_path):
        matrices = {
            "real/none": fake_matrix({(1, 2): 0.4, (2, 1): 0.5}),
            "bootstrap/none": fake_matrix({(1, 2): 0.8, (2, 1): 0.7}, mode="bootstrap"),
        }
        pairs = [(1, 2), (2, 1)]
        table = tmp_path / "cmp.csv"
        emit_comparison(matrices, pairs, table, tmp_path / "cmp.svg")
        rows = read_csv(table)
        assert rows[0] == ["regime", "train_attack", "test_attack", "attack_recall"]
        assert len(rows) == 1 + len(matrices) * len(pairs)
        svg = (tmp_path / "cmp.svg").read_text()
        assert svg.count("<rect") >= 4

    def test_missing_pair_recorded_as_nan(self, tmp_path):
        matrices = {"real/none": fake_matrix({(1, 2): 0.4})}
        emit_comparison(matrices, [(1, 9)], tmp_path / "cmp.csv", tmp_path / "cmp.svg")
        rows = read_csv(tmp_path / "cmp.csv")
        assert rows[1][3] == "nan"


class TestRfeTables:
    def _ranking(self):
        elim = [
            EliminatedFeature(2, "f2", 1, 0.01),
            EliminatedFeature(0, "f0", 2, 0.5),
            EliminatedFeature(1, "f1", 3, 0.9),
        ]
        return FeatureRanking(
            feature_names=("f0", "f1", "f2"),
            elimination=elim,
            scores={3: 0.95, 2: 0.94, 1: 0.7},
            selected=(1, 0),
            positive_classes=(4,),
        )

    def test_ranking_table(self, tmp_path):
        emit_rfe_ranking(self._ranking(), tmp_path / "rank.csv")
        rows = read_csv(tmp_path / "rank.csv")
        assert rows[0] == [
            "feature_index", "feature_name", "elimination_round", "selected", "importance",
        ]
        assert rows[1][:4] == ["2", "f2", "1", "no"]
        assert rows[3][:4] == ["1", "f1", "3", "yes"]

    def test_summary_table(self, tmp_path):
        rankings = {(4,): self._ranking(), (4, 5): self._ranking()}
        emit_rfe_summary(rankings, tmp_path / "summary.csv")
        rows = read_csv(tmp_path / "summary.csv")
        assert rows[1][0] == "4"
        assert rows[2][0] == "4+5"
        assert rows[1][1] == "2"


class TestManifest:
    def test_written_fields(self, tmp_path):
        manifest = RunManifest(
            run_id="run-x",
            tool_version="0.1.0",
            config={"a": 1},
            dataset_fingerprint={"rows": 10, "sha256": "ff"},
            seeds={"run": 7},
        )
        manifest.artifacts.append("matrices/m.csv")
        manifest.write(tmp_path / "manifest.json")
        data = json.loads((tmp_path / "manifest.json").read_text())
        assert data["run_id"] == "run-x"
        assert data["artifacts"] == ["matrices/m.csv"]
        assert data["config_sha256"] == manifest.config_sha256
        assert data["created_utc"]

    def test_config_hash_stable(self):
        a = RunManifest("r", "v", {"x": [1, 2]}, {}, {})
        b = RunManifest("r", "v", {"x": [1, 2]}, {}, {})
        assert a.config_sha256 == b.config_sha256

    def test_layout_created(self, tmp_path):
        layout = run_layout(tmp_path, "run-1")
        for key in ("matrices", "confusion", "rfe", "figures"):
            assert layout[key].is_dir()
