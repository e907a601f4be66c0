import csv
import json
from pathlib import Path

import numpy as np
import pytest

from attack_transfer.cli import main
from attack_transfer.fixtures import gaussian_clusters, transfer_fixture, write_fixture_csv
from attack_transfer.ingest import load_csv


@pytest.fixture(scope="module")
def transfer_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    dataset, _ = transfer_fixture(seed=3, n_features=78)
    path = root / "transfer.csv"
    write_fixture_csv(dataset, path)
    return path


@pytest.fixture(scope="module")
def multiclass_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("data15")
    counts = {0: 600}
    counts.update({a: 200 for a in range(1, 15)})
    dataset, _ = gaussian_clusters(counts, seed=4, scale=0.35)
    path = root / "clusters.csv"
    write_fixture_csv(dataset, path)
    return path


def write_config(path: Path, body: str) -> Path:
    path.write_text(body, encoding="utf-8")
    return path


SMALL_MODEL_TOML = """
[model]
hidden_layers = [16]
dropout = 0.0
learning_rate = 0.02
momentum = 0.9
batch_size = 64
epochs = 16
"""


class TestConfigErrors:
    def test_unknown_section(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", "[nonsense]\nx = 1\n")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_unknown_key(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", "[model]\nlayers = [3]\n")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_bad_toml(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", "not [valid\n")
        assert main(["ingest", "--config", str(cfg)]) == 2

    def test_bad_threshold(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", "[transfer]\nthreshold = 1.5\n")
        assert main(["transfer", "--config", str(cfg)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["ingest", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_wrong_type(self, tmp_path):
        cfg = write_config(tmp_path / "c.toml", "[model]\nepochs = \"ten\"\n")
        assert main(["ingest", "--config", str(cfg)]) == 2


class TestRunConfig:
    def test_defaults_validate(self):
        from attack_transfer.config import load_config

        cfg = load_config(None)
        assert cfg.attacks() == [1, 2, 3, 4, 5, 6, 7, 10, 11, 12, 14]
        assert cfg.threshold == 0.70
        assert cfg.fractions == (0.6, 0.1, 0.3)

    def test_single_transform_key(self, tmp_path):
        from attack_transfer.config import load_config

        cfg_file = write_config(tmp_path / "c.toml", '[transform]\ntransform = "tavg"\nwindow_n = 4\n')
        cfg = load_config(cfg_file)
        assert cfg.transform_kinds == ["tavg"]
        assert cfg.window_n == 4
        specs = cfg.transform_specs()
        assert specs[0].kind == "temporal_average"

    def test_transform_key_conflict(self, tmp_path):
        from attack_transfer.config import load_config
        from attack_transfer.errors import ConfigError

        cfg_file = write_config(
            tmp_path / "c.toml", '[transform]\ntransform = "dct"\nkinds = ["none"]\n'
        )
        with pytest.raises(ConfigError):
            load_config(cfg_file)

    def test_combos_pin_grid(self, tmp_path):
        from attack_transfer.config import load_config

        cfg_file = write_config(
            tmp_path / "c.toml",
            '[augment]\nmodes = ["real", "bootstrap"]\n'
            '[transform]\nkinds = ["none", "tavg"]\n'
            '[transfer]\ncombos = [["real", "tavg"], ["bootstrap", "none"]]\n',
        )
        cfg = load_config(cfg_file)
        assert cfg.grid_combos() == [("real", "tavg"), ("bootstrap", "none")]

    def test_cross_product_without_combos(self):
        from attack_transfer.config import load_config

        cfg = load_config(None)
        cfg.augment_modes = ["real", "smote"]
        cfg.transform_kinds = ["none", "diff"]
        assert len(cfg.grid_combos()) == 4

    def test_run_id_is_stable_hash_of_config(self):
        from attack_transfer.config import load_config

        a, b = load_config(None), load_config(None)
        assert a.effective_run_id() == b.effective_run_id()
        b.seed = 99
        assert a.effective_run_id() != b.effective_run_id()


class TestIngest:
    def test_missing_data_file(self, tmp_path, capsys):
        assert main(["ingest", "--data", str(tmp_path / "nope.csv")]) == 3
        assert "nope.csv" in capsys.readouterr().err

    def test_no_dataset_configured(self, monkeypatch):
        monkeypatch.delenv("ATTACK_TRANSFER_DATA_DIR", raising=False)
        assert main(["ingest"]) == 2

    def test_ingest_writes_cache_and_histogram(self, transfer_csv, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.toml",
            f"""
[dataset]
paths = ["{transfer_csv}"]
cache = "{tmp_path / 'flows.cache'}"
[run]
output_dir = "{tmp_path / 'results'}"
run_id = "ing"
""",
        )
        assert main(["ingest", "--config", str(cfg)]) == 0
        assert (tmp_path / "flows.cache").exists()
        hist_file = tmp_path / "results" / "ing" / "class_histogram.csv"
        rows = list(csv.DictReader(hist_file.open()))
        fractions = [float(r["fraction"]) for r in rows]
        assert abs(sum(fractions) - 1.0) < 1e-9
        out = capsys.readouterr().out
        assert "BENIGN" in out

    def test_env_var_dataset_dir(self, transfer_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("ATTACK_TRANSFER_DATA_DIR", str(transfer_csv.parent))
        assert main(["ingest", "--out", str(tmp_path / "res"), "--run-id", "env"]) == 0

    def test_dry_run_does_nothing(self, transfer_csv, tmp_path, capsys):
        out_dir = tmp_path / "results"
        code = main(
            ["ingest", "--data", str(transfer_csv), "--out", str(out_dir), "--dry-run"]
        )
        assert code == 0
        assert not out_dir.exists()
        assert "plan:" in capsys.readouterr().out


class TestFixturesGenerate:
    @pytest.mark.parametrize("kind", ["clusters", "transfer", "planted"])
    def test_generates_loadable_csv(self, tmp_path, kind):
        code = main(
            ["fixtures", "generate", "--kind", kind, "--out", str(tmp_path),
             "--benign", "120", "--attack", "40", "--seed", "1"]
        )
        assert code == 0
        csv_path = tmp_path / f"fixture_{kind}.csv"
        truth_path = tmp_path / f"fixture_{kind}_truth.json"
        assert truth_path.exists()
        loaded = load_csv(csv_path)
        truth = json.loads(truth_path.read_text())
        assert len(loaded) == sum(truth["counts"].values())

    def test_truth_matches_histogram(self, tmp_path):
        main(
            ["fixtures", "generate", "--kind", "transfer", "--out", str(tmp_path),
             "--benign", "100", "--attack", "30", "--seed", "2"]
        )
        loaded = load_csv(tmp_path / "fixture_transfer.csv")
        truth = json.loads((tmp_path / "fixture_transfer_truth.json").read_text())
        for cid, count in truth["counts"].items():
            assert int((loaded.labels == int(cid)).sum()) == count


class TestTransferCommand:
    def _config(self, tmp_path, transfer_csv, run_id="tr", extra=""):
        return write_config(
            tmp_path / "c.toml",
            f"""
[dataset]
paths = ["{transfer_csv}"]
[attacks]
include = [1, 2, 3]
[augment]
modes = ["real"]
{SMALL_MODEL_TOML}
[transfer]
threshold = 0.7
[run]
seed = 11
output_dir = "{tmp_path / 'results'}"
run_id = "{run_id}"
{extra}
""",
        )

    def test_dry_run_plan(self, transfer_csv, tmp_path, capsys):
        cfg = self._config(tmp_path, transfer_csv)
        assert main(["transfer", "--config", str(cfg), "--dry-run"]) == 0
        out = capsys.readouterr().out
        assert "6 cells" in out
        assert not (tmp_path / "results").exists()

    def test_end_to_end_artifacts(self, transfer_csv, tmp_path):
        cfg = self._config(tmp_path, transfer_csv)
        assert main(["transfer", "--config", str(cfg)]) == 0
        root = tmp_path / "results" / "tr"
        table = root / "matrices" / "transfer_real_none.csv"
        figure = root / "figures" / "transfer_real_none.svg"
        relations = root / "matrices" / "transfer_real_none_relations.csv"
        manifest = json.loads((root / "manifest.json").read_text())
        assert table.exists() and figure.exists() and relations.exists()
        assert "matrices/transfer_real_none.csv" in manifest["artifacts"]
        rows = list(csv.DictReader(table.open()))
        assert len(rows) == 6
        # the constructed fixture transfers 1<->2 but not to 3
        recall = {
            (int(r["train_attack"]), int(r["test_attack"])): float(r["attack_recall"])
            for r in rows
        }
        assert recall[(1, 2)] >= 0.9
        assert recall[(1, 3)] <= 0.55

    def test_report_rerender_idempotent(self, transfer_csv, tmp_path):
        cfg = self._config(tmp_path, transfer_csv, run_id="rr")
        assert main(["transfer", "--config", str(cfg)]) == 0
        root = tmp_path / "results" / "rr"
        table = root / "matrices" / "transfer_real_none.csv"
        figure = root / "figures" / "transfer_real_none.svg"
        before_table = table.read_bytes()
        before_figure = figure.read_bytes()
        assert main(["report", "--run", str(root), "--threshold", "0.7"]) == 0
        assert table.read_bytes() == before_table
        assert figure.read_bytes() == before_figure

    def test_report_missing_dir(self, tmp_path):
        assert main(["report", "--run", str(tmp_path / "absent")]) == 3


class TestMulticlassCommand:
    def test_separable_fixture_high_recall(self, multiclass_csv, tmp_path):
        cfg = write_config(
            tmp_path / "c.toml",
            f"""
[dataset]
paths = ["{multiclass_csv}"]
[model]
hidden_layers = [64]
dropout = 0.0
learning_rate = 0.02
momentum = 0.9
batch_size = 64
epochs = 30
[run]
seed = 3
output_dir = "{tmp_path / 'results'}"
run_id = "mc"
""",
        )
        assert main(["multiclass", "--config", str(cfg)]) == 0
        root = tmp_path / "results" / "mc"
        percent = root / "confusion" / "multiclass_percent.csv"
        rows = list(csv.reader(percent.open()))
        for row in rows[1:]:
            values = [float(v) for v in row[1:]]
            if any(np.isfinite(values)):
                assert abs(sum(values) - 100.0) < 0.01
        counts_rows = list(csv.reader((root / "confusion" / "multiclass_counts.csv").open()))
        diag = [float(counts_rows[i + 1][i + 1]) for i in range(15)]
        totals = [sum(float(v) for v in counts_rows[i + 1][1:]) for i in range(15)]
        recalls = [d / t for d, t in zip(diag, totals) if t > 0]
        assert all(r >= 0.99 for r in recalls)
        assert (root / "multiclass_model.bin").exists()

    def test_divergence_exit_code(self, multiclass_csv, tmp_path):
        cfg = write_config(
            tmp_path / "c.toml",
            f"""
[dataset]
paths = ["{multiclass_csv}"]
[model]
hidden_layers = [8]
dropout = 0.0
learning_rate = 1e12
momentum = 0.9
batch_size = 32
epochs = 3
[run]
output_dir = "{tmp_path / 'results'}"
""",
        )
        assert main(["multiclass", "--config", str(cfg)]) == 4


class TestRfeCommand:
    def test_planted_fixture_outputs(self, tmp_path):
        main(
            ["fixtures", "generate", "--kind", "planted", "--out", str(tmp_path),
             "--benign", "1200", "--attack", "500", "--seed", "5"]
        )
        cfg = write_config(
            tmp_path / "c.toml",
            f"""
[dataset]
paths = ["{tmp_path / 'fixture_planted.csv'}"]
[rfe]
step = 8
singles = [1]
pairs = [[1, 1]]
[run]
output_dir = "{tmp_path / 'results'}"
run_id = "rfe"
""",
        )
        assert main(["rfe", "--config", str(cfg)]) == 0
        root = tmp_path / "results" / "rfe"
        assert (root / "rfe" / "single_1.csv").exists()
        assert (root / "rfe" / "pair_1_1.csv").exists()
        summary = list(csv.DictReader((root / "rfe" / "summary.csv").open()))
        assert {r["positive_classes"] for r in summary} == {"1", "1+1"}
        ranking_rows = list(csv.DictReader((root / "rfe" / "single_1.csv").open()))
        assert len(ranking_rows) == 78

    def test_dry_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.toml", "[rfe]\nsingles = [1, 2]\n")
        assert main(["rfe", "--config", str(cfg), "--dry-run"]) == 0
        assert "2 single attack(s)" in capsys.readouterr().out
