"""Declarative run configuration: TOML file + flag overrides.

The whole file is validated before any work starts; unknown sections or
keys are rejected outright so a typo cannot silently fall back to a
default.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .labels import DEFAULT_EXCLUDED_ATTACKS, N_CLASSES
from .nn import ModelConfig
from .preprocess import TransformSpec

DATA_DIR_ENV = "ATTACK_TRANSFER_DATA_DIR"

TRANSFORM_TOKENS = {
    "none": "none",
    "diff": "differential",
    "tavg": "temporal_average",
    "dct": "dct",
}

_SCHEMA: dict[str, dict[str, type | tuple[type, ...]]] = {
    "dataset": {"paths": list, "cache": str},
    "split": {"fractions": list, "seed": int},
    "attacks": {"include": list, "exclude": list},
    "augment": {"modes": list, "k_neighbors": int},
    "transform": {"kinds": list, "transform": str, "window_n": int},
    "model": {
        "hidden_layers": list,
        "dropout": float,
        "learning_rate": float,
        "momentum": float,
        "batch_size": int,
        "epochs": int,
    },
    "transfer": {
        "threshold": float,
        "parallelism": int,
        "comparison_pairs": list,
        "combos": list,
    },
    "rfe": {
        "step": (int, float),
        "tolerance": float,
        "singles": list,
        "pairs": list,
        "max_per_class": int,
    },
    "run": {"seed": int, "output_dir": str, "run_id": str},
}


@dataclass
class RunConfig:
    dataset_paths: list[str] = field(default_factory=list)
    cache_path: str = ""
    fractions: tuple[float, float, float] = (0.6, 0.1, 0.3)
    split_seed: int = 7
    include_attacks: list[int] = field(default_factory=list)
    exclude_attacks: list[int] = field(
        default_factory=lambda: sorted(DEFAULT_EXCLUDED_ATTACKS)
    )
    augment_modes: list[str] = field(default_factory=lambda: ["real"])
    k_neighbors: int = 5
    transform_kinds: list[str] = field(default_factory=lambda: ["none"])
    window_n: int = 10
    hidden_layers: tuple[int, ...] = (256, 128, 64)
    dropout: float = 0.2
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 256
    epochs: int = 100
    threshold: float = 0.70
    parallelism: int = 1
    comparison_pairs: list[tuple[int, int]] = field(
        default_factory=lambda: [(3, 2), (2, 4), (5, 3), (5, 6), (12, 14)]
    )
    combos: list[tuple[str, str]] = field(default_factory=list)
    rfe_step: float = 1
    rfe_tolerance: float = 0.01
    rfe_singles: list[int] = field(default_factory=list)
    rfe_pairs: list[tuple[int, int]] = field(
        default_factory=lambda: [(3, 2), (3, 4), (3, 6), (4, 6), (3, 1), (3, 7)]
    )
    rfe_max_per_class: int = 0
    seed: int = 7
    output_dir: str = "results"
    run_id: str = ""

    # ------------------------------------------------------------------
    def attacks(self) -> list[int]:
        """Attack classes included in grid and ranking runs."""
        if self.include_attacks:
            return sorted(self.include_attacks)
        return [a for a in range(1, N_CLASSES) if a not in set(self.exclude_attacks)]

    def model_config(self, input_dim: int, output_classes: int, seed: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim,
            hidden_layers=self.hidden_layers,
            output_classes=output_classes,
            dropout_rate=self.dropout,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=seed,
        )

    def transform_specs(self) -> list[TransformSpec]:
        return [
            TransformSpec(TRANSFORM_TOKENS[token], self.window_n)
            for token in self.transform_kinds
        ]

    def grid_combos(self) -> list[tuple[str, str]]:
        """(augment mode, transform token) pairs to run; cross product unless
        pinned via [transfer].combos."""
        if self.combos:
            return list(self.combos)
        return [(m, t) for m in self.augment_modes for t in self.transform_kinds]

    def resolved_paths(self) -> list[Path]:
        """Expand configured dataset paths (directories become their CSVs);
        fall back to the data-dir environment variable."""
        raw = list(self.dataset_paths)
        if not raw:
            env = os.environ.get(DATA_DIR_ENV, "")
            if env:
                raw = [env]
        out: list[Path] = []
        for entry in raw:
            p = Path(entry)
            if p.is_dir():
                out.extend(sorted(p.glob("*.csv")))
            else:
                out.append(p)
        return out

    def to_dict(self) -> dict:
        return {
            "dataset": {"paths": list(self.dataset_paths), "cache": self.cache_path},
            "split": {"fractions": list(self.fractions), "seed": self.split_seed},
            "attacks": {
                "include": list(self.include_attacks),
                "exclude": list(self.exclude_attacks),
            },
            "augment": {"modes": list(self.augment_modes), "k_neighbors": self.k_neighbors},
            "transform": {"kinds": list(self.transform_kinds), "window_n": self.window_n},
            "model": {
                "hidden_layers": list(self.hidden_layers),
                "dropout": self.dropout,
                "learning_rate": self.learning_rate,
                "momentum": self.momentum,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
            },
            "transfer": {
                "threshold": self.threshold,
                "parallelism": self.parallelism,
                "comparison_pairs": [list(p) for p in self.comparison_pairs],
                "combos": [list(c) for c in self.combos],
            },
            "rfe": {
                "step": self.rfe_step,
                "tolerance": self.rfe_tolerance,
                "singles": list(self.rfe_singles),
                "pairs": [list(p) for p in self.rfe_pairs],
                "max_per_class": self.rfe_max_per_class,
            },
            "run": {"seed": self.seed, "output_dir": self.output_dir, "run_id": self.run_id},
        }

    def effective_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return "run-" + hashlib.sha256(blob).hexdigest()[:10]

    # ------------------------------------------------------------------
    def validate(self) -> None:
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ConfigError(f"split.fractions must be three positive numbers: {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split.fractions must sum to 1: {self.fractions}")
        for mode in self.augment_modes:
            if mode not in ("real", "bootstrap", "smote"):
                raise ConfigError(f"unknown augment mode {mode!r}")
        for token in self.transform_kinds:
            if token not in TRANSFORM_TOKENS:
                raise ConfigError(
                    f"unknown transform {token!r}; expected one of {sorted(TRANSFORM_TOKENS)}"
                )
        for mode, token in self.combos:
            if mode not in ("real", "bootstrap", "smote") or token not in TRANSFORM_TOKENS:
                raise ConfigError(f"bad transfer.combos entry {[mode, token]!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"transfer.threshold must be in (0, 1): {self.threshold}")
        if self.parallelism < 1:
            raise ConfigError("transfer.parallelism must be >= 1")
        if self.window_n < 1:
            raise ConfigError("transform.window_n must be >= 1")
        if self.k_neighbors < 1:
            raise ConfigError("augment.k_neighbors must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("model.epochs and model.batch_size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("model.dropout must be in [0, 1)")
        if self.rfe_step <= 0:
            raise ConfigError("rfe.step must be positive")
        for ids in (self.include_attacks, self.exclude_attacks, self.rfe_singles):
            for a in ids:
                if not 1 <= a < N_CLASSES:
                    raise ConfigError(f"attack class id {a} outside 1..{N_CLASSES - 1}")
        for pair in [*self.comparison_pairs, *self.rfe_pairs]:
            if len(pair) != 2 or not all(1 <= a < N_CLASSES for a in pair):
                raise ConfigError(f"bad attack pair {list(pair)!r}")


def _check_unknown(data: dict) -> None:
    for section, content in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key, value in content.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            expected = _SCHEMA[section][key]
            if expected is float:
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            elif expected is int:
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif isinstance(expected, tuple):
                ok = isinstance(value, expected) and not isinstance(value, bool)
            else:
                ok = isinstance(value, expected)
            if not ok:
                raise ConfigError(
                    f"[{section}].{key} must be {getattr(expected, '__name__', expected)}, "
                    f"got {type(value).__name__}"
                )


def _pairs(raw: list, where: str) -> list[tuple[int, int]]:
    out = []
    for entry in raw:
        if not isinstance(entry, list) or len(entry) != 2:
            raise ConfigError(f"{where} entries must be two-element lists, got {entry!r}")
        out.append((int(entry[0]), int(entry[1])))
    return out


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Parse, merge overrides, validate. `path` of None gives pure defaults."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = tomllib.loads(p.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    _check_unknown(data)

    cfg = RunConfig()
    ds = data.get("dataset", {})
    cfg.dataset_paths = [str(x) for x in ds.get("paths", cfg.dataset_paths)]
    cfg.cache_path = ds.get("cache", cfg.cache_path)
    sp = data.get("split", {})
    if "fractions" in sp:
        cfg.fractions = tuple(float(f) for f in sp["fractions"])
    cfg.split_seed = sp.get("seed", cfg.split_seed)
    at = data.get("attacks", {})
    cfg.include_attacks = [int(a) for a in at.get("include", cfg.include_attacks)]
    cfg.exclude_attacks = [int(a) for a in at.get("exclude", cfg.exclude_attacks)]
    au = data.get("augment", {})
    cfg.augment_modes = [str(m) for m in au.get("modes", cfg.augment_modes)]
    cfg.k_neighbors = au.get("k_neighbors", cfg.k_neighbors)
    tr = data.get("transform", {})
    if "transform" in tr and "kinds" in tr:
        raise ConfigError("[transform] takes either 'transform' or 'kinds', not both")
    if "transform" in tr:
        cfg.transform_kinds = [str(tr["transform"])]
    else:
        cfg.transform_kinds = [str(t) for t in tr.get("kinds", cfg.transform_kinds)]
    cfg.window_n = tr.get("window_n", cfg.window_n)
    mo = data.get("model", {})
    if "hidden_layers" in mo:
        cfg.hidden_layers = tuple(int(w) for w in mo["hidden_layers"])
    cfg.dropout = float(mo.get("dropout", cfg.dropout))
    cfg.learning_rate = float(mo.get("learning_rate", cfg.learning_rate))
    cfg.momentum = float(mo.get("momentum", cfg.momentum))
    cfg.batch_size = mo.get("batch_size", cfg.batch_size)
    cfg.epochs = mo.get("epochs", cfg.epochs)
    tf = data.get("transfer", {})
    cfg.threshold = float(tf.get("threshold", cfg.threshold))
    cfg.parallelism = tf.get("parallelism", cfg.parallelism)
    if "comparison_pairs" in tf:
        cfg.comparison_pairs = _pairs(tf["comparison_pairs"], "transfer.comparison_pairs")
    if "combos" in tf:
        combos = []
        for entry in tf["combos"]:
            if not isinstance(entry, list) or len(entry) != 2:
                raise ConfigError(f"transfer.combos entries must be [mode, transform]: {entry!r}")
            combos.append((str(entry[0]), str(entry[1])))
        cfg.combos = combos
    rf = data.get("rfe", {})
    cfg.rfe_step = rf.get("step", cfg.rfe_step)
    cfg.rfe_tolerance = float(rf.get("tolerance", cfg.rfe_tolerance))
    cfg.rfe_singles = [int(a) for a in rf.get("singles", cfg.rfe_singles)]
    if "pairs" in rf:
        cfg.rfe_pairs = _pairs(rf["pairs"], "rfe.pairs")
    cfg.rfe_max_per_class = rf.get("max_per_class", cfg.rfe_max_per_class)
    rn = data.get("run", {})
    cfg.seed = rn.get("seed", cfg.seed)
    cfg.output_dir = rn.get("output_dir", cfg.output_dir)
    cfg.run_id = rn.get("run_id", cfg.run_id)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, value)

    cfg.validate()
    return cfg
