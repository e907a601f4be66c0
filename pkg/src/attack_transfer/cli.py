"""Command-line entry point orchestrating the experiment pipeline.

Subcommands: ingest, multiclass, transfer, rfe, report, fixtures.
Exit codes: 0 success, 2 configuration problem, 3 data problem,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentPlan
from .config import DATA_DIR_ENV, TRANSFORM_TOKENS, RunConfig, load_config
from .errors import AttackTransferError, ConfigError, DataError
from .fixtures import gaussian_clusters, planted_features_fixture, transfer_fixture, write_fixture_csv
from .ingest import class_histogram, clean, load_cache, load_csvs, save_cache, split
from .labels import CICIDS2017_CLASS_FRACTIONS, CLASS_NAMES
from .nn import evaluate, save_params, train
from .preprocess import TransformSpec, standardize_apply, standardize_fit
from .report import (
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
from .rfe import common_features, rfe_pair, rfe_single
from .transfer import build_matrix, classify_relations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _info(msg: str) -> None:
    print(f"[info] {msg}", flush=True)


def _load_dataset(cfg: RunConfig):
    """Cached parse of the configured dataset (cleaning included)."""
    if cfg.cache_path and Path(cfg.cache_path).exists():
        _info(f"loading dataset cache {cfg.cache_path}")
        return load_cache(cfg.cache_path)
    paths = cfg.resolved_paths()
    if not paths:
        raise ConfigError(
            f"no dataset configured: set [dataset].paths or ${DATA_DIR_ENV}"
        )
    for p in paths:
        if not p.exists():
            raise DataError(f"dataset file not found: {p}")
    _info(f"parsing {len(paths)} csv file(s)")
    dataset = load_csvs(paths)
    dataset, report = clean(dataset)
    _info(f"cleaned {len(dataset)} records ({report.total} values replaced)")
    if cfg.cache_path:
        save_cache(cfg.cache_path, dataset)
        _info(f"wrote cache {cfg.cache_path}")
    return dataset


def _manifest(cfg: RunConfig, dataset) -> RunManifest:
    return RunManifest(
        run_id=cfg.effective_run_id(),
        tool_version=__version__,
        config=cfg.to_dict(),
        dataset_fingerprint=dataset.fingerprint(),
        seeds={"run": cfg.seed, "split": cfg.split_seed},
    )


def _print_histogram(hist: dict[int, tuple[int, float]]) -> None:
    print(f"{'id':>3} {'class':<26} {'count':>10} {'fraction':>9} {'published':>9}")
    for cid in sorted(hist):
        count, frac = hist[cid]
        ref = CICIDS2017_CLASS_FRACTIONS.get(cid)
        ref_txt = f"{ref:9.5f}" if ref is not None else "        -"
        print(f"{cid:>3} {CLASS_NAMES[cid]:<26} {count:>10} {frac:9.5f} {ref_txt}")


def cmd_ingest(cfg: RunConfig, dry_run: bool) -> int:
    if dry_run:
        paths = cfg.resolved_paths()
        print(f"plan: parse {len(paths)} file(s), clean, cache={cfg.cache_path or '(none)'}")
        for p in paths:
            print(f"  {p}")
        return EXIT_OK
    dataset = _load_dataset(cfg)
    hist = class_histogram(dataset)
    _print_histogram(hist)
    layout = run_layout(cfg.output_dir, cfg.effective_run_id())
    hist_path = layout["root"] / "class_histogram.csv"
    with hist_path.open("w", encoding="utf-8") as fh:
        fh.write("class_id,class_name,count,fraction\n")
        for cid in sorted(hist):
            count, frac = hist[cid]
            fh.write(f"{cid},{CLASS_NAMES[cid]},{count},{repr(frac)}\n")
    manifest = _manifest(cfg, dataset)
    manifest.add_artifact(hist_path, layout["root"])
    manifest.write(layout["root"] / "manifest.json")
    _info(f"histogram written to {hist_path}")
    return EXIT_OK


def cmd_multiclass(cfg: RunConfig, dry_run: bool) -> int:
    if dry_run:
        print(
            f"plan: multiclass head over {len(CLASS_NAMES)} classes, "
            f"epochs={cfg.epochs}, hidden={list(cfg.hidden_layers)}"
        )
        return EXIT_OK
    dataset = _load_dataset(cfg)
    parts = split(dataset, cfg.fractions, cfg.split_seed)
    std = standardize_fit(parts.train.features)
    x_train = standardize_apply(std, parts.train.features)
    x_val = standardize_apply(std, parts.validation.features)
    x_test = standardize_apply(std, parts.test.features)

    model_cfg = cfg.model_config(dataset.n_features, 15, cfg.seed)
    _info(f"training multiclass head for {model_cfg.epochs} epochs on {len(x_train)} records")
    params = train(model_cfg, x_train, parts.train.labels, x_val, parts.validation.labels)
    result = evaluate(params, x_test, parts.test.labels)
    _info(f"test accuracy {result.accuracy:.4f}")
    for cid, recall in enumerate(result.per_class_recall):
        if np.isfinite(recall):
            _info(f"  recall[{cid:>2} {CLASS_NAMES[cid]}] = {recall:.4f}")

    layout = run_layout(cfg.output_dir, cfg.effective_run_id())
    emit_confusion(
        result,
        layout["confusion"] / "multiclass_percent.csv",
        layout["figures"] / "multiclass_percent.svg",
        normalize=True,
    )
    emit_confusion(
        result,
        layout["confusion"] / "multiclass_counts.csv",
        layout["figures"] / "multiclass_counts.svg",
        normalize=False,
    )
    save_params(layout["root"] / "multiclass_model.bin", params)
    manifest = _manifest(cfg, dataset)
    for rel in ("confusion/multiclass_percent.csv", "confusion/multiclass_counts.csv",
                "figures/multiclass_percent.svg", "figures/multiclass_counts.svg",
                "multiclass_model.bin"):
        manifest.artifacts.append(rel)
    manifest.write(layout["root"] / "manifest.json")
    _info(f"results in {layout['root']}")
    return EXIT_OK


def cmd_transfer(cfg: RunConfig, dry_run: bool) -> int:
    attacks = cfg.attacks()
    combos = cfg.grid_combos()
    n_cells = len(attacks) * (len(attacks) - 1)
    if dry_run:
        print(
            f"plan: {len(combos)} matrix run(s) over {len(attacks)} attacks "
            f"({n_cells} cells each), threshold={cfg.threshold}, "
            f"parallelism={cfg.parallelism}"
        )
        for mode, token in combos:
            print(f"  mode={mode} transform={token}")
        return EXIT_OK
    dataset = _load_dataset(cfg)
    parts = split(dataset, cfg.fractions, cfg.split_seed)
    layout = run_layout(cfg.output_dir, cfg.effective_run_id())
    manifest = _manifest(cfg, dataset)

    matrices = {}
    for mode, token in combos:
        spec = TransformSpec(TRANSFORM_TOKENS[token], cfg.window_n)
        plan = AugmentPlan(mode=mode, k_neighbors=cfg.k_neighbors, seed=cfg.seed)
        model_cfg = cfg.model_config(dataset.n_features, 2, cfg.seed)
        _info(f"matrix mode={mode} transform={token}: {n_cells} cells")
        done = []

        def progress(res, done=done):
            done.append(res)
            _info(
                f"  [{len(done)}/{n_cells}] {res.train_attack}->{res.test_attack} "
                f"attack_recall={res.attack_recall:.3f} ({res.status})"
            )

        matrix = build_matrix(
            parts, attacks, plan, spec, model_cfg,
            parallelism=cfg.parallelism, progress=progress,
        )
        name = f"transfer_{mode}_{token}"
        emit_transfer_matrix(
            matrix,
            layout["matrices"] / f"{name}.csv",
            layout["figures"] / f"{name}.svg",
        )
        manifest.artifacts += [f"matrices/{name}.csv", f"figures/{name}.svg"]
        failed = matrix.failed_cells()
        if failed:
            manifest.notes.append(f"{name}: {len(failed)} failed cell(s)")
            _info(f"  {len(failed)} cell(s) failed")
        relations = classify_relations(matrix, cfg.threshold)
        emit_relations(relations, matrix, layout["matrices"] / f"{name}_relations.csv")
        manifest.artifacts.append(f"matrices/{name}_relations.csv")
        matrices[f"{mode}/{token}"] = matrix

    if len(matrices) >= 2 and cfg.comparison_pairs:
        emit_comparison(
            matrices,
            cfg.comparison_pairs,
            layout["matrices"] / "comparison_pairs.csv",
            layout["figures"] / "comparison_pairs.svg",
        )
        manifest.artifacts += ["matrices/comparison_pairs.csv", "figures/comparison_pairs.svg"]
    manifest.write(layout["root"] / "manifest.json")
    _info(f"results in {layout['root']}")
    return EXIT_OK


def cmd_rfe(cfg: RunConfig, dry_run: bool) -> int:
    singles = cfg.rfe_singles or cfg.attacks()
    if dry_run:
        print(
            f"plan: feature ranking for {len(singles)} single attack(s) and "
            f"{len(cfg.rfe_pairs)} pair(s), step={cfg.rfe_step}"
        )
        return EXIT_OK
    dataset = _load_dataset(cfg)
    parts = split(dataset, cfg.fractions, cfg.split_seed)
    layout = run_layout(cfg.output_dir, cfg.effective_run_id())
    manifest = _manifest(cfg, dataset)
    cap = cfg.rfe_max_per_class or None

    rankings: dict[tuple[int, ...], object] = {}
    for attack in singles:
        _info(f"ranking features for attack {attack} vs benign")
        ranking = rfe_single(
            parts, attack, cfg.rfe_step, cfg.rfe_tolerance, cap, cfg.seed
        )
        rankings[(attack,)] = ranking
        emit_rfe_ranking(ranking, layout["rfe"] / f"single_{attack}.csv")
        manifest.artifacts.append(f"rfe/single_{attack}.csv")
    for a, b in cfg.rfe_pairs:
        _info(f"ranking features for attack pair ({a}, {b}) vs benign")
        ranking = rfe_pair(parts, a, b, cfg.rfe_step, cfg.rfe_tolerance, cap, cfg.seed)
        rankings[(a, b)] = ranking
        emit_rfe_ranking(ranking, layout["rfe"] / f"pair_{a}_{b}.csv")
        manifest.artifacts.append(f"rfe/pair_{a}_{b}.csv")

    emit_rfe_summary(rankings, layout["rfe"] / "summary.csv")
    manifest.artifacts.append("rfe/summary.csv")

    overlap_rows = []
    for a, b in cfg.rfe_pairs:
        if (a,) in rankings and (b,) in rankings:
            shared, ratio = common_features(rankings[(a,)], rankings[(b,)])
            overlap_rows.append(
                (a, b, len(shared), repr(ratio),
                 "; ".join(dataset.feature_names[i] for i in sorted(shared)))
            )
    if overlap_rows:
        path = layout["rfe"] / "common_features.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("attack_a,attack_b,n_common,overlap_ratio,common_features\n")
            for row in overlap_rows:
                fh.write(",".join(['"%s"' % v if isinstance(v, str) and "," in v else str(v) for v in row]) + "\n")
        manifest.artifacts.append("rfe/common_features.csv")

    manifest.write(layout["root"] / "manifest.json")
    _info(f"results in {layout['root']}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise DataError(f"run directory not found: {run_dir}")
    matrices = {}
    for path in sorted((run_dir / "matrices").glob("transfer_*.csv")):
        if path.stem.endswith("_relations"):
            continue
        matrix = load_matrix_csv(path)
        matrices[f"{matrix.augment_mode}/{matrix.transform}"] = matrix
        emit_transfer_matrix(
            matrix, path, run_dir / "figures" / f"{path.stem}.svg"
        )
        relations = classify_relations(matrix, args.threshold)
        emit_relations(relations, matrix, run_dir / "matrices" / f"{path.stem}_relations.csv")
        _info(f"re-rendered {path.stem}")
    if len(matrices) >= 2 and args.pairs:
        pairs = [tuple(int(x) for x in p.split(":")) for p in args.pairs.split(",")]
        emit_comparison(
            matrices,
            pairs,
            run_dir / "matrices" / "comparison_pairs.csv",
            run_dir / "figures" / "comparison_pairs.svg",
        )
        _info("re-rendered comparison chart")
    if not matrices:
        _info("no matrix tables found; nothing to render")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "clusters":
        counts = {0: args.benign}
        for attack in range(1, 15):
            counts[attack] = 4 if attack in (8, 9, 13) else args.attack
        dataset, truth = gaussian_clusters(counts, seed=args.seed)
    elif args.kind == "transfer":
        dataset, truth = transfer_fixture(
            seed=args.seed, n_benign=args.benign, n_attack=args.attack, n_features=78
        )
    else:
        dataset, truth = planted_features_fixture(
            seed=args.seed, n_benign=args.benign, n_attack=args.attack
        )
    csv_path = out / f"fixture_{args.kind}.csv"
    write_fixture_csv(dataset, csv_path)
    (out / f"fixture_{args.kind}_truth.json").write_text(truth.to_json(), encoding="utf-8")
    _info(f"wrote {csv_path} ({len(dataset)} records)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attack-transfer",
        description="Cross-attack transferability experiments on flow datasets",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--data", action="append", help="dataset csv or directory (repeatable)")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--run-id", help="results subdirectory name")
        p.add_argument("--seed", type=int, help="global seed override")
        p.add_argument("--epochs", type=int, help="training epochs override")
        p.add_argument("--threshold", type=float, help="transferability threshold override")
        p.add_argument("--parallelism", type=int, help="worker pool size override")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan")
        return p

    add_run_command("ingest", "parse, clean, cache and summarize the dataset")
    add_run_command("multiclass", "train and evaluate the 15-class head")
    add_run_command("transfer", "run train-on-i / test-on-j grids")
    add_run_command("rfe", "run recursive feature elimination")

    rep = sub.add_parser("report", help="re-render figures from persisted results")
    rep.add_argument("--run", required=True, help="results/<run-id> directory")
    rep.add_argument("--threshold", type=float, default=0.70)
    rep.add_argument("--pairs", default="", help="comparison pairs as i:j,i:j,...")

    fix = sub.add_parser("fixtures", help="synthetic dataset utilities")
    fix_sub = fix.add_subparsers(dest="fixtures_command", required=True)
    gen = fix_sub.add_parser("generate", help="write a synthetic dataset with ground truth")
    gen.add_argument("--kind", choices=("clusters", "transfer", "planted"), default="clusters")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--benign", type=int, default=4000)
    gen.add_argument("--attack", type=int, default=300)

    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "run_id": getattr(args, "run_id", None),
        "epochs": args.epochs,
        "threshold": args.threshold,
        "parallelism": args.parallelism,
    }
    if args.data:
        overrides["dataset_paths"] = list(args.data)
    return load_config(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return cmd_ingest(_config_from_args(args), args.dry_run)
        if args.command == "multiclass":
            return cmd_multiclass(_config_from_args(args), args.dry_run)
        if args.command == "transfer":
            return cmd_transfer(_config_from_args(args), args.dry_run)
        if args.command == "rfe":
            return cmd_rfe(_config_from_args(args), args.dry_run)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "fixtures":
            return cmd_fixtures(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"[config error] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"[data error] {exc}", file=sys.stderr)
        return EXIT_DATA
    except AttackTransferError as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
