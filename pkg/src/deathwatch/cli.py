"""Command-line interface: pipeline subcommands and the end-to-end ``run``.

``run`` executes ingest -> graph -> features -> train -> predict ->
evaluate by calling the exact same handlers as the individual subcommands
on the files it writes, so running the five subcommands manually with
matching flags produces byte-identical artifacts.

Config files are flat ``key = value`` text; relative paths inside a config
resolve against the config file's directory, and command-line flags
override config values.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .centrality import (
    feature_table,
    format_features_csv,
    read_features_csv,
    read_roster,
)
from .evaluation import (
    CvConfig,
    evaluate_outcomes,
    format_curve_csv,
    format_report_csv,
    rank_living,
    read_labels_csv,
    read_outcomes_csv,
    read_report_csv,
    repeated_cv,
)
from .graph import build_graph, export_graph, filter_min_degree
from .rng import PRNG_SPEC
from .svm import LabeledDataset, save_model, train_svm
from .transcripts import EMPTY_ALIASES, AliasTable, read_scene_file

CONFIG_KEYS = {
    "scenes",
    "aliases",
    "roster",
    "labels",
    "outcomes",
    "output_dir",
    "C",
    "folds",
    "repetitions",
    "seed",
    "min_degree",
    "graph_format",
    "strict",
}
_PATH_KEYS = ("scenes", "aliases", "roster", "labels", "outcomes", "output_dir")


class ConfigError(ValueError):
    """Pipeline configuration failed validation; nothing has been written."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    scenes: Path
    roster: Path
    labels: Path
    output_dir: Path
    aliases: Path | None = None
    outcomes: Path | None = None
    C: float = 1.0
    folds: int = 5
    repetitions: int = 100
    seed: int = 0
    min_degree: int = 0
    graph_format: str = "edge-csv"
    strict: bool = False

    def validate(self) -> None:
        required = {"scenes": self.scenes, "roster": self.roster, "labels": self.labels}
        for name, path in required.items():
            if not path.is_file():
                raise ConfigError(f"{name} path does not exist: {path}")
        for name, path in (("aliases", self.aliases), ("outcomes", self.outcomes)):
            if path is not None and not path.is_file():
                raise ConfigError(f"{name} path does not exist: {path}")
        if self.graph_format not in ("edge-csv", "dot"):
            raise ConfigError(f"graph_format must be edge-csv or dot, got {self.graph_format!r}")
        if self.C <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        if self.min_degree < 0:
            raise ConfigError(f"min_degree must be >= 0, got {self.min_degree}")
        # folds/repetitions bounds are enforced by CvConfig
        CvConfig(folds=self.folds, repetitions=self.repetitions, seed=self.seed)


def parse_config_file(path: Path) -> dict[str, str]:
    """Read flat ``key = value`` lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def load_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Merge config file values with CLI overrides (flags win)."""
    values: dict[str, str] = {}
    base_dir = Path.cwd()
    if args.config is not None:
        config_path = Path(args.config)
        if not config_path.is_file():
            raise ConfigError(f"config file does not exist: {config_path}")
        values = parse_config_file(config_path)
        base_dir = config_path.parent

    def resolve(key: str, override: object) -> Path | None:
        if override is not None:
            return Path(str(override))
        if key in values:
            return base_dir / values[key]
        return None

    scenes = resolve("scenes", args.scenes)
    roster = resolve("roster", args.roster)
    labels = resolve("labels", args.labels)
    output_dir = resolve("output_dir", args.out_dir)
    if scenes is None or roster is None or labels is None or output_dir is None:
        missing = [
            name
            for name, value in (
                ("scenes", scenes),
                ("roster", roster),
                ("labels", labels),
                ("output_dir/--out-dir", output_dir),
            )
            if value is None
        ]
        raise ConfigError(f"missing required config values: {', '.join(missing)}")

    def scalar(key: str, override: object, parse, default):
        if override is not None:
            return override
        if key in values:
            return parse(values[key])
        return default

    return PipelineConfig(
        scenes=scenes,
        roster=roster,
        labels=labels,
        output_dir=output_dir,
        aliases=resolve("aliases", args.aliases),
        outcomes=resolve("outcomes", args.outcomes),
        C=scalar("C", args.C, float, 1.0),
        folds=scalar("folds", args.folds, int, 5),
        repetitions=scalar("repetitions", args.reps, int, 100),
        seed=scalar("seed", args.seed, int, 0),
        min_degree=scalar("min_degree", args.min_degree, int, 0),
        graph_format=scalar("graph_format", args.graph_format, str, "edge-csv"),
        strict=scalar("strict", True if args.strict else None, _parse_bool, False),
    )


def _load_aliases(path: str | Path | None) -> AliasTable:
    return EMPTY_ALIASES if path is None else AliasTable.from_csv(path)


def _load_houses(path: str | Path) -> dict[str, dict[str, str]]:
    attrs: dict[str, dict[str, str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != [
            "character",
            "house",
        ]:
            raise ValueError(f"{path}: expected header 'character,house'")
        for row in reader:
            attrs[row["character"].strip().lower()] = {"house": row["house"].strip()}
    return attrs


def _labeled_dataset(features_path: Path, labels_path: Path) -> LabeledDataset:
    matrix = read_features_csv(features_path)
    labels = read_labels_csv(labels_path)
    missing = [c for c in matrix.roster if c not in labels]
    if missing:
        raise ValueError(f"no label for characters: {', '.join(sorted(missing))}")
    return LabeledDataset(matrix, tuple(labels[c] for c in matrix.roster))


# ---------------------------------------------------------------------------
# Subcommand handlers. ``run`` reuses these verbatim.


def cmd_build_graph(args: argparse.Namespace) -> int:
    aliases = _load_aliases(args.aliases)
    scenes = read_scene_file(args.scenes, aliases, args.strict)
    g = build_graph(scenes)
    filtered = filter_min_degree(g, args.min_degree)
    node_attrs = None
    if args.houses is not None:
        houses = _load_houses(args.houses)
        node_attrs = {c: a for c, a in houses.items() if filtered.has_node(c)}
    text = export_graph(filtered, args.format, node_attrs)
    Path(args.out).write_text(text, encoding="utf-8")
    print(
        f"graph: {filtered.node_count()} nodes, {filtered.edge_count()} edges "
        f"(min degree {args.min_degree}) -> {args.out}"
    )
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    aliases = _load_aliases(args.aliases)
    scenes = read_scene_file(args.scenes, aliases, args.strict)
    g = build_graph(scenes)
    roster = [aliases.entries.get(entry, entry) for entry in read_roster(args.roster)]
    matrix = feature_table(g, roster)
    Path(args.out).write_text(format_features_csv(matrix), encoding="utf-8")
    print(f"features: {len(matrix.roster)} characters x {len(matrix.feature_names)} -> {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    data = _labeled_dataset(Path(args.features), Path(args.labels))
    model = train_svm(data, C=args.C, seed=args.seed, balanced=args.balanced)
    save_model(model, args.out)
    print(
        f"model: {data.n_dead} dead / {data.n_alive} alive, C={args.C}, "
        f"platt=({model.platt_a:.4f}, {model.platt_b:.4f}) -> {args.out}"
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    data = _labeled_dataset(Path(args.features), Path(args.labels))
    cfg = CvConfig(folds=args.folds, repetitions=args.reps, seed=args.seed)
    result = repeated_cv(data, cfg, C=args.C, balanced=args.balanced, threads=args.threads)
    Path(args.out).write_text(format_report_csv(result.report), encoding="utf-8")
    print(
        f"cv accuracy: {result.mean_accuracy:.4f} over {cfg.repetitions} repetitions "
        f"of {cfg.folds}-fold cv (seed {cfg.seed}) -> {args.out}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = read_report_csv(args.report)
    outcomes = read_outcomes_csv(args.outcomes)
    evaluation = evaluate_outcomes(report, outcomes)
    Path(args.out).write_text(format_curve_csv(evaluation.curve), encoding="utf-8")
    correct = sum(1 for hit in evaluation.hits.values() if hit)
    print(
        f"outcomes: {correct}/{len(evaluation.hits)} hits, "
        f"random baseline {evaluation.baseline_rate:.4f} -> {args.out}"
    )
    return 0


def run_pipeline(config: PipelineConfig) -> int:
    """Execute every stage, keeping artifacts from stages that completed."""
    config.validate()
    config.output_dir.mkdir(parents=True, exist_ok=True)

    def stage(name: str, handler, **kwargs) -> int:
        ns = argparse.Namespace(**kwargs)
        try:
            return handler(ns)
        except Exception as exc:  # noqa: BLE001 - rewrapped with stage context
            raise StageError(name, exc) from exc

    graph_name = "graph.csv" if config.graph_format == "edge-csv" else "graph.dot"
    graph_out = config.output_dir / graph_name
    features_out = config.output_dir / "features.csv"
    model_out = config.output_dir / "model.json"
    report_out = config.output_dir / "report.csv"
    curve_out = config.output_dir / "curve.csv"

    aliases = str(config.aliases) if config.aliases is not None else None
    stage(
        "graph",
        cmd_build_graph,
        scenes=str(config.scenes),
        aliases=aliases,
        strict=config.strict,
        min_degree=config.min_degree,
        format=config.graph_format,
        houses=None,
        out=str(graph_out),
    )
    stage(
        "features",
        cmd_features,
        scenes=str(config.scenes),
        aliases=aliases,
        strict=config.strict,
        roster=str(config.roster),
        out=str(features_out),
    )
    stage(
        "train",
        cmd_train,
        features=str(features_out),
        labels=str(config.labels),
        C=config.C,
        seed=config.seed,
        balanced=False,
        out=str(model_out),
    )
    stage(
        "predict",
        cmd_predict,
        features=str(features_out),
        labels=str(config.labels),
        C=config.C,
        folds=config.folds,
        reps=config.repetitions,
        seed=config.seed,
        balanced=False,
        threads=1,
        out=str(report_out),
    )
    if config.outcomes is not None:
        stage(
            "evaluate",
            cmd_evaluate,
            report=str(report_out),
            outcomes=str(config.outcomes),
            out=str(curve_out),
        )

    report = read_report_csv(report_out)
    labels = read_labels_csv(config.labels)
    print("top living characters by death probability:")
    ranked = rank_living(report, labels)
    by_char = report.by_character()
    for position, character in enumerate(ranked[:10], start=1):
        row = by_char[character]
        print(
            f"  {position:2d}. {character}  "
            f"{row.mean_probability:.3f} +/- {row.std_probability:.3f}"
        )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    return run_pipeline(load_pipeline_config(args))


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deathwatch",
        description="Scene co-occurrence networks and death-risk ranking for scripted series.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"deathwatch {__version__} (prng {PRNG_SPEC})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_transcript_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenes", required=True, help="normalized scene transcript file")
        p.add_argument("--aliases", default=None, help="alias CSV (raw_name,canonical_id)")
        p.add_argument(
            "--strict",
            action="store_true",
            help="reject speaker names missing from the alias table",
        )

    p = sub.add_parser("build-graph", help="aggregate scenes into the weighted network")
    add_transcript_flags(p)
    p.add_argument("--min-degree", type=int, default=0, dest="min_degree")
    p.add_argument("--format", choices=["edge-csv", "dot"], default="edge-csv")
    p.add_argument("--houses", default=None, help="optional character,house CSV for dot export")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("features", help="compute the raw per-character feature table")
    add_transcript_flags(p)
    p.add_argument("--roster", required=True, help="one character id per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit the calibrated SVM on labeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balanced", action="store_true", help="inverse-frequency C per class")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="repeated cross-validated death probabilities")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balanced", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a report against later outcomes")
    p.add_argument("--report", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--scenes", default=None)
    p.add_argument("--aliases", default=None)
    p.add_argument("--roster", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--outcomes", default=None)
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--min-degree", type=int, default=None, dest="min_degree")
    p.add_argument("--graph-format", choices=["edge-csv", "dot"], default=None)
    p.add_argument("--strict", action="store_true", default=False)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
