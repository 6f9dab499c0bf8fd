"""Repeated stratified cross-validation, ranking, and outcome validation.

Per repetition the roster is dealt into stratified folds from a seeded
shuffle; each character's probability for that repetition comes from the
one fold where it is held out (in-fold predictions are never aggregated).
Accuracies threshold the held-out probability at 0.5, with exact 0.5
predicting survival. Everything downstream of the seed is deterministic,
so identical configs give byte-identical reports.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .centrality import FeatureMatrix
from .rng import derive_seed, stratified_fold_ids
from .svm import LabeledDataset, predict_proba, train_svm

THRESHOLD_GRID = tuple(i / 100.0 for i in range(101))


@dataclass(frozen=True)
class CvConfig:
    folds: int = 5
    repetitions: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")


@dataclass(frozen=True)
class CharacterPrediction:
    character: str
    mean_probability: float
    std_probability: float
    n_estimates: int
    rank: int


@dataclass(frozen=True)
class PredictionReport:
    """Per-character probability summary, rows ordered by rank."""

    rows: tuple[CharacterPrediction, ...]

    def by_character(self) -> dict[str, CharacterPrediction]:
        return {row.character: row for row in self.rows}


@dataclass(frozen=True)
class CvResult:
    report: PredictionReport
    mean_accuracy: float
    accuracies: tuple[float, ...]


@dataclass(frozen=True)
class OutcomeRecord:
    character: str
    died: bool


@dataclass(frozen=True)
class ThresholdPoint:
    threshold: float
    n_above: int
    accuracy: float | None  # undefined when nothing clears the threshold


@dataclass(frozen=True)
class ThresholdCurve:
    points: tuple[ThresholdPoint, ...]


@dataclass(frozen=True)
class OutcomeEvaluation:
    baseline_rate: float
    hits: dict[str, bool]
    curve: ThresholdCurve


def _died(probability: float) -> bool:
    # Strictly above 50% predicts death; exactly 0.5 predicts survival.
    return probability > 0.5


def repeated_cv(
    data: LabeledDataset,
    cfg: CvConfig,
    C: float = 1.0,
    balanced: bool = False,
    threads: int = 1,
) -> CvResult:
    """Run cfg.repetitions rounds of stratified k-fold CV over the roster.

    Repetitions have pre-derived seeds and are independent, so they may run
    on a thread pool; results are reduced in repetition order either way.
    """
    labels = list(data.labels)
    n = len(labels)
    minority = min(data.n_dead, data.n_alive)
    if minority < cfg.folds:
        raise ValueError(
            f"cannot stratify {cfg.folds} folds with only {minority} "
            "members in the minority class"
        )
    raw = data.matrix.values
    roster = data.matrix.roster
    base_seed = derive_seed(cfg.seed, "cv")

    def run_repetition(rep: int) -> tuple[np.ndarray, float]:
        rep_seed = derive_seed(base_seed, f"rep-{rep}")
        fold_of = np.array(
            stratified_fold_ids(labels, cfg.folds, derive_seed(rep_seed, "folds"))
        )
        rep_probs = np.zeros(n)
        for fold in range(cfg.folds):
            held_out = np.flatnonzero(fold_of == fold)
            train_idx = np.flatnonzero(fold_of != fold)
            sub_matrix = FeatureMatrix(
                tuple(roster[i] for i in train_idx),
                raw[train_idx],
                feature_names=data.matrix.feature_names,
            )
            sub_data = LabeledDataset(sub_matrix, tuple(labels[i] for i in train_idx))
            model = train_svm(
                sub_data,
                C=C,
                seed=derive_seed(rep_seed, f"fold-{fold}"),
                balanced=balanced,
            )
            for i in held_out:
                rep_probs[i] = predict_proba(model, raw[i])
        hits = sum(1 for i in range(n) if _died(rep_probs[i]) == (labels[i] == 1))
        return rep_probs, hits / n

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run_repetition, range(cfg.repetitions)))
    else:
        outcomes = [run_repetition(rep) for rep in range(cfg.repetitions)]
    probabilities = np.array([probs for probs, _ in outcomes])
    accuracies = [acc for _, acc in outcomes]

    means = probabilities.mean(axis=0)
    stds = probabilities.std(axis=0)
    order = sorted(range(n), key=lambda i: (-means[i], roster[i]))
    rows = tuple(
        CharacterPrediction(
            character=roster[i],
            mean_probability=float(means[i]),
            std_probability=float(stds[i]),
            n_estimates=cfg.repetitions,
            rank=rank,
        )
        for rank, i in enumerate(order, start=1)
    )
    return CvResult(
        report=PredictionReport(rows),
        mean_accuracy=sum(accuracies) / len(accuracies),
        accuracies=tuple(accuracies),
    )


def rank_living(report: PredictionReport, labels: Mapping[str, int]) -> list[str]:
    """Living characters, most endangered first (ties broken by id)."""
    living = [row for row in report.rows if labels.get(row.character, 0) == 0]
    living.sort(key=lambda row: (-row.mean_probability, row.character))
    return [row.character for row in living]


def evaluate_outcomes(
    report: PredictionReport, outcomes: Sequence[OutcomeRecord]
) -> OutcomeEvaluation:
    """Score predictions against what actually happened later.

    A prediction is a hit when "mean probability above 50%" matches the
    recorded death. The threshold curve restates accuracy over only the
    characters predicted more confidently than each threshold.
    """
    if not outcomes:
        raise ValueError("no outcome records")
    by_char = report.by_character()
    seen: set[str] = set()
    for record in outcomes:
        if record.character in seen:
            raise ValueError(f"duplicate outcome for {record.character!r}")
        seen.add(record.character)
        if record.character not in by_char:
            raise ValueError(f"outcome for unknown character {record.character!r}")

    baseline = sum(1 for r in outcomes if r.died) / len(outcomes)
    hits = {
        r.character: _died(by_char[r.character].mean_probability) == r.died
        for r in outcomes
    }
    points = []
    for threshold in THRESHOLD_GRID:
        above = [r for r in outcomes if by_char[r.character].mean_probability > threshold]
        if above:
            accuracy = sum(1 for r in above if hits[r.character]) / len(above)
        else:
            accuracy = None
        points.append(ThresholdPoint(threshold, len(above), accuracy))
    return OutcomeEvaluation(baseline, hits, ThresholdCurve(tuple(points)))


# ---------------------------------------------------------------------------
# File formats: labels, outcomes, report, curve


def read_labels_csv(path: str | Path) -> dict[str, int]:
    """Read ``character,dead`` (dead in {0,1}); ids are lowercased."""
    return _read_binary_csv(path, "dead")


def read_outcomes_csv(path: str | Path) -> list[OutcomeRecord]:
    """Read ``character,died`` (died in {0,1}); ids are lowercased."""
    table = _read_binary_csv(path, "died")
    return [OutcomeRecord(char, bool(flag)) for char, flag in table.items()]


def _read_binary_csv(path: str | Path, value_column: str) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["character", value_column]
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != expected:
            raise ValueError(
                f"{path}: expected header {','.join(expected)!r}, got {reader.fieldnames}"
            )
        for row in reader:
            character = row["character"].strip().lower()
            if not character:
                raise ValueError(f"{path}: empty character id")
            if character in out:
                raise ValueError(f"{path}: duplicate character {character!r}")
            flag = row[value_column].strip()
            if flag not in ("0", "1"):
                raise ValueError(
                    f"{path}: {value_column} for {character!r} must be 0 or 1, got {flag!r}"
                )
            out[character] = int(flag)
    return out


def format_report_csv(report: PredictionReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["character", "mean_probability", "std_probability", "rank"])
    for row in report.rows:
        writer.writerow(
            [row.character, repr(row.mean_probability), repr(row.std_probability), row.rank]
        )
    return buf.getvalue()


def read_report_csv(path: str | Path) -> PredictionReport:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["character", "mean_probability", "std_probability", "rank"]
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)!r}")
        for row in reader:
            rows.append(
                CharacterPrediction(
                    character=row["character"],
                    mean_probability=float(row["mean_probability"]),
                    std_probability=float(row["std_probability"]),
                    n_estimates=0,  # not stored in the CSV
                    rank=int(row["rank"]),
                )
            )
    rows.sort(key=lambda r: r.rank)
    return PredictionReport(tuple(rows))


def format_curve_csv(curve: ThresholdCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["threshold", "n_above", "accuracy"])
    for point in curve.points:
        accuracy = "" if point.accuracy is None else repr(point.accuracy)
        writer.writerow([f"{point.threshold:.2f}", point.n_above, accuracy])
    return buf.getvalue()
