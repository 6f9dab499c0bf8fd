"""Soft-margin linear SVM with Platt-calibrated death probabilities.

The dual is solved by a pairwise coordinate (SMO-style) method: repeatedly
pick the maximal violating pair under the KKT conditions, take the optimal
step along that pair, and stop once the violation gap falls under the
caller's tolerance. Calibration fits a sigmoid to out-of-fold decision
scores from an internal 3-fold split, so the probabilities are not read off
the same points the margin was fitted to.

Labels are 0 = alive, 1 = dead throughout; a higher decision score means
"more like the dead".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .centrality import ColumnStats, FeatureMatrix, apply_column_stats, standardize
from .rng import derive_seed, stratified_fold_ids

DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_ITERATIONS = 200_000
PLATT_GRADIENT_TOLERANCE = 1e-8
PLATT_MAX_ITERATIONS = 200
MODEL_FORMAT_VERSION = 1

_PROBA_EPS = 1e-15


class ConvergenceError(RuntimeError):
    """Solver ran out of iterations; carries where it got stuck."""

    def __init__(self, message: str, iterations: int, gap: float):
        super().__init__(f"{message} (iterations={iterations}, kkt_gap={gap:.3e})")
        self.iterations = iterations
        self.gap = gap


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows plus 0/1 death labels, aligned by position."""

    matrix: FeatureMatrix
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.matrix.roster):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.matrix.roster)} roster rows"
            )
        if any(label not in (0, 1) for label in self.labels):
            raise ValueError("labels must be 0 (alive) or 1 (dead)")

    @property
    def n_dead(self) -> int:
        return sum(self.labels)

    @property
    def n_alive(self) -> int:
        return len(self.labels) - self.n_dead


@dataclass(frozen=True)
class SvmModel:
    """Linear decision function plus the sigmoid mapping scores to P(dead)."""

    weights: tuple[float, ...]
    bias: float
    C: float
    platt_a: float
    platt_b: float
    column_stats: ColumnStats
    feature_names: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class DualSolution:
    """Raw SMO output on standardized features (kept for diagnostics)."""

    beta: np.ndarray  # y_k * alpha_k
    alpha: np.ndarray
    weights: np.ndarray
    bias: float
    iterations: int
    kkt_gap: float


def solve_dual(
    X: np.ndarray,
    y: np.ndarray,
    C: np.ndarray,
    tolerance: float,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> DualSolution:
    """Maximal-violating-pair SMO for the linear-kernel soft-margin dual.

    Works in beta = y * alpha coordinates, where the dual box is
    [A_k, B_k] = [0, C_k] for dead samples and [-C_k, 0] for alive ones and
    the equality constraint is sum(beta) = 0. ``tolerance`` bounds the final
    KKT violation gap.
    """
    n = len(y)
    K = X @ X.T
    lower = np.where(y > 0, 0.0, -C)
    upper = np.where(y > 0, C, 0.0)
    beta = np.zeros(n)
    grad = y.astype(np.float64).copy()  # y_k - sum_l beta_l K_kl at beta = 0

    gap = math.inf
    iterations = 0
    for iterations in range(max_iterations + 1):
        up = np.flatnonzero(beta < upper)
        low = np.flatnonzero(beta > lower)
        if len(up) == 0 or len(low) == 0:
            gap = 0.0
            break
        i = up[np.argmax(grad[up])]
        j = low[np.argmin(grad[low])]
        gap = grad[i] - grad[j]
        if gap < tolerance:
            break
        if iterations == max_iterations:
            raise ConvergenceError("SMO did not converge", iterations, gap)
        room_i = upper[i] - beta[i]
        room_j = beta[j] - lower[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        step = min(room_i, room_j)
        if quad > 0.0:
            step = min(step, gap / quad)
        # Land exactly on a bound when the box cap binds, so the
        # bound-membership masks stay exact.
        beta[i] = upper[i] if step == room_i else beta[i] + step
        beta[j] = lower[j] if step == room_j else beta[j] - step
        grad -= step * (K[i] - K[j])

    weights = X.T @ beta
    free = (beta > lower) & (beta < upper)
    if free.any():
        bias = float(grad[free].mean())
    else:
        bounds = []
        up = grad[beta < upper]
        low = grad[beta > lower]
        if len(up):
            bounds.append(float(up.max()))
        if len(low):
            bounds.append(float(low.min()))
        bias = sum(bounds) / len(bounds)
    alpha = y * beta
    return DualSolution(beta, alpha, weights, bias, iterations, float(gap))


def dual_objective(X: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the dual objective 0.5 a'Qa - sum(a) at the given alphas."""
    beta = y * alpha
    return float(0.5 * beta @ (X @ (X.T @ beta)) - alpha.sum())


def kkt_residuals(
    X: np.ndarray,
    y: np.ndarray,
    alpha: np.ndarray,
    weights: np.ndarray,
    bias: float,
    C: np.ndarray,
) -> np.ndarray:
    """Per-sample violation of the soft-margin KKT conditions at (w, b).

    Zero residual means the sample satisfies its condition exactly:
    margin >= 1 off the support (alpha = 0), margin = 1 on it, margin <= 1
    at the box bound (alpha = C).
    """
    margins = y * (X @ weights + bias)
    res = np.zeros(len(y))
    at_zero = alpha <= 0.0
    at_cap = alpha >= C
    interior = ~at_zero & ~at_cap
    res[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    res[at_cap] = np.maximum(0.0, margins[at_cap] - 1.0)
    res[interior] = np.abs(margins[interior] - 1.0)
    return res


def _per_sample_C(labels: np.ndarray, C: float, balanced: bool) -> np.ndarray:
    if not balanced:
        return np.full(len(labels), C)
    n = len(labels)
    n_dead = int(labels.sum())
    n_alive = n - n_dead
    weights = np.where(labels == 1, n / (2.0 * n_dead), n / (2.0 * n_alive))
    return C * weights


def calibrate(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, float]:
    """Fit P(dead | s) = 1 / (1 + exp(a*s + b)) by Newton on the log-loss.

    Targets are smoothed the standard way ((N+ + 1)/(N+ + 2) and
    1/(N- + 2)), which keeps the optimum finite even for perfectly
    separated scores. Converged when the gradient infinity-norm drops
    under 1e-8.
    """
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    n_pos = int((lab == 1).sum())
    n_neg = int((lab == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("calibration needs scores from both classes")
    t = np.where(lab == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    if np.all(s == s[0]):
        # No information in the scores: flat curve at the smoothed rate.
        p = float(t.mean())
        return 0.0, math.log((1.0 - p) / p)

    def loss(a: float, b: float) -> float:
        f = a * s + b
        return float(np.sum(np.maximum(f, 0.0) + np.log1p(np.exp(-np.abs(f))) - (1.0 - t) * f))

    a = 0.0
    b = math.log((n_neg + 1.0) / (n_pos + 1.0))
    current = loss(a, b)
    for _ in range(PLATT_MAX_ITERATIONS):
        f = a * s + b
        p = np.where(f >= 0, np.exp(-f) / (1.0 + np.exp(-f)), 1.0 / (1.0 + np.exp(f)))
        residual = t - p
        grad = np.array([float(s @ residual), float(residual.sum())])
        if np.abs(grad).max() < PLATT_GRADIENT_TOLERANCE:
            break
        w = p * (1.0 - p)
        h_aa = float(s @ (w * s))
        h_ab = float(w @ s)
        h_bb = float(w.sum())
        ridge = 0.0
        while True:
            hessian = np.array([[h_aa + ridge, h_ab], [h_ab, h_bb + ridge]])
            det = hessian[0, 0] * hessian[1, 1] - hessian[0, 1] * hessian[1, 0]
            if det > 1e-300:
                break
            ridge = 1e-12 if ridge == 0.0 else ridge * 10.0
        direction = np.linalg.solve(hessian, -grad)
        step = 1.0
        while step > 1e-12:
            trial = loss(a + step * direction[0], b + step * direction[1])
            if trial <= current:
                a += step * direction[0]
                b += step * direction[1]
                current = trial
                break
            step /= 2.0
        else:
            break
    return float(a), float(b)


def sigmoid_probability(platt_a: float, platt_b: float, score: float) -> float:
    """Calibrated P(dead) for a decision score, clamped into (0, 1)."""
    f = platt_a * score + platt_b
    if f >= 0:
        e = math.exp(-f)
        p = e / (1.0 + e)
    else:
        p = 1.0 / (1.0 + math.exp(f))
    return min(max(p, _PROBA_EPS), 1.0 - _PROBA_EPS)


def train_svm(
    data: LabeledDataset,
    C: float = 1.0,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    balanced: bool = False,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> SvmModel:
    """Fit the margin on all rows, then calibrate on out-of-fold scores.

    Features are z-scored internally (the transform is baked into the
    returned model), the dual is solved to ``tolerance``, and Platt
    parameters come from an internal seeded stratified 3-fold split.
    """
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if data.n_dead < 2 or data.n_alive < 2:
        raise ValueError(
            f"need at least 2 samples per class, got {data.n_dead} dead / "
            f"{data.n_alive} alive"
        )
    std = standardize(data.matrix)
    X = std.values
    labels = np.asarray(data.labels)
    y = np.where(labels == 1, 1.0, -1.0)
    C_i = _per_sample_C(labels, C, balanced)

    solution = solve_dual(X, y, C_i, tolerance, max_iterations)

    fold_of = np.array(stratified_fold_ids(data.labels, 3, derive_seed(seed, "platt-folds")))
    oof_scores = np.zeros(len(labels))
    for fold in range(3):
        test = np.flatnonzero(fold_of == fold)
        if len(test) == 0:
            continue
        train = np.flatnonzero(fold_of != fold)
        sub = solve_dual(X[train], y[train], C_i[train], tolerance, max_iterations)
        oof_scores[test] = X[test] @ sub.weights + sub.bias
    platt_a, platt_b = calibrate(oof_scores, data.labels)

    assert std.column_stats is not None
    return SvmModel(
        weights=tuple(float(w) for w in solution.weights),
        bias=solution.bias,
        C=C,
        platt_a=platt_a,
        platt_b=platt_b,
        column_stats=std.column_stats,
        feature_names=std.feature_names,
    )


def decision_score(model: SvmModel, x: Iterable[float]) -> float:
    """w . z + b with z the model's stored standardization of x."""
    raw = np.asarray(tuple(x), dtype=np.float64)
    if raw.shape != (len(model.weights),):
        raise ValueError(f"expected {len(model.weights)} features, got {raw.shape}")
    z = apply_column_stats(model.column_stats, raw)
    return float(np.asarray(model.weights) @ z + model.bias)


def predict_proba(model: SvmModel, x: Iterable[float]) -> float:
    """Calibrated probability of death for one raw feature vector."""
    return sigmoid_probability(model.platt_a, model.platt_b, decision_score(model, x))


def save_model(model: SvmModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "weights": list(model.weights),
        "bias": model.bias,
        "C": model.C,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "column_means": list(model.column_stats.means),
        "column_stds": list(model.column_stats.stds),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    names = tuple(payload["feature_names"])
    weights = tuple(float(w) for w in payload["weights"])
    means = tuple(float(m) for m in payload["column_means"])
    stds = tuple(float(s) for s in payload["column_stds"])
    if not (len(names) == len(weights) == len(means) == len(stds)):
        raise ValueError("model file has inconsistent feature dimensions")
    return SvmModel(
        weights=weights,
        bias=float(payload["bias"]),
        C=float(payload["C"]),
        platt_a=float(payload["platt_a"]),
        platt_b=float(payload["platt_b"]),
        column_stats=ColumnStats(means, stds),
        feature_names=names,
    )
