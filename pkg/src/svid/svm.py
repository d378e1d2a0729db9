"""Support vector machines over supervectors: linear and RBF kernels, dual
solver, one-vs-one multiclass, and stratified cross-validation grid search.

The RBF kernel is exp(-||x - v||^2 / (2 sigma)) by default; set
``conventional`` on the KernelSpec for the usual 2 sigma^2 divisor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGrid, InvalidParam, LengthMismatch, SingleClass

log = logging.getLogger(__name__)

KKT_TOL = 1e-3
ALPHA_TOL = 1e-8
MAX_PASSES = 100_000


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    sigma: float = 1.0
    conventional: bool = False  # True: divisor 2*sigma^2 instead of 2*sigma

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise InvalidParam(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.sigma <= 0:
            raise InvalidParam("sigma must be positive")

    def _denominator(self) -> float:
        return 2.0 * self.sigma ** 2 if self.conventional else 2.0 * self.sigma


def kernel_eval(spec: KernelSpec, x: np.ndarray, v: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.shape != v.shape:
        raise LengthMismatch(f"{x.shape} vs {v.shape}")
    if spec.kind == "linear":
        return float(np.dot(x, v))
    d2 = float(np.sum((x - v) ** 2))
    return float(np.exp(-d2 / spec._denominator()))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = k(a_i, b_j)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise LengthMismatch(f"dims {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    d2 = (np.sum(a ** 2, axis=1)[:, None] - 2.0 * a @ b.T + np.sum(b ** 2, axis=1))
    return np.exp(-np.maximum(d2, 0.0) / spec._denominator())


@dataclass(frozen=True)
class SvmModel:
    """Binary soft-margin model: f(x) = sum_i dual_coefs_i k(x, sv_i) + bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i, nonzero
    bias: float
    kernel: KernelSpec
    c: float
    converged: bool = True

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]


def _smo(gram: np.ndarray, y: np.ndarray, c: float,
         tol: float = KKT_TOL) -> tuple[np.ndarray, float, bool]:
    """Maximal-violating-pair SMO on the dual
    min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C, with Q = K * yy'.

    Returns (alpha, bias, converged).
    """
    n = y.size
    q = gram * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - e
    converged = False
    for _ in range(MAX_PASSES):
        yg = -y * grad
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        if not up.any() or not low.any():
            converged = True
            break
        i = np.flatnonzero(up)[np.argmax(yg[up])]
        j = np.flatnonzero(low)[np.argmin(yg[low])]
        violation = yg[i] - yg[j]
        if violation <= tol:
            converged = True
            break
        eta = max(gram[i, i] + gram[j, j] - 2.0 * gram[i, j], 1e-12)
        step = violation / eta
        step = min(step, c - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else c - alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        grad += q[:, i] * (y[i] * step) - q[:, j] * (y[j] * step)

    yg = -y * grad
    free = (alpha > ALPHA_TOL) & (alpha < c - ALPHA_TOL)
    if free.any():
        bias = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, converged


def dual_objective(gram: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """sum alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    q = gram * np.outer(y, y)
    return float(np.sum(alpha) - 0.5 * alpha @ q @ alpha)


def train_binary(x: np.ndarray, y: np.ndarray, kernel: KernelSpec,
                 c: float) -> SvmModel:
    """Solve the soft-margin dual to KKT tolerance 1e-3.

    Bias comes from averaging over unbounded support vectors. If the
    iteration cap is hit, the best iterate is returned with
    ``converged=False``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise SingleClass("need both +1 and -1 labels")
    if c <= 0:
        raise InvalidParam("C must be positive")
    gram = kernel_matrix(kernel, x, x)
    alpha, bias, converged = _smo(gram, y, c)
    if not converged:
        log.warning("train_binary: SMO hit the iteration cap")
    sv = alpha > ALPHA_TOL
    return SvmModel(x[sv].copy(), (alpha * y)[sv], bias, kernel, c, converged)


def predict_binary(model: SvmModel, x: np.ndarray) -> tuple[float, int]:
    """Decision score and sign label (+1 on an exact zero score)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise LengthMismatch(f"input dim {x.shape} vs model dim {model.dim}")
    k = kernel_matrix(model.kernel, x[None, :], model.support_vectors)[0]
    score = float(k @ model.dual_coefs + model.bias)
    return score, 1 if score >= 0.0 else -1


@dataclass(frozen=True)
class MulticlassSvm:
    """One-vs-one ensemble with majority voting.

    Ties break by the larger sum of |score| over the pair models the tied
    class won, then by class order. ``standardize`` holds per-dimension
    (mean, scale) applied before every kernel evaluation (used for RBF).
    """

    classes: tuple[str, ...]
    models: dict[tuple[int, int], SvmModel]
    kernel: KernelSpec
    c: float
    standardize: tuple[np.ndarray, np.ndarray] | None = None

    def _transform(self, x: np.ndarray) -> np.ndarray:
        if self.standardize is None:
            return x
        mean, scale = self.standardize
        return (x - mean) / scale

    def predict(self, x: np.ndarray) -> str:
        x = self._transform(np.asarray(x, dtype=np.float64))
        votes = np.zeros(len(self.classes))
        strength = np.zeros(len(self.classes))
        for (i, j), model in self.models.items():
            score, label = predict_binary(model, x)
            winner = i if label > 0 else j
            votes[winner] += 1
            strength[winner] += abs(score)
        best = np.lexsort((np.arange(len(self.classes)), -strength, -votes))[0]
        return self.classes[best]


def _standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return mean, scale


def train_multiclass(x: np.ndarray, labels, kernel: KernelSpec,
                     c: float) -> MulticlassSvm:
    """One binary model per unordered class pair (first class is +1).

    RBF inputs are standardized per dimension with training-set statistics;
    the linear kernel sees raw supervectors.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray([str(l) for l in labels])
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise SingleClass("need at least 2 classes")
    standardize = _standardization(x) if kernel.kind == "rbf" else None
    if standardize is not None:
        x = (x - standardize[0]) / standardize[1]
    models = {}
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            mask = (labels == classes[i]) | (labels == classes[j])
            y = np.where(labels[mask] == classes[i], 1.0, -1.0)
            models[(i, j)] = train_binary(x[mask], y, kernel, c)
    return MulticlassSvm(classes, models, kernel, c, standardize)


@dataclass(frozen=True)
class CvGrid:
    c_values: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    sigma_values: tuple[float, ...] | str = "auto"
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise InvalidParam("folds must be >= 2")
        if not self.c_values:
            raise EmptyGrid("no C values")
        if not isinstance(self.sigma_values, str):
            object.__setattr__(self, "sigma_values", tuple(self.sigma_values))
            if not self.sigma_values:
                raise EmptyGrid("no sigma values")


def median_pairwise_sq_dist(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    d2 = (np.sum(x ** 2, axis=1)[:, None] - 2.0 * x @ x.T + np.sum(x ** 2, axis=1))
    iu = np.triu_indices(x.shape[0], k=1)
    return float(np.median(np.maximum(d2[iu], 0.0)))


def _fold_assignment(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified folds of equal size (+-1)."""
    classes = sorted(set(labels))
    fold_of = np.empty(labels.size, dtype=np.int64)
    dealt = 0
    for rank, cls in enumerate(classes):
        idx = np.flatnonzero(labels == cls)
        if idx.size < folds:
            log.warning("cross_validate: class %s has %d < %d samples",
                        cls, idx.size, folds)
        rng = np.random.default_rng([seed, rank])
        for offset, sample in enumerate(rng.permutation(idx)):
            fold_of[sample] = (dealt + offset) % folds
        dealt += idx.size
    return fold_of


def cross_validate(x: np.ndarray, labels, grid: CvGrid, kind: str,
                   conventional: bool = False):
    """Stratified k-fold grid search; ties prefer smaller C, then smaller sigma.

    Returns (best_c, best_sigma, fold_accuracies) with best_sigma None for
    the linear kernel. ``sigma_values == "auto"`` expands to
    {0.5, 1, 2, 4} times the median pairwise squared distance of the
    (standardized, for RBF) training supervectors.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray([str(l) for l in labels])
    fold_of = _fold_assignment(labels, grid.folds, grid.seed)

    if kind == "rbf":
        sigmas = grid.sigma_values
        if isinstance(sigmas, str):
            mean, scale = _standardization(x)
            d_med = median_pairwise_sq_dist((x - mean) / scale)
            sigmas = tuple(f * d_med for f in (0.5, 1.0, 2.0, 4.0))
        points = [(c, s) for c in grid.c_values for s in sigmas]
    else:
        points = [(c, None) for c in grid.c_values]

    best = None
    for c, sigma in points:
        kernel = (KernelSpec("rbf", sigma, conventional) if sigma is not None
                  else KernelSpec("linear"))
        accs = []
        for fold in range(grid.folds):
            held = fold_of == fold
            if not held.any() or len(set(labels[~held])) < 2:
                continue
            model = train_multiclass(x[~held], labels[~held], kernel, c)
            hits = sum(model.predict(xi) == yi
                       for xi, yi in zip(x[held], labels[held]))
            accs.append(hits / held.sum())
        mean_acc = float(np.mean(accs))
        key = (-mean_acc, c, sigma if sigma is not None else 0.0)
        if best is None or key < best[0]:
            best = (key, c, sigma, accs)
    _, best_c, best_sigma, fold_accs = best
    return best_c, best_sigma, fold_accs
