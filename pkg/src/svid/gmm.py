"""Diagonal-covariance GMM-UBM: K-means init, EM, MAP mean adaptation,
supervector extraction."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateData, DimMismatch, InvalidParam, ShapeMismatch, TooFewPoints

log = logging.getLogger(__name__)

_LN_2PI = np.log(2.0 * np.pi)


def _log_weights(w: np.ndarray) -> np.ndarray:
    # floor keeps a zero-weight component at -inf-ish without numpy warnings
    return np.log(np.maximum(w, 1e-300))


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray    # K
    means: np.ndarray      # K x D
    variances: np.ndarray  # K x D, diagonal covariances

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        if m.ndim != 2 or v.shape != m.shape or w.shape != (m.shape[0],):
            raise ShapeMismatch("inconsistent GMM component shapes")
        if abs(w.sum() - 1.0) > 1e-10 or np.any(w < 0):
            raise InvalidParam("weights must be a probability vector")
        if np.any(v <= 0):
            raise InvalidParam("variances must be positive")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    n_components: int = 128
    max_iters: int = 50
    rel_tol: float = 1e-5
    variance_floor_factor: float = 1e-3
    seed: int = 0
    relevance: float = 16.0

    def __post_init__(self):
        if self.n_components < 1:
            raise InvalidParam("n_components must be >= 1")
        if self.rel_tol <= 0:
            raise InvalidParam("rel_tol must be positive")
        if self.relevance <= 0:
            raise InvalidParam("relevance factor must be positive")


@dataclass(frozen=True)
class Supervector:
    """Concatenated adapted means; the SVM input representation."""

    values: np.ndarray
    source: tuple[str, str] = ("", "")
    scaling: str = "plain"

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=np.float64))


def _log_densities(frames: np.ndarray, model: GmmModel) -> np.ndarray:
    """T x K log component densities ln N(x_t; m_k, diag v_k)."""
    inv = 1.0 / model.variances
    const = -0.5 * (model.dim * _LN_2PI + np.sum(np.log(model.variances), axis=1))
    quad = (frames ** 2 @ inv.T
            - 2.0 * frames @ (model.means * inv).T
            + np.sum(model.means ** 2 * inv, axis=1))
    return const - 0.5 * quad


def _check_frames(frames: np.ndarray, model: GmmModel) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != model.dim:
        raise DimMismatch(
            f"frames have dim {frames.shape[-1] if frames.ndim == 2 else '?'}, "
            f"model has {model.dim}")
    return frames


def log_likelihood(model: GmmModel, frames: np.ndarray) -> float:
    """Average per-frame log-likelihood, computed in the log domain."""
    frames = _check_frames(frames, model)
    joint = _log_densities(frames, model) + _log_weights(model.weights)
    return float(np.mean(logsumexp(joint, axis=1)))


def kmeans_init(data: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Lloyd K-means with seed-deterministic centers drawn from the data.

    Empty clusters are re-seeded with the point farthest from its assigned
    center; stops once assignments are stable or after 100 iterations.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n < k:
        raise TooFewPoints(f"{n} points for {k} clusters")
    rng = np.random.default_rng(seed)
    centers = data[rng.choice(n, size=k, replace=False)].copy()
    assign = np.full(n, -1)
    for _ in range(100):
        d2 = (np.sum(data ** 2, axis=1)[:, None]
              - 2.0 * data @ centers.T
              + np.sum(centers ** 2, axis=1))
        new_assign = np.argmin(d2, axis=1)
        dist_own = d2[np.arange(n), new_assign]
        for empty in np.setdiff1d(np.arange(k), new_assign):
            far = int(np.argmax(dist_own))
            new_assign[far] = empty
            dist_own[far] = -np.inf
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = data[assign == j]
            if members.size:
                centers[j] = members.mean(axis=0)
    return centers


def em_train_ubm(data: np.ndarray, cfg: TrainConfig) -> tuple[GmmModel, np.ndarray]:
    """Train a diagonal-covariance GMM by EM from a K-means pre-estimate.

    Initial weights are uniform and initial variances the global per-dim
    variance; variances are floored at ``variance_floor_factor`` times the
    global variance. Returns the model and the per-iteration average
    log-likelihood trace (non-decreasing; the last entry is the returned
    model's likelihood).
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise InvalidParam("data must be N x D")
    n, dim = data.shape
    k = cfg.n_components
    if n < k:
        raise TooFewPoints(f"{n} points for {k} components")
    if n < 10 * k:
        log.warning("em_train_ubm: only %d points for %d components", n, k)
    global_var = np.var(data, axis=0)
    if np.any(global_var == 0.0):
        raise DegenerateData("zero variance in some dimension")
    floor = cfg.variance_floor_factor * global_var

    means = kmeans_init(data, k, cfg.seed)
    weights = np.full(k, 1.0 / k)
    variances = np.tile(global_var, (k, 1))

    trace = []
    iteration = 0
    while True:
        model = GmmModel(weights, means, variances)
        joint = _log_densities(data, model) + _log_weights(weights)
        norm = logsumexp(joint, axis=1)
        trace.append(float(np.mean(norm)))
        if iteration > 0 and trace[-1] - trace[-2] <= cfg.rel_tol * abs(trace[-2]):
            break
        if iteration >= cfg.max_iters:
            break
        resp = np.exp(joint - norm[:, None])
        nk = resp.sum(axis=0)
        occupied = nk > 1e-12
        new_means = means.copy()
        new_vars = variances.copy()
        new_means[occupied] = (resp.T[occupied] @ data) / nk[occupied, None]
        second = (resp.T[occupied] @ data ** 2) / nk[occupied, None]
        new_vars[occupied] = second - new_means[occupied] ** 2
        weights = nk / n
        means = new_means
        variances = np.maximum(new_vars, floor)
        iteration += 1
    return model, np.asarray(trace)


def map_adapt_means(ubm: GmmModel, frames: np.ndarray, relevance: float) -> GmmModel:
    """Bayesian (MAP) adaptation of the UBM means toward the given frames.

    adapted_k = alpha_k * E_k + (1 - alpha_k) * m_k with
    alpha_k = n_k / (n_k + relevance); weights and variances are copied
    from the UBM unchanged.
    """
    frames = _check_frames(frames, ubm)
    if frames.shape[0] < 1:
        raise InvalidParam("need at least one frame")
    joint = _log_densities(frames, ubm) + _log_weights(ubm.weights)
    resp = np.exp(joint - logsumexp(joint, axis=1)[:, None])
    nk = resp.sum(axis=0)
    ek = ubm.means.copy()
    occupied = nk > 0.0
    ek[occupied] = (resp.T[occupied] @ frames) / nk[occupied, None]
    alpha = (nk / (nk + relevance))[:, None]
    adapted = alpha * ek + (1.0 - alpha) * ubm.means
    return GmmModel(ubm.weights.copy(), adapted, ubm.variances.copy())


def supervector(model: GmmModel, ubm: GmmModel, scaling: str = "plain",
                source: tuple[str, str] = ("", "")) -> Supervector:
    """Concatenate the adapted component means in fixed component order.

    ``kl`` scaling applies sqrt(w_k) / sqrt(v_k) per component (UBM weights
    and variances), the normalization under which the linear kernel
    approximates the KL divergence between the models.
    """
    if model.means.shape != ubm.means.shape:
        raise ShapeMismatch("model and UBM must share K and D")
    if scaling == "plain":
        values = model.means.ravel().copy()
    elif scaling == "kl":
        values = (np.sqrt(ubm.weights)[:, None] / np.sqrt(ubm.variances)
                  * model.means).ravel()
    else:
        raise InvalidParam(f"unknown scaling {scaling!r}")
    return Supervector(values, source, scaling)
