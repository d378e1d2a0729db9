"""Per-utterance feature normalizers: CMS, CVN, RASTA, warping, Gaussianization.

All transforms preserve the frame count and dimension, operate on one
utterance at a time, and carry no cross-utterance state.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

from .errors import InvalidParam, TooFewFrames

if TYPE_CHECKING:
    from .features import FeatureMatrix

log = logging.getLogger(__name__)

NORMALIZER_KINDS = ("cms", "cvn", "rasta", "warp", "gaussianize")

# band-pass filter on log band-energy trajectories:
# H(z) = 0.1 * (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)
RASTA_NUMERATOR = 0.1 * np.array([2.0, 1.0, 0.0, -1.0, -2.0])
RASTA_POLE = 0.98

DEFAULT_WARP_WINDOW = 301  # ~2.4 s at 8 ms frame shift


@dataclass(frozen=True)
class NormalizerSpec:
    kind: str
    warp_window: int = DEFAULT_WARP_WINDOW
    gaussianize_iters: int = 1

    def __post_init__(self):
        if self.kind not in NORMALIZER_KINDS:
            raise InvalidParam(f"unknown normalizer {self.kind!r}")
        if self.warp_window < 3 or self.warp_window % 2 == 0:
            raise InvalidParam("warp_window must be odd and >= 3")
        if self.gaussianize_iters < 1:
            raise InvalidParam("gaussianize_iters must be >= 1")


def cms(f: "FeatureMatrix") -> "FeatureMatrix":
    """Subtract the utterance mean from every dimension."""
    values = f.values - np.mean(f.values, axis=0)
    return replace(f, values=values)


def cvn(f: "FeatureMatrix") -> "FeatureMatrix":
    """Mean and variance normalization; zero-variance dimensions become zeros."""
    if f.values.shape[0] < 2:
        raise TooFewFrames("cvn needs at least 2 frames")
    centered = f.values - np.mean(f.values, axis=0)
    std = np.std(f.values, axis=0)
    out = np.where(std > 0.0, centered / np.where(std > 0.0, std, 1.0), 0.0)
    return replace(f, values=out)


def rasta_filter(log_band_energies: np.ndarray) -> np.ndarray:
    """Band-pass filter each band trajectory, zero initial filter state.

    Fewer than 5 frames pass through unchanged (with a warning): the
    numerator needs a 5-frame history.
    """
    x = np.asarray(log_band_energies, dtype=np.float64)
    if x.shape[0] < 5:
        log.warning("rasta_filter: %d frames < 5, passing through", x.shape[0])
        return x.copy()
    return lfilter(RASTA_NUMERATOR, [1.0, -RASTA_POLE], x, axis=0)


def _sliding_ranks(column: np.ndarray, window: int) -> np.ndarray:
    """Rank (1-based) of each frame within its centered length-`window` block.

    Near the edges the block slides to stay in range. Ties break by frame
    index: an equal value at an earlier frame ranks below the current one.
    """
    t_total = column.size
    half = window // 2
    lo = np.clip(np.arange(t_total) - half, 0, t_total - window)
    offsets = np.arange(window)
    block = column[lo[:, None] + offsets[None, :]]
    center = column[:, None]
    global_idx = lo[:, None] + offsets[None, :]
    less = block < center
    tied_before = (block == center) & (global_idx < np.arange(t_total)[:, None])
    return 1 + less.sum(axis=1) + tied_before.sum(axis=1)


def _full_ranks(column: np.ndarray) -> np.ndarray:
    """1-based ranks over the whole column, ties broken by frame index."""
    order = np.argsort(column, kind="stable")
    ranks = np.empty(column.size, dtype=np.int64)
    ranks[order] = np.arange(1, column.size + 1)
    return ranks


def feature_warp(f: "FeatureMatrix", window: int = DEFAULT_WARP_WINDOW) -> "FeatureMatrix":
    """Map each dimension's sliding-window ranks onto standard-normal quantiles.

    Output frame t in dimension d is ndtri((r - 0.5) / W) where r is the rank
    of f[t, d] inside its centered window of W frames.
    """
    if window < 3 or window % 2 == 0:
        raise InvalidParam("window must be odd and >= 3")
    t_total, dims = f.values.shape
    if t_total < 3:
        raise TooFewFrames(f"feature_warp needs >= 3 frames, got {t_total}")
    if t_total < window:
        window = t_total if t_total % 2 == 1 else t_total - 1
        log.warning("feature_warp: shrinking window to %d for %d frames",
                    window, t_total)
    out = np.empty_like(f.values)
    for d in range(dims):
        ranks = _sliding_ranks(f.values[:, d], window)
        out[:, d] = ndtri((ranks - 0.5) / window)
    return replace(f, values=out)


def short_time_gaussianize(f: "FeatureMatrix", iters: int = 1) -> "FeatureMatrix":
    """Alternate global whitening with per-dimension rank mapping to N(0, 1).

    Whitening is the symmetric inverse square root of the sample covariance
    (eigenvalues floored at 1e-8), so dimensions keep their identity; the
    marginal step maps full-utterance ranks onto normal quantiles and
    rescales them to exactly unit variance.
    """
    if iters < 1:
        raise InvalidParam("iters must be >= 1")
    t_total, dims = f.values.shape
    if t_total <= dims:
        raise TooFewFrames(f"gaussianize needs T > D, got T={t_total} D={dims}")

    quantiles = ndtri((np.arange(1, t_total + 1) - 0.5) / t_total)
    q_scale = np.sqrt(np.mean(quantiles ** 2))

    x = f.values
    for _ in range(iters):
        centered = x - np.mean(x, axis=0)
        cov = centered.T @ centered / t_total
        eigval, eigvec = np.linalg.eigh(cov)
        inv_root = eigvec @ np.diag(np.maximum(eigval, 1e-8) ** -0.5) @ eigvec.T
        whitened = centered @ inv_root
        x = np.empty_like(whitened)
        for d in range(dims):
            ranks = _full_ranks(whitened[:, d])
            x[:, d] = quantiles[ranks - 1] / q_scale
    return replace(f, values=x)


def apply_normalizer(f: "FeatureMatrix", spec: NormalizerSpec) -> "FeatureMatrix":
    if spec.kind == "cms":
        return cms(f)
    if spec.kind == "cvn":
        return cvn(f)
    if spec.kind == "warp":
        return feature_warp(f, spec.warp_window)
    if spec.kind == "gaussianize":
        return short_time_gaussianize(f, spec.gaussianize_iters)
    raise InvalidParam(f"{spec.kind} is not a post-extraction normalizer")
