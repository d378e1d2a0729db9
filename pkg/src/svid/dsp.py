"""Pre-processing chain: endpoint detection, pre-emphasis, framing, windowing.

The chain is order-fixed: energy VAD on the raw signal, then pre-emphasis,
frame blocking, and windowing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Waveform
from .errors import EmptySignal, InvalidParam, LengthMismatch, SignalTooShort

LOG_FLOOR = 1e-10  # floor under every log taken on signal energy


@dataclass(frozen=True)
class VadConfig:
    """Energy VAD: keep frames within ``relative_floor_db`` of the loudest frame."""

    relative_floor_db: float = 30.0
    min_speech_frames: int = 5
    min_silence_frames: int = 10

    def __post_init__(self):
        if self.relative_floor_db <= 0:
            raise InvalidParam("relative_floor_db must be positive")
        if self.min_speech_frames < 1 or self.min_silence_frames < 1:
            raise InvalidParam("VAD frame counts must be >= 1")


@dataclass(frozen=True)
class PreprocessConfig:
    pre_emphasis_alpha: float = 0.95
    frame_len_ms: float = 16.0
    frame_shift_ms: float = 8.0
    window_a: float = 0.46
    vad: VadConfig = field(default_factory=VadConfig)
    # out-of-range alpha (outside [0.9, 1.0]) is rejected unless this is set;
    # the override exists so alpha=0 identity configurations stay expressible
    allow_alpha_override: bool = False

    def __post_init__(self):
        if not np.isfinite(self.pre_emphasis_alpha):
            raise InvalidParam("pre_emphasis_alpha must be finite")
        if not self.allow_alpha_override and not 0.9 <= self.pre_emphasis_alpha <= 1.0:
            raise InvalidParam(
                f"pre_emphasis_alpha {self.pre_emphasis_alpha} outside [0.9, 1.0] "
                "(set allow_alpha_override to permit)")
        if self.frame_shift_ms <= 0 or self.frame_shift_ms > self.frame_len_ms:
            raise InvalidParam("need 0 < shift <= frame length")
        if not 0.0 <= self.window_a <= 0.5:
            raise InvalidParam("window_a must be in [0, 0.5]")

    def frame_len(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def frame_shift(self, sample_rate: int) -> int:
        return int(round(self.frame_shift_ms * sample_rate / 1000.0))


@dataclass(frozen=True)
class FrameMatrix:
    """T overlapping frames of N samples each."""

    frames: np.ndarray
    sample_rate: int
    shift: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2:
            raise InvalidParam("frames must be a T x N matrix")
        if not np.all(np.isfinite(frames)):
            raise InvalidParam("frames must be finite")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1]


def pre_emphasize(x: Waveform, alpha: float) -> Waveform:
    """y[n] = x[n] - alpha * x[n-1], with x[-1] taken as 0."""
    if not np.isfinite(alpha):
        raise InvalidParam("alpha must be finite")
    s = x.samples
    y = np.empty_like(s)
    y[0] = s[0]
    y[1:] = s[1:] - alpha * s[:-1]
    return Waveform(y, x.sample_rate)


def frame_signal(x: Waveform, cfg: PreprocessConfig) -> FrameMatrix:
    """Block into overlapping frames; the trailing partial frame is discarded."""
    n = cfg.frame_len(x.sample_rate)
    shift = cfg.frame_shift(x.sample_rate)
    length = len(x)
    if length < n:
        raise SignalTooShort(f"signal length {length} < frame length {n}")
    n_frames = (length - n) // shift + 1
    idx = np.arange(n)[None, :] + shift * np.arange(n_frames)[:, None]
    return FrameMatrix(x.samples[idx], x.sample_rate, shift)


def hamming_window(n: int, a: float) -> np.ndarray:
    """Generalized Hamming window w[k] = (1-a) - a*cos(2 pi k / (N-1))."""
    if n < 2:
        raise InvalidParam("window length must be >= 2")
    k = np.arange(n)
    return (1.0 - a) - a * np.cos(2.0 * np.pi * k / (n - 1))


def apply_window(frames: FrameMatrix, window: np.ndarray) -> FrameMatrix:
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (frames.frame_len,):
        raise LengthMismatch(
            f"window length {window.size} != frame length {frames.frame_len}")
    return FrameMatrix(frames.frames * window, frames.sample_rate, frames.shift)


def frame_log_energy(frames: FrameMatrix) -> np.ndarray:
    """Natural-log frame energies, floored at LOG_FLOOR."""
    e = np.sum(frames.frames ** 2, axis=1)
    return np.log(np.maximum(e, LOG_FLOOR))


def detect_endpoints(x: Waveform, cfg: PreprocessConfig) -> list[tuple[int, int]]:
    """Energy VAD returning sorted, disjoint (start, end) sample spans.

    A frame is speech when its log energy exceeds the utterance maximum minus
    the configured dB floor. Speech runs shorter than ``min_speech_frames``
    are dropped, then silence gaps shorter than ``min_silence_frames`` are
    bridged. An all-zero signal yields no spans.
    """
    if len(x) == 0:
        raise EmptySignal("empty signal")
    try:
        frames = frame_signal(x, cfg)
    except SignalTooShort:
        return []
    raw_energy = np.sum(frames.frames ** 2, axis=1)
    if np.max(raw_energy) <= 0.0:
        return []
    log_e = np.log(np.maximum(raw_energy, LOG_FLOOR))
    threshold = np.max(log_e) - cfg.vad.relative_floor_db / 10.0 * np.log(10.0)
    mask = log_e > threshold

    runs = _runs(mask)
    runs = [(s, e) for s, e in runs if e - s >= cfg.vad.min_speech_frames]
    merged: list[list[int]] = []
    for s, e in runs:
        if merged and s - merged[-1][1] < cfg.vad.min_silence_frames:
            merged[-1][1] = e
        else:
            merged.append([s, e])

    n, shift = frames.frame_len, frames.shift
    return [(s * shift, min((e - 1) * shift + n, len(x))) for s, e in merged]


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous True runs as half-open (start, end) frame index pairs."""
    out = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i))
            start = None
    if start is not None:
        out.append((start, len(mask)))
    return out


def preprocess(x: Waveform, cfg: PreprocessConfig) -> FrameMatrix:
    """Full chain: VAD -> pre-emphasis -> framing -> windowing.

    Returns windowed frames restricted to those lying entirely inside a VAD
    speech span. May return an empty FrameMatrix when no speech is found.
    """
    spans = detect_endpoints(x, cfg)
    emphasized = pre_emphasize(x, cfg.pre_emphasis_alpha)
    frames = frame_signal(emphasized, cfg)
    n, shift = frames.frame_len, frames.shift
    keep = np.zeros(frames.n_frames, dtype=bool)
    for start, end in spans:
        # frames fully inside [start, end)
        first = int(np.ceil(max(start, 0) / shift))
        last = (end - n) // shift
        if last >= first:
            keep[first:last + 1] = True
    window = hamming_window(n, cfg.window_a)
    return FrameMatrix(frames.frames[keep] * window, x.sample_rate, shift)
