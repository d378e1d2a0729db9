"""Acoustic front-ends: MFCC, LPC, PLP, dynamic features, and assembly.

Dimension law for an assembled front-end: D = (n_base + energy) * (1 + delta
orders). The front-end spec string serializes as e.g. ``mfcc,d2,e,cms`` or
``plp,d2,rasta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dct

from . import dsp
from .corpus import Waveform
from .errors import (
    ConfigError,
    InvalidParam,
    LagTooLarge,
    LengthMismatch,
    NonPositiveEnergy,
    TooFewFrames,
)
from .normalize import NormalizerSpec, apply_normalizer, rasta_filter

log = logging.getLogger(__name__)

LOG_FLOOR = dsp.LOG_FLOOR

BASE_DIMS = {"mfcc": 12, "lpc": 13, "plp": 13}


@dataclass(frozen=True)
class FeatureMatrix:
    """T frames x D coefficients plus front-end provenance."""

    values: np.ndarray
    frontend: str
    frame_shift_ms: float
    degenerate_frames: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise InvalidParam("feature values must be a T x D matrix")
        if not np.all(np.isfinite(values)):
            raise InvalidParam("feature values must be finite")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FrontendSpec:
    """Declarative front-end: base features + energy + deltas + normalizers."""

    base: str
    n_base: int = 0
    deltas: int = 0
    delta_d: int = 1
    energy: bool = False
    normalizers: tuple[NormalizerSpec, ...] = ()

    def __post_init__(self):
        if self.base not in BASE_DIMS:
            raise ConfigError(f"unknown base front-end {self.base!r}")
        if self.n_base == 0:
            object.__setattr__(self, "n_base", BASE_DIMS[self.base])
        if self.n_base < 1:
            raise ConfigError("n_base must be >= 1")
        if self.deltas not in (0, 1, 2):
            raise ConfigError("delta orders must be 0, 1 or 2")
        if self.delta_d not in (1, 2):
            raise ConfigError("delta offset d must be 1 or 2")
        object.__setattr__(self, "normalizers", tuple(self.normalizers))
        rastas = [n for n in self.normalizers if n.kind == "rasta"]
        if rastas and self.base != "plp":
            raise ConfigError("rasta filtering is only supported inside the "
                              "plp pipeline")

    @property
    def dimension(self) -> int:
        return (self.n_base + (1 if self.energy else 0)) * (1 + self.deltas)

    @property
    def has_rasta(self) -> bool:
        return any(n.kind == "rasta" for n in self.normalizers)

    @property
    def label(self) -> str:
        parts = [self.base if self.n_base == BASE_DIMS[self.base]
                 else f"{self.base}{self.n_base}"]
        if self.deltas:
            parts.append(f"d{self.deltas}" if self.delta_d == 1
                         else f"d{self.deltas}.{self.delta_d}")
        if self.energy:
            parts.append("e")
        parts.extend(n.kind for n in self.normalizers)
        return ",".join(parts)

    @classmethod
    def parse(cls, text: str) -> "FrontendSpec":
        """Parse a spec string like ``mfcc,d2,e,cms`` or ``plp16,d1.2,rasta``."""
        tokens = [t.strip() for t in text.split(",") if t.strip()]
        if not tokens:
            raise ConfigError("empty frontend spec")
        base = tokens[0]
        n_base = 0
        for known in BASE_DIMS:
            if base == known:
                break
            if base.startswith(known) and base[len(known):].isdigit():
                n_base = int(base[len(known):])
                base = known
                break
        deltas, delta_d, energy = 0, 1, False
        normalizers = []
        for tok in tokens[1:]:
            if tok == "e":
                energy = True
            elif tok.startswith("d") and tok[1:2].isdigit():
                body = tok[1:]
                if "." in body:
                    orders, offset = body.split(".", 1)
                    deltas, delta_d = int(orders), int(offset)
                else:
                    deltas = int(body)
            elif tok in ("cms", "cvn", "rasta", "warp", "gaussianize"):
                normalizers.append(NormalizerSpec(tok))
            else:
                raise ConfigError(f"unknown frontend token {tok!r}")
        return cls(base, n_base, deltas, delta_d, energy, tuple(normalizers))


# -- autocorrelation and linear prediction -----------------------------------

def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased, unnormalized autocorrelation r[k] = sum_n s[n] s[n+k]."""
    s = np.asarray(frame, dtype=np.float64)
    if max_lag >= s.size:
        raise LagTooLarge(f"max_lag {max_lag} >= frame length {s.size}")
    return np.array([np.dot(s[:s.size - k], s[k:]) for k in range(max_lag + 1)])


@dataclass(frozen=True)
class LpcModel:
    """All-pole predictor s[n] ~ sum_i a_i s[n-i], coefficients stored with
    positive sign under that convention."""

    order: int
    coefficients: np.ndarray
    gain: float
    reflection: np.ndarray
    effective_order: int

    @property
    def degraded(self) -> bool:
        return self.effective_order < self.order


def levinson_durbin(r: np.ndarray, p: int) -> LpcModel:
    """Solve the order-p Toeplitz normal equations by Levinson recursion.

    gain**2 equals the final prediction error. A non-positive prediction
    error mid-recursion stops the update: remaining coefficients stay zero
    and the model is flagged through ``effective_order``.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.size < p + 1:
        raise InvalidParam(f"need {p + 1} autocorrelation lags, got {r.size}")
    if r[0] <= 0.0:
        raise NonPositiveEnergy(f"r[0] = {r[0]} is not positive")

    a = np.zeros(p)
    k = np.zeros(p)
    error = r[0]
    effective = p
    for m in range(1, p + 1):
        acc = r[m] - np.dot(a[:m - 1], r[m - 1:0:-1])
        km = acc / error
        new_error = error * (1.0 - km * km)
        if new_error <= 0.0:
            effective = m - 1
            break
        k[m - 1] = km
        if m > 1:
            a[:m - 1] = a[:m - 1] - km * a[m - 2::-1]
        a[m - 1] = km
        error = new_error
    return LpcModel(p, a, float(np.sqrt(error)), k, effective)


def _levinson_batch(r: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized Levinson over frames: r is T x (p+1) with r[:, 0] > 0.

    Returns (coefficients T x p, prediction errors T, degraded mask T).
    """
    t_total = r.shape[0]
    a = np.zeros((t_total, p))
    error = r[:, 0].copy()
    degraded = np.zeros(t_total, dtype=bool)
    active = np.ones(t_total, dtype=bool)
    for m in range(1, p + 1):
        acc = r[:, m].copy()
        if m > 1:
            acc -= np.sum(a[:, :m - 1] * r[:, m - 1:0:-1], axis=1)
        km = np.where(active, acc / np.where(active, error, 1.0), 0.0)
        new_error = error * (1.0 - km * km)
        stop = active & (new_error <= 0.0)
        degraded |= stop
        active &= ~stop
        km = np.where(active, km, 0.0)
        if m > 1:
            a[:, :m - 1] -= km[:, None] * a[:, m - 2::-1]
        a[:, m - 1] = km
        error = np.where(active, error * (1.0 - km * km), error)
    return a, error, degraded


def compute_lpc(frames: dsp.FrameMatrix, p: int) -> FeatureMatrix:
    """Per frame: autocorrelation then Levinson; emit a_1..a_p as features.

    All-zero frames emit a zero vector and are flagged in
    ``degenerate_frames``.
    """
    if p >= frames.frame_len:
        raise LagTooLarge(f"order {p} >= frame length {frames.frame_len}")
    x = frames.frames
    r = np.empty((frames.n_frames, p + 1))
    for lag in range(p + 1):
        r[:, lag] = np.sum(x[:, :x.shape[1] - lag] * x[:, lag:], axis=1)

    values = np.zeros((frames.n_frames, p))
    nonzero = r[:, 0] > 0.0
    if np.any(nonzero):
        a, _, degraded = _levinson_batch(r[nonzero], p)
        values[nonzero] = a
        flagged = np.flatnonzero(nonzero)[degraded]
    else:
        flagged = np.array([], dtype=np.int64)
    zero_frames = np.flatnonzero(~nonzero)
    if zero_frames.size:
        log.warning("compute_lpc: %d all-zero frames", zero_frames.size)
    degenerate = tuple(np.union1d(zero_frames, flagged).tolist())
    shift_ms = frames.shift / frames.sample_rate * 1000.0
    return FeatureMatrix(values, "lpc", shift_ms, degenerate)


# -- filterbanks ---------------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def hz_to_bark(f):
    return 6.0 * np.arcsinh(np.asarray(f, dtype=np.float64) / 600.0)


def bark_to_hz(b):
    return 600.0 * np.sinh(np.asarray(b, dtype=np.float64) / 6.0)


@dataclass(frozen=True)
class Filterbank:
    """Bank of nonnegative filters over rfft power-spectrum bins."""

    kind: str
    weights: np.ndarray          # n_filters x n_bins
    centers_hz: np.ndarray       # peak frequency per filter, strictly increasing
    fft_size: int
    sample_rate: int

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


def mel_filterbank(sample_rate: int, fft_size: int, n_filters: int = 26,
                   f_min: float = 0.0, f_max: float | None = None) -> Filterbank:
    """Triangular unit-peak filters spaced evenly on the mel scale."""
    if f_max is None:
        f_max = sample_rate / 2.0
    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * sample_rate / fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters + 2))
    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[i] = np.maximum(0.0, np.minimum(rising, falling))
    return Filterbank("mel", weights, edges[1:-1], fft_size, sample_rate)


def bark_filterbank(sample_rate: int, fft_size: int,
                    f_max: float | None = None) -> Filterbank:
    """Trapezoidal critical-band filters, one per 1-Bark step.

    Skirts fall at +10 dB/Bark below and -25 dB/Bark above the unit flat
    top; weights under 1e-4 are truncated to keep the support local.
    """
    if f_max is None:
        f_max = sample_rate / 2.0
    n_filters = int(np.ceil(hz_to_bark(f_max))) + 1
    n_bins = fft_size // 2 + 1
    bin_barks = hz_to_bark(np.arange(n_bins) * sample_rate / fft_size)
    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        low_skirt = bin_barks - i + 0.5
        high_skirt = -2.5 * (bin_barks - i - 0.5)
        w = 10.0 ** np.minimum(0.0, np.minimum(low_skirt, high_skirt))
        w[w < 1e-4] = 0.0
        weights[i] = w
    return Filterbank("bark", weights, bark_to_hz(np.arange(n_filters)),
                      fft_size, sample_rate)


def equal_loudness(f: np.ndarray) -> np.ndarray:
    """Equal-loudness weighting evaluated at band center frequencies."""
    fsq = np.asarray(f, dtype=np.float64) ** 2
    return (fsq / (fsq + 1.6e5)) ** 2 * (fsq + 1.44e6) / (fsq + 9.61e6)


def _fft_size_for(frame_len: int, requested: int | None) -> int:
    if requested is None:
        size = 256
        while size < frame_len:
            size *= 2
        return size
    if requested < frame_len:
        raise ConfigError(f"fft_size {requested} < frame length {frame_len}")
    return requested


def power_spectrum(frames: dsp.FrameMatrix, fft_size: int) -> np.ndarray:
    """|FFT|^2 over bins [0, fft_size/2], frames zero-padded to fft_size."""
    spectrum = np.fft.rfft(frames.frames, n=fft_size, axis=1)
    return spectrum.real ** 2 + spectrum.imag ** 2


# -- MFCC ----------------------------------------------------------------------

@dataclass(frozen=True)
class MfccConfig:
    n_ceps: int = 12
    n_filters: int = 26
    fft_size: int | None = None
    f_min: float = 0.0
    f_max: float | None = None

    def __post_init__(self):
        if self.n_ceps >= self.n_filters:
            raise ConfigError("n_ceps must be < n_filters")


def mel_log_energies(frames: dsp.FrameMatrix, cfg: MfccConfig) -> np.ndarray:
    """Log mel filterbank energies (the representation the DCT decorrelates)."""
    fft_size = _fft_size_for(frames.frame_len, cfg.fft_size)
    fb = mel_filterbank(frames.sample_rate, fft_size, cfg.n_filters,
                        cfg.f_min, cfg.f_max)
    energies = power_spectrum(frames, fft_size) @ fb.weights.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def compute_mfcc(frames: dsp.FrameMatrix, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """Mel cepstra c_1..c_n via orthonormal DCT-II; c_0 is excluded."""
    log_e = mel_log_energies(frames, cfg)
    ceps = dct(log_e, type=2, norm="ortho", axis=1)[:, 1:cfg.n_ceps + 1]
    shift_ms = frames.shift / frames.sample_rate * 1000.0
    return FeatureMatrix(ceps, "mfcc", shift_ms)


# -- PLP -----------------------------------------------------------------------

@dataclass(frozen=True)
class PlpConfig:
    n_ceps: int = 13             # c_0..c_12
    model_order: int = 12
    fft_size: int | None = None
    f_max: float | None = None

    def __post_init__(self):
        if self.n_ceps > self.model_order + 1:
            raise ConfigError("n_ceps must be <= model_order + 1")


def bark_band_energies(frames: dsp.FrameMatrix, cfg: PlpConfig) -> np.ndarray:
    fft_size = _fft_size_for(frames.frame_len, cfg.fft_size)
    fb = bark_filterbank(frames.sample_rate, fft_size, cfg.f_max)
    return power_spectrum(frames, fft_size) @ fb.weights.T


def _lpc_to_cepstra(a: np.ndarray, error: np.ndarray, n_ceps: int) -> np.ndarray:
    """Cepstra of the all-pole model: c_0 = ln(prediction error), then the
    standard recursion c_n = a_n + sum_k (k/n) c_k a_{n-k}."""
    t_total, order = a.shape
    c = np.zeros((t_total, n_ceps))
    c[:, 0] = np.log(np.maximum(error, LOG_FLOOR))
    for n in range(1, n_ceps):
        acc = a[:, n - 1] if n <= order else np.zeros(t_total)
        for k in range(1, n):
            if n - k <= order:
                acc = acc + (k / n) * c[:, k] * a[:, n - k - 1]
        c[:, n] = acc
    return c


def compute_plp(frames: dsp.FrameMatrix, cfg: PlpConfig = PlpConfig(),
                rasta: bool = False) -> FeatureMatrix:
    """Perceptual linear prediction cepstra c_0..c_{n_ceps-1}.

    Chain: power spectrum -> Bark critical bands -> (optional RASTA in the
    log band domain) -> equal loudness -> cube-root compression -> inverse
    DFT to autocorrelations -> all-pole fit -> cepstral recursion.
    """
    bands = bark_band_energies(frames, cfg)
    if rasta:
        bands = np.exp(rasta_filter(np.log(np.maximum(bands, LOG_FLOOR))))
    fft_size = _fft_size_for(frames.frame_len, cfg.fft_size)
    centers = bark_filterbank(frames.sample_rate, fft_size, cfg.f_max).centers_hz
    compressed = (bands * equal_loudness(centers)) ** (1.0 / 3.0)

    # autocorrelations of the symmetric band spectrum
    extended = np.concatenate([compressed, compressed[:, -2:0:-1]], axis=1)
    r = np.real(np.fft.ifft(extended, axis=1))[:, :cfg.model_order + 1]

    values = np.zeros((frames.n_frames, cfg.n_ceps))
    nonzero = r[:, 0] > 0.0
    flagged = np.array([], dtype=np.int64)
    if np.any(nonzero):
        a, error, degraded = _levinson_batch(r[nonzero], cfg.model_order)
        values[nonzero] = _lpc_to_cepstra(a, error, cfg.n_ceps)
        flagged = np.flatnonzero(nonzero)[degraded]
    zero_frames = np.flatnonzero(~nonzero)
    if zero_frames.size:
        log.warning("compute_plp: %d all-zero frames", zero_frames.size)
    degenerate = tuple(np.union1d(zero_frames, flagged).tolist())
    shift_ms = frames.shift / frames.sample_rate * 1000.0
    return FeatureMatrix(values, "plp", shift_ms, degenerate)


# -- dynamics and assembly -------------------------------------------------------

def _delta(values: np.ndarray, d: int) -> np.ndarray:
    padded = np.pad(values, ((d, d), (0, 0)), mode="edge")
    return padded[2 * d:] - padded[:-2 * d]


def append_deltas(f: FeatureMatrix, d: int = 1, orders: int = 1) -> FeatureMatrix:
    """Append delta (and delta-delta) blocks: D_i = y_{i+d} - y_{i-d} with
    edge frames replicated; columns ordered [static | delta | delta-delta]."""
    if orders not in (1, 2):
        raise InvalidParam("orders must be 1 or 2")
    if d not in (1, 2):
        raise InvalidParam("delta offset d must be 1 or 2")
    if f.n_frames <= 2 * d:
        raise TooFewFrames(f"need more than {2 * d} frames for deltas")
    blocks = [f.values, _delta(f.values, d)]
    if orders == 2:
        blocks.append(_delta(blocks[1], d))
    return replace(f, values=np.hstack(blocks))


def append_log_energy(f: FeatureMatrix, energies: np.ndarray) -> FeatureMatrix:
    """Append frame log energy as the last static column (before deltas)."""
    energies = np.asarray(energies, dtype=np.float64)
    if energies.shape != (f.n_frames,):
        raise LengthMismatch(
            f"{energies.shape[0]} energies for {f.n_frames} frames")
    return replace(f, values=np.hstack([f.values, energies[:, None]]))


@dataclass(frozen=True)
class Frontend:
    """Executable pipeline: preprocess -> base -> energy -> deltas -> normalizers."""

    spec: FrontendSpec

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def label(self) -> str:
        return self.spec.label

    def extract_from_frames(self, frames: dsp.FrameMatrix) -> FeatureMatrix:
        spec = self.spec
        if frames.n_frames == 0:
            raise TooFewFrames("no speech frames to extract from")
        if spec.base == "mfcc":
            f = compute_mfcc(frames, MfccConfig(n_ceps=spec.n_base))
        elif spec.base == "lpc":
            f = compute_lpc(frames, spec.n_base)
        else:
            f = compute_plp(frames, PlpConfig(n_ceps=spec.n_base,
                                              model_order=spec.n_base - 1),
                            rasta=spec.has_rasta)
        if spec.energy:
            f = append_log_energy(f, dsp.frame_log_energy(frames))
        if spec.deltas:
            f = append_deltas(f, spec.delta_d, spec.deltas)
        for norm in spec.normalizers:
            if norm.kind == "rasta":
                continue  # consumed inside compute_plp
            f = apply_normalizer(f, norm)
        return replace(f, frontend=spec.label)

    def extract(self, waveform: Waveform, cfg: dsp.PreprocessConfig) -> FeatureMatrix:
        return self.extract_from_frames(dsp.preprocess(waveform, cfg))


def assemble_frontend(spec: FrontendSpec | str) -> Frontend:
    if isinstance(spec, str):
        spec = FrontendSpec.parse(spec)
    if spec.base == "mfcc":
        MfccConfig(n_ceps=spec.n_base)  # validates n_base < n_filters
    return Frontend(spec)
