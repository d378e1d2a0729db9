"""Audio ingestion, synthetic corpus generation, and train/test splitting.

A corpus on disk is a directory tree ``<root>/<speaker_id>/<utterance_id>.wav``
holding 16-bit mono PCM WAV files that all share one sample rate.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import (
    InsufficientUtterances,
    InvalidParam,
    NotWav,
    Truncated,
    UnsupportedEncoding,
)

_PCM_SCALE = 32768.0  # exact power of two so int16 round-trips bit-exactly


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence with its sample rate.

    Samples are dimensionless amplitudes, nominally in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise InvalidParam("sample_rate must be positive")
        if samples.ndim != 1 or samples.size < 1:
            raise InvalidParam("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise InvalidParam("samples must be finite")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Utterance:
    speaker_id: str
    utterance_id: str
    waveform: Waveform


@dataclass(frozen=True)
class Corpus:
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        keys = [(u.speaker_id, u.utterance_id) for u in self.utterances]
        if len(set(keys)) != len(keys):
            raise InvalidParam("duplicate (speaker_id, utterance_id) pair")
        rates = {u.waveform.sample_rate for u in self.utterances}
        if len(rates) > 1:
            raise InvalidParam(f"mixed sample rates in corpus: {sorted(rates)}")

    @property
    def sample_rate(self) -> int:
        return self.utterances[0].waveform.sample_rate

    @property
    def speaker_ids(self) -> list[str]:
        seen = dict.fromkeys(u.speaker_id for u in self.utterances)
        return list(seen)

    def by_speaker(self) -> dict[str, list[Utterance]]:
        out: dict[str, list[Utterance]] = {}
        for u in self.utterances:
            out.setdefault(u.speaker_id, []).append(u)
        return out

    def __len__(self):
        return len(self.utterances)


@dataclass(frozen=True)
class SplitSpec:
    n_train: int
    n_test: int

    def __post_init__(self):
        if self.n_train < 1 or self.n_test < 1:
            raise InvalidParam("n_train and n_test must be >= 1")


# -- WAV I/O -----------------------------------------------------------------

def read_wav(path) -> Waveform:
    """Read a 16-bit mono PCM RIFF/WAVE file.

    Samples are scaled to [-1, 1) by dividing by 32768.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise NotWav(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body_start = pos + 8
        if body_start + size > len(data):
            raise Truncated(f"{path}: chunk {cid!r} exceeds file size")
        if cid == b"fmt ":
            if size < 16:
                raise Truncated(f"{path}: fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif cid == b"data":
            payload = data[body_start:body_start + size]
        # chunks are word-aligned
        pos = body_start + size + (size & 1)

    if fmt is None or payload is None:
        raise Truncated(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedEncoding(f"{path}: format tag {audio_format}, want PCM (1)")
    if channels != 1:
        raise UnsupportedEncoding(f"{path}: {channels} channels, want mono")
    if bits != 16:
        raise UnsupportedEncoding(f"{path}: {bits}-bit, want 16-bit")
    if len(payload) % 2 != 0:
        raise Truncated(f"{path}: odd data chunk length")

    raw = np.frombuffer(payload, dtype="<i2")
    return Waveform(raw.astype(np.float64) / _PCM_SCALE, int(sample_rate))


def write_wav(path, waveform: Waveform) -> None:
    """Write a waveform as 16-bit mono PCM, inverse of :func:`read_wav`."""
    scaled = np.round(waveform.samples * _PCM_SCALE)
    ints = np.clip(scaled, -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    rate = waveform.sample_rate
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def save_corpus(corpus: Corpus, root) -> None:
    root = Path(root)
    for u in corpus.utterances:
        d = root / u.speaker_id
        d.mkdir(parents=True, exist_ok=True)
        write_wav(d / f"{u.utterance_id}.wav", u.waveform)


def load_corpus(root) -> Corpus:
    """Load a ``<root>/<speaker>/<utterance>.wav`` tree.

    Mixed sample rates are rejected (Corpus invariant); resampling is not
    supported.
    """
    root = Path(root)
    utterances = []
    for spk_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for wav in sorted(spk_dir.glob("*.wav")):
            utterances.append(Utterance(spk_dir.name, wav.stem, read_wav(wav)))
    if not utterances:
        raise InvalidParam(f"no utterances found under {root}")
    return Corpus(tuple(utterances))


# -- synthetic corpus --------------------------------------------------------

# formant slot grids, 200 Hz apart; distinct slot triples keep speakers
# at least 200 Hz apart in at least one formant
_F1_SLOTS = np.arange(300.0, 1300.0, 200.0)        # 5 slots
_F2_SLOTS = np.arange(1400.0, 3000.0, 200.0)       # 8 slots
_F3_SLOTS = np.arange(3100.0, 5100.0, 200.0)       # 10 slots

_PAD_S = 0.1          # leading/trailing noise-only padding
_SNR_DB = 50.0        # white-noise floor below voiced signal
_PEAK = 0.3


@dataclass(frozen=True)
class _Voice:
    f0: float
    formants: tuple[float, float, float]
    bandwidths: tuple[float, float, float]


def _make_voices(seed: int, n_speakers: int) -> list[_Voice]:
    rng = np.random.default_rng([seed, 0x56])
    # parity-coded slot triples: any two either differ in at least two
    # formants or in one formant by >= 5 slots (750 Hz)
    triples = [(i, j, k)
               for i in range(len(_F1_SLOTS))
               for j in range(len(_F2_SLOTS))
               for k in range(len(_F3_SLOTS))
               if (i + j + k) % 5 == 0]
    if n_speakers > len(triples):
        triples = [(i, j, k)
                   for i in range(len(_F1_SLOTS))
                   for j in range(len(_F2_SLOTS))
                   for k in range(len(_F3_SLOTS))]
    if n_speakers > len(triples):
        raise InvalidParam(f"at most {len(triples)} distinct voices supported")
    order = rng.permutation(len(triples))[:n_speakers]
    f0_order = rng.permutation(n_speakers)
    voices = []
    for i in range(n_speakers):
        s1, s2, s3 = triples[order[i]]
        formants = (_F1_SLOTS[s1], _F2_SLOTS[s2], _F3_SLOTS[s3])
        f0 = 150.0 + 10.0 * f0_order[i]
        bws = tuple(rng.uniform(60.0, 120.0, size=3))
        voices.append(_Voice(f0, formants, bws))
    return voices


def _synth_utterance(voice: _Voice, duration_s: float, rate: int,
                     rng: np.random.Generator) -> np.ndarray:
    n_total = int(round(duration_s * rate))
    n_pad = min(int(round(_PAD_S * rate)), n_total // 4)
    n_voiced = n_total - 2 * n_pad

    # impulse train at the fundamental with per-utterance phase and jitter
    f0 = voice.f0 * (1.0 + 0.01 * rng.uniform(-1.0, 1.0))
    period = rate / f0
    excitation = np.zeros(n_voiced)
    t = rng.uniform(0.0, period)
    while t < n_voiced:
        excitation[int(t)] = 1.0
        t += period * (1.0 + 0.01 * rng.standard_normal())

    # cascade of damped resonators at the speaker's formants
    y = excitation
    for freq, bw in zip(voice.formants, voice.bandwidths):
        r = np.exp(-np.pi * bw / rate)
        theta = 2.0 * np.pi * freq / rate
        y = lfilter([1.0], [1.0, -2.0 * r * np.cos(theta), r * r], y)

    # fade edges of the voiced part to avoid clicks at the padding boundary
    n_fade = min(int(0.01 * rate), n_voiced // 2)
    if n_fade > 0:
        ramp = np.linspace(0.0, 1.0, n_fade)
        y[:n_fade] *= ramp
        y[-n_fade:] *= ramp[::-1]

    signal = np.zeros(n_total)
    signal[n_pad:n_pad + n_voiced] = y

    rms = np.sqrt(np.mean(y ** 2))
    noise = rng.standard_normal(n_total) * rms * 10.0 ** (-_SNR_DB / 20.0)
    signal += noise

    peak = np.max(np.abs(signal))
    return signal * (_PEAK / peak)


def synthesize_corpus(seed: int, n_speakers: int, n_utterances: int,
                      duration_s: float, sample_rate: int = 16000) -> Corpus:
    """Generate a deterministic multi-speaker corpus of vowel-like utterances.

    Each speaker is a fixed voice (fundamental + three formant resonators,
    formant triples 150 Hz apart across speakers); each utterance is an
    impulse train through those resonators with per-utterance phase/jitter
    plus a low-level white-noise floor. Bit-identical for identical arguments.
    """
    if n_speakers < 2:
        raise InvalidParam("need at least 2 speakers")
    if n_utterances < 1:
        raise InvalidParam("need at least 1 utterance per speaker")
    if duration_s <= 0:
        raise InvalidParam("duration_s must be positive")
    if sample_rate <= 0:
        raise InvalidParam("sample_rate must be positive")

    voices = _make_voices(seed, n_speakers)
    utterances = []
    for s, voice in enumerate(voices):
        speaker_id = f"spk{s:02d}"
        for u in range(n_utterances):
            rng = np.random.default_rng([seed, s, u])
            samples = _synth_utterance(voice, duration_s, sample_rate, rng)
            utterances.append(
                Utterance(speaker_id, f"utt{u:02d}", Waveform(samples, sample_rate)))
    return Corpus(tuple(utterances))


# -- splitting ---------------------------------------------------------------

def split_train_test(corpus: Corpus, spec: SplitSpec, seed: int) -> tuple[Corpus, Corpus]:
    """Split per speaker: a seed-deterministic permutation assigns the first
    ``n_train`` utterances to train and the next ``n_test`` to test."""
    train: list[Utterance] = []
    test: list[Utterance] = []
    by_speaker = corpus.by_speaker()
    for idx, speaker in enumerate(sorted(by_speaker)):
        utts = sorted(by_speaker[speaker], key=lambda u: u.utterance_id)
        need = spec.n_train + spec.n_test
        if len(utts) < need:
            raise InsufficientUtterances(
                f"speaker {speaker}: {len(utts)} utterances, need {need}")
        rng = np.random.default_rng([seed, idx])
        order = rng.permutation(len(utts))
        train.extend(utts[i] for i in order[:spec.n_train])
        test.extend(utts[i] for i in order[spec.n_train:need])
    return Corpus(tuple(train)), Corpus(tuple(test))
