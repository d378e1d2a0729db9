"""Experiment configuration: structured key=value text with sections.

Single-occurrence sections: [corpus] [split] [preprocess] [gmm] [svm]
[experiment]; repeated [[frontend]] sections list the front-ends to sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SplitSpec
from .dsp import PreprocessConfig, VadConfig
from .errors import ConfigError
from .features import FrontendSpec
from .gmm import TrainConfig
from .svm import CvGrid

_SECTIONS = ("corpus", "split", "preprocess", "gmm", "svm", "experiment")


@dataclass(frozen=True)
class CorpusSource:
    """Either a directory of WAV files or synthesis parameters."""

    path: str | None = None
    n_speakers: int = 14
    n_utterances: int = 10
    duration_s: float = 3.0
    sample_rate: int = 16000


@dataclass(frozen=True)
class SvmSection:
    kernels: tuple[str, ...] = ("linear", "rbf")
    c_values: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    sigma_values: tuple[float, ...] | str = "auto"
    folds: int = 10
    rbf_conventional: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusSource = field(default_factory=CorpusSource)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(8, 2))
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    frontends: tuple[FrontendSpec, ...] = (FrontendSpec("mfcc"),)
    gmm: TrainConfig = field(default_factory=TrainConfig)
    svm: SvmSection = field(default_factory=SvmSection)
    seed: int = 42

    def __post_init__(self):
        if not self.frontends:
            raise ConfigError("at least one frontend required")
        if not self.svm.kernels:
            raise ConfigError("at least one kernel required")


def _parse_sections(text: str):
    """Raw parse into ({section: {key: value}}, [frontend dicts])."""
    sections: dict[str, dict[str, str]] = {}
    frontends: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[[") and line.endswith("]]"):
            name = line[2:-2].strip()
            if name != "frontend":
                raise ConfigError(f"line {lineno}: unknown section [[{name}]]")
            current = {}
            frontends.append(current)
        elif line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            current = {}
            sections[name] = current
        elif "=" in line:
            if current is None:
                raise ConfigError(f"line {lineno}: key outside any section")
            key, value = line.split("=", 1)
            current[key.strip()] = value.strip()
        else:
            raise ConfigError(f"line {lineno}: expected key = value")
    return sections, frontends


def _get(section: dict, key: str, cast, default):
    if key not in section:
        return default
    try:
        return cast(section[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {section[key]!r}") from exc


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(text)


def parse_config(text: str) -> ExperimentConfig:
    sections, frontend_dicts = _parse_sections(text)

    cor = sections.get("corpus", {})
    corpus = CorpusSource(
        path=cor.get("path"),
        n_speakers=_get(cor, "speakers", int, 14),
        n_utterances=_get(cor, "utterances", int, 10),
        duration_s=_get(cor, "duration_s", float, 2.0),
        sample_rate=_get(cor, "sample_rate", int, 16000),
    )

    spl = sections.get("split", {})
    split = SplitSpec(_get(spl, "n_train", int, 8), _get(spl, "n_test", int, 2))

    pre = sections.get("preprocess", {})
    preprocess = PreprocessConfig(
        pre_emphasis_alpha=_get(pre, "pre_emphasis_alpha", float, 0.95),
        frame_len_ms=_get(pre, "frame_ms", float, 16.0),
        frame_shift_ms=_get(pre, "shift_ms", float, 8.0),
        window_a=_get(pre, "window_a", float, 0.46),
        vad=VadConfig(
            relative_floor_db=_get(pre, "vad_floor_db", float, 30.0),
            min_speech_frames=_get(pre, "vad_min_speech", int, 5),
            min_silence_frames=_get(pre, "vad_min_silence", int, 10),
        ),
        allow_alpha_override=_get(pre, "allow_alpha_override", _bool, False),
    )

    g = sections.get("gmm", {})
    gmm = TrainConfig(
        n_components=_get(g, "mixtures", int, 128),
        max_iters=_get(g, "max_iters", int, 50),
        rel_tol=_get(g, "rel_tol", float, 1e-5),
        variance_floor_factor=_get(g, "variance_floor", float, 1e-3),
        relevance=_get(g, "relevance", float, 16.0),
    )

    s = sections.get("svm", {})
    sigma_raw = s.get("sigma_grid", "auto")
    svm = SvmSection(
        kernels=tuple(k.strip() for k in s.get("kernels", "linear,rbf").split(",")
                      if k.strip()),
        c_values=_get(s, "c_grid", _floats, (0.1, 1.0, 10.0, 100.0)),
        sigma_values="auto" if sigma_raw == "auto" else _floats(sigma_raw),
        folds=_get(s, "folds", int, 10),
        rbf_conventional=_get(s, "rbf_conventional", _bool, False),
    )
    for kernel in svm.kernels:
        if kernel not in ("linear", "rbf"):
            raise ConfigError(f"unknown kernel {kernel!r}")

    exp = sections.get("experiment", {})
    seed = _get(exp, "seed", int, 42)

    if frontend_dicts:
        frontends = []
        for fd in frontend_dicts:
            if "spec" not in fd:
                raise ConfigError("[[frontend]] section needs a spec key")
            frontends.append(FrontendSpec.parse(fd["spec"]))
        frontends = tuple(frontends)
    else:
        frontends = (FrontendSpec("mfcc"),)

    return ExperimentConfig(corpus, split, preprocess, frontends, gmm, svm, seed)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
