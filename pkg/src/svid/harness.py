"""End-to-end evaluation: identification rate, front-end x kernel sweeps,
and result tables."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dsp, gmm, svm
from .config import ExperimentConfig
from .errors import Empty, EmptyRows, IoError, LengthMismatch, SvidError
from .features import Frontend, FrontendSpec, assemble_frontend

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResultRow:
    feature: str
    dim: int
    kernel: str
    c: float
    sigma: float | None
    ir: float          # percent, rounded half away from zero to 2 decimals
    n_correct: int
    n_trials: int


class ExperimentError(SvidError):
    """Failure inside the sweep, tagged with (frontend, stage)."""

    def __init__(self, frontend: str, stage: str, cause: str):
        super().__init__(f"frontend {frontend!r} failed at {stage}: {cause}")
        self.frontend = frontend
        self.stage = stage
        self.cause = cause

    def __reduce__(self):
        return (ExperimentError, (self.frontend, self.stage, self.cause))


def identification_rate(predictions, truth) -> tuple[float, int, int]:
    """Percent of correct assignments, rounded half away from zero to two
    decimals; also returns the raw (n_correct, n_trials) counts."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truth)} labels")
    if not predictions:
        raise Empty("no trials")
    n_correct = sum(p == t for p, t in zip(predictions, truth))
    ir = (Decimal(100 * n_correct) / Decimal(len(truth))).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(ir), n_correct, len(truth)


def _load_corpus(cfg: ExperimentConfig) -> corpus_mod.Corpus:
    src = cfg.corpus
    if src.path is not None:
        return corpus_mod.load_corpus(src.path)
    return corpus_mod.synthesize_corpus(cfg.seed, src.n_speakers, src.n_utterances,
                                        src.duration_s, src.sample_rate)


def _extract_all(frontend: Frontend, split: corpus_mod.Corpus,
                 pre: dsp.PreprocessConfig):
    feats = []
    for utt in split.utterances:
        f = frontend.extract(utt.waveform, pre)
        feats.append((utt.speaker_id, utt.utterance_id, f))
    return feats


def run_frontend(cfg: ExperimentConfig, index: int) -> list[ResultRow]:
    """Full pipeline for one frontend; one ResultRow per configured kernel."""
    spec = cfg.frontends[index]

    def stage(name):
        return _Stage(spec.label, name)

    with stage("config"):
        frontend = assemble_frontend(spec)
    label = frontend.label

    with stage("corpus"):
        full = _load_corpus(cfg)
        train, test = corpus_mod.split_train_test(full, cfg.split, cfg.seed + 1)
    with stage("extract"):
        train_feats = _extract_all(frontend, train, cfg.preprocess)
        test_feats = _extract_all(frontend, test, cfg.preprocess)
    with stage("train-ubm"):
        pooled = np.vstack([f.values for _, _, f in train_feats])
        gmm_cfg = gmm.TrainConfig(
            n_components=cfg.gmm.n_components, max_iters=cfg.gmm.max_iters,
            rel_tol=cfg.gmm.rel_tol,
            variance_floor_factor=cfg.gmm.variance_floor_factor,
            seed=cfg.seed + 2, relevance=cfg.gmm.relevance)
        ubm, _ = gmm.em_train_ubm(pooled, gmm_cfg)
    with stage("adapt"):
        def supervectors(feats):
            vecs, labels = [], []
            for speaker, utt_id, f in feats:
                adapted = gmm.map_adapt_means(ubm, f.values, cfg.gmm.relevance)
                vecs.append(gmm.supervector(adapted, ubm, "plain",
                                            ("ubm", utt_id)).values)
                labels.append(speaker)
            return np.vstack(vecs), labels
        x_train, y_train = supervectors(train_feats)
        x_test, y_test = supervectors(test_feats)

    rows = []
    for kernel_kind in cfg.svm.kernels:
        with stage(f"svm-{kernel_kind}"):
            grid = svm.CvGrid(cfg.svm.c_values, cfg.svm.sigma_values,
                              cfg.svm.folds, cfg.seed + 3)
            best_c, best_sigma, _ = svm.cross_validate(
                x_train, y_train, grid, kernel_kind, cfg.svm.rbf_conventional)
            kernel = (svm.KernelSpec("rbf", best_sigma, cfg.svm.rbf_conventional)
                      if kernel_kind == "rbf" else svm.KernelSpec("linear"))
            model = svm.train_multiclass(x_train, y_train, kernel, best_c)
            predictions = [model.predict(xi) for xi in x_test]
            ir, n_correct, n_trials = identification_rate(predictions, y_test)
        rows.append(ResultRow(label, spec.dimension, kernel_kind,
                              best_c, best_sigma, ir, n_correct, n_trials))
    return rows


class _Stage:
    """Tags exceptions raised within a pipeline stage."""

    def __init__(self, frontend: str, name: str):
        self.frontend = frontend
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, ExperimentError):
            cause = f"{type(exc).__name__}: {exc}"
            raise ExperimentError(self.frontend, self.name, cause) from exc
        return False


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[ResultRow]:
    """Run the full sweep; rows come back in config order regardless of the
    worker count, so output is byte-identical for any ``jobs``."""
    rows, errors = run_sweep(cfg, jobs=jobs)
    if errors:
        raise errors[0]
    return rows


def run_sweep(cfg: ExperimentConfig,
              jobs: int = 1) -> tuple[list[ResultRow], list[ExperimentError]]:
    """Like :func:`run_experiment` but collects per-frontend failures."""
    indices = range(len(cfg.frontends))
    results: list[list[ResultRow] | ExperimentError] = []
    if jobs <= 1:
        for i in indices:
            try:
                results.append(run_frontend(cfg, i))
            except ExperimentError as exc:
                results.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_frontend, cfg, i) for i in indices]
            for future in futures:
                try:
                    results.append(future.result())
                except ExperimentError as exc:
                    results.append(exc)
    rows: list[ResultRow] = []
    errors: list[ExperimentError] = []
    for item in results:
        if isinstance(item, ExperimentError):
            errors.append(item)
        else:
            rows.extend(item)
    return rows, errors


# -- tables ----------------------------------------------------------------------

_CSV_COLUMNS = ("feature", "dim", "kernel", "C", "sigma", "ir", "correct", "trials")


def format_rows_csv(rows: list[ResultRow]) -> str:
    if not rows:
        raise EmptyRows("no result rows")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            r.feature, r.dim, r.kernel, f"{r.c:g}",
            "" if r.sigma is None else f"{r.sigma:g}",
            f"{r.ir:.2f}", r.n_correct, r.n_trials,
        ])
    return buf.getvalue()


def format_rows_markdown(rows: list[ResultRow]) -> str:
    """Paper-style layout: one line per feature with per-kernel IR columns."""
    if not rows:
        raise EmptyRows("no result rows")
    kernels = list(dict.fromkeys(r.kernel for r in rows))
    by_feature: dict[str, dict] = {}
    for r in rows:
        entry = by_feature.setdefault(r.feature, {"dim": r.dim})
        entry[r.kernel] = r.ir
    header = "| Feature Type | Number | " + " | ".join(
        f"IR {k} (%)" for k in kernels) + " |"
    sep = "|" + "---|" * (2 + len(kernels))
    lines = [header, sep]
    for feature, entry in by_feature.items():
        cells = [feature, str(entry["dim"])]
        cells += [f"{entry[k]:.2f}" if k in entry else "-" for k in kernels]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_table(rows: list[ResultRow], path, format: str = "csv") -> None:
    if format == "csv":
        text = format_rows_csv(rows)
    elif format == "markdown":
        text = format_rows_markdown(rows)
    else:
        raise IoError(f"unknown table format {format!r}")
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
