"""Command-line surface for the full pipeline.

Exit codes: 0 success, 1 usage error, 2 partial sweep failure,
3 I/O or file-format error. SVID_LOG={error,info,debug} sets verbosity.
All randomness flows from --seed; identical argv + inputs give identical
outputs for any --jobs.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dsp, fileio, gmm, svm
from .config import load_config
from .errors import ConfigError, IoError, SvidError
from .features import FrontendSpec, assemble_frontend
from .harness import emit_table, format_rows_csv, run_sweep

log = logging.getLogger("svid")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _preprocess_from_args(args) -> dsp.PreprocessConfig:
    return dsp.PreprocessConfig(
        pre_emphasis_alpha=args.alpha,
        frame_len_ms=args.frame_ms,
        frame_shift_ms=args.shift_ms,
        window_a=args.window_a,
        vad=dsp.VadConfig(args.vad_floor_db, args.vad_min_speech,
                          args.vad_min_silence),
        allow_alpha_override=args.allow_alpha_override,
    )


def _add_preprocess_flags(parser):
    parser.add_argument("--alpha", type=float, default=0.95)
    parser.add_argument("--frame-ms", type=float, default=16.0)
    parser.add_argument("--shift-ms", type=float, default=8.0)
    parser.add_argument("--window-a", type=float, default=0.46)
    parser.add_argument("--vad-floor-db", type=float, default=30.0)
    parser.add_argument("--vad-min-speech", type=int, default=5)
    parser.add_argument("--vad-min-silence", type=int, default=10)
    parser.add_argument("--allow-alpha-override", action="store_true")


def _iter_tree(root: Path, suffix: str):
    for spk_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(spk_dir.glob(f"*{suffix}")):
            yield spk_dir.name, f


def _cmd_synth(args) -> int:
    built = corpus_mod.synthesize_corpus(args.seed, args.speakers,
                                         args.utterances, args.duration,
                                         args.rate)
    corpus_mod.save_corpus(built, args.out)
    log.info("wrote %d utterances under %s", len(built), args.out)
    return EXIT_OK


def _cmd_extract(args) -> int:
    frontend = assemble_frontend(FrontendSpec.parse(args.frontend))
    pre = _preprocess_from_args(args)
    out_root = Path(args.out)
    count = 0
    for speaker, wav in _iter_tree(Path(args.in_dir), ".wav"):
        waveform = corpus_mod.read_wav(wav)
        feats = frontend.extract(waveform, pre)
        dest = out_root / speaker
        dest.mkdir(parents=True, exist_ok=True)
        fileio.write_features(dest / f"{wav.stem}.svft", feats)
        count += 1
    if count == 0:
        raise IoError(f"no wav files under {args.in_dir}")
    log.info("extracted %d feature files to %s", count, args.out)
    return EXIT_OK


def _load_feature_tree(root: Path):
    items = [(speaker, path, fileio.read_features(path))
             for speaker, path in _iter_tree(root, ".svft")]
    if not items:
        raise IoError(f"no feature files under {root}")
    return items


def _cmd_train_ubm(args) -> int:
    items = _load_feature_tree(Path(args.in_dir))
    pooled = np.vstack([f.values for _, _, f in items])
    cfg = gmm.TrainConfig(n_components=args.mixtures, max_iters=args.max_iters,
                          rel_tol=args.rel_tol, seed=args.seed)
    model, trace = gmm.em_train_ubm(pooled, cfg)
    fileio.write_gmm(args.out, model)
    log.info("UBM K=%d trained in %d EM iterations (ll %.4f -> %.4f)",
             args.mixtures, len(trace) - 1, trace[0], trace[-1])
    return EXIT_OK


def _cmd_adapt(args) -> int:
    ubm = fileio.read_gmm(args.ubm)
    out_root = Path(args.out)
    for speaker, path, feats in _load_feature_tree(Path(args.in_dir)):
        adapted = gmm.map_adapt_means(ubm, feats.values, args.relevance)
        sv = gmm.supervector(adapted, ubm, args.scaling, (str(args.ubm), path.stem))
        dest = out_root / speaker
        dest.mkdir(parents=True, exist_ok=True)
        fileio.write_supervector(dest / f"{path.stem}.svsv", sv)
    log.info("supervectors written to %s", args.out)
    return EXIT_OK


def _parse_grid(text: str):
    """``C=0.1,1,10,100;sigma=auto`` -> (c_values, sigma_values)."""
    c_values: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    sigma_values: tuple[float, ...] | str = "auto"
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad grid fragment {part!r}")
        key, value = part.split("=", 1)
        key = key.strip().lower()
        if key == "c":
            c_values = tuple(float(v) for v in value.split(",") if v.strip())
        elif key == "sigma":
            value = value.strip()
            sigma_values = ("auto" if value == "auto" else
                            tuple(float(v) for v in value.split(",") if v.strip()))
        else:
            raise ConfigError(f"unknown grid key {key!r}")
    return c_values, sigma_values


def _load_supervector_tree(root: Path):
    vecs, labels = [], []
    for speaker, path in _iter_tree(root, ".svsv"):
        vecs.append(fileio.read_supervector(path).values)
        labels.append(speaker)
    if not vecs:
        raise IoError(f"no supervector files under {root}")
    return np.vstack(vecs), labels


def _cmd_train_svm(args) -> int:
    x, labels = _load_supervector_tree(Path(args.in_dir))
    c_values, sigma_values = _parse_grid(args.grid)
    grid = svm.CvGrid(c_values, sigma_values, args.cv, args.seed)
    best_c, best_sigma, fold_accs = svm.cross_validate(
        x, labels, grid, args.kernel, args.rbf_conventional)
    kernel = (svm.KernelSpec("rbf", best_sigma, args.rbf_conventional)
              if args.kernel == "rbf" else svm.KernelSpec("linear"))
    model = svm.train_multiclass(x, labels, kernel, best_c)
    fileio.write_svm(args.out, model)
    log.info("chose C=%g sigma=%s (cv accuracy %.3f); model at %s",
             best_c, f"{best_sigma:g}" if best_sigma else "-",
             float(np.mean(fold_accs)), args.out)
    return EXIT_OK


def _cmd_identify(args) -> int:
    model = fileio.read_svm(args.model)
    sv = fileio.read_supervector(args.in_file)
    print(model.predict(sv.values))
    return EXIT_OK


def default_config_path():
    return resources.files("svid").joinpath("data/default.cfg")


def _cmd_evaluate(args) -> int:
    if args.config is None or args.config == "default":
        cfg = load_config(default_config_path())
    else:
        cfg = load_config(args.config)
    rows, errors = run_sweep(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if rows:
        out.write_text(format_rows_csv(rows))
        log.info("results written to %s", out)
        if args.markdown:
            emit_table(rows, args.markdown, "markdown")
        if not args.no_figures:
            from .plots import plot_identification_rates
            figure_path = out.with_suffix(".png")
            plot_identification_rates(rows, figure_path)
            log.info("figure written to %s", figure_path)
    for row in rows:
        print(f"{row.feature:<28s} dim={row.dim:<3d} {row.kernel:<6s} "
              f"IR={row.ir:.2f}% ({row.n_correct}/{row.n_trials})")
    if errors:
        sidecar = out.with_suffix(out.suffix + ".errors")
        sidecar.write_text("".join(f"{e.frontend}\t{e.stage}\t{e.cause}\n"
                                   for e in errors))
        for e in errors:
            log.error("%s", e)
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="svid", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the deterministic synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--speakers", type=int, default=14)
    p.add_argument("--utterances", type=int, default=10)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--rate", type=int, default=16000)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="extract features from a corpus tree")
    p.add_argument("--frontend", required=True,
                   help="front-end spec, e.g. mfcc,d2,e,cms")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    _add_preprocess_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train-ubm", help="train the universal background model")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mixtures", type=int, default=128)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_train_ubm)

    p = sub.add_parser("adapt", help="MAP-adapt per utterance and emit supervectors")
    p.add_argument("--ubm", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--relevance", type=float, default=16.0)
    p.add_argument("--scaling", choices=("plain", "kl"), default="plain")
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("train-svm", help="cross-validate and train the classifier")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--cv", type=int, default=10)
    p.add_argument("--grid", default="C=0.1,1,10,100;sigma=auto")
    p.add_argument("--rbf-conventional", action="store_true",
                   help="use the 2*sigma^2 RBF divisor instead of 2*sigma")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_train_svm)

    p = sub.add_parser("identify", help="classify one supervector")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_file", required=True)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("evaluate", help="run the full front-end x kernel sweep")
    p.add_argument("--config", default=None,
                   help="experiment config file (default: bundled)")
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--markdown", default=None, help="also write a markdown table")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the IR figure next to the CSV")
    p.set_defaults(func=_cmd_evaluate)
    return parser


def _setup_logging():
    level = os.environ.get("SVID_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def run_cli(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (IoError, OSError) as exc:
        sys.stderr.write(f"svid: {exc}\n")
        return EXIT_IO
    except SvidError as exc:
        sys.stderr.write(f"svid: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
