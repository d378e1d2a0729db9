"""Binary model/feature file formats (all little-endian).

SVFT  feature matrix: T x D float32, row-major, with a provenance string
SVGM  GMM: weights, means, diagonal variances as float64
SVSV  supervector: float64 values plus a scaling tag
SVSM  one-vs-one SVM ensemble
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IoError
from .features import FeatureMatrix
from .gmm import GmmModel, Supervector
from .svm import KernelSpec, MulticlassSvm, SvmModel

_FEATURE_MAGIC = b"SVFT"
_GMM_MAGIC = b"SVGM"
_SUPERVECTOR_MAGIC = b"SVSV"
_SVM_MAGIC = b"SVSM"
_VERSION = 1

_SCALING_TAGS = {"plain": 0, "kl": 1}
_KERNEL_TAGS = {"linear": 0, "rbf": 1}


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IoError(f"{self.path}: truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, count: int, dtype: str) -> np.ndarray:
        raw = self.take(count * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=dtype).copy()

    def expect_magic(self, magic: bytes):
        if self.take(4) != magic:
            raise IoError(f"{self.path}: bad magic, expected {magic!r}")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_str(r: _Reader) -> str:
    (n,) = r.unpack("<I")
    return r.take(n).decode("utf-8")


# -- features ------------------------------------------------------------------

def write_features(path, f: FeatureMatrix) -> None:
    t, d = f.values.shape
    header = f"{f.frontend};shift_ms={f.frame_shift_ms:g}"
    blob = (_FEATURE_MAGIC + struct.pack("<III", _VERSION, t, d)
            + _pack_str(header)
            + f.values.astype("<f4").tobytes())
    Path(path).write_bytes(blob)


def read_features(path) -> FeatureMatrix:
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(_FEATURE_MAGIC)
    _, t, d = r.unpack("<III")
    header = _read_str(r)
    values = r.array(t * d, "<f4").astype(np.float64).reshape(t, d)
    frontend, shift = header, 8.0
    if ";shift_ms=" in header:
        frontend, tail = header.rsplit(";shift_ms=", 1)
        shift = float(tail)
    return FeatureMatrix(values, frontend, shift)


# -- GMM -------------------------------------------------------------------------

def write_gmm(path, model: GmmModel) -> None:
    k, d = model.means.shape
    blob = (_GMM_MAGIC + struct.pack("<III", _VERSION, k, d)
            + model.weights.astype("<f8").tobytes()
            + model.means.astype("<f8").tobytes()
            + model.variances.astype("<f8").tobytes())
    Path(path).write_bytes(blob)


def read_gmm(path) -> GmmModel:
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(_GMM_MAGIC)
    _, k, d = r.unpack("<III")
    weights = r.array(k, "<f8")
    means = r.array(k * d, "<f8").reshape(k, d)
    variances = r.array(k * d, "<f8").reshape(k, d)
    return GmmModel(weights, means, variances)


# -- supervectors ------------------------------------------------------------------

def write_supervector(path, sv: Supervector) -> None:
    blob = (_SUPERVECTOR_MAGIC
            + struct.pack("<IB", sv.values.size, _SCALING_TAGS[sv.scaling])
            + sv.values.astype("<f8").tobytes())
    Path(path).write_bytes(blob)


def read_supervector(path) -> Supervector:
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(_SUPERVECTOR_MAGIC)
    n, tag = r.unpack("<IB")
    scaling = {v: k for k, v in _SCALING_TAGS.items()}.get(tag)
    if scaling is None:
        raise IoError(f"{path}: unknown scaling tag {tag}")
    return Supervector(r.array(n, "<f8"), scaling=scaling)


# -- SVM ---------------------------------------------------------------------------

def write_svm(path, model: MulticlassSvm) -> None:
    dim = next(iter(model.models.values())).dim
    blob = [
        _SVM_MAGIC,
        struct.pack("<IBB", _VERSION, _KERNEL_TAGS[model.kernel.kind],
                    int(model.kernel.conventional)),
        struct.pack("<dd", model.kernel.sigma, model.c),
        struct.pack("<II", len(model.classes), dim),
    ]
    for cls in model.classes:
        blob.append(_pack_str(cls))
    if model.standardize is None:
        blob.append(struct.pack("<B", 0))
    else:
        blob.append(struct.pack("<B", 1))
        blob.append(model.standardize[0].astype("<f8").tobytes())
        blob.append(model.standardize[1].astype("<f8").tobytes())
    for i in range(len(model.classes)):
        for j in range(i + 1, len(model.classes)):
            m = model.models[(i, j)]
            blob.append(struct.pack("<I", m.support_vectors.shape[0]))
            blob.append(m.support_vectors.astype("<f8").tobytes())
            blob.append(m.dual_coefs.astype("<f8").tobytes())
            blob.append(struct.pack("<dB", m.bias, int(m.converged)))
    Path(path).write_bytes(b"".join(blob))


def read_svm(path) -> MulticlassSvm:
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(_SVM_MAGIC)
    _, kernel_tag, conventional = r.unpack("<IBB")
    sigma, c = r.unpack("<dd")
    n_classes, dim = r.unpack("<II")
    kind = {v: k for k, v in _KERNEL_TAGS.items()}.get(kernel_tag)
    if kind is None:
        raise IoError(f"{path}: unknown kernel tag {kernel_tag}")
    kernel = KernelSpec(kind, sigma if kind == "rbf" else 1.0, bool(conventional))
    classes = tuple(_read_str(r) for _ in range(n_classes))
    (std_flag,) = r.unpack("<B")
    standardize = None
    if std_flag:
        mean = r.array(dim, "<f8")
        scale = r.array(dim, "<f8")
        standardize = (mean, scale)
    models = {}
    for i in range(n_classes):
        for j in range(i + 1, n_classes):
            (n_sv,) = r.unpack("<I")
            sv = r.array(n_sv * dim, "<f8").reshape(n_sv, dim)
            coefs = r.array(n_sv, "<f8")
            bias, converged = r.unpack("<dB")
            models[(i, j)] = SvmModel(sv, coefs, bias, kernel, c, bool(converged))
    return MulticlassSvm(classes, models, kernel, c, standardize)
