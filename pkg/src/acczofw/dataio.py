"""Dataset ingestion (LIBSVM text), synthetic data, splits and trace CSVs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .core import SeededRng
from .solvers import RunTrace, TraceRecord

TRACE_HEADER = ["t", "loss", "gap", "queries", "diag_queries", "dist_z_step", "dist_xz"]


class DataError(ValueError):
    """Malformed or unsupported input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DataError("features must be (n, d) with one label per row")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features must be finite")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, rows, name: str | None = None) -> Dataset:
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.labels[rows], name or self.name)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_libsvm(source, n_features: int | None = None, name: str = "libsvm") -> Dataset:
    """Parse two-class LIBSVM text (``str``, ``bytes`` or a readable stream).

    Feature indices are 1-based and must strictly increase within a line.
    Two distinct raw labels map to -1 (numerically smaller) and +1; a single
    raw label maps by its sign. ``n_features`` fixes ``d`` (otherwise the
    largest index seen).
    """
    raw_labels: list[float] = []
    rows: list[tuple[list[int], list[float]]] = []
    max_index = 0
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataError(f"line {lineno}: bad label {tokens[0]!r}") from None
        if not math.isfinite(label):
            raise DataError(f"line {lineno}: non-finite label")
        cols, vals = [], []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataError(f"line {lineno}: bad feature token {tok!r}") from None
            if idx < 1:
                raise DataError(f"line {lineno}: feature index must be >= 1")
            if idx <= prev:
                raise DataError(f"line {lineno}: feature indices must be ascending")
            if not math.isfinite(val):
                raise DataError(f"line {lineno}: non-finite feature value")
            prev = idx
            cols.append(idx - 1)
            vals.append(val)
        max_index = max(max_index, prev)
        raw_labels.append(label)
        rows.append((cols, vals))

    distinct = sorted(set(raw_labels))
    if len(distinct) > 2:
        raise DataError(f"expected two classes, found {len(distinct)}: {distinct[:5]}")
    if len(distinct) == 2:
        lo, hi = distinct
        mapping = {lo: -1.0, hi: 1.0}
        name = f"{name}[{lo:g}->-1,{hi:g}->+1]"
    else:
        mapping = {lab: (1.0 if lab > 0 else -1.0) for lab in distinct}

    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DataError(f"feature index {max_index} exceeds n_features={d}")
    X = np.zeros((len(rows), d))
    for r, (cols, vals) in enumerate(rows):
        X[r, cols] = vals
    y = np.array([mapping[lab] for lab in raw_labels], dtype=np.float64)
    return Dataset(X, y, name)


def serialize_libsvm(ds: Dataset) -> str:
    """Canonical LIBSVM text: ascending indices, zeros omitted, exact floats."""
    out = io.StringIO()
    for row, lab in zip(ds.features, ds.labels):
        nz = np.flatnonzero(row)
        parts = ["+1" if lab > 0 else "-1"]
        parts.extend(f"{k + 1}:{float(row[k])!r}" for k in nz)
        out.write(" ".join(parts) + "\n")
    return out.getvalue()


def load_libsvm(path: str | PathLike, n_features: int | None = None) -> Dataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh, n_features, name=str(path))


def synthesize_classification(n: int, d: int, noise: float, rng: SeededRng) -> Dataset:
    """Gaussian features labelled by a random hyperplane through the origin.

    Each label is flipped independently with probability ``noise``. The
    ground-truth unit normal and the flip mask are kept in ``meta``.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    X = rng.standard_normal((n, d))
    clean = np.where(X @ w >= 0.0, 1.0, -1.0)
    flipped = rng.gen.random(n) < noise
    y = np.where(flipped, -clean, clean)
    return Dataset(X, y, f"synthetic-n{n}-d{d}-noise{noise:g}",
                   meta={"w": w, "flipped": flipped, "clean_labels": clean})


def split(ds: Dataset, train_fraction: float, rng: SeededRng) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``floor(n * train_fraction)`` rows train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    perm = rng.gen.permutation(ds.n)
    k = int(math.floor(ds.n * train_fraction))
    return ds.take(perm[:k], ds.name + ":train"), ds.take(perm[k:], ds.name + ":test")


def load_images(path: str | PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Rows of ``label p_1 ... p_d`` (0-based class, pixels in [0, 1])."""
    try:
        M = np.loadtxt(path, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if M.shape[1] < 2:
        raise DataError(f"{path}: need a label column and at least one pixel")
    labels = M[:, 0]
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        raise DataError(f"{path}: labels must be non-negative integers")
    return M[:, 1:], labels.astype(np.intp)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_trace_csv(trace: RunTrace, sink) -> None:
    """Write ``trace`` as CSV to a path, a text stream or a binary stream."""
    if isinstance(sink, (str, PathLike)):
        with open(sink, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        return
    text = io.StringIO()
    writer = csv.writer(text, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in trace.records:
        writer.writerow([_fmt(r.t), _fmt(r.loss), _fmt(r.gap), _fmt(r.queries),
                         _fmt(r.diag_queries), _fmt(r.dist_z_step), _fmt(r.dist_xz)])
    data = text.getvalue()
    if isinstance(sink, io.TextIOBase):
        sink.write(data)
    else:
        sink.write(data.encode("utf-8"))


def read_trace_csv(source, solver: str = "") -> RunTrace:
    """Inverse of :func:`write_trace_csv`."""
    if isinstance(source, (str, PathLike)):
        with open(source, newline="") as fh:
            return read_trace_csv(fh, solver)
    reader = csv.reader(io.StringIO(_read_text(source)))
    header = next(reader, None)
    if header != TRACE_HEADER:
        raise DataError(f"unexpected trace header {header}")

    def opt(s):
        return None if s == "" else float(s)

    trace = RunTrace(solver=solver)
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(TRACE_HEADER):
            raise DataError(f"trace line {lineno}: expected {len(TRACE_HEADER)} fields")
        try:
            trace.records.append(TraceRecord(
                t=int(row[0]), loss=opt(row[1]), gap=opt(row[2]), queries=int(row[3]),
                diag_queries=int(row[4]), dist_z_step=float(row[5]), dist_xz=float(row[6]),
            ))
        except ValueError as exc:
            raise DataError(f"trace line {lineno}: {exc}") from None
    if trace.records:
        trace.total_queries = trace.records[-1].queries
        trace.total_diag_queries = trace.records[-1].diag_queries
        trace.final_loss = trace.records[-1].loss
    return trace
