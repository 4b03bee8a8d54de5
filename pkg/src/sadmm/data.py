"""Dataset and file handling: LIBSVM parsing, splits, graph construction, CSV.

File formats (all UTF-8, LF line endings):
  * LIBSVM text: one example per line, "label idx:val idx:val ..." with
    1-based strictly ascending indices. Labels: any positive value maps to +1,
    0 and -1 map to -1, other values are rejected; sources with more than two
    distinct raw labels are rejected.
  * Edge list: one edge per line, "i j alpha" with 0-based i < j and real
    nonzero alpha; duplicate pairs rejected.
  * Metrics CSV: fixed header, shortest round-trip decimal for floats.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields
from typing import Iterable, TextIO

import numpy as np

from .problem import Dataset, GraphIncidence, Sample, SparseVector
from .rng import XorShift64Star

METRICS_HEADER = (
    "iter,epoch,objective_avg,objective_last,test_error_avg,test_error_last,"
    "feasibility_avg,wall_time_s"
)


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


@dataclass
class MetricsRecord:
    """One logged evaluation row; field order matches the CSV header."""

    iter: int
    epoch: float
    objective_avg: float
    objective_last: float
    test_error_avg: float
    test_error_last: float
    feasibility_avg: float
    wall_time_s: float


def _as_stream(source: str | TextIO | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_libsvm(
    source: str | TextIO | Iterable[str], expected_dim: int | None = None
) -> Dataset:
    """Parse LIBSVM-format text into a Dataset.

    The dimension is the largest feature index seen, or expected_dim if that
    is larger. Explicit zero values are dropped (sparse rows store nonzeros
    only); blank lines are skipped.
    """
    rows: list[tuple[int, list[int], list[float]]] = []
    raw_labels: set[float] = set()
    max_index = 0
    for ln, line in enumerate(_as_stream(source), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw = float(tokens[0])
        except ValueError:
            raise ParseError(f"line {ln}: non-numeric label {tokens[0]!r}") from None
        if raw > 0.0:
            label = 1
        elif raw == 0.0 or raw == -1.0:
            label = -1
        else:
            raise ParseError(f"line {ln}: unsupported label {tokens[0]!r}")
        raw_labels.add(raw)
        if len(raw_labels) > 2:
            raise ParseError(
                f"line {ln}: more than two distinct labels seen ({sorted(raw_labels)}); "
                "binary data required"
            )
        idxs: list[int] = []
        vals: list[float] = []
        prev = 0
        for tok in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(f"line {ln}: expected idx:val, got {tok!r}")
            try:
                idx = int(head)
                val = float(tail)
            except ValueError:
                raise ParseError(f"line {ln}: non-numeric token {tok!r}") from None
            if idx < 1:
                raise ParseError(f"line {ln}: index {idx} < 1")
            if idx <= prev:
                raise ParseError(f"line {ln}: index {idx} not ascending")
            prev = idx
            if not math.isfinite(val):
                raise ParseError(f"line {ln}: non-finite value in {tok!r}")
            if val != 0.0:
                idxs.append(idx - 1)
                vals.append(val)
            max_index = max(max_index, idx)
        rows.append((label, idxs, vals))
    if not rows:
        raise ParseError("no examples found")
    dim = max(max_index, expected_dim or 0)
    samples = [
        Sample(SparseVector(np.array(ix, dtype=np.int64), np.array(vv), dim), y)
        for y, ix, vv in rows
    ]
    return Dataset(samples, dim)


def load_libsvm(path: str, expected_dim: int | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return parse_libsvm(fh, expected_dim)
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None


def serialize_libsvm(data: Dataset, stream: TextIO) -> None:
    """Inverse of parse_libsvm up to float formatting (repr round-trips)."""
    for s in data.samples:
        parts = ["+1" if s.y == 1 else "-1"]
        parts.extend(
            f"{int(i) + 1}:{float(v)!r}" for i, v in zip(s.x.indices, s.x.values)
        )
        stream.write(" ".join(parts) + "\n")


def save_libsvm(data: Dataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        serialize_libsvm(data, fh)


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle, then a floor(train_fraction * n) split."""
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train fraction must be in (0, 1)")
    order = list(range(len(data)))
    XorShift64Star(seed).shuffle(order)
    n_train = int(math.floor(train_fraction * len(data)))
    if n_train == 0 or n_train == len(data):
        raise ValueError(
            f"split of {len(data)} samples at fraction {train_fraction} leaves one side empty"
        )
    train = [data.samples[i] for i in order[:n_train]]
    test = [data.samples[i] for i in order[n_train:]]
    return Dataset(train, data.dim), Dataset(test, data.dim)


def normalize_max_abs(
    train: Dataset, others: tuple[Dataset, ...] = ()
) -> tuple[Dataset, ...]:
    """Per-feature max-abs scaling fitted on train, applied to all datasets.

    Features absent from the training set are left untouched.
    """
    scale = np.zeros(train.dim)
    for s in train.samples:
        np.maximum.at(scale, s.x.indices, np.abs(s.x.values))
    scale[scale == 0.0] = 1.0

    def rescale(ds: Dataset) -> Dataset:
        out = []
        for s in ds.samples:
            vals = s.x.values / scale[s.x.indices]
            keep = vals != 0.0
            out.append(
                Sample(SparseVector(s.x.indices[keep], vals[keep], ds.dim), s.y)
            )
        return Dataset(out, ds.dim)

    return tuple(rescale(ds) for ds in (train, *others))


def feature_covariance(data: Dataset) -> np.ndarray:
    """Empirical covariance (1/n normalization) of the feature vectors."""
    d = data.dim
    mean = np.zeros(d)
    second = np.zeros((d, d))
    for s in data.samples:
        idx, val = s.x.indices, s.x.values
        if idx.size:
            np.add.at(mean, idx, val)
            second[np.ix_(idx, idx)] += np.outer(val, val)
    n = len(data)
    mean /= n
    return second / n - np.outer(mean, mean)


def build_graph_precision(
    data: Dataset,
    shrinkage: float | None = None,
    threshold: float | None = None,
    max_edges: int | None = None,
) -> GraphIncidence:
    """Connect feature pairs with large entries in a shrunk precision matrix.

    The covariance gets shrinkage * I added (default 0.1 x mean diagonal)
    before inversion; pairs (i, j) with |P_ij| above the threshold become
    edges with weight 1. When no threshold is given, it is set so at most
    max_edges (default 4 * dim) edges survive; an explicit threshold is still
    capped at max_edges by magnitude. Deterministic: ties break on (i, j).
    """
    d = data.dim
    if d < 2:
        raise ValueError("graph construction needs at least 2 features")
    cov = feature_covariance(data)
    mean_diag = float(np.mean(np.diag(cov)))
    if shrinkage is None:
        shrinkage = 0.1 * mean_diag
    if shrinkage <= 0.0:
        raise ValueError(
            "covariance diagonal is zero (constant features?); pass an explicit shrinkage > 0"
        )
    try:
        precision = np.linalg.inv(cov + shrinkage * np.eye(d))
    except np.linalg.LinAlgError:
        raise ValueError(
            f"shrunk covariance is singular; increase shrinkage (used {shrinkage:.3e})"
        ) from None
    if max_edges is None:
        max_edges = 4 * d

    iu, ju = np.triu_indices(d, k=1)
    mags = np.abs(precision[iu, ju])
    # floor keeps exact-zero couplings (plus fp dust) out even with threshold=0
    floor = 1e-10 * float(np.max(np.abs(np.diag(precision))))
    cutoff = max(threshold if threshold is not None else 0.0, floor)
    keep = np.nonzero(mags > cutoff)[0]
    order = np.lexsort((ju[keep], iu[keep], -mags[keep]))
    keep = keep[order][:max_edges]
    edges = sorted((int(iu[k]), int(ju[k]), 1.0) for k in keep)
    return GraphIncidence(edges, d)


def load_edges(path: str, dim: int) -> GraphIncidence:
    """Read an edge-list file; dim comes from the paired dataset."""
    edges: list[tuple[int, int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != 3:
                raise ParseError(f"{path}: line {ln}: expected 'i j alpha'")
            try:
                i, j, alpha = int(tokens[0]), int(tokens[1]), float(tokens[2])
            except ValueError:
                raise ParseError(f"{path}: line {ln}: non-numeric token") from None
            edges.append((i, j, alpha))
    try:
        return GraphIncidence(edges, dim)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def save_edges(graph: GraphIncidence, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j, alpha in graph.edges:
            fh.write(f"{i} {j} {alpha!r}\n")


def _format_value(name: str, value) -> str:
    return str(value) if name == "iter" else repr(float(value))


def write_metrics_csv(records: list[MetricsRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        names = [f.name for f in fields(MetricsRecord)]
        for rec in records:
            fh.write(
                ",".join(_format_value(n, getattr(rec, n)) for n in names) + "\n"
            )


def read_metrics_csv(path: str) -> list[MetricsRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != METRICS_HEADER:
            raise ParseError(f"{path}: unexpected header {header!r}")
        out = []
        for ln, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ParseError(f"{path}: line {ln}: expected 8 columns")
            try:
                out.append(
                    MetricsRecord(int(parts[0]), *(float(p) for p in parts[1:]))
                )
            except ValueError:
                raise ParseError(f"{path}: line {ln}: non-numeric field") from None
    return out
