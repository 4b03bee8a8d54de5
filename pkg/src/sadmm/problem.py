"""Graph-guided SVM problem: data containers, loss/subgradients, incidence operator.

The task couples a hinge-loss linear classifier w with an auxiliary variable v
through the linear constraint F w = v, where each row of F takes a weighted
difference of two coordinates of w (one row per graph edge). The objective is

    (1/n) sum_i [1 - y_i <x_i, w>]_+  +  (gamma/2) ||w||^2  +  nu ||v||_1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SparseVector:
    """Sparse feature row: strictly increasing 0-based indices, nonzero values."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D and equally long")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError("index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(val == 0.0):
                raise ValueError("stored values must be nonzero")

    def dot(self, w: np.ndarray) -> float:
        if self.indices.size == 0:
            return 0.0
        return float(self.values @ w[self.indices])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out


@dataclass(frozen=True)
class Sample:
    x: SparseVector
    y: int  # +1 or -1

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.y}")


@dataclass
class Dataset:
    samples: list[Sample]
    dim: int
    # CSR view built on first use; samples are immutable so it never staleness
    _csr: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if not self.samples:
            raise ValueError("dataset must be nonempty")
        for s in self.samples:
            if s.x.dim != self.dim:
                raise ValueError("all samples must share the dataset dimension")

    def __len__(self) -> int:
        return len(self.samples)

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, indices, values, labels) for vectorized evaluation."""
        if self._csr is None:
            counts = np.fromiter(
                (s.x.indices.size for s in self.samples), dtype=np.int64, count=len(self)
            )
            indptr = np.concatenate(([0], np.cumsum(counts)))
            indices = (
                np.concatenate([s.x.indices for s in self.samples])
                if indptr[-1]
                else np.zeros(0, dtype=np.int64)
            )
            values = (
                np.concatenate([s.x.values for s in self.samples])
                if indptr[-1]
                else np.zeros(0)
            )
            labels = np.fromiter((s.y for s in self.samples), dtype=np.float64, count=len(self))
            self._csr = (indptr, indices, values, labels)
        return self._csr

    def margins(self, w: np.ndarray) -> np.ndarray:
        """x_i . w for every sample (label not applied)."""
        indptr, indices, values, _ = self.csr()
        out = np.zeros(len(self))
        if indices.size:
            prods = values * w[indices]
            # per-row segment sums; consecutive nonempty starts delimit rows
            nonempty = np.nonzero(np.diff(indptr) > 0)[0]
            out[nonempty] = np.add.reduceat(prods, indptr[nonempty])
        return out


@dataclass(frozen=True)
class GgsvmParams:
    """gamma: ridge weight on w; nu: l1 weight on v. Both strictly positive."""

    gamma: float
    nu: float

    def __post_init__(self):
        if not (self.gamma > 0.0 and self.nu > 0.0):
            raise ValueError("gamma and nu must be strictly positive")


class GraphIncidence:
    """Sparse edge-difference operator F: row k maps w to alpha_k * (w_i - w_j).

    Edges are (i, j, alpha) with 0 <= i < j < dim and alpha != 0; duplicate
    (i, j) pairs are rejected. F'F is cached densely on first use.
    """

    def __init__(self, edges: list[tuple[int, int, float]], dim: int):
        if dim < 0:
            raise ValueError("dimension must be nonnegative")
        self.dim = dim
        self.m = len(edges)
        self.src = np.zeros(self.m, dtype=np.int64)
        self.dst = np.zeros(self.m, dtype=np.int64)
        self.weight = np.zeros(self.m)
        seen: set[tuple[int, int]] = set()
        for k, (i, j, alpha) in enumerate(edges):
            if not (0 <= i < j < dim):
                raise ValueError(f"edge ({i}, {j}) violates 0 <= i < j < dim={dim}")
            if alpha == 0.0:
                raise ValueError(f"edge ({i}, {j}) has zero weight")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            self.src[k], self.dst[k], self.weight[k] = i, j, alpha
        self._gram: np.ndarray | None = None

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [
            (int(i), int(j), float(a))
            for i, j, a in zip(self.src, self.dst, self.weight)
        ]

    def apply(self, w: np.ndarray) -> np.ndarray:
        """F w, length m."""
        if self.m == 0:
            return np.zeros(0)
        return self.weight * (w[self.src] - w[self.dst])

    def apply_t(self, r: np.ndarray) -> np.ndarray:
        """F' r, length dim."""
        out = np.zeros(self.dim)
        if self.m:
            wr = self.weight * r
            np.add.at(out, self.src, wr)
            np.add.at(out, self.dst, -wr)
        return out

    def gram(self) -> np.ndarray:
        """Dense F'F (dim x dim), cached."""
        if self._gram is None:
            g = np.zeros((self.dim, self.dim))
            if self.m:
                a2 = self.weight**2
                np.add.at(g, (self.src, self.src), a2)
                np.add.at(g, (self.dst, self.dst), a2)
                np.add.at(g, (self.src, self.dst), -a2)
                np.add.at(g, (self.dst, self.src), -a2)
            self._gram = g
        return self._gram

    def to_dense(self) -> np.ndarray:
        f = np.zeros((self.m, self.dim))
        rows = np.arange(self.m)
        f[rows, self.src] = self.weight
        f[rows, self.dst] = -self.weight
        return f


def hinge(margin: float) -> float:
    return max(0.0, 1.0 - margin)


def sample_loss(w: np.ndarray, sample: Sample, params: GgsvmParams) -> float:
    """Per-example loss: hinge plus the ridge term."""
    return hinge(sample.y * sample.x.dot(w)) + 0.5 * params.gamma * float(w @ w)


def stochastic_subgradient(
    w: np.ndarray, sample: Sample, params: GgsvmParams
) -> np.ndarray:
    """Subgradient of the per-example loss at w.

    At a margin of exactly 1 the hinge contributes 0 (the limit from the
    inactive side), which keeps the selection deterministic.
    """
    g = params.gamma * w
    margin = sample.y * sample.x.dot(w)
    if margin < 1.0:
        g[sample.x.indices] -= sample.y * sample.x.values
    return g


def full_gradient(w: np.ndarray, data: Dataset, params: GgsvmParams) -> np.ndarray:
    """Mean of per-example subgradients, accumulated in dataset order."""
    acc = np.zeros(data.dim)
    for s in data.samples:
        acc += stochastic_subgradient(w, s, params)
    return acc / len(data)


def objective(
    w: np.ndarray, v: np.ndarray, data: Dataset, params: GgsvmParams
) -> float:
    """Full objective: mean hinge + ridge on w + l1 on v."""
    _, _, _, labels = data.csr()
    margins = labels * data.margins(w)
    hinge_mean = float(np.mean(np.maximum(0.0, 1.0 - margins)))
    return (
        hinge_mean
        + 0.5 * params.gamma * float(w @ w)
        + params.nu * float(np.sum(np.abs(v)))
    )


def feasibility(w: np.ndarray, v: np.ndarray, graph: GraphIncidence) -> float:
    """Constraint residual ||F w - v||_2."""
    return float(np.linalg.norm(graph.apply(w) - v))


def test_error(w: np.ndarray, test: Dataset) -> float:
    """Fraction misclassified; the zero score predicts +1 (documented tie rule)."""
    _, _, _, labels = test.csr()
    scores = test.margins(w)
    pred = np.where(scores >= 0.0, 1.0, -1.0)
    return float(np.mean(pred != labels))
