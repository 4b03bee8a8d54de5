from pathlib import Path

import numpy as np
import pytest

from sadmm.problem import Dataset, GgsvmParams, GraphIncidence, Sample, SparseVector

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def dense_sample(values, y, dim=None) -> Sample:
    values = np.asarray(values, dtype=float)
    dim = dim or values.size
    nz = np.nonzero(values)[0]
    return Sample(SparseVector(nz, values[nz], dim), y)


def dense_dataset(rows, labels) -> Dataset:
    rows = np.asarray(rows, dtype=float)
    return Dataset([dense_sample(r, y, rows.shape[1]) for r, y in zip(rows, labels)], rows.shape[1])


@pytest.fixture
def tiny_problem():
    """Two samples, two features, one edge; small enough to trace by hand."""
    data = dense_dataset([[1.0, 0.5], [-0.5, 1.0]], [1, -1])
    graph = GraphIncidence([(0, 1, 1.0)], 2)
    params = GgsvmParams(gamma=0.5, nu=0.3)
    return data, graph, params


def random_problem(rng: np.random.Generator, n=12, d=5, n_edges=4, gamma=0.3, nu=0.2):
    rows = rng.normal(size=(n, d))
    labels = np.where(rng.uniform(size=n) < 0.5, 1, -1)
    data = dense_dataset(rows, labels)
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    idx = rng.choice(len(pairs), size=min(n_edges, len(pairs)), replace=False)
    edges = sorted((pairs[k][0], pairs[k][1], float(rng.uniform(0.5, 2.0))) for k in idx)
    return data, GraphIncidence(edges, d), GgsvmParams(gamma=gamma, nu=nu)
