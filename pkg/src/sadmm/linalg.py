"""Dense linear-algebra kernels: metric norms, PSD square roots, CG, prox.

Vectors are plain 1-D float64 ndarrays. A "metric" H is either a 1-D array of
diagonal entries or a full symmetric 2-D array; every function accepts both.
All functions are pure and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_CLAMP_TOL = 1e-10
DEFAULT_CG_TOL = 1e-10


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _check_metric_dims(w: np.ndarray, h: np.ndarray) -> None:
    d = w.shape[0]
    if h.ndim == 1:
        ok = h.shape[0] == d
    elif h.ndim == 2:
        ok = h.shape == (d, d)
    else:
        ok = False
    if not ok:
        raise ValueError(f"metric shape {h.shape} does not match vector of dim {d}")


def g_norm_sq(w: np.ndarray, h: np.ndarray) -> float:
    """Squared metric norm w'Hw for a PSD metric (diagonal or full)."""
    _check_metric_dims(w, h)
    if h.ndim == 1:
        return float(w @ (h * w))
    return float(w @ (h @ w))


def dual_norm_sq(g: np.ndarray, h: np.ndarray) -> float:
    """Squared dual norm g'H^{-1}g for a positive definite metric.

    Solved directly; raises on a singular metric.
    """
    _check_metric_dims(g, h)
    if h.ndim == 1:
        if np.any(h <= 0.0):
            raise np.linalg.LinAlgError("diagonal metric is not positive definite")
        return float(g @ (g / h))
    x = np.linalg.solve(h, g)
    return float(g @ x)


def psd_sqrt_factors(
    m: np.ndarray, clamp_tol: float = DEFAULT_CLAMP_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Eigen factors (sqrt_eigvals, eigvecs) of the PSD square root of m.

    Eigenvalues in [-clamp_tol * ||m||_F, 0) are clamped to zero, which is the
    pseudo-inverse convention for rank-deficient inputs; anything below that
    band means the input is not PSD and is rejected.
    """
    fro = float(np.linalg.norm(m, "fro"))
    evals, evecs = np.linalg.eigh(symmetrize(m))
    if evals.size and evals[0] < -clamp_tol * fro:
        raise ValueError(
            f"matrix is not PSD: min eigenvalue {evals[0]:.3e} "
            f"below -{clamp_tol:.1e} * ||M||_F = {-clamp_tol * fro:.3e}"
        )
    return np.sqrt(np.maximum(evals, 0.0)), evecs


def psd_sqrt(m: np.ndarray, clamp_tol: float = DEFAULT_CLAMP_TOL) -> np.ndarray:
    """Symmetric PSD square root: S with S @ S == m (up to roundoff)."""
    sqrt_evals, evecs = psd_sqrt_factors(m, clamp_tol)
    return symmetrize((evecs * sqrt_evals) @ evecs.T)


@dataclass
class CgResult:
    """Outcome of a conjugate-gradient solve; never raised on stagnation."""

    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg_solve(
    apply_a: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = DEFAULT_CG_TOL,
    max_iter: int | None = None,
) -> CgResult:
    """Conjugate gradient for an SPD operator given as a matvec callable.

    Stops when ||A x - rhs|| <= tol * ||rhs|| or after max_iter iterations
    (default 10 * dim); in the latter case the result is returned with
    converged=False so callers can surface a warning instead of failing
    silently. x0 warm-starts the iteration.
    """
    d = rhs.shape[0]
    if max_iter is None:
        max_iter = 10 * d
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return CgResult(np.zeros(d), 0, 0.0, True)
    x = np.zeros(d) if x0 is None else x0.astype(float, copy=True)
    r = rhs - apply_a(x)
    target = tol * rhs_norm
    res = float(np.linalg.norm(r))
    if res <= target:
        return CgResult(x, 0, res, True)
    p = r.copy()
    rs = float(r @ r)
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        denom = float(p @ ap)
        if denom <= 0.0:
            # operator is not SPD to machine precision; stop with the best x
            return CgResult(x, it, res, False)
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * ap
        res = float(np.linalg.norm(r))
        if res <= target:
            return CgResult(x, it, res, True)
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return CgResult(x, max_iter, res, False)


def soft_threshold(z: np.ndarray, lam: float) -> np.ndarray:
    """Componentwise sign(z) * max(|z| - lam, 0); the l1 prox."""
    if lam < 0.0:
        raise ValueError("soft-threshold parameter must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
