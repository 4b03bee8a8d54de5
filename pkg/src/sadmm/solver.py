"""Stochastic ADMM with pluggable proximal metrics.

One iteration: draw an example (or take the full batch gradient), form the
loss subgradient g_t, update the metric H_t, then minimize the linearized
augmented Lagrangian over w, over v, and take a dual ascent step on theta:

    w_{t+1} = argmin_w  <g_t, w> - <theta_t, Fw - v_t>
              + (beta/2) ||Fw - v_t||^2 + (1/(2 eta_t)) ||w - w_t||^2_{H_t}
    v_{t+1} = argmin_v  nu ||v||_1 - <theta_t, Fw_{t+1} - v>
              + (beta/2) ||Fw_{t+1} - v||^2
    theta_{t+1} = theta_t - beta (F w_{t+1} - v_{t+1})

Metric choices: identity (fixed baseline with a 1/(gamma t) step schedule),
a*I + diag of running per-coordinate gradient norms, or a*I + square root of
the running gradient second-moment matrix.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import MetricsRecord
from .linalg import CgResult, cg_solve, psd_sqrt_factors, soft_threshold
from .problem import (
    Dataset,
    GgsvmParams,
    GraphIncidence,
    full_gradient,
    objective,
    stochastic_subgradient,
    test_error,
)
from .rng import XorShift64Star

POLICY_KINDS = ("identity", "diag", "full")
DIRECT_SOLVE_MAX_DIM = 64


class SolverDivergedError(RuntimeError):
    """Raised when an iterate stops being finite or a subproblem degenerates."""

    def __init__(self, t: int, detail: str):
        super().__init__(f"solver diverged at iteration {t}: {detail}")
        self.t = t
        self.detail = detail


class IdentityMetric:
    """Fixed H = I; adaptivity comes only from the step-size schedule."""

    kind = "identity"

    def __init__(self, dim: int, a: float = 1.0):
        self.dim = dim
        self.a = a  # unused; kept so all policies share a constructor

    def update(self, g: np.ndarray) -> None:
        pass

    def h_apply(self, x: np.ndarray) -> np.ndarray:
        return x.copy()

    def h_solve(self, r: np.ndarray) -> np.ndarray:
        return r.copy()

    def h_dense(self) -> np.ndarray:
        return np.eye(self.dim)

    def dual_norm_sq(self, g: np.ndarray) -> float:
        return float(g @ g)


class DiagonalMetric:
    """H = a*I + diag(s), s_i = l2 norm of coordinate i's gradient history.

    The running sum of squares is stored; s is materialized by sqrt on read,
    so s is nondecreasing per coordinate by construction.
    """

    kind = "diag"

    def __init__(self, dim: int, a: float):
        if a <= 0.0:
            raise ValueError("smoothing a must be positive")
        self.dim = dim
        self.a = a
        self.sumsq = np.zeros(dim)

    def update(self, g: np.ndarray) -> None:
        self.sumsq += g * g

    def diag(self) -> np.ndarray:
        return self.a + np.sqrt(self.sumsq)

    def h_apply(self, x: np.ndarray) -> np.ndarray:
        return self.diag() * x

    def h_solve(self, r: np.ndarray) -> np.ndarray:
        return r / self.diag()

    def h_dense(self) -> np.ndarray:
        return np.diag(self.diag())

    def dual_norm_sq(self, g: np.ndarray) -> float:
        return float(g @ (g / self.diag()))


class FullMetric:
    """H = a*I + G^{1/2} with G the running sum of gradient outer products.

    The eigendecomposition of G is refreshed on every update and reused for
    applies, solves, and dual norms within the iteration.
    """

    kind = "full"

    def __init__(self, dim: int, a: float):
        if a <= 0.0:
            raise ValueError("smoothing a must be positive")
        self.dim = dim
        self.a = a
        self.G = np.zeros((dim, dim))
        self.sqrt_evals = np.zeros(dim)
        self.evecs = np.eye(dim)
        self.cached_sqrt = np.zeros((dim, dim))

    def update(self, g: np.ndarray) -> None:
        self.G += np.outer(g, g)
        self.sqrt_evals, self.evecs = psd_sqrt_factors(self.G)
        self.cached_sqrt = (self.evecs * self.sqrt_evals) @ self.evecs.T

    def h_apply(self, x: np.ndarray) -> np.ndarray:
        return self.a * x + self.evecs @ (self.sqrt_evals * (self.evecs.T @ x))

    def h_solve(self, r: np.ndarray) -> np.ndarray:
        y = self.evecs.T @ r
        return self.evecs @ (y / (self.a + self.sqrt_evals))

    def h_dense(self) -> np.ndarray:
        return self.a * np.eye(self.dim) + self.cached_sqrt

    def dual_norm_sq(self, g: np.ndarray) -> float:
        y = self.evecs.T @ g
        return float(y @ (y / (self.a + self.sqrt_evals)))

    def trace_sqrt(self) -> float:
        return float(np.sum(self.sqrt_evals))


MetricPolicy = IdentityMetric | DiagonalMetric | FullMetric


def make_metric(kind: str, dim: int, a: float) -> MetricPolicy:
    if kind == "identity":
        return IdentityMetric(dim, a)
    if kind == "diag":
        return DiagonalMetric(dim, a)
    if kind == "full":
        return FullMetric(dim, a)
    raise ValueError(f"unknown metric policy {kind!r}; expected one of {POLICY_KINDS}")


def eta_preset_diag(diameter_inf: float) -> float:
    """Step size D_inf / sqrt(2) for the diagonal metric, given a user-supplied
    sup-norm diameter estimate of the region the iterates live in."""
    return diameter_inf / math.sqrt(2.0)


def eta_preset_full(diameter_l2: float) -> float:
    """Step size D_2 / 2 for the full metric, given an l2 diameter estimate."""
    return diameter_l2 / 2.0


@dataclass
class RunConfig:
    """Knobs for one solver run.

    eta=None selects the 1/(gamma t) schedule and is only valid with the
    identity policy; adaptive policies need an explicit constant step.
    total_iters overrides ceil(epochs * n) when an exact iteration count is
    needed (diagnostics); measure_time=False writes 0.0 wall times so that
    repeated runs produce byte-identical records.
    """

    beta: float = 1.0
    eta: float | None = None
    a: float = 1.0
    epochs: float = 2.0
    seed: int = 1
    eval_every: int = 0  # 0: only record the final iterate
    deterministic_full_gradient: bool = False
    rho: float = 1.0
    total_iters: int | None = None
    measure_time: bool = True

    def __post_init__(self):
        if self.beta <= 0.0 or self.a <= 0.0 or self.rho <= 0.0:
            raise ValueError("beta, a, and rho must be strictly positive")
        if self.eta is not None and self.eta <= 0.0:
            raise ValueError("eta must be strictly positive when given")
        if self.epochs <= 0.0 and self.total_iters is None:
            raise ValueError("epochs must be positive")

    def iterations(self, n: int) -> int:
        if self.total_iters is not None:
            if self.total_iters < 1:
                raise ValueError("total_iters must be >= 1")
            return self.total_iters
        t = int(math.ceil(self.epochs * n))
        if t < 1:
            raise ValueError("epochs * n must be >= 1")
        return t


@dataclass
class RunStats:
    """Per-run accumulators used by the bound diagnostics."""

    iterations: int = 0
    dual_norm_sq_sum: float = 0.0
    grad_sq_colsums: np.ndarray | None = None
    trace_sqrt_final: float | None = None  # full policy only
    cg_failures: int = 0
    warnings: list[str] = field(default_factory=list)

    def column_norms(self) -> np.ndarray:
        """Per-coordinate l2 norms of the gradient history."""
        if self.grad_sq_colsums is None:
            raise ValueError("no gradients recorded")
        return np.sqrt(self.grad_sq_colsums)


@dataclass
class SolverState:
    """Iterates plus running sums for the two averaging conventions."""

    w: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    t: int
    metric: MetricPolicy
    sum_w_lead: np.ndarray  # w_1 + ... + w_T      (lead average)
    sum_w_tail: np.ndarray  # w_2 + ... + w_{T+1}  (tail average)
    sum_v_tail: np.ndarray
    sum_theta_tail: np.ndarray
    prng: XorShift64Star
    warm: np.ndarray | None = None  # previous w-subproblem solution
    stats: RunStats = field(default_factory=RunStats)


@dataclass(frozen=True)
class AveragedIterates:
    """u_bar pairs the lead w average with the tail v average; pair_bar and
    theta_bar average everything over t = 2..T+1."""

    u_bar: tuple[np.ndarray, np.ndarray]
    pair_bar: tuple[np.ndarray, np.ndarray]
    theta_bar: np.ndarray


def averaged_iterates(state: SolverState) -> AveragedIterates:
    if state.t < 1:
        raise ValueError("no completed iterations to average")
    t = float(state.t)
    v_bar = state.sum_v_tail / t
    return AveragedIterates(
        u_bar=(state.sum_w_lead / t, v_bar),
        pair_bar=(state.sum_w_tail / t, v_bar),
        theta_bar=state.sum_theta_tail / t,
    )


@dataclass(frozen=True)
class StepTrace:
    """Snapshot handed to a trace hook after each iteration.

    The metric is the live policy object (already updated for step t);
    consume it before the next iteration mutates it.
    """

    t: int
    eta: float
    g: np.ndarray
    w: np.ndarray
    w_next: np.ndarray
    v: np.ndarray
    v_next: np.ndarray
    theta: np.ndarray
    theta_next: np.ndarray
    metric: MetricPolicy


def step_w(
    w: np.ndarray,
    v: np.ndarray,
    theta: np.ndarray,
    g: np.ndarray,
    metric: MetricPolicy,
    graph: GraphIncidence,
    beta: float,
    eta: float,
    warm: np.ndarray | None = None,
) -> tuple[np.ndarray, CgResult | None]:
    """Exact w-subproblem solve: (beta F'F + H/eta) w = H w/eta - g + F'(theta + beta v).

    Dense direct solve up to DIRECT_SOLVE_MAX_DIM coordinates, conjugate
    gradient with warm start above; the CgResult (None on the direct path)
    carries residual/convergence info for the caller to surface.
    """
    rhs = metric.h_apply(w) / eta - g + graph.apply_t(theta + beta * v)
    if graph.dim <= DIRECT_SOLVE_MAX_DIM:
        system = beta * graph.gram() + metric.h_dense() / eta
        try:
            return np.linalg.solve(system, rhs), None
        except np.linalg.LinAlgError as exc:
            raise SolverDivergedError(-1, f"w-subproblem singular: {exc}") from exc

    def apply_a(x: np.ndarray) -> np.ndarray:
        return beta * graph.apply_t(graph.apply(x)) + metric.h_apply(x) / eta

    result = cg_solve(apply_a, rhs, x0=warm, tol=1e-10, max_iter=10 * graph.dim)
    return result.x, result


def step_v(
    w_next: np.ndarray,
    theta: np.ndarray,
    graph: GraphIncidence,
    params: GgsvmParams,
    beta: float,
) -> np.ndarray:
    """Exact v-subproblem solve: soft-threshold of F w_{t+1} - theta/beta at nu/beta."""
    return soft_threshold(graph.apply(w_next) - theta / beta, params.nu / beta)


def step_theta(
    theta: np.ndarray,
    w_next: np.ndarray,
    v_next: np.ndarray,
    graph: GraphIncidence,
    beta: float,
) -> np.ndarray:
    """Dual ascent: theta - beta (F w_{t+1} - v_{t+1})."""
    return theta - beta * (graph.apply(w_next) - v_next)


def _eval_record(
    t: int,
    n: int,
    state: SolverState,
    data: Dataset,
    test: Dataset,
    graph: GraphIncidence,
    params: GgsvmParams,
    elapsed: float,
) -> MetricsRecord:
    avg = averaged_iterates(state)
    w_bar, v_bar = avg.u_bar
    w_pair, _ = avg.pair_bar
    return MetricsRecord(
        iter=t,
        epoch=t / n,
        objective_avg=objective(w_bar, v_bar, data, params),
        objective_last=objective(state.w, state.v, data, params),
        test_error_avg=test_error(w_bar, test),
        test_error_last=test_error(state.w, test),
        feasibility_avg=float(np.linalg.norm(graph.apply(w_pair) - v_bar)),
        wall_time_s=elapsed,
    )


def run(
    data: Dataset,
    test: Dataset,
    graph: GraphIncidence,
    params: GgsvmParams,
    cfg: RunConfig,
    policy_kind: str,
    trace_hook=None,
) -> tuple[SolverState, list[MetricsRecord]]:
    """Run T = ceil(epochs * n) iterations from the zero initialization.

    Emits a MetricsRecord every cfg.eval_every iterations (and always at the
    final one) with objective/test error for both the averaged and the last
    iterate. Output is bit-identical for identical (cfg, inputs). Raises
    SolverDivergedError as soon as an iterate stops being finite.
    """
    if graph.dim != data.dim:
        raise ValueError("graph and dataset dimensions differ")
    if cfg.eta is None and policy_kind != "identity":
        raise ValueError("adaptive policies need an explicit constant eta")
    n = len(data)
    total = cfg.iterations(n)
    d = data.dim
    m = graph.m

    metric = make_metric(policy_kind, d, cfg.a)
    state = SolverState(
        w=np.zeros(d),
        v=np.zeros(m),
        theta=np.zeros(m),
        t=0,
        metric=metric,
        sum_w_lead=np.zeros(d),
        sum_w_tail=np.zeros(d),
        sum_v_tail=np.zeros(m),
        sum_theta_tail=np.zeros(m),
        prng=XorShift64Star(cfg.seed),
        stats=RunStats(grad_sq_colsums=np.zeros(d)),
    )
    records: list[MetricsRecord] = []
    start = time.perf_counter()

    # overflow during divergence is caught by the finiteness check below;
    # numpy's warnings would only add noise (e.g. during step-size searches)
    with np.errstate(over="ignore", invalid="ignore"):
        _run_loop(data, test, graph, params, cfg, policy_kind, trace_hook, state, records, total, n, start)
    if isinstance(metric, FullMetric):
        state.stats.trace_sqrt_final = metric.trace_sqrt()
    return state, records


def _run_loop(data, test, graph, params, cfg, policy_kind, trace_hook, state, records, total, n, start):
    metric = state.metric
    for t in range(1, total + 1):
        if cfg.deterministic_full_gradient:
            g = full_gradient(state.w, data, params)
        else:
            g = stochastic_subgradient(state.w, data.samples[state.prng.below(n)], params)

        metric.update(g)
        eta_t = cfg.eta if cfg.eta is not None else 1.0 / (params.gamma * t)

        state.stats.dual_norm_sq_sum += metric.dual_norm_sq(g)
        state.stats.grad_sq_colsums += g * g
        state.sum_w_lead += state.w

        try:
            w_next, cg_info = step_w(
                state.w, state.v, state.theta, g, metric, graph, cfg.beta, eta_t, state.warm
            )
        except SolverDivergedError as exc:
            raise SolverDivergedError(t, exc.detail) from None
        if cg_info is not None:
            state.warm = w_next
            if not cg_info.converged:
                state.stats.cg_failures += 1
                state.stats.warnings.append(
                    f"iter {t}: CG stopped at residual {cg_info.residual:.3e} "
                    f"after {cg_info.iterations} iterations"
                )
        v_next = step_v(w_next, state.theta, graph, params, cfg.beta)
        theta_next = step_theta(state.theta, w_next, v_next, graph, cfg.beta)

        if not (
            np.all(np.isfinite(w_next))
            and np.all(np.isfinite(v_next))
            and np.all(np.isfinite(theta_next))
        ):
            raise SolverDivergedError(
                t,
                f"non-finite iterate (|w|={np.max(np.abs(w_next)):.3e}, eta={eta_t:.3e})",
            )

        if trace_hook is not None:
            trace_hook(
                StepTrace(
                    t=t,
                    eta=eta_t,
                    g=g,
                    w=state.w,
                    w_next=w_next,
                    v=state.v,
                    v_next=v_next,
                    theta=state.theta,
                    theta_next=theta_next,
                    metric=metric,
                )
            )

        state.sum_w_tail += w_next
        state.sum_v_tail += v_next
        state.sum_theta_tail += theta_next
        state.w, state.v, state.theta = w_next, v_next, theta_next
        state.t = t
        state.stats.iterations = t

        if (cfg.eval_every > 0 and t % cfg.eval_every == 0) or t == total:
            elapsed = (time.perf_counter() - start) if cfg.measure_time else 0.0
            records.append(
                _eval_record(t, n, state, data, test, graph, params, elapsed)
            )
