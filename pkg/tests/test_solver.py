import numpy as np
import pytest

from conftest import dense_dataset, random_problem
from sadmm.linalg import soft_threshold
from sadmm.problem import GgsvmParams, GraphIncidence, full_gradient
from sadmm.solver import (
    DiagonalMetric,
    FullMetric,
    IdentityMetric,
    RunConfig,
    SolverDivergedError,
    averaged_iterates,
    eta_preset_diag,
    eta_preset_full,
    make_metric,
    run,
    step_theta,
    step_v,
    step_w,
)


class TestMetricPolicies:
    def test_diag_column_norms(self):
        m = DiagonalMetric(2, a=1.0)
        m.update(np.array([1.0, 0.0]))
        m.update(np.array([0.0, 1.0]))
        np.testing.assert_allclose(m.diag(), [2.0, 2.0])  # a + s with s = (1, 1)

    def test_diag_pythagorean(self):
        m = DiagonalMetric(2, a=0.5)
        m.update(np.array([3.0, 4.0]))
        m.update(np.array([4.0, 3.0]))
        np.testing.assert_allclose(m.diag() - 0.5, [5.0, 5.0])

    def test_full_rank_one(self):
        m = FullMetric(3, a=1.0)
        m.update(np.array([2.0, 0.0, 0.0]))
        np.testing.assert_allclose(m.cached_sqrt, np.diag([2.0, 0.0, 0.0]), atol=1e-12)
        np.testing.assert_allclose(m.h_dense(), np.diag([3.0, 1.0, 1.0]), atol=1e-12)

    def test_identity_is_inert(self):
        m = IdentityMetric(2)
        m.update(np.array([5.0, 5.0]))
        np.testing.assert_array_equal(m.h_dense(), np.eye(2))
        assert m.dual_norm_sq(np.array([3.0, 4.0])) == pytest.approx(25.0)

    def test_solve_apply_roundtrip(self):
        rng = np.random.default_rng(0)
        for kind in ("identity", "diag", "full"):
            m = make_metric(kind, 4, a=0.7)
            for _ in range(3):
                m.update(rng.normal(size=4))
            x = rng.normal(size=4)
            np.testing.assert_allclose(m.h_solve(m.h_apply(x)), x, atol=1e-10)
            g = rng.normal(size=4)
            expected = float(g @ np.linalg.solve(m.h_dense(), g))
            assert m.dual_norm_sq(g) == pytest.approx(expected, rel=1e-10)

    def test_diag_monotone(self):
        rng = np.random.default_rng(1)
        m = DiagonalMetric(5, a=1.0)
        prev = m.diag()
        for _ in range(10):
            m.update(rng.normal(size=5))
            cur = m.diag()
            assert np.all(cur >= prev - 1e-15)
            prev = cur

    def test_full_monotone(self):
        rng = np.random.default_rng(2)
        m = FullMetric(4, a=1.0)
        prev = m.h_dense()
        for _ in range(10):
            m.update(rng.normal(size=4))
            cur = m.h_dense()
            min_eig = float(np.min(np.linalg.eigvalsh(cur - prev)))
            assert min_eig >= -1e-8 * np.linalg.norm(cur, "fro")
            prev = cur

    def test_eta_presets(self):
        assert eta_preset_diag(np.sqrt(2.0)) == pytest.approx(1.0)
        assert eta_preset_full(2.0) == pytest.approx(1.0)


class TestStepW:
    def test_edgeless_is_metric_descent(self):
        # with no edges the update collapses to w - eta * H^{-1} g
        graph = GraphIncidence([], 3)
        m = DiagonalMetric(3, a=1.0)
        m.update(np.array([1.0, 2.0, 3.0]))
        w = np.array([0.5, -1.0, 2.0])
        g = np.array([0.2, 0.4, -0.6])
        eta = 0.7
        got, _ = step_w(w, np.zeros(0), np.zeros(0), g, m, graph, beta=1.0, eta=eta)
        np.testing.assert_allclose(got, w - eta * (g / m.diag()), atol=1e-10)

    def test_identity_unit_step(self):
        graph = GraphIncidence([], 2)
        m = IdentityMetric(2)
        w = np.array([1.0, -1.0])
        g = np.array([0.25, 0.5])
        got, _ = step_w(w, np.zeros(0), np.zeros(0), g, m, graph, beta=1.0, eta=1.0)
        np.testing.assert_allclose(got, w - g, atol=1e-12)

    def test_first_order_oracle(self):
        # steepest descent with exact line search on the subproblem objective,
        # entirely through dense formulas
        rng = np.random.default_rng(3)
        for trial in range(20):
            _, graph, _ = random_problem(rng, d=5, n_edges=4)
            kind = ("identity", "diag", "full")[trial % 3]
            m = make_metric(kind, 5, a=float(rng.uniform(0.5, 2.0)))
            for _ in range(3):
                m.update(rng.normal(size=5))
            w = rng.normal(size=5)
            v = rng.normal(size=graph.m)
            theta = rng.normal(size=graph.m)
            g = rng.normal(size=5)
            beta = float(rng.uniform(0.5, 2.0))
            eta = float(rng.uniform(0.1, 2.0))

            f = graph.to_dense()
            h = m.h_dense()
            hess = beta * f.T @ f + h / eta

            def grad(x):
                return g - f.T @ theta + beta * f.T @ (f @ x - v) + h @ (x - w) / eta

            x = w.copy()
            for _ in range(200_000):
                r = grad(x)
                if np.linalg.norm(r) <= 1e-10:
                    break
                x = x - (float(r @ r) / float(r @ hess @ r)) * r

            got, _ = step_w(w, v, theta, g, m, graph, beta=beta, eta=eta)
            assert np.linalg.norm(got - x) <= 1e-6

    def test_stationarity(self):
        # returned point must zero the subproblem gradient to tight tolerance
        rng = np.random.default_rng(4)
        _, graph, _ = random_problem(rng, d=6, n_edges=5)
        m = DiagonalMetric(6, a=1.0)
        m.update(rng.normal(size=6))
        w, g = rng.normal(size=6), rng.normal(size=6)
        v, theta = rng.normal(size=graph.m), rng.normal(size=graph.m)
        beta, eta = 1.3, 0.8
        got, _ = step_w(w, v, theta, g, m, graph, beta=beta, eta=eta)
        f = graph.to_dense()
        rhs = m.h_apply(w) / eta - g + f.T @ (theta + beta * v)
        residual = g - f.T @ theta + beta * f.T @ (f @ got - v) + m.h_apply(got - w) / eta
        assert np.linalg.norm(residual) <= 1e-8 * (1.0 + np.linalg.norm(rhs))

    def test_cg_path_matches_direct(self):
        # above the direct-solve cutoff the CG route must agree with a dense solve
        rng = np.random.default_rng(5)
        d = 80
        pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
        idx = rng.choice(len(pairs), size=120, replace=False)
        graph = GraphIncidence(sorted((pairs[k][0], pairs[k][1], 1.0) for k in idx), d)
        m = DiagonalMetric(d, a=1.0)
        m.update(rng.normal(size=d))
        w, g = rng.normal(size=d), rng.normal(size=d)
        v, theta = rng.normal(size=graph.m), rng.normal(size=graph.m)
        beta, eta = 1.0, 0.5
        got, info = step_w(w, v, theta, g, m, graph, beta=beta, eta=eta)
        assert info is not None and info.converged
        f = graph.to_dense()
        dense = np.linalg.solve(
            beta * f.T @ f + np.diag(m.diag()) / eta,
            m.h_apply(w) / eta - g + f.T @ (theta + beta * v),
        )
        np.testing.assert_allclose(got, dense, atol=1e-7)


class TestStepVTheta:
    def test_balanced_input_gives_zero(self):
        graph = GraphIncidence([(0, 1, 1.0)], 2)
        params = GgsvmParams(0.5, 0.3)
        w_next = np.array([2.0, 1.0])
        theta = graph.apply(w_next) * 2.0  # F w = theta / beta at beta = 2
        assert np.all(step_v(w_next, theta, graph, params, beta=2.0) == 0.0)

    def test_vanishing_l1_weight_is_projection(self):
        # as nu -> 0 the prox becomes the identity on F w - theta/beta
        graph = GraphIncidence([(0, 1, 1.0)], 2)
        w_next = np.array([1.0, -2.0])
        theta = np.array([0.4])
        target = graph.apply(w_next) - theta / 1.0
        np.testing.assert_array_equal(soft_threshold(target, 0.0), target)
        tiny = step_v(w_next, theta, graph, GgsvmParams(0.5, 1e-300), beta=1.0)
        np.testing.assert_allclose(tiny, target, atol=1e-12)

    def test_prox_grid_oracle(self):
        rng = np.random.default_rng(6)
        graph = GraphIncidence([(0, 1, 1.0), (1, 2, 2.0)], 3)
        for _ in range(10):
            params = GgsvmParams(0.5, float(rng.uniform(0.05, 1.0)))
            beta = float(rng.uniform(0.5, 2.0))
            w_next = rng.normal(size=3)
            theta = rng.normal(size=2)
            got = step_v(w_next, theta, graph, params, beta)
            target = graph.apply(w_next) - theta / beta
            for k in range(2):
                grid = np.arange(-6.0, 6.0, 1e-4)
                vals = params.nu * np.abs(grid) + 0.5 * beta * (grid - target[k]) ** 2
                assert abs(got[k] - grid[np.argmin(vals)]) <= 1e-4

    def test_theta_feasible_fixed_point(self):
        graph = GraphIncidence([(0, 1, 1.0)], 2)
        w_next = np.array([1.0, 3.0])
        v_next = graph.apply(w_next)
        theta = np.array([0.7])
        np.testing.assert_array_equal(
            step_theta(theta, w_next, v_next, graph, beta=1.5), theta
        )

    def test_theta_formula(self):
        rng = np.random.default_rng(7)
        _, graph, _ = random_problem(rng, d=4, n_edges=3)
        theta = rng.normal(size=graph.m)
        w_next = rng.normal(size=4)
        v_next = rng.normal(size=graph.m)
        beta = 1.7
        expected = theta - beta * (graph.to_dense() @ w_next - v_next)
        np.testing.assert_allclose(
            step_theta(theta, w_next, v_next, graph, beta), expected, atol=1e-12
        )


class TestRun:
    def test_single_step_edgeless(self):
        data = dense_dataset([[1.0, -2.0]], [1])
        graph = GraphIncidence([], 2)
        params = GgsvmParams(0.5, 0.1)
        cfg = RunConfig(eta=1.0, total_iters=1, seed=3, measure_time=False)
        state, records = run(data, data, graph, params, cfg, "identity")
        # w_2 = -g_1 at w_1 = 0, i.e. y * x
        np.testing.assert_allclose(state.w, [1.0, -2.0], atol=1e-12)
        assert len(records) == 1 and records[0].iter == 1

    def test_three_step_trace_oracle(self, tiny_problem):
        # independent spreadsheet-style replay of the deterministic recursion
        data, graph, params = tiny_problem
        cfg = RunConfig(
            eta=1.0, total_iters=3, seed=5, deterministic_full_gradient=True,
            measure_time=False, beta=1.0, a=1.0,
        )
        traces = []
        run(data, data, graph, params, cfg, "diag", trace_hook=traces.append)

        xs = np.array([[1.0, 0.5], [-0.5, 1.0]])
        ys = np.array([1.0, -1.0])
        w = np.zeros(2)
        v = np.zeros(1)
        th = np.zeros(1)
        sumsq = np.zeros(2)
        for tr in traces:
            margins = ys * (xs @ w)
            g = params.gamma * w - (xs.T @ (ys * (margins < 1.0))) / 2.0
            sumsq = sumsq + g * g
            hdiag = 1.0 + np.sqrt(sumsq)
            # A x = b solved via the 2x2 adjugate, independent of numpy.solve
            a11, a12 = 1.0 + hdiag[0], -1.0
            a21, a22 = -1.0, 1.0 + hdiag[1]
            b = hdiag * w - g + np.array([th[0] + v[0], -(th[0] + v[0])])
            det = a11 * a22 - a12 * a21
            w2 = np.array([(a22 * b[0] - a12 * b[1]) / det, (-a21 * b[0] + a11 * b[1]) / det])
            fw = w2[0] - w2[1]
            z = fw - th[0]
            v2 = np.array([np.sign(z) * max(abs(z) - params.nu, 0.0)])
            th2 = th - (fw - v2)
            np.testing.assert_allclose(tr.g, g, atol=1e-12)
            np.testing.assert_allclose(tr.w_next, w2, atol=1e-12)
            np.testing.assert_allclose(tr.v_next, v2, atol=1e-12)
            np.testing.assert_allclose(tr.theta_next, th2, atol=1e-12)
            w, v, th = w2, v2, th2

    def test_theta_recursion_identity(self):
        rng = np.random.default_rng(8)
        data, graph, params = random_problem(rng, n=10, d=4, n_edges=4)
        cfg = RunConfig(eta=0.5, total_iters=40, seed=11, measure_time=False)
        beta = cfg.beta

        def check(tr):
            lhs = (tr.theta - tr.theta_next) / beta
            rhs = graph.apply(tr.w_next) - tr.v_next
            scale = max(1.0, float(np.max(np.abs(tr.theta))))
            assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale

        run(data, data, graph, params, cfg, "diag", trace_hook=check)

    def test_averaging_definitions(self):
        rng = np.random.default_rng(9)
        data, graph, params = random_problem(rng, n=8, d=3, n_edges=2)
        cfg = RunConfig(eta=0.5, total_iters=3, seed=2, measure_time=False)
        traces = []
        state, _ = run(data, data, graph, params, cfg, "diag", trace_hook=traces.append)
        ws = [traces[0].w] + [tr.w_next for tr in traces]  # w_1 .. w_4
        vs = [tr.v_next for tr in traces]  # v_2 .. v_4
        ths = [tr.theta_next for tr in traces]
        avg = averaged_iterates(state)
        np.testing.assert_allclose(avg.u_bar[0], np.mean(ws[:3], axis=0), atol=1e-14)
        np.testing.assert_allclose(avg.pair_bar[0], np.mean(ws[1:], axis=0), atol=1e-14)
        np.testing.assert_allclose(avg.u_bar[1], np.mean(vs, axis=0), atol=1e-14)
        np.testing.assert_allclose(avg.theta_bar, np.mean(ths, axis=0), atol=1e-14)

    def test_single_iteration_average_is_first_pair(self):
        rng = np.random.default_rng(10)
        data, graph, params = random_problem(rng, n=5, d=3, n_edges=2)
        cfg = RunConfig(eta=0.5, total_iters=1, seed=1, measure_time=False)
        state, _ = run(data, data, graph, params, cfg, "diag")
        avg = averaged_iterates(state)
        np.testing.assert_array_equal(avg.u_bar[0], np.zeros(3))  # w_1 = 0
        np.testing.assert_array_equal(avg.u_bar[1], state.v)  # v_2

    def test_bit_identical_repeats(self):
        rng = np.random.default_rng(11)
        data, graph, params = random_problem(rng, n=12, d=4, n_edges=3)
        cfg = RunConfig(eta=0.25, total_iters=30, seed=42, eval_every=7, measure_time=False)
        _, rec1 = run(data, data, graph, params, cfg, "diag")
        _, rec2 = run(data, data, graph, params, cfg, "diag")
        assert rec1 == rec2
        iters = [r.iter for r in rec1]
        assert iters == sorted(set(iters)) and iters[-1] == 30

    def test_adaptive_policy_requires_eta(self):
        rng = np.random.default_rng(12)
        data, graph, params = random_problem(rng)
        cfg = RunConfig(eta=None, total_iters=5, measure_time=False)
        with pytest.raises(ValueError, match="eta"):
            run(data, data, graph, params, cfg, "diag")

    def test_schedule_matches_inverse_t(self):
        rng = np.random.default_rng(13)
        data, graph, params = random_problem(rng, n=6, d=3, n_edges=2)
        etas = []
        cfg = RunConfig(eta=None, total_iters=4, seed=1, measure_time=False)
        run(data, data, graph, params, cfg, "identity", trace_hook=lambda tr: etas.append(tr.eta))
        expected = [1.0 / (params.gamma * t) for t in (1, 2, 3, 4)]
        np.testing.assert_allclose(etas, expected, rtol=1e-15)

    def test_divergence_detected(self):
        # gigantic constant step on raw-scale data blows the iterates up
        data = dense_dataset([[1e8, -1e8], [1e8, 1e8]], [1, -1])
        graph = GraphIncidence([(0, 1, 1.0)], 2)
        params = GgsvmParams(1e-4, 1e-4)
        cfg = RunConfig(eta=1e12, total_iters=200, seed=1, measure_time=False)
        with pytest.raises(SolverDivergedError):
            run(data, data, graph, params, cfg, "identity")

    def test_mismatched_graph_rejected(self):
        rng = np.random.default_rng(14)
        data, _, params = random_problem(rng, d=4)
        graph = GraphIncidence([(0, 1, 1.0)], 3)
        with pytest.raises(ValueError):
            run(data, data, graph, params, RunConfig(eta=1.0, total_iters=1), "diag")
