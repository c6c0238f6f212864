"""Optimizer tests: quadratic oracles, descent guarantees, training behavior."""

import numpy as np
import pytest

from chanlearn import neuralnet as nn, optim
from chanlearn.harness import LabeledSample
from chanlearn.featpipe import FeatureVector
from chanlearn.gscm import ChannelVector
from chanlearn.neuralnet import NetShape
from chanlearn.optim import OptimOptions


def spd_quadratic(dim, seed):
    """f(x) = 0.5 x'Ax - b'x with SPD A; minimizer from the linear-system oracle."""
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((dim, dim))
    a = m @ m.T + np.eye(dim)
    b = rng.standard_normal(dim)
    x_star = np.linalg.solve(a, b)

    def objective(theta):
        return 0.5 * theta @ a @ theta - b @ theta, a @ theta - b

    return objective, x_star


TIGHT = OptimOptions(max_iters=100, grad_tol=1e-10, cost_tol=0.0)


class TestMinimize:
    def test_six_dim_quadratic_within_twenty_iterations(self):
        objective, x_star = spd_quadratic(6, 0)
        theta, report = optim.minimize(objective, np.zeros(6), TIGHT)
        assert report.iterations <= 20
        assert np.max(np.abs(theta - x_star)) < 1e-8

    @pytest.mark.parametrize("dim", range(2, 11))
    def test_quadratics_up_to_ten_dims(self, dim):
        # Wolfe acceptance (c2=0.1) leaves ~10% line-search slack, so exact
        # dimension-step conjugacy is not guaranteed; budget is dim-many plus
        # the slack iterations that inexact steps cost.
        objective, x_star = spd_quadratic(dim, dim)
        theta, report = optim.minimize(objective, np.zeros(dim), TIGHT)
        assert np.max(np.abs(theta - x_star)) < 1e-7
        assert report.iterations <= 25

    def test_stationary_start_zero_iterations(self):
        objective, x_star = spd_quadratic(4, 3)
        theta, report = optim.minimize(objective, x_star, OptimOptions())
        assert report.iterations == 0
        assert report.stop_reason == "grad_tol"
        np.testing.assert_array_equal(theta, x_star)

    def test_cost_trace_non_increasing(self):
        objective, _ = spd_quadratic(8, 5)
        _, report = optim.minimize(objective, np.full(8, 3.0), TIGHT)
        for a, b in zip(report.cost_trace, report.cost_trace[1:]):
            assert b <= a + 1e-12
        assert len(report.cost_trace) == report.iterations + 1
        assert len(report.grad_norm_trace) == report.iterations + 1

    def test_never_returns_worse_than_start(self):
        rng = np.random.default_rng(7)
        # mildly nasty nonconvex objective
        def objective(theta):
            f = np.sum(np.sin(theta) ** 2) + 0.1 * np.sum(theta**4)
            g = np.sin(2 * theta) + 0.4 * theta**3
            return f, g

        for _ in range(10):
            theta0 = rng.standard_normal(5) * 2
            f0, _ = objective(theta0)
            theta, report = optim.minimize(objective, theta0, OptimOptions(max_iters=50))
            f_final, _ = objective(theta)
            assert f_final <= f0 + 1e-12

    def test_line_search_fail_returns_best_seen(self):
        # linear objective: no strong Wolfe point exists
        def objective(theta):
            return float(theta[0]), np.array([1.0, 0.0])

        theta0 = np.array([4.0, 2.0])
        theta, report = optim.minimize(objective, theta0, OptimOptions(max_iters=30))
        assert report.stop_reason == "line_search_fail"
        assert np.all(np.isfinite(theta))

    def test_nonfinite_start_rejected(self):
        def objective(theta):
            return np.inf, np.zeros(2)

        with pytest.raises(ValueError):
            optim.minimize(objective, np.zeros(2))

    def test_report_rows(self):
        objective, _ = spd_quadratic(3, 9)
        _, report = optim.minimize(objective, np.ones(3), TIGHT)
        rows = report.rows()
        assert rows[0][0] == 0
        assert len(rows) == report.iterations + 1

    def test_report_csv(self, tmp_path):
        objective, _ = spd_quadratic(3, 9)
        _, report = optim.minimize(objective, np.ones(3), TIGHT)
        path = tmp_path / "report.csv"
        report.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,cost,grad_norm"
        assert len(lines) == report.iterations + 2


def tiny_dataset(labels, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for lab in labels:
        x = rng.uniform(-1, 1, 6)
        samples.append(
            LabeledSample(
                location=np.zeros(2),
                h_o=ChannelVector(np.ones(4, dtype=complex)),
                h_u=ChannelVector(np.ones(3, dtype=complex)),
                label=lab,
                feature=FeatureVector(x),
            )
        )
    return samples


class TestTrain:
    def test_memorizes_single_sample(self):
        dataset = tiny_dataset([2])
        params, report = optim.train(
            dataset, NetShape((6, 4, 3)), 0.0, OptimOptions(max_iters=100), seed=1
        )
        assert nn.predict(params, dataset[0].feature) == 2

    def test_huge_lambda_collapses_to_tie_low(self):
        # regularize biases too so the whole parameter vector is driven to zero
        dataset = tiny_dataset([0, 1, 2, 1, 0], seed=2)
        params, report = optim.train(
            dataset,
            NetShape((6, 4, 3)),
            1e6,
            OptimOptions(max_iters=100),
            seed=1,
            reg_include_bias=True,
        )
        assert np.linalg.norm(params.theta) < 1e-2
        for s in dataset:
            assert nn.predict(params, s.feature) == 0

    def test_deterministic_per_seed(self):
        dataset = tiny_dataset([0, 2, 1, 1], seed=3)
        p1, _ = optim.train(dataset, NetShape((6, 5, 3)), 1e-3, OptimOptions(max_iters=30), seed=9)
        p2, _ = optim.train(dataset, NetShape((6, 5, 3)), 1e-3, OptimOptions(max_iters=30), seed=9)
        np.testing.assert_array_equal(p1.theta, p2.theta)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            optim.train([], NetShape((6, 4, 3)), 0.0)
