"""Nonlinear conjugate gradient with a strong Wolfe line search.

Polak-Ribiere+ direction updates (beta clipped at zero) with a restart to
steepest descent every n_params iterations or whenever the update fails to
produce a descent direction. The line search zoom uses quadratic
interpolation, so quadratic objectives are minimized exactly along each line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuralnet
from .neuralnet import NetParams, NetShape

WOLFE_C1 = 1e-4
WOLFE_C2 = 0.1
_MAX_BRACKET = 30
_MAX_ZOOM = 40


@dataclass(frozen=True)
class OptimOptions:
    max_iters: int = 200
    grad_tol: float = 1e-5
    cost_tol: float = 1e-9  # relative cost improvement


@dataclass
class OptimReport:
    iterations: int
    cost_trace: list
    grad_norm_trace: list
    final_gradient_norm: float
    stop_reason: str  # max_iters | grad_tol | cost_tol | line_search_fail

    def rows(self) -> list[tuple]:
        """(iter, cost, grad_norm) rows for CSV export."""
        return [
            (i, c, g)
            for i, (c, g) in enumerate(zip(self.cost_trace, self.grad_norm_trace))
        ]

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "cost", "grad_norm"])
            for i, c, g in self.rows():
                w.writerow([i, repr(float(c)), repr(float(g))])


class _LineSearchFail(Exception):
    pass


def _quadratic_step(a_lo, f_lo, d_lo, a_hi, f_hi):
    # Minimizer of the quadratic through (a_lo, f_lo, d_lo) and (a_hi, f_hi).
    denom = f_hi - f_lo - d_lo * (a_hi - a_lo)
    if denom <= 0:
        return None
    step = a_lo - 0.5 * d_lo * (a_hi - a_lo) ** 2 / denom
    return step


def _zoom(phi, a_lo, a_hi, f_lo, d_lo, f_hi, f0, d0):
    for _ in range(_MAX_ZOOM):
        trial = _quadratic_step(a_lo, f_lo, d_lo, a_hi, f_hi)
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        width = hi - lo
        if trial is None or not (lo + 0.1 * width <= trial <= hi - 0.1 * width):
            trial = 0.5 * (a_lo + a_hi)
        f_t, g_t, d_t = phi(trial)
        if f_t > f0 + WOLFE_C1 * trial * d0 or f_t >= f_lo:
            a_hi, f_hi = trial, f_t
        else:
            if abs(d_t) <= -WOLFE_C2 * d0:
                return trial, f_t, g_t
            if d_t * (a_hi - a_lo) >= 0:
                a_hi, f_hi = a_lo, f_lo
            a_lo, f_lo, d_lo = trial, f_t, d_t
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            if f_lo < f0:
                _, g_lo, _ = phi(a_lo)
                return a_lo, f_lo, g_lo
            raise _LineSearchFail
    raise _LineSearchFail


def _wolfe_search(phi, f0, d0, alpha0):
    """Strong Wolfe search on phi(a) = f(x + a d); returns (alpha, f, grad)."""
    if d0 >= 0:
        raise _LineSearchFail
    a_prev, f_prev, d_prev = 0.0, f0, d0
    alpha = alpha0
    for i in range(_MAX_BRACKET):
        f_a, g_a, d_a = phi(alpha)
        if f_a > f0 + WOLFE_C1 * alpha * d0 or (i > 0 and f_a >= f_prev):
            return _zoom(phi, a_prev, alpha, f_prev, d_prev, f_a, f0, d0)
        if abs(d_a) <= -WOLFE_C2 * d0:
            return alpha, f_a, g_a
        if d_a >= 0:
            return _zoom(phi, alpha, a_prev, f_a, d_a, f_prev, f0, d0)
        a_prev, f_prev, d_prev = alpha, f_a, d_a
        alpha = 2.0 * alpha
    raise _LineSearchFail


def minimize(objective, theta0, opts: OptimOptions | None = None):
    """Minimize objective(theta) -> (cost, gradient); returns (theta, OptimReport).

    A failed line search triggers one restart to steepest descent; if that
    fails as well, the best point seen so far is returned with stop_reason
    'line_search_fail' rather than raising.
    """
    opts = opts or OptimOptions()
    theta = np.asarray(theta0, dtype=float).copy()
    n = theta.size
    f, g = objective(theta)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective must be finite at theta0")

    best_theta, best_f = theta.copy(), f
    cost_trace = [f]
    grad_trace = [float(np.linalg.norm(g))]
    stop_reason = "max_iters"
    iterations = 0
    direction = -g
    f_prev_for_step = None

    def phi_factory(base_theta, d):
        def phi(alpha):
            f_a, g_a = objective(base_theta + alpha * d)
            return f_a, g_a, float(np.dot(g_a, d))

        return phi

    if grad_trace[0] <= opts.grad_tol:
        return theta, OptimReport(0, cost_trace, grad_trace, grad_trace[0], "grad_tol")

    for it in range(opts.max_iters):
        d0 = float(np.dot(g, direction))
        if d0 >= 0:  # not a descent direction: restart
            direction = -g
            d0 = float(np.dot(g, direction))

        # First trial step: exact for quadratics after the first iteration.
        if f_prev_for_step is None:
            alpha0 = min(1.0, 2.0 / max(1.0, float(np.linalg.norm(g))))
        else:
            alpha0 = min(1.0, 2.0 * max(f_prev_for_step - f, 10 * np.finfo(float).eps) / -d0)
        alpha0 = max(alpha0, 1e-12)

        phi = phi_factory(theta, direction)
        try:
            alpha, f_new, g_new = _wolfe_search(phi, f, d0, alpha0)
        except _LineSearchFail:
            direction = -g
            d0 = float(np.dot(g, direction))
            phi = phi_factory(theta, direction)
            try:
                alpha, f_new, g_new = _wolfe_search(phi, f, d0, 1.0)
            except _LineSearchFail:
                stop_reason = "line_search_fail"
                break

        theta = theta + alpha * direction
        f_prev_for_step = f
        beta = max(0.0, float(np.dot(g_new, g_new - g) / np.dot(g, g)))
        if (it + 1) % n == 0:
            beta = 0.0  # periodic restart
        direction = -g_new + beta * direction
        f, g = f_new, g_new
        iterations = it + 1
        cost_trace.append(f)
        grad_trace.append(float(np.linalg.norm(g)))
        if f < best_f:
            best_f, best_theta = f, theta.copy()

        if grad_trace[-1] <= opts.grad_tol:
            stop_reason = "grad_tol"
            break
        if cost_trace[-2] - f <= opts.cost_tol * max(1.0, abs(cost_trace[-2])):
            stop_reason = "cost_tol"
            break

    report = OptimReport(
        iterations=iterations,
        cost_trace=cost_trace,
        grad_norm_trace=grad_trace,
        final_gradient_norm=grad_trace[-1],
        stop_reason=stop_reason,
    )
    return best_theta, report


def train_on_arrays(
    x_batch: np.ndarray,
    labels: np.ndarray,
    shape: NetShape,
    lam: float,
    opts: OptimOptions | None = None,
    seed: int = 0,
    reg_include_bias: bool = False,
):
    """Full-batch training of the sigmoid network; shared by every NN variant."""
    x_batch = np.asarray(x_batch, dtype=float)
    labels = np.asarray(labels, dtype=int)
    targets = np.zeros((len(labels), shape.n_outputs))
    targets[np.arange(len(labels)), labels] = 1.0

    def objective(theta):
        return neuralnet.cost_and_gradient(
            theta, shape, x_batch, targets, lam, reg_include_bias
        )

    theta0 = neuralnet.init_params(shape, seed).theta
    theta, report = minimize(objective, theta0, opts)
    return NetParams(theta, shape), report


def train(
    dataset,
    shape: NetShape,
    lam: float,
    opts: OptimOptions | None = None,
    seed: int = 0,
    reg_include_bias: bool = False,
):
    """Train on labeled samples whose features are already computed."""
    if not dataset:
        raise ValueError("dataset must be non-empty")
    x_batch = np.vstack([np.asarray(s.feature.values, dtype=float) for s in dataset])
    labels = np.array([s.label for s in dataset])
    return train_on_arrays(x_batch, labels, shape, lam, opts, seed, reg_include_bias)
