"""Local and multi-start box-constrained minimization."""

from __future__ import annotations

import time
from typing import Callable, Optional

import numpy as np
from scipy.optimize import approx_fprime, minimize

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


def _settle(fn, grad, x, lo, hi, step=0.01, tol=1e-3, maxiter=500):
    """Projected gradient descent with Armijo backtracking. Small, doubling
    trial steps keep the iterate inside the basin it started in."""
    fx = fn(x)
    for _ in range(maxiter):
        g = grad(x)
        if np.linalg.norm(x - np.clip(x - g, lo, hi)) < tol:
            break
        step = min(2.0 * step, 1.0)
        while True:
            z = np.clip(x - step * g, lo, hi)
            fz = fn(z)
            if fz <= fx - 1e-4 * g @ (x - z) or step < 1e-14:
                break
            step /= 2.0
        x, fx = z, fz
    return x


def local_minimize(fn: Objective, grad: Optional[Gradient], x0, lo, hi, maxiter: int = 500):
    """One descent from ``x0`` inside the box ``[lo, hi]``: Armijo gradient
    steps until the basin is settled, then an L-BFGS-B polish."""
    if grad is None:
        grad = lambda z: approx_fprime(z, fn, 1e-8)
    x = _settle(fn, grad, np.clip(np.asarray(x0, dtype=float), lo, hi), lo, hi, maxiter=maxiter)
    res = minimize(
        fn,
        x,
        jac=grad,
        method="L-BFGS-B",
        bounds=list(zip(lo, hi)),
        options={"maxiter": maxiter, "gtol": 1e-10, "ftol": 1e-15},
    )
    x = np.clip(res.x, lo, hi)
    return x, float(fn(x))


def multistart_minimize(
    fn: Objective,
    grad: Optional[Gradient],
    lo,
    hi,
    restarts: int = 16,
    rng: Optional[np.random.Generator] = None,
    budget: Optional[float] = None,
):
    """Best of ``restarts`` local descents from uniform random starts.

    ``budget`` (seconds) truncates the restart loop; at least one start always
    runs. Returns ``(x, value, starts_used)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rng = np.random.default_rng(0) if rng is None else rng
    deadline = None if budget is None else time.perf_counter() + budget
    best_x, best_v = None, np.inf
    used = 0
    while used < restarts:
        if used > 0 and deadline is not None and time.perf_counter() >= deadline:
            break
        x0 = rng.uniform(lo, hi)
        x, v = local_minimize(fn, grad, x0, lo, hi)
        used += 1
        if v < best_v or best_x is None:
            best_x, best_v = x, v
    return best_x, best_v, used
