"""Dense BFGS with Armijo backtracking, shared by the shooting and GRAPE drivers.

The engine is deliberately small: the parameter spaces here are tiny (d^2-1
or N*K reals) while each objective call costs a full propagation, so a
quasi-Newton step with a plain backtracking line search wins over
first-order methods on objective-call count.

Determinism contract: for fixed inputs the iterate sequence, accepted cost
trace, and stop reason are reproducible bitwise. The line search may
evaluate its whole backtracking ladder in one vectorized call (``batch_fun``)
and picks the largest step satisfying the Armijo test, which accepts exactly
the same step a sequential backtracking loop would.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 30
STALL_WINDOW = 25
CURVATURE_FLOOR = 1e-12


class ProbeFailure(RuntimeError):
    """Raised by an objective to abort a single line-search probe."""


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    trace: list[float]
    iterations: int
    stop_reason: str  # "tol" | "stall" | "max_iters" | "line_search"


def _safe_eval(fun: Callable[[np.ndarray], float], x: np.ndarray) -> float:
    try:
        value = float(fun(x))
    except ProbeFailure:
        return np.inf
    return value if np.isfinite(value) else np.inf


def minimize_bfgs(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    tol: float,
    max_iters: int,
    stall_tol: float = 1e-12,
    batch_fun: Callable[[np.ndarray], np.ndarray] | None = None,
) -> MinimizeResult:
    """Minimize ``fun`` from ``x0``; stop at ``fun <= tol``, stall, or budget.

    ``grad`` supplies the gradient (analytic or finite-difference, the
    caller decides). ``batch_fun``, if given, evaluates a (B, n) stack of
    points in one call and is used for the line-search ladder.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    f = _safe_eval(fun, x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the initial point")
    trace = [f]
    h_inv = np.eye(n)
    first_update = True
    g = None
    stop = "max_iters"

    for _ in range(max_iters):
        if f <= tol:
            break
        if g is None:
            g = np.asarray(grad(x), dtype=float)
        p = -h_inv @ g
        gp = float(g @ p)
        if gp >= 0.0:
            h_inv = np.eye(n)
            first_update = True
            p = -g
            gp = float(g @ p)
            if gp >= 0.0:
                stop = "line_search"
                break

        alpha0 = min(1.0, 1.0 / max(1.0, float(np.linalg.norm(g)))) if first_update else 1.0
        alphas = alpha0 * SHRINK ** np.arange(MAX_BACKTRACKS)
        values = None
        if batch_fun is not None:
            candidates = x[None, :] + alphas[:, None] * p[None, :]
            values = np.asarray(batch_fun(candidates), dtype=float)

        accepted = None
        for j, alpha in enumerate(alphas):
            fj = values[j] if values is not None else _safe_eval(fun, x + alpha * p)
            if np.isfinite(fj) and fj <= f + ARMIJO_C * alpha * gp:
                accepted = (float(alpha), float(fj))
                break
        if accepted is None:
            stop = "line_search"
            break
        alpha, f_new = accepted

        x_new = x + alpha * p
        g_new = np.asarray(grad(x_new), dtype=float)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > CURVATURE_FLOOR * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            if first_update:
                h_inv = (sy / float(y @ y)) * np.eye(n)
                first_update = False
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
        trace.append(f)

        if len(trace) > STALL_WINDOW:
            f_then = trace[-STALL_WINDOW - 1]
            if (f_then - f) < stall_tol * max(abs(f_then), 1e-300):
                stop = "stall"
                break

    if f <= tol:
        stop = "tol"
    return MinimizeResult(x=x, fun=f, trace=trace, iterations=len(trace) - 1, stop_reason=stop)
