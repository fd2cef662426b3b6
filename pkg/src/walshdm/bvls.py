"""Bounded-variable least squares: min ||y - A x||^2 subject to lower <= x <= upper.

Active-set method after Stark & Parker. Variables are either free (solved for
by unconstrained least squares on the free columns) or pinned at a bound. Each
outer iteration releases the bound variable with the largest KKT violation;
the inner loop then moves toward the free-set minimizer, pinning any variable
that would leave the box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RCOND = 1e-12
DEFAULT_TOL = 1e-10

_FREE, _LOWER, _UPPER = 0, -1, 1


class BvlsNotConverged(RuntimeError):
    """Raised by strict callers; carries the best iterate found."""

    def __init__(self, solution: "BoxLsqSolution"):
        super().__init__(
            f"BVLS did not converge in {solution.iterations} iterations "
            f"(kkt residual {solution.kkt_residual:.3e})"
        )
        self.solution = solution


@dataclass(frozen=True)
class BoxLsqProblem:
    A: np.ndarray
    y: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).ravel()
        m, r = A.shape
        if m < 1 or r < 1:
            raise ValueError("A must have at least one row and one column")
        if y.shape != (m,):
            raise ValueError(f"y has length {y.size}, A has {m} rows")
        lower = np.zeros(r) if self.lower is None else np.broadcast_to(np.asarray(self.lower, float), (r,)).copy()
        upper = np.ones(r) if self.upper is None else np.broadcast_to(np.asarray(self.upper, float), (r,)).copy()
        for name, arr in (("A", A), ("y", y), ("lower", lower), ("upper", upper)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(lower >= upper):
            raise ValueError("lower must be strictly below upper")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class BoxLsqSolution:
    x: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def kkt_residual(problem: BoxLsqProblem, x: np.ndarray) -> float:
    """Largest scaled KKT violation at ``x``.

    With g = 2 A^T (A x - y) and scale = 1 + ||A^T y||_inf: interior
    coordinates contribute |g_i|, coordinates at the lower bound contribute
    max(0, -g_i), at the upper bound max(0, g_i).
    """
    A, y = problem.A, problem.y
    g = 2.0 * (A.T @ (A @ x - y))
    scale = 1.0 + np.max(np.abs(A.T @ y))
    at_lo = x <= problem.lower
    at_hi = x >= problem.upper
    viol = np.abs(g)
    viol[at_lo] = np.maximum(0.0, -g[at_lo])
    viol[at_hi] = np.maximum(0.0, g[at_hi])
    return float(np.max(viol) / scale)


def _objective(A, y, x) -> float:
    res = y - A @ x
    return float(res @ res)


def _free_solve(A, b, free):
    Af = A[:, free]
    z = np.linalg.lstsq(Af, b, rcond=RCOND)[0]
    # one step of iterative refinement
    z += np.linalg.lstsq(Af, b - Af @ z, rcond=RCOND)[0]
    return z


def solve_box_lsq(
    problem: BoxLsqProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
) -> BoxLsqSolution:
    """Solve the box-constrained least-squares problem.

    Parameters
    ----------
    problem : BoxLsqProblem
    tol : float
        KKT tolerance, relative to ``1 + ||A^T y||_inf``.
    max_iter : int, optional
        Limit on outer (release) iterations, default ``10 * r``.
    x0 : array, optional
        Warm start; clipped into the box.

    Returns
    -------
    BoxLsqSolution
        ``converged`` is False when the iteration limit was hit; ``x`` is
        then the best feasible iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, y, lo, hi = problem.A, problem.y, problem.lower, problem.upper
    r = A.shape[1]
    if max_iter is None:
        max_iter = 10 * r
    thresh = 0.5 * tol * (1.0 + np.max(np.abs(A.T @ y)))

    state = np.full(r, _LOWER)
    if x0 is None:
        x = lo.copy()
    else:
        x = np.clip(np.asarray(x0, dtype=np.float64).ravel(), lo, hi)
        state[:] = _FREE
        state[x <= lo] = _LOWER
        state[x >= hi] = _UPPER
        x[state == _LOWER] = lo[state == _LOWER]
        x[state == _UPPER] = hi[state == _UPPER]

    history = [_objective(A, y, x)]

    def descend(released: int | None) -> bool:
        """Inner loop; returns False if the released variable moved outward."""
        first = True
        while True:
            free = np.flatnonzero(state == _FREE)
            if free.size == 0:
                return True
            bound = state != _FREE
            b = y - A[:, bound] @ x[bound]
            z = _free_solve(A, b, free)
            if first and released is not None:
                k = np.searchsorted(free, released)
                came_from_lo = x[released] <= lo[released]
                if (came_from_lo and z[k] <= lo[released]) or (not came_from_lo and z[k] >= hi[released]):
                    state[released] = _LOWER if came_from_lo else _UPPER
                    return False
            first = False
            xf = x[free]
            inside = (z > lo[free]) & (z < hi[free])
            if np.all(inside):
                x[free] = z
                history.append(_objective(A, y, x))
                return True
            step = z - xf
            alpha = np.ones(free.size)
            below = z <= lo[free]
            above = z >= hi[free]
            with np.errstate(divide="ignore", invalid="ignore"):
                alpha[below] = (lo[free][below] - xf[below]) / step[below]
                alpha[above] = (hi[free][above] - xf[above]) / step[above]
            alpha = np.clip(np.nan_to_num(alpha, nan=0.0), 0.0, 1.0)
            a_min = alpha.min()
            x[free] = xf + a_min * step
            hit = ~inside & (alpha <= a_min + 1e-14)
            for i in free[hit & below]:
                x[i], state[i] = lo[i], _LOWER
            for i in free[hit & above]:
                x[i], state[i] = hi[i], _UPPER
            # roundoff can leave free entries a hair outside the box
            f = free[state[free] == _FREE]
            x[f] = np.clip(x[f], lo[f], hi[f])
            history.append(_objective(A, y, x))

    if np.any(state == _FREE):
        descend(None)

    blocked = np.zeros(r, dtype=bool)
    converged = False
    iterations = 0
    while iterations < max_iter:
        w = A.T @ (y - A @ x)
        viol = np.where(state == _LOWER, w, np.where(state == _UPPER, -w, 0.0))
        viol[blocked] = 0.0
        t = int(np.argmax(viol))
        if viol[t] <= thresh:
            converged = True
            break
        iterations += 1
        state[t] = _FREE
        if descend(t):
            blocked[:] = False
        else:
            blocked[t] = True

    kkt = kkt_residual(problem, x)
    return BoxLsqSolution(
        x=x,
        objective=_objective(A, y, x),
        iterations=iterations,
        kkt_residual=kkt,
        converged=converged and kkt <= tol,
        history=history,
    )
