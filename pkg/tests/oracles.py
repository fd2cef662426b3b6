"""Independent reference implementations used only by the tests.

None of these import the package's numerical code; they rebuild each
quantity from its literal definition.
"""
from __future__ import annotations

import numpy as np


def walsh_by_sorting(order: int) -> np.ndarray:
    """Sequency-ordered Walsh vectors as columns, by sorting Sylvester rows on sign changes."""
    h = np.array([[1]], dtype=np.int64)
    for _ in range(order):
        h = np.block([[h, h], [h, -h]])
    changes = [int(np.count_nonzero(row[1:] != row[:-1])) for row in h]
    return h[np.argsort(changes, kind="stable")].T.copy()


def pattern_by_steps(gamma: np.ndarray, M: int) -> dict[tuple[int, int], np.ndarray]:
    """Pattern matrices built by stacking rows, transposing, then multiplying (1-based keys)."""
    n = gamma.shape[0]
    Z = {}
    for q in range(1, M + 1):
        Z[1, q] = np.vstack([gamma[:, q - 1]] * n)
    for q in range(1, M + 1):
        Z[q, 1] = Z[1, q].T
    for p in range(2, M + 1):
        for q in range(2, M + 1):
            Z[p, q] = Z[p, 1] * Z[1, q]
    return Z


def explicit_projection(gamma: np.ndarray, M: int) -> np.ndarray:
    """Dense M^2 x n^2 projection matrix; row block i lists z_{1,i} .. z_{M,i}."""
    n = gamma.shape[0]
    Z = pattern_by_steps(gamma, M)
    rows = []
    for i in range(1, M + 1):
        for p in range(1, M + 1):
            rows.append(Z[p, i].ravel(order="F"))
    return np.array(rows, dtype=np.float64) / n**2


def projected_gradient(A: np.ndarray, y: np.ndarray, max_iter: int = 1_000_000, tol: float = 1e-15) -> np.ndarray:
    """Box [0,1] least squares by projected gradient with backtracking line search."""
    r = A.shape[1]
    x = np.full(r, 0.5)
    f = lambda v: float(np.sum((A @ v - y) ** 2))
    fx = f(x)
    step = 1.0 / max(2.0 * np.linalg.norm(A, 2) ** 2, 1e-300)
    for _ in range(max_iter):
        grad = 2.0 * A.T @ (A @ x - y)
        t = step * 4.0
        while True:
            xn = np.clip(x - t * grad, 0.0, 1.0)
            fn = f(xn)
            if fn <= fx - (0.5 / t) * np.sum((xn - x) ** 2) + 1e-300 or t < 1e-20:
                break
            t *= 0.5
        moved = np.max(np.abs(xn - x))
        x, fx = xn, fn
        if moved < tol:
            break
    return x


def dense_rls(q0: np.ndarray, P0: np.ndarray, gs, as_, lam: float):
    """Literal recursion on the full parameter vector, one step per (g_k, a_{k+1})."""
    q, P = q0.copy(), P0.copy()
    m = None
    out = []
    for g, a in zip(gs, as_):
        m = a.size
        G = np.kron(g.reshape(1, -1), np.eye(m))
        S = np.linalg.inv(lam * np.eye(m) + G @ P @ G.T)
        L = P @ G.T @ S
        P = P / lam - (L @ G @ P) / lam
        e = a - G @ q
        q = q + L @ e
        out.append((q.copy(), P.copy(), e.copy()))
    return out


def rms_reference(a: np.ndarray, b: np.ndarray) -> float:
    """Cell-by-cell sum of squares, as one would in a spreadsheet."""
    total, count = 0.0, 0
    for x, y in zip(np.asarray(a).ravel().tolist(), np.asarray(b).ravel().tolist()):
        total += (x - y) ** 2
        count += 1
    return (total / count) ** 0.5
