"""Sequency-ordered Walsh functions and the 2D pattern-matrix expansion.

A surface ``W`` (n x n, n = 2**V) is approximated by ``sum a[p,q] * Z[p,q]``
over the first M Walsh functions in each direction, where
``Z[p,q][i,j] = gamma_p[i] * gamma_q[j]``. Coefficient vectors are stacked
column-major in the (p, q) grid: ``a = [a_1; ...; a_M]`` with
``a_q = [a[1,q], ..., a[M,q]]``, so index ``(q-1)*M + (p-1)`` holds ``a[p,q]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

MAX_ORDER = 12


def sequency_permutation(order: int) -> np.ndarray:
    """Natural-order Hadamard row index for each sequency index.

    Sequency row ``i`` is Hadamard row ``bitreverse(gray(i))``.
    """
    n = 1 << order
    idx = np.arange(n)
    gray = idx ^ (idx >> 1)
    rev = np.zeros(n, dtype=np.int64)
    for bit in range(order):
        rev |= ((gray >> bit) & 1) << (order - 1 - bit)
    return rev


def sign_changes(v: np.ndarray) -> int:
    return int(np.count_nonzero(np.diff(np.sign(v)) != 0))


@dataclass(frozen=True)
class WalshBasis:
    """Walsh vectors of order V (columns of ``vectors``) truncated to M modes."""

    order: int
    mode_count: int
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return 1 << self.order

    @property
    def gamma(self) -> np.ndarray:
        """First M basis columns, shape (n, M)."""
        return self.vectors[:, : self.mode_count]

    @property
    def coeff_count(self) -> int:
        return self.mode_count * self.mode_count

    def index(self, p: int, q: int) -> int:
        """Position of ``a[p,q]`` (1-based p, q) in a stacked coefficient vector."""
        self._check_mode(p, "p")
        self._check_mode(q, "q")
        return (q - 1) * self.mode_count + (p - 1)

    def _check_mode(self, i: int, name: str) -> None:
        if not 1 <= i <= self.mode_count:
            raise IndexError(f"{name}={i} outside 1..{self.mode_count}")


def build_basis(order: int, mode_count: int) -> WalshBasis:
    if order < 1 or mode_count < 1:
        raise ValueError("order and mode_count must be positive")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds limit {MAX_ORDER}")
    n = 1 << order
    if mode_count > n:
        raise ValueError(f"mode_count {mode_count} exceeds n={n}")
    h = hadamard(n).astype(np.float64)
    vectors = h[sequency_permutation(order)].T.copy()
    vectors.setflags(write=False)
    return WalshBasis(order, mode_count, vectors)


def pattern_matrix(basis: WalshBasis, p: int, q: int) -> np.ndarray:
    """Pattern matrix ``Z[p,q]`` (1-based indices), entries +-1."""
    basis._check_mode(p, "p")
    basis._check_mode(q, "q")
    return np.outer(basis.vectors[:, p - 1], basis.vectors[:, q - 1])


def _check_surface(basis: WalshBasis, surface: np.ndarray) -> np.ndarray:
    w = np.asarray(surface, dtype=np.float64)
    if w.shape != (basis.n, basis.n):
        raise ValueError(f"surface shape {w.shape} does not match basis side {basis.n}")
    return w


def coeff_grid(basis: WalshBasis, surface: np.ndarray) -> np.ndarray:
    """Coefficients as an (M, M) grid ``C[p-1, q-1] = a[p,q]``."""
    w = _check_surface(basis, surface)
    g = basis.gamma
    return g.T @ w @ g / (basis.n * basis.n)


def project(basis: WalshBasis, surface: np.ndarray) -> np.ndarray:
    """Stacked coefficient vector of length M**2.

    Equivalent to multiplying ``vec(W)`` by the explicit projection matrix,
    computed separably in O(M n^2) without forming that matrix.
    """
    return coeff_grid(basis, surface).ravel(order="F")


def project_stack(basis: WalshBasis, surfaces: np.ndarray) -> np.ndarray:
    """Project a stack of surfaces (k, n, n) into columns of an (M**2, k) matrix."""
    s = np.asarray(surfaces, dtype=np.float64)
    if s.ndim != 3 or s.shape[1:] != (basis.n, basis.n):
        raise ValueError(f"expected (k, {basis.n}, {basis.n}) stack, got {s.shape}")
    g = basis.gamma
    grids = np.einsum("ip,kij,jq->kqp", g, s, g) / (basis.n * basis.n)
    return grids.reshape(s.shape[0], -1).T


def reconstruct(basis: WalshBasis, coeffs: np.ndarray) -> np.ndarray:
    a = np.asarray(coeffs, dtype=np.float64)
    if a.shape != (basis.coeff_count,):
        raise ValueError(f"expected {basis.coeff_count} coefficients, got shape {a.shape}")
    grid = a.reshape(basis.mode_count, basis.mode_count, order="F")
    g = basis.gamma
    return g @ grid @ g.T
