"""Desired-shape pipeline: Walsh combination, Gaussian low-pass, offset, scale."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from walshdm.walsh import WalshBasis, pattern_matrix, project


def default_support(sigma_px: float) -> int:
    """6 sigma + 1, rounded up to an odd integer."""
    s = math.ceil(6 * sigma_px + 1)
    return s if s % 2 else s + 1


@dataclass(frozen=True)
class ShapeRecipe:
    terms: tuple[tuple[int, int, float], ...]
    filter_sigma_px: float
    filter_support_px: int | None = None
    offset: float = -1.0
    target_scale_nm: float = 400.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((int(p), int(q), float(c)) for p, q, c in self.terms))
        if self.filter_sigma_px <= 0:
            raise ValueError("filter_sigma_px must be positive")
        if self.filter_support_px is None:
            object.__setattr__(self, "filter_support_px", default_support(self.filter_sigma_px))
        s = self.filter_support_px
        if s < 3 or s % 2 == 0:
            raise ValueError(f"filter support must be an odd integer >= 3, got {s}")
        if self.target_scale_nm <= 0:
            raise ValueError("target_scale_nm must be positive")


def raw_shape(basis: WalshBasis, terms) -> np.ndarray:
    """Sum of ``coeff * Z[p,q]`` over ``(p, q, coeff)`` terms."""
    w = np.zeros((basis.n, basis.n))
    for p, q, c in terms:
        w += c * pattern_matrix(basis, p, q)
    return w


def gaussian_kernel(sigma_px: float, support_px: int) -> np.ndarray:
    """Normalized 1D Gaussian taps; the 2D kernel is their outer product."""
    half = support_px // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma_px) ** 2)
    return k / k.sum()


def gaussian_filter(surface: np.ndarray, sigma_px: float, support_px: int) -> np.ndarray:
    """Separable truncated-Gaussian low-pass with reflective boundaries."""
    w = np.asarray(surface, dtype=np.float64)
    if sigma_px <= 0:
        raise ValueError("sigma must be positive")
    if support_px < 3 or support_px % 2 == 0:
        raise ValueError("support must be an odd integer >= 3")
    if support_px > min(w.shape):
        raise ValueError(f"filter support {support_px} exceeds surface side {min(w.shape)}")
    k = gaussian_kernel(sigma_px, support_px)
    out = correlate1d(w, k, axis=0, mode="reflect")
    return correlate1d(out, k, axis=1, mode="reflect")


def finalize_target(basis: WalshBasis, surface: np.ndarray, offset: float, scale_nm: float):
    """``W_D = scale_nm * (surface + offset)``; returns ``(W_D, a_D)``.

    The offset is applied before scaling.
    """
    w = np.asarray(surface, dtype=np.float64)
    if w.shape != (basis.n, basis.n):
        raise ValueError(f"surface shape {w.shape} does not match basis side {basis.n}")
    W_D = scale_nm * (w + offset)
    return W_D, project(basis, W_D)


def desired_shape(basis: WalshBasis, recipe: ShapeRecipe):
    """Full pipeline for a recipe; returns ``(W_D, a_D)``."""
    raw = raw_shape(basis, recipe.terms)
    smooth = gaussian_filter(raw, recipe.filter_sigma_px, recipe.filter_support_px)
    return finalize_target(basis, smooth, recipe.offset, recipe.target_scale_nm)
