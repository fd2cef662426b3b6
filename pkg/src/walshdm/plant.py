"""Synthetic deformable mirror used as the ground-truth plant.

Each actuator deforms the surface with an isotropic Gaussian bump. The
surface responds linearly to ``g = u ** beta_true``, so a mirror driven with
``u`` in [0, 1] produces ``W = sum_i g_i * field_i + noise``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from walshdm.walsh import WalshBasis, project_stack

log = logging.getLogger(__name__)

KERNEL_PITCH_RATIO = 0.45


def _axis_centers(count: int, n: int) -> tuple[np.ndarray, float]:
    if count == 1:
        return np.array([float(n // 2)]), float(n)
    return np.round(np.linspace(0, n - 1, count)), (n - 1) / (count - 1)


@dataclass(frozen=True)
class ActuatorGrid:
    """Rectangular actuator layout; ``positions`` holds (x, y) pixel coordinates."""

    rows: int
    cols: int
    active_mask: np.ndarray
    positions: np.ndarray
    pitch_px: float

    @classmethod
    def regular(cls, rows: int, cols: int, n: int, inactive_corners: bool = False) -> "ActuatorGrid":
        """Evenly spaced rows x cols grid whose outer actuators sit on the surface edges.

        Centers are rounded to whole pixels; a single row or column is centred.
        """
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least one row and column")
        mask = np.ones((rows, cols), dtype=bool)
        if inactive_corners:
            if rows < 2 or cols < 2:
                raise ValueError("inactive corners need at least a 2x2 grid")
            mask[0, 0] = mask[0, -1] = mask[-1, 0] = mask[-1, -1] = False
        ys, pitch_y = _axis_centers(rows, n)
        xs, pitch_x = _axis_centers(cols, n)
        rr, cc = np.nonzero(mask)
        positions = np.column_stack([xs[cc], ys[rr]])
        return cls(rows, cols, mask, positions, min(pitch_x, pitch_y))

    @property
    def count(self) -> int:
        return int(self.active_mask.sum())

    def validate(self, n: int) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (self.count, 2):
            raise ValueError(f"positions shape {pos.shape} does not match {self.count} active actuators")
        if self.count < 1:
            raise ValueError("grid has no active actuators")
        if np.any(pos < 0) or np.any(pos > n - 1):
            raise ValueError("actuator position outside the surface")
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.any(d < 0.5):
            raise ValueError("overlapping actuator positions")


@dataclass(frozen=True)
class PlantConfig:
    grid: ActuatorGrid
    n: int
    beta_true: float = 1.742
    kernel_sigma_px: float | None = None
    stroke_nm: float = 3500.0
    noise_sigma_nm: float = 2.0
    drift_rate: float = 0.0
    seed: int = 0
    # -1: actuators pull the surface down (electrostatic MEMS); +1: push up
    polarity: int = 1

    def __post_init__(self):
        if self.beta_true <= 0:
            raise ValueError("beta_true must be positive")
        if self.kernel_sigma_px is not None and self.kernel_sigma_px <= 0:
            raise ValueError("kernel_sigma_px must be positive")
        if self.stroke_nm <= 0:
            raise ValueError("stroke_nm must be positive")
        if self.noise_sigma_nm < 0 or self.drift_rate < 0:
            raise ValueError("noise_sigma_nm and drift_rate must be nonnegative")
        if self.polarity not in (-1, 1):
            raise ValueError("polarity must be +1 or -1")

    @property
    def sigma_px(self) -> float:
        if self.kernel_sigma_px is not None:
            return self.kernel_sigma_px
        return KERNEL_PITCH_RATIO * self.grid.pitch_px


def drift_profile(positions: np.ndarray, n: int) -> np.ndarray:
    """Smooth per-actuator profile in [-1, 1]: a tilt across the aperture."""
    c = (n - 1) / 2.0
    x = (positions[:, 0] - c) / max(c, 1.0)
    y = (positions[:, 1] - c) / max(c, 1.0)
    return np.clip(0.5 * (x + y) + 0.5 * x * y, -1.0, 1.0)


@dataclass
class PlantState:
    """Mutable mirror; single owner, calls must be serialized."""

    config: PlantConfig
    fields: np.ndarray  # (r, n, n) response of each actuator at g_i = 1, step 0
    offset: np.ndarray | None = None
    step: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    @property
    def actuator_count(self) -> int:
        return self.fields.shape[0]

    @property
    def n(self) -> int:
        return self.config.n

    def amplitudes(self, step: int | None = None) -> np.ndarray:
        """Per-actuator gain multipliers at ``step`` (ones without drift)."""
        k = self.step if step is None else step
        rate = self.config.drift_rate
        if rate == 0:
            return np.ones(self.actuator_count)
        prof = drift_profile(np.asarray(self.config.grid.positions, float), self.n)
        return 1.0 + rate * k * prof

    def current_fields(self) -> np.ndarray:
        return self.fields * self.amplitudes()[:, None, None]

    def influence(self) -> np.ndarray:
        """Pixel-space influence matrix (n^2 x r), columns are column-major vec."""
        f = self.current_fields()
        return f.transpose(2, 1, 0).reshape(self.n * self.n, -1)

    def coefficient_influence(self, basis: WalshBasis) -> np.ndarray:
        """True influence matrix in Walsh-coefficient space, shape (M^2, r)."""
        return project_stack(basis, self.current_fields())

    def response(self, g: np.ndarray) -> np.ndarray:
        """Noiseless surface for linear drive ``g`` at the current step (no side effects)."""
        g = np.asarray(g, dtype=np.float64)
        w = np.tensordot(g, self.current_fields(), axes=1)
        if self.offset is not None:
            w = w + self.offset
        return w

    def observe(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64).ravel()
        if u.shape != (self.actuator_count,):
            raise ValueError(f"expected {self.actuator_count} controls, got {u.size}")
        if not np.all(np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
            raise ValueError("control outside [0, 1]")
        w = self.response(u ** self.config.beta_true)
        if self.config.noise_sigma_nm > 0:
            w = w + self.rng.normal(0.0, self.config.noise_sigma_nm, size=w.shape)
        self.step += 1
        return w


def gaussian_fields(positions: np.ndarray, n: int, sigma: float, peak: float) -> np.ndarray:
    ax = np.arange(n, dtype=np.float64)
    gx = np.exp(-((ax[None, :] - positions[:, 0:1]) ** 2) / (2 * sigma**2))
    gy = np.exp(-((ax[None, :] - positions[:, 1:2]) ** 2) / (2 * sigma**2))
    # field[i, row, col] = gy[i, row] * gx[i, col]
    return peak * gy[:, :, None] * gx[:, None, :]


def build_plant(config: PlantConfig, offset: np.ndarray | None = None) -> PlantState:
    """Synthesize the mirror described by ``config``.

    ``offset`` is an optional fixed surface added to every observation
    (a constant disturbance).
    """
    config.grid.validate(config.n)
    pos = np.asarray(config.grid.positions, dtype=np.float64)
    fields = gaussian_fields(pos, config.n, config.sigma_px, config.polarity * config.stroke_nm)
    if offset is not None:
        offset = np.asarray(offset, dtype=np.float64)
        if offset.shape != (config.n, config.n):
            raise ValueError("offset surface has the wrong shape")
    return PlantState(config, fields, offset=offset, rng=np.random.default_rng(config.seed))


def observe(state: PlantState, u: np.ndarray) -> np.ndarray:
    return state.observe(u)
