"""Dual-update control: batch calibration, then alternating box-constrained
control solves and forgetting-factor recursive least squares on the
influence matrix.

Model in coefficient space: ``a[k+1] = Q[k] @ g[k] + d`` with
``g[k] = u[k] ** beta``. The RLS recursion runs on ``q = vec(Q)`` with
regressor ``g^T kron I``; since the covariance starts as a scaled identity it
stays of the form ``P_small kron I`` and only the r x r factor is stored.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from walshdm.bvls import BoxLsqProblem, BvlsNotConverged, solve_box_lsq
from walshdm.plant import PlantState
from walshdm.walsh import WalshBasis, project, reconstruct

log = logging.getLogger(__name__)

DEFAULT_BETA = 1.7420
EXCITATION_MEAN = 0.5
EXCITATION_VARIANCE = 0.15
RESCUE_RATIO = 1e-12


class RankDeficientBatch(ValueError):
    """The calibration batch does not determine Q; collect more samples."""


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class InfluenceModel:
    Q: np.ndarray
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not np.all(np.isfinite(self.Q)):
            raise NumericalFailure("influence matrix has non-finite entries")

    @property
    def actuator_count(self) -> int:
        return self.Q.shape[1]

    def to_g(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=np.float64) ** self.beta

    def to_u(self, g: np.ndarray) -> np.ndarray:
        return np.asarray(g, dtype=np.float64) ** (1.0 / self.beta)


@dataclass(frozen=True)
class RlsState:
    model: InfluenceModel
    P_small: np.ndarray
    lam: float = 0.98
    p0_scale: float = 0.05
    step: int = 0
    rescued: bool = False

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("forgetting factor must lie in (0, 1]")
        r = self.model.actuator_count
        if self.P_small.shape != (r, r):
            raise ValueError(f"P_small must be {r}x{r}")

    @classmethod
    def initial(cls, model: InfluenceModel, lam: float = 0.98, p0_scale: float = 0.05) -> "RlsState":
        if p0_scale <= 0:
            raise ValueError("p0_scale must be positive")
        return cls(model, p0_scale * np.eye(model.actuator_count), lam, p0_scale)

    @property
    def Q(self) -> np.ndarray:
        return self.model.Q

    def dense_covariance(self) -> np.ndarray:
        """The full (r M^2 x r M^2) covariance this state represents."""
        return np.kron(self.P_small, np.eye(self.Q.shape[0]))


@dataclass
class ControlRecord:
    """One applied control and the surface it produced.

    Record ``k`` carries the drive ``g[k-1]`` that produced observation
    ``a[k]``, the control error of that observation and the model error of
    ``Q[k-1]`` at it. Record 1 is therefore the least-squares initialization.
    """

    step: int
    u: np.ndarray
    g: np.ndarray
    coeff_error_norm: float
    model_error_norm: float
    rms_surface_error_nm: float
    bvls_converged: bool = True
    surface: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class CalibrationBatch:
    G: np.ndarray  # (r, S), columns g_0 .. g_{S-1}
    A: np.ndarray  # (M^2, S), columns a_1 .. a_S
    U: np.ndarray  # (r, S) raw controls

    def __post_init__(self):
        if self.G.shape[1] != self.A.shape[1]:
            raise ValueError("G and A must hold the same number of samples")
        if self.sample_count < self.G.shape[0]:
            raise RankDeficientBatch(f"need at least r={self.G.shape[0]} samples, got {self.sample_count}")
        if np.any(self.G < 0) or np.any(self.G > 1):
            raise ValueError("batch drives must lie in [0, 1]")

    @property
    def sample_count(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class ControlParams:
    samples: int | None = None  # calibration batch size S; None -> 2 r
    beta: float = DEFAULT_BETA
    lam: float = 0.98
    p0_scale: float = 0.05
    max_steps: int = 30
    stop_tol: float = 0.0
    stall_window: int = 5
    stall_tol: float = 1e-4  # <= 0 disables the stall rule
    adapt: bool = True  # False freezes the model at Q0
    bvls_tol: float = 1e-10
    bvls_max_iter: int | None = None

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lam must lie in (0, 1]")
        if self.p0_scale <= 0:
            raise ValueError("p0_scale must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")


def excitation_controls(r: int, samples: int, seed) -> np.ndarray:
    """Random calibration controls, N(0.5, 0.15) per entry clipped to [0, 1]."""
    rng = np.random.default_rng(seed)
    u = rng.normal(EXCITATION_MEAN, math.sqrt(EXCITATION_VARIANCE), size=(r, samples))
    return np.clip(u, 0.0, 1.0)


def excite_and_collect(plant: PlantState, basis: WalshBasis, samples: int, beta: float, seed) -> CalibrationBatch:
    if plant.n != basis.n:
        raise ValueError(f"plant side {plant.n} does not match basis side {basis.n}")
    r = plant.actuator_count
    if samples < r:
        raise RankDeficientBatch(f"need at least r={r} samples, got {samples}")
    U = excitation_controls(r, samples, seed)
    A = np.empty((basis.coeff_count, samples))
    for k in range(samples):
        A[:, k] = project(basis, plant.observe(U[:, k]))
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("non-finite coefficients in the calibration batch")
    return CalibrationBatch(G=U**beta, A=A, U=U)


def initial_estimate(batch: CalibrationBatch, beta: float = DEFAULT_BETA) -> InfluenceModel:
    """Least-squares influence matrix ``Q0 = A G^T (G G^T)^-1``."""
    G, A = batch.G, batch.A
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficientBatch(
            f"calibration drives are rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.2e}); enlarge S"
        )
    # solve (G G^T) Q^T = G A^T through the stacked least-squares form
    Qt = np.linalg.lstsq(G.T, A.T, rcond=None)[0]
    return InfluenceModel(Qt.T.copy(), beta)


def _solve(Q: np.ndarray, target: np.ndarray, params: ControlParams, x0=None):
    return solve_box_lsq(BoxLsqProblem(Q, target), tol=params.bvls_tol, max_iter=params.bvls_max_iter, x0=x0)


def initial_control(model: InfluenceModel, a_D: np.ndarray, params: ControlParams | None = None):
    """Initial drive from ``min ||a_D - Q0 g||`` over the unit box.

    Returns ``(u0, g0, solution)``. Raises BvlsNotConverged on failure.
    """
    params = params or ControlParams(beta=model.beta)
    a_D = np.asarray(a_D, dtype=np.float64)
    if a_D.shape != (model.Q.shape[0],):
        raise ValueError(f"target has {a_D.size} coefficients, model expects {model.Q.shape[0]}")
    sol = _solve(model.Q, a_D, params)
    if not sol.converged:
        raise BvlsNotConverged(sol)
    return model.to_u(sol.x), sol.x, sol


def control_target(eps_k: np.ndarray, prev_g: np.ndarray, prev_Q: np.ndarray) -> np.ndarray:
    """``t_k = eps_k + Q_{k-1} g_{k-1}``."""
    return eps_k + prev_Q @ prev_g


def control_step(state: RlsState, eps_k: np.ndarray, prev_g: np.ndarray, prev_Q: np.ndarray,
                 params: ControlParams | None = None):
    """Next drive: ``min ||t_k - Q_k g||`` over the unit box.

    Returns ``(u_k, g_k, solution)``; on solver non-convergence the best
    iterate is returned and ``solution.converged`` is False.
    """
    params = params or ControlParams(beta=state.model.beta)
    t = control_target(eps_k, prev_g, prev_Q)
    sol = _solve(state.Q, t, params, x0=prev_g)
    if not sol.converged:
        log.warning("control solve did not converge at step %d (kkt %.2e)", state.step, sol.kkt_residual)
    return state.model.to_u(sol.x), sol.x, sol


def rls_update(state: RlsState, g_k: np.ndarray, a_next: np.ndarray) -> tuple[RlsState, np.ndarray]:
    """One forgetting-factor RLS step on ``vec(Q)``.

    Returns the new state and the model error ``e = a_next - Q_k g_k``.
    """
    Q, P, lam = state.Q, state.P_small, state.lam
    g = np.asarray(g_k, dtype=np.float64)
    a_next = np.asarray(a_next, dtype=np.float64)
    if g.shape != (Q.shape[1],) or a_next.shape != (Q.shape[0],):
        raise ValueError("dimension mismatch in rls_update")
    Pg = P @ g
    s = 1.0 / (lam + g @ Pg)
    gain = Pg * s
    e = a_next - Q @ g
    Q_new = Q + np.outer(e, gain)
    P_new = (P - np.outer(gain, Pg)) / lam
    P_new = 0.5 * (P_new + P_new.T)

    rescued = False
    eig = np.linalg.eigvalsh(P_new)
    if not np.all(np.isfinite(eig)) or eig[0] <= RESCUE_RATIO * eig[-1]:
        if eig[0] <= 0:
            log.warning("RLS covariance lost positive definiteness at step %d; resetting", state.step)
        P_new = state.p0_scale * np.eye(P.shape[0])
        rescued = True
    model = InfluenceModel(Q_new, state.model.beta)
    return replace(state, model=model, P_small=P_new, step=state.step + 1, rescued=rescued), e


def rms(a: np.ndarray, b: np.ndarray | float = 0.0) -> float:
    d = np.asarray(a, dtype=np.float64) - b
    return float(np.sqrt(np.mean(d * d)))


def _stalled(eps_hist: list[float], window: int, tol: float) -> bool:
    if tol <= 0 or len(eps_hist) <= window:
        return False
    old = eps_hist[-1 - window]
    if old == 0:
        return True
    return (old - eps_hist[-1]) / old < tol


def run_dual_update(
    plant: PlantState,
    basis: WalshBasis,
    a_D: np.ndarray,
    params: ControlParams,
    *,
    desired: np.ndarray | None = None,
    seed=0,
    keep_surfaces: bool = True,
    calibration: CalibrationBatch | None = None,
) -> list[ControlRecord]:
    """Run calibration and the closed loop; return one record per observation.

    ``desired`` is the pixel-space target used for the RMS metric (defaults
    to the reconstruction of ``a_D``). ``seed`` drives the excitation batch.
    """
    a_D = np.asarray(a_D, dtype=np.float64)
    if a_D.shape != (basis.coeff_count,):
        raise ValueError(f"a_D must have {basis.coeff_count} entries")
    W_D = reconstruct(basis, a_D) if desired is None else np.asarray(desired, dtype=np.float64)
    r = plant.actuator_count
    if calibration is None:
        S = params.samples if params.samples is not None else 2 * r
        calibration = excite_and_collect(plant, basis, S, params.beta, seed)
    model = initial_estimate(calibration, params.beta)
    u, g, _ = initial_control(model, a_D, params)
    state = RlsState.initial(model, params.lam, params.p0_scale)
    converged = True

    records: list[ControlRecord] = []
    eps_hist: list[float] = []
    for k in range(1, params.max_steps + 1):
        # Step 2 of the previous iteration: observe, project, update the model.
        W = plant.observe(u)
        a = project(basis, W)
        eps = a_D - a
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(W))):
            raise NumericalFailure(f"non-finite observation at step {k}")
        prev_Q = state.Q
        if params.adapt:
            state, e = rls_update(state, g, a)
        else:
            e = a - prev_Q @ g
        records.append(ControlRecord(
            step=k,
            u=u,
            g=g,
            coeff_error_norm=float(np.linalg.norm(eps)),
            model_error_norm=float(np.linalg.norm(e)),
            rms_surface_error_nm=rms(W_D, W),
            bvls_converged=converged,
            surface=W if keep_surfaces else None,
        ))
        eps_hist.append(records[-1].coeff_error_norm)
        if eps_hist[-1] <= params.stop_tol or _stalled(eps_hist, params.stall_window, params.stall_tol):
            break
        if k == params.max_steps:
            break
        # Step 1: new control from the updated model.
        u, g, sol = control_step(state, eps, g, prev_Q, params)
        converged = sol.converged
        if not np.all(np.isfinite(g)):
            raise NumericalFailure(f"non-finite control at step {k}")
    return records
