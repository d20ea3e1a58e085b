"""Identification of jump-system dynamics from a single trajectory.

Per-mode clipped least squares recovers the mode matrices; the transition
matrix comes from empirical jump frequencies over the full mode sequence.
Samples with outsized states or explorations are discarded before the
regression, which keeps the estimator well behaved even when stability
holds only in mean square and states are heavy tailed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateRegressors, ShapeMismatch
from .markov import MarkovChain, estimate_transition
from .mjs import MjsModel, ModeController, NoiseSpec, Trajectory


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SysidConfig:
    """Knobs for the clipped least-squares estimator.

    ``c_x`` and ``c_z`` scale the clipping thresholds
    ``c_x * sigma_w * sqrt(log T)`` on states and ``c_z * sigma_z`` on
    explorations; ``None`` resolves to 5*sqrt(n) and 5*sqrt(p), which keep
    essentially all Gaussian-norm mass while preserving the dimensional
    scaling. Modes with fewer clipped samples than ``min_samples_per_mode``
    (default twice the regressor width) are flagged and zero filled instead
    of failing.
    """

    c_x: float | None = None
    c_z: float | None = None
    known_B: bool = False
    min_samples_per_mode: int | None = None

    def __post_init__(self):
        if self.c_x is not None and self.c_x <= 0:
            raise ValueError("c_x must be positive")
        if self.c_z is not None and self.c_z <= 0:
            raise ValueError("c_z must be positive")

    def resolve(self, n: int, p: int) -> tuple[float, float, int]:
        c_x = 5.0 * math.sqrt(n) if self.c_x is None else self.c_x
        c_z = 5.0 * math.sqrt(max(p, 1)) if self.c_z is None else self.c_z
        width = n if self.known_B else n + p
        min_samples = 2 * width if self.min_samples_per_mode is None else self.min_samples_per_mode
        if min_samples < width:
            raise ValueError(f"min_samples_per_mode must be at least {width}")
        return c_x, c_z, min_samples


@dataclass(frozen=True)
class SysidResult:
    """Estimated dynamics plus the bookkeeping behind them.

    ``theta1``/``theta2`` hold the raw scaled regression output, from which
    the estimates are recovered as ``B_hat = theta2 / sigma_z`` and
    ``A_hat = theta1 / sigma_w - B_hat @ K``.
    """

    A_hat: np.ndarray
    B_hat: np.ndarray
    T_hat: MarkovChain
    samples_per_mode: np.ndarray
    flagged_modes: tuple[int, ...]
    unvisited_rows: tuple[int, ...]
    theta1: np.ndarray = field(repr=False)
    theta2: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "A_hat", _freeze(np.asarray(self.A_hat, dtype=float)))
        object.__setattr__(self, "B_hat", _freeze(np.asarray(self.B_hat, dtype=float)))
        object.__setattr__(self, "samples_per_mode", _freeze(np.asarray(self.samples_per_mode)))
        object.__setattr__(self, "theta1", _freeze(np.asarray(self.theta1, dtype=float)))
        object.__setattr__(self, "theta2", _freeze(np.asarray(self.theta2, dtype=float)))

    def to_model(self) -> MjsModel:
        return MjsModel(A=self.A_hat, B=self.B_hat, chain=self.T_hat)

    def to_json_dict(self) -> dict:
        s, n = self.A_hat.shape[0], self.A_hat.shape[1]
        return {
            "n": n,
            "p": self.B_hat.shape[2],
            "s": s,
            "A": [self.A_hat[i].tolist() for i in range(s)],
            "B": [self.B_hat[i].tolist() for i in range(s)],
            "T": self.T_hat.T.tolist(),
            "samples_per_mode": self.samples_per_mode.tolist(),
            "flagged_modes": list(self.flagged_modes),
        }


@dataclass(frozen=True)
class EstimationError:
    """Worst-mode estimation errors against a reference model."""

    err_A: float
    err_B: float
    err_T: float
    rel_Psi: float


def clip_indices(
    traj: Trajectory,
    noise: NoiseSpec,
    config: SysidConfig,
    mode: int,
) -> np.ndarray:
    """Transition indices kept for one mode's regression.

    Keeps t with ``modes[t] == mode``, ``||x_t|| <= c_x sigma_w sqrt(log T)``
    and ``||z_t|| <= c_z sigma_z`` (natural log, T the transition count).
    """
    T_len = traj.horizon
    if T_len < 2:
        raise ValueError("trajectory must contain at least two transitions")
    n = traj.states.shape[1]
    p = traj.explorations.shape[1]
    c_x, c_z, _ = config.resolve(n, p)
    thr_x = c_x * noise.sigma_w * math.sqrt(math.log(T_len))
    thr_z = c_z * noise.sigma_z
    state_norms = np.linalg.norm(traj.states[:T_len], axis=1)
    expl_norms = np.linalg.norm(traj.explorations, axis=1)
    keep = (traj.modes[:T_len] == mode) & (state_norms <= thr_x) & (expl_norms <= thr_z)
    return np.flatnonzero(keep)


def _least_squares(H: np.ndarray, Y: np.ndarray, mode: int) -> np.ndarray:
    """Thin-QR least squares; raises DegenerateRegressors on rank collapse."""
    q, r = np.linalg.qr(H)
    sv = scipy.linalg.svdvals(r)
    if sv[0] == 0.0 or sv[-1] / sv[0] < 1e-10:
        raise DegenerateRegressors(f"regressors for mode {mode} are rank deficient")
    return scipy.linalg.solve_triangular(r, q.T @ Y).T


def mjs_sysid(
    traj: Trajectory,
    controller: ModeController,
    noise: NoiseSpec,
    config: SysidConfig,
) -> SysidResult:
    """Estimate mode matrices and the transition matrix from one rollout.

    For each mode, regresses the next state on the scaled pair
    ``[x_t / sigma_w, z_t / sigma_z]`` over the clipped sample set, then
    unscales and removes the feedback contribution of the generating
    controller. The transition estimate uses the full, unclipped mode
    sequence. Modes with too few clipped samples are flagged and zero
    filled so callers can proceed.
    """
    if noise.sigma_w <= 0 or noise.sigma_z <= 0:
        raise ValueError("mjs_sysid needs sigma_w > 0 and sigma_z > 0; see the known-B variant")
    s, p, n = controller.K.shape
    if traj.states.shape[1] != n or traj.explorations.shape[1] != p:
        raise ShapeMismatch("trajectory dimensions incompatible with controller")
    _, _, min_samples = config.resolve(n, p)

    A_hat = np.zeros((s, n, n))
    B_hat = np.zeros((s, n, p))
    theta1 = np.zeros((s, n, n))
    theta2 = np.zeros((s, n, p))
    samples = np.zeros(s, dtype=np.int64)
    flagged = []
    for i in range(s):
        idx = clip_indices(traj, noise, config, i)
        samples[i] = idx.size
        if idx.size < min_samples:
            flagged.append(i)
            continue
        H = np.hstack([traj.states[idx] / noise.sigma_w, traj.explorations[idx] / noise.sigma_z])
        Y = traj.states[idx + 1]
        theta = _least_squares(H, Y, i)
        theta1[i] = theta[:, :n]
        theta2[i] = theta[:, n:]
        B_hat[i] = theta2[i] / noise.sigma_z
        A_hat[i] = theta1[i] / noise.sigma_w - B_hat[i] @ controller.K[i]

    est = estimate_transition(traj.modes, num_modes=s)
    return SysidResult(
        A_hat=A_hat,
        B_hat=B_hat,
        T_hat=est.chain,
        samples_per_mode=samples,
        flagged_modes=tuple(flagged),
        unvisited_rows=est.unvisited,
        theta1=theta1,
        theta2=theta2,
    )


def mjs_sysid_known_B(
    traj: Trajectory,
    controller: ModeController,
    model_B: np.ndarray,
    noise: NoiseSpec,
    config: SysidConfig,
) -> SysidResult:
    """State-matrix estimation when the input matrices are known.

    Regresses ``x_{t+1} - B_i u_t`` on ``x_t / sigma_w`` per mode; no
    exploration noise is required, so the rollout may use sigma_z = 0.
    The supplied input matrices are echoed in the result.
    """
    if noise.sigma_w <= 0:
        raise ValueError("sigma_w must be positive")
    s, p, n = controller.K.shape
    model_B = np.asarray(model_B, dtype=float)
    if model_B.shape != (s, n, p):
        raise ShapeMismatch(f"known B must have shape ({s}, {n}, {p}), got {model_B.shape}")
    if traj.states.shape[1] != n or traj.inputs.shape[1] != p:
        raise ShapeMismatch("trajectory dimensions incompatible with controller")
    cfg = SysidConfig(
        c_x=config.c_x,
        c_z=config.c_z,
        known_B=True,
        min_samples_per_mode=config.min_samples_per_mode,
    )
    _, _, min_samples = cfg.resolve(n, p)

    A_hat = np.zeros((s, n, n))
    theta1 = np.zeros((s, n, n))
    samples = np.zeros(s, dtype=np.int64)
    flagged = []
    for i in range(s):
        idx = clip_indices(traj, noise, cfg, i)
        samples[i] = idx.size
        if idx.size < min_samples:
            flagged.append(i)
            continue
        H = traj.states[idx] / noise.sigma_w
        Y = traj.states[idx + 1] - traj.inputs[idx] @ model_B[i].T
        theta1[i] = _least_squares(H, Y, i)
        A_hat[i] = theta1[i] / noise.sigma_w

    est = estimate_transition(traj.modes, num_modes=s)
    return SysidResult(
        A_hat=A_hat,
        B_hat=model_B,
        T_hat=est.chain,
        samples_per_mode=samples,
        flagged_modes=tuple(flagged),
        unvisited_rows=est.unvisited,
        theta1=theta1,
        theta2=np.zeros((s, n, p)),
    )


def estimation_error(result: SysidResult | MjsModel, truth: MjsModel) -> EstimationError:
    """Spectral-norm error metrics of an estimate against the truth.

    ``err_A``/``err_B`` are worst-mode spectral norms of the differences,
    ``err_T`` the max absolute row sum of the transition difference, and
    ``rel_Psi`` the worst-mode relative error of the stacked pair
    ``[A_i, B_i]``.
    """
    if isinstance(result, SysidResult):
        A_hat, B_hat, T_hat = result.A_hat, result.B_hat, result.T_hat.T
    else:
        A_hat, B_hat, T_hat = result.A, result.B, result.chain.T
    if A_hat.shape != truth.A.shape or B_hat.shape != truth.B.shape:
        raise ShapeMismatch("estimate and truth dimensions differ")
    err_A = float(max(np.linalg.norm(A_hat[i] - truth.A[i], 2) for i in range(truth.s)))
    err_B = (
        0.0
        if truth.p == 0
        else float(max(np.linalg.norm(B_hat[i] - truth.B[i], 2) for i in range(truth.s)))
    )
    err_T = float(np.abs(T_hat - truth.chain.T).sum(axis=1).max())
    rel = 0.0
    for i in range(truth.s):
        psi = np.hstack([truth.A[i], truth.B[i]])
        dpsi = np.hstack([A_hat[i] - truth.A[i], B_hat[i] - truth.B[i]])
        scale = float(np.linalg.norm(psi, 2))
        diff = float(np.linalg.norm(dpsi, 2))
        if scale == 0.0:
            rel = max(rel, 0.0 if diff == 0.0 else np.inf)
        else:
            rel = max(rel, diff / scale)
    return EstimationError(err_A=err_A, err_B=err_B, err_T=err_T, rel_Psi=rel)
