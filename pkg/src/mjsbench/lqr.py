"""Quadratic control for Markov jump linear systems.

Coupled Riccati solver via value iteration, optimal mode-dependent gain
synthesis, and exact finite- and infinite-horizon quadratic cost evaluation
built on the moment recursion (no Monte Carlo).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NotMss, ShapeMismatch, SingularInnerSolve
from .markov import MarkovChain, stationary_distribution
from .mjs import (
    MjsModel,
    ModeController,
    NoiseSpec,
    augmented_matrix,
    covariance_recursion_general,
    initial_covariances_from_state,
    spectral_radius,
)


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CostSpec:
    """Per-mode quadratic cost weights: Q[i] PSD on states, R[i] PD on inputs."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if Q.ndim != 3 or Q.shape[1] != Q.shape[2]:
            raise ShapeMismatch(f"Q must be (s, n, n), got {Q.shape}")
        if R.ndim != 3 or R.shape[1] != R.shape[2] or R.shape[0] != Q.shape[0]:
            raise ShapeMismatch(f"R must be (s, p, p) with s={Q.shape[0]}, got {R.shape}")
        Q = (Q + Q.transpose(0, 2, 1)) / 2
        R = (R + R.transpose(0, 2, 1)) / 2
        for i in range(Q.shape[0]):
            if np.linalg.eigvalsh(Q[i]).min() < -1e-10:
                raise ValueError(f"Q[{i}] is not positive semidefinite")
            if R.shape[1] > 0 and np.linalg.eigvalsh(R[i]).min() <= 0:
                raise ValueError(f"R[{i}] is not positive definite")
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "R", _freeze(R))

    def to_json_dict(self) -> dict:
        return {
            "Q": [self.Q[i].tolist() for i in range(self.Q.shape[0])],
            "R": [self.R[i].tolist() for i in range(self.R.shape[0])],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CostSpec":
        return cls(Q=np.asarray(obj["Q"], dtype=float), R=np.asarray(obj["R"], dtype=float))


@dataclass(frozen=True)
class CdareSolution:
    """Fixed point of the coupled Riccati equations plus convergence metadata."""

    P: np.ndarray
    iterations: int
    final_residual: float
    residual_history: tuple[float, ...] = field(repr=False, default=())

    def __post_init__(self):
        object.__setattr__(self, "P", _freeze(np.asarray(self.P, dtype=float)))


def coupling(P: np.ndarray, chain: MarkovChain, j: int) -> np.ndarray:
    """Transition-weighted mixture of value matrices: sum_k T[j, k] P[k]."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 3 or P.shape[0] != chain.s:
        raise ShapeMismatch(f"P must be ({chain.s}, n, n), got {P.shape}")
    return np.tensordot(chain.T[j], P, axes=1)


def _riccati_step(model: MjsModel, cost: CostSpec, P: np.ndarray) -> np.ndarray:
    """One value-iteration sweep over all modes, symmetrized."""
    T = model.chain.T
    Phi = np.tensordot(T, P, axes=([1], [0]))
    new = np.empty_like(P)
    for j in range(model.s):
        A, B = model.A[j], model.B[j]
        PhiA = Phi[j] @ A
        base = A.T @ PhiA + cost.Q[j]
        if model.p == 0:
            new[j] = base
            continue
        G = cost.R[j] + B.T @ Phi[j] @ B
        G = (G + G.T) / 2
        eig = np.linalg.eigvalsh(G)
        if eig.min() <= 1e-12 * max(1.0, eig.max()):
            raise SingularInnerSolve(f"inner matrix for mode {j} is numerically singular")
        X = B.T @ PhiA
        new[j] = base - X.T @ np.linalg.solve(G, X)
    return (new + new.transpose(0, 2, 1)) / 2


def solve_cdare(
    model: MjsModel,
    cost: CostSpec,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> CdareSolution:
    """Solve the coupled Riccati equations by value iteration from P = Q.

    Stops when the max over modes of the spectral norm of the update
    difference falls at or below ``tol``. Raises ``NoConvergence`` carrying
    the last iterate and residual when the cap is hit.
    """
    if cost.Q.shape[1] != model.n or cost.R.shape[1] != model.p or cost.Q.shape[0] != model.s:
        raise ShapeMismatch("cost matrices incompatible with model dimensions")
    P = np.array(cost.Q, copy=True)
    history: list[float] = []
    for it in range(1, max_iter + 1):
        new = _riccati_step(model, cost, P)
        # Divergence guard: non-stabilizable (estimated) models blow up
        # geometrically; bail out while the iterate is still finite.
        if not np.all(np.isfinite(new)) or np.abs(new).max() > 1e150:
            raise NoConvergence(
                f"value iteration diverged after {it} iterations",
                last_iterate=P,
                residual=np.inf,
            )
        residual = float(max(np.linalg.norm(new[j] - P[j], 2) for j in range(model.s)))
        history.append(residual)
        P = new
        if residual <= tol:
            return CdareSolution(
                P=P, iterations=it, final_residual=residual, residual_history=tuple(history)
            )
    raise NoConvergence(
        f"value iteration did not reach tol={tol} within {max_iter} iterations",
        last_iterate=P,
        residual=history[-1],
    )


def cdare_residual(model: MjsModel, cost: CostSpec, P: np.ndarray) -> float:
    """Max-mode spectral-norm defect of P against one Riccati sweep."""
    new = _riccati_step(model, cost, np.asarray(P, dtype=float))
    return float(max(np.linalg.norm(new[j] - P[j], 2) for j in range(model.s)))


def optimal_controller(model: MjsModel, cost: CostSpec, solution: CdareSolution) -> ModeController:
    """Gains ``K[j] = -(R[j] + B[j]^T phi_j B[j])^-1 B[j]^T phi_j A[j]``."""
    T = model.chain.T
    Phi = np.tensordot(T, solution.P, axes=([1], [0]))
    K = np.empty((model.s, model.p, model.n))
    for j in range(model.s):
        if model.p == 0:
            continue
        B = model.B[j]
        G = cost.R[j] + B.T @ Phi[j] @ B
        G = (G + G.T) / 2
        eig = np.linalg.eigvalsh(G)
        if eig.min() <= 1e-12 * max(1.0, eig.max()):
            raise SingularInnerSolve(f"inner matrix for mode {j} is numerically singular")
        K[j] = -np.linalg.solve(G, B.T @ Phi[j] @ model.A[j])
    return ModeController(K=K)


def _cost_weights(controller: ModeController, cost: CostSpec) -> np.ndarray:
    """Per-mode state-cost matrices under feedback: Q[i] + K[i]^T R[i] K[i]."""
    K = controller.K
    return cost.Q + np.einsum("spn,spq,sqm->snm", K, cost.R, K)


def finite_horizon_cost_components(
    model: MjsModel,
    controller: ModeController,
    noise: NoiseSpec,
    x0: np.ndarray,
    omega0_dist: np.ndarray,
    cost: CostSpec,
    horizon: int,
) -> dict[str, float]:
    """Expected cumulative cost split by excitation source.

    Returns the contributions of the initial state, the exploration noise
    through the dynamics, the exploration noise directly through the input
    cost, and the process noise. The recursion is linear in its inputs, so
    the four parts sum to the joint cost exactly.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    pi0 = np.asarray(omega0_dist, dtype=float)
    M = _cost_weights(controller, cost)
    Sigma_w = noise.sigma_w**2 * np.eye(model.n)
    Sigma_z = noise.sigma_z**2 * np.eye(model.p)
    zero_w = np.zeros((model.n, model.n))
    zero_z = np.zeros((model.p, model.p))
    s0 = initial_covariances_from_state(model, x0, pi0)
    s0_zero = np.zeros_like(s0)

    def weighted_trace_sum(seq) -> float:
        total = 0.0
        for t in range(1, horizon + 1):
            total += float(np.einsum("inm,imn->", M, seq.blocks(t)))
        return total

    from_state = weighted_trace_sum(
        covariance_recursion_general(model, controller, zero_w, zero_z, s0, pi0, horizon)
    )
    from_exploration = weighted_trace_sum(
        covariance_recursion_general(model, controller, zero_w, Sigma_z, s0_zero, pi0, horizon)
    )
    from_process = weighted_trace_sum(
        covariance_recursion_general(model, controller, Sigma_w, zero_z, s0_zero, pi0, horizon)
    )
    # Direct input-cost term: sum_t tr(R_bar_t Sigma_z) with mode-averaged R.
    r_traces = np.trace(cost.R, axis1=1, axis2=2)
    pi_t = pi0.copy()
    direct = 0.0
    for _ in range(horizon):
        pi_t = pi_t @ model.chain.T
        direct += noise.sigma_z**2 * float(pi_t @ r_traces)
    return {
        "initial_state": from_state,
        "exploration_dynamics": from_exploration,
        "exploration_direct": direct,
        "process_noise": from_process,
    }


def finite_horizon_cost(
    model: MjsModel,
    controller: ModeController,
    noise: NoiseSpec,
    x0: np.ndarray,
    omega0_dist: np.ndarray,
    cost: CostSpec,
    horizon: int,
) -> float:
    """Exact expected cumulative quadratic cost over steps 1 .. horizon.

    Computed from the covariance recursion: the step-t cost is
    ``sum_i tr(M_i Sigma_i(t)) + tr(R_bar_t Sigma_z)`` with
    ``M_i = Q_i + K_i^T R_i K_i``. The step-0 term is excluded; it does not
    depend on the controller for a fixed start.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    pi0 = np.asarray(omega0_dist, dtype=float)
    M = _cost_weights(controller, cost)
    seq = covariance_recursion_general(
        model,
        controller,
        noise.sigma_w**2 * np.eye(model.n),
        noise.sigma_z**2 * np.eye(model.p),
        initial_covariances_from_state(model, x0, pi0),
        pi0,
        horizon,
    )
    r_traces = np.trace(cost.R, axis1=1, axis2=2)
    total = 0.0
    for t in range(1, horizon + 1):
        total += float(np.einsum("inm,imn->", M, seq.blocks(t)))
        total += noise.sigma_z**2 * float(seq.mode_dists[t] @ r_traces)
    return total


def infinite_horizon_avg_cost(
    model: MjsModel,
    controller: ModeController,
    noise_sigma_w: float,
    cost: CostSpec,
) -> float:
    """Long-run average cost per step under process noise only.

    Solves the stationary moment balance ``(I - L_tilde) y = Pi_inf vec(Sigma_w)``
    (one residual-correction pass, no explicit inverse) and contracts the
    per-mode solution blocks with the feedback cost weights.

    Raises
    ------
    NotMss
        If the closed loop is not mean-square stable (within 1e-10 of the
        stability boundary), where no finite average cost exists.
    """
    aug = augmented_matrix(model, controller).matrix
    rho = spectral_radius(aug)
    if rho >= 1.0 - 1e-10:
        raise NotMss(f"closed loop has augmented spectral radius {rho:.6f} >= 1")
    pi_inf = stationary_distribution(model.chain).pi
    n, s = model.n, model.s
    w_vec = (noise_sigma_w**2 * np.eye(n)).reshape(-1)
    rhs = np.kron(pi_inf, w_vec)
    lhs = np.eye(s * n * n) - aug
    y = np.linalg.solve(lhs, rhs)
    y = y + np.linalg.solve(lhs, rhs - lhs @ y)
    M = _cost_weights(controller, cost)
    blocks = y.reshape(s, n, n)
    return float(np.einsum("inm,imn->", M, blocks))
