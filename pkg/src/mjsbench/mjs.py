"""Markov jump linear systems.

Model representation, closed-loop simulation, the augmented second-moment
matrix, mean-square stability certification, and exact moment propagation.

A model with s modes switches among state matrices ``A[i]`` (n x n) and
input matrices ``B[i]`` (n x p) according to a Markov chain over modes. The
state evolves as ``x' = A[m] x + B[m] u + w`` with isotropic Gaussian
process noise w; controllers are mode-indexed static gains ``u = K[m] x + z``
with optional isotropic Gaussian exploration z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidDecayPair,
    NoConvergence,
    NotPSD,
    ShapeMismatch,
)
from .markov import MarkovChain, sample_path


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MjsModel:
    """Mode matrices plus the switching chain.

    ``A`` has shape (s, n, n) and ``B`` shape (s, n, p); p = 0 models an
    autonomous system with no input channel.
    """

    A: np.ndarray
    B: np.ndarray
    chain: MarkovChain
    n: int = field(init=False)
    p: int = field(init=False)
    s: int = field(init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ShapeMismatch(f"A must be (s, n, n), got {A.shape}")
        s, n = A.shape[0], A.shape[1]
        if n < 1:
            raise ShapeMismatch("state dimension must be at least 1")
        if B.ndim != 3 or B.shape[0] != s or B.shape[1] != n:
            raise ShapeMismatch(f"B must be ({s}, {n}, p), got {B.shape}")
        if s != self.chain.s:
            raise ShapeMismatch(f"{s} mode matrices but chain has {self.chain.s} modes")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", B.shape[2])
        object.__setattr__(self, "s", s)

    def to_json_dict(self) -> dict:
        """Serializable form with the field names fixed by the CLI."""
        return {
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "A": [self.A[i].tolist() for i in range(self.s)],
            "B": [self.B[i].tolist() for i in range(self.s)],
            "T": self.chain.T.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MjsModel":
        n, p, s = int(obj["n"]), int(obj["p"]), int(obj["s"])
        A = np.asarray(obj["A"], dtype=float).reshape(s, n, n)
        B = np.asarray(obj["B"], dtype=float).reshape(s, n, p)
        return cls(A=A, B=B, chain=MarkovChain(T=np.asarray(obj["T"], dtype=float)))


@dataclass(frozen=True)
class ModeController:
    """Per-mode static feedback gains, shape (s, p, n)."""

    K: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 3:
            raise ShapeMismatch(f"K must be (s, p, n), got {K.shape}")
        object.__setattr__(self, "K", _freeze(K))

    @classmethod
    def zero(cls, model: MjsModel) -> "ModeController":
        return cls(K=np.zeros((model.s, model.p, model.n)))


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic noise levels: process std sigma_w, exploration std sigma_z."""

    sigma_w: float
    sigma_z: float = 0.0

    def __post_init__(self):
        if self.sigma_w < 0 or self.sigma_z < 0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed rollout record.

    ``states`` has horizon+1 rows, ``modes`` horizon+1 entries, and
    ``explorations``/``inputs`` horizon rows each. The applied input
    satisfies ``inputs[t] = K[modes[t]] @ states[t] + explorations[t]`` for
    the controller that generated the rollout.
    """

    states: np.ndarray
    modes: np.ndarray
    explorations: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        modes = np.asarray(self.modes, dtype=np.int64)
        explorations = np.asarray(self.explorations, dtype=float)
        inputs = np.asarray(self.inputs, dtype=float)
        T = states.shape[0] - 1
        if T < 1:
            raise ShapeMismatch("trajectory needs at least one transition")
        if modes.shape != (T + 1,):
            raise ShapeMismatch("modes must have one entry per state")
        if explorations.shape[0] != T or inputs.shape[0] != T:
            raise ShapeMismatch("explorations and inputs must have one row per transition")
        if explorations.shape != inputs.shape:
            raise ShapeMismatch("explorations and inputs must share shape")
        object.__setattr__(self, "states", _freeze(states))
        modes = np.array(modes, copy=True)
        modes.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "explorations", _freeze(explorations))
        object.__setattr__(self, "inputs", _freeze(inputs))

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1


@dataclass(frozen=True)
class AugmentedMatrix:
    """Block matrix propagating stacked per-mode second moments.

    Block (i, j), each of size n^2 x n^2, equals ``T[j, i] * kron(L[j], L[j])``
    for the closed-loop matrices L. Its spectral radius below 1 is equivalent
    to mean-square stability.
    """

    matrix: np.ndarray
    s: int
    n: int

    def block(self, i: int, j: int) -> np.ndarray:
        m = self.n * self.n
        return self.matrix[i * m : (i + 1) * m, j * m : (j + 1) * m]


def closed_loop(model: MjsModel, controller: ModeController) -> np.ndarray:
    """Per-mode closed-loop matrices ``A[i] + B[i] @ K[i]``, shape (s, n, n)."""
    K = controller.K
    if K.shape != (model.s, model.p, model.n):
        raise ShapeMismatch(
            f"controller shape {K.shape} incompatible with model ({model.s}, {model.p}, {model.n})"
        )
    return model.A + np.einsum("snp,spm->snm", model.B, K)


def augmented_matrix(model: MjsModel, controller: ModeController | None = None) -> AugmentedMatrix:
    """Assemble the second-moment propagation matrix for the closed loop.

    With ``controller=None`` the open loop (zero gain) is used.
    """
    if controller is None:
        controller = ModeController.zero(model)
    L = closed_loop(model, controller)
    s, n = model.s, model.n
    m = n * n
    out = np.zeros((s * m, s * m))
    T = model.chain.T
    for j in range(s):
        kron = np.kron(L[j], L[j])
        for i in range(s):
            w = T[j, i]
            if w != 0.0:
                out[i * m : (i + 1) * m, j * m : (j + 1) * m] = w * kron
    return AugmentedMatrix(matrix=out, s=s, n=n)


def spectral_radius(
    M: np.ndarray,
    dense_cutoff: int = 400,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Dense eigendecomposition below ``dense_cutoff``; above it, power
    iteration with Rayleigh-quotient estimates (no deflation), converging
    when successive estimates agree to ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"need a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    d = M.shape[0]
    if d <= dense_cutoff:
        return float(np.abs(np.linalg.eigvals(M)).max())
    rng = np.random.default_rng(np.random.SeedSequence(0x5EED))
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    estimate = float(v @ (M @ v))
    for _ in range(max_iter):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0
        v = w / norm
        new = float(v @ (M @ v))
        if abs(new - estimate) <= tol * max(1.0, abs(new)):
            return abs(new)
        estimate = new
    raise NoConvergence(
        f"power iteration did not converge within {max_iter} iterations",
        residual=abs(new - estimate),
    )


@dataclass(frozen=True)
class MssCertificate:
    """Outcome of a mean-square stability test."""

    stable: bool
    rho: float


def is_mss(
    model: MjsModel,
    controller: ModeController | None = None,
    margin: float = 0.0,
) -> MssCertificate:
    """Certify mean-square stability of the (closed-loop) system.

    Stable iff the spectral radius of the augmented matrix is below
    ``1 - margin``.
    """
    rho = spectral_radius(augmented_matrix(model, controller).matrix)
    return MssCertificate(stable=rho < 1.0 - margin, rho=rho)


def simulate(
    model: MjsModel,
    controller: ModeController,
    noise: NoiseSpec,
    x0: np.ndarray,
    omega0_dist: np.ndarray | int,
    horizon: int,
    rng_seed: int | np.random.SeedSequence,
) -> Trajectory:
    """Roll the closed-loop system forward, deterministic in the seed.

    Applies ``u_t = K[m_t] x_t + z_t`` with ``z_t ~ N(0, sigma_z^2 I)`` and
    steps ``x_{t+1} = A[m_t] x_t + B[m_t] u_t + w_t`` with
    ``w_t ~ N(0, sigma_w^2 I)``. The mode path is sampled from the chain
    starting at ``omega0_dist`` (a distribution or a fixed mode index).

    Mode, process-noise, and exploration draws come from independent child
    streams of the seed, so disabling exploration (sigma_z = 0 or p = 0)
    leaves the rest of the rollout unchanged.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (model.n,):
        raise ShapeMismatch(f"x0 must have length {model.n}")
    K = controller.K
    if K.shape != (model.s, model.p, model.n):
        raise ShapeMismatch("controller incompatible with model")

    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    mode_ss, w_ss, z_ss = ss.spawn(3)
    modes = sample_path(model.chain, omega0_dist, horizon + 1, mode_ss)
    w = (
        np.random.default_rng(w_ss).standard_normal((horizon, model.n)) * noise.sigma_w
        if noise.sigma_w > 0
        else np.zeros((horizon, model.n))
    )
    if model.p > 0 and noise.sigma_z > 0:
        z = np.random.default_rng(z_ss).standard_normal((horizon, model.p)) * noise.sigma_z
    else:
        z = np.zeros((horizon, model.p))

    states = np.empty((horizon + 1, model.n))
    inputs = np.empty((horizon, model.p))
    states[0] = x0
    for t in range(horizon):
        m = modes[t]
        u = K[m] @ states[t] + z[t]
        inputs[t] = u
        states[t + 1] = model.A[m] @ states[t] + model.B[m] @ u + w[t]
    return Trajectory(states=states, modes=modes, explorations=z, inputs=inputs)


@dataclass(frozen=True)
class CovarianceSequence:
    """Exact stacked second moments along a horizon.

    ``stacked[t]`` is the length s*n^2 vector of vectorized per-mode
    second moments ``E[x_t x_t^T 1{mode=i}]``; ``mode_dists[t]`` is the mode
    distribution at time t.
    """

    stacked: np.ndarray
    mode_dists: np.ndarray
    n: int
    s: int

    def block(self, t: int, i: int) -> np.ndarray:
        m = self.n * self.n
        return self.stacked[t, i * m : (i + 1) * m].reshape(self.n, self.n)

    def blocks(self, t: int) -> np.ndarray:
        return self.stacked[t].reshape(self.s, self.n, self.n)

    def total_second_moment(self, t: int) -> float:
        """E[||x_t||^2], the sum of per-mode block traces."""
        return float(np.trace(self.blocks(t), axis1=1, axis2=2).sum())


def _check_psd(mat: np.ndarray, tol: float = 1e-8) -> None:
    if not np.allclose(mat, mat.T, atol=tol):
        raise NotPSD("matrix is not symmetric")
    if np.linalg.eigvalsh((mat + mat.T) / 2).min() < -tol:
        raise NotPSD("matrix has negative eigenvalues")


def covariance_recursion_general(
    model: MjsModel,
    controller: ModeController,
    Sigma_w: np.ndarray,
    Sigma_z: np.ndarray,
    initial_covariances: np.ndarray,
    initial_mode_dist: np.ndarray,
    horizon: int,
) -> CovarianceSequence:
    """Moment recursion with general PSD noise covariances.

    Propagates the stacked vector of per-mode second moments through the
    augmented matrix, adding at each step the exploration feed-through
    (weighted by the previous mode distribution) and the process noise
    (weighted by the current one).
    """
    s, n, p = model.s, model.n, model.p
    Sigma_w = np.asarray(Sigma_w, dtype=float)
    Sigma_z = np.asarray(Sigma_z, dtype=float)
    if Sigma_w.shape != (n, n):
        raise ShapeMismatch(f"process covariance must be {n}x{n}")
    if Sigma_z.shape != (p, p):
        raise ShapeMismatch(f"exploration covariance must be {p}x{p}")
    _check_psd(Sigma_w)
    if p > 0:
        _check_psd(Sigma_z)
    initial_covariances = np.asarray(initial_covariances, dtype=float)
    if initial_covariances.shape != (s, n, n):
        raise ShapeMismatch(f"need {s} initial per-mode covariances of size {n}x{n}")
    for i in range(s):
        _check_psd(initial_covariances[i])
    pi0 = np.asarray(initial_mode_dist, dtype=float)
    if pi0.shape != (s,):
        raise ShapeMismatch(f"initial mode distribution must have length {s}")

    L_tilde = augmented_matrix(model, controller).matrix
    # Exploration feed-through per source mode: vec(B_j Sigma_z B_j^T).
    feed = np.stack([(model.B[j] @ Sigma_z @ model.B[j].T).reshape(-1) for j in range(s)])
    w_vec = Sigma_w.reshape(-1)
    T = model.chain.T

    stacked = np.empty((horizon + 1, s * n * n))
    mode_dists = np.empty((horizon + 1, s))
    stacked[0] = initial_covariances.reshape(-1)
    mode_dists[0] = pi0
    for t in range(horizon):
        pi_t = mode_dists[t]
        pi_next = pi_t @ T
        # Block i of the exploration term: sum_j pi_t(j) T[j, i] vec(B_j Sigma_z B_j^T).
        weights = pi_t[:, None] * T
        drive = (weights.T @ feed).reshape(-1)
        noise_term = np.kron(pi_next, w_vec)
        stacked[t + 1] = L_tilde @ stacked[t] + drive + noise_term
        mode_dists[t + 1] = pi_next
    return CovarianceSequence(stacked=stacked, mode_dists=mode_dists, n=n, s=s)


def covariance_recursion(
    model: MjsModel,
    controller: ModeController,
    noise: NoiseSpec,
    initial_covariances: np.ndarray,
    initial_mode_dist: np.ndarray,
    horizon: int,
) -> CovarianceSequence:
    """Moment recursion for isotropic noise (the public entry point)."""
    return covariance_recursion_general(
        model,
        controller,
        noise.sigma_w**2 * np.eye(model.n),
        noise.sigma_z**2 * np.eye(model.p),
        initial_covariances,
        initial_mode_dist,
        horizon,
    )


def initial_covariances_from_state(model: MjsModel, x0: np.ndarray, mode_dist: np.ndarray) -> np.ndarray:
    """Per-mode second moments for a deterministic start: pi0(i) * x0 x0^T."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    outer = np.outer(x0, x0)
    return np.asarray(mode_dist, dtype=float)[:, None, None] * outer[None, :, :]


def fit_decay(
    model: MjsModel,
    controller: ModeController,
    rho: float | None = None,
    margin: float = 0.0,
    k_cap: int = 200,
) -> tuple[float, float]:
    """Fit a (tau, rho) envelope with ``||L_tilde^k|| <= tau rho^k`` for k <= k_cap.

    rho defaults to the spectral radius of the augmented matrix plus
    ``margin``; tau is the max of ``||L_tilde^k|| / rho^k`` over the scan,
    an under-approximation of the true supremum.
    """
    aug = augmented_matrix(model, controller).matrix
    if rho is None:
        rho = spectral_radius(aug) + margin
    if not 0.0 < rho < 1.0:
        raise InvalidDecayPair(f"need 0 < rho < 1 to fit an envelope, got rho={rho}")
    tau = 1.0
    power = np.eye(aug.shape[0])
    scale = 1.0
    for _ in range(k_cap):
        power = power @ aug
        scale *= rho
        tau = max(tau, float(np.linalg.norm(power, 2)) / scale)
    return tau, rho


def second_moment_bound(
    model: MjsModel,
    controller: ModeController,
    noise: NoiseSpec,
    x0_second_moment: float,
    tau: float,
    rho: float,
    horizon: int,
) -> np.ndarray:
    """Diagnostic upper bounds on E[||x_t||^2] for t = 0 .. horizon.

    Uses a decay envelope (tau, rho) of the augmented matrix:
    ``sqrt(ns) tau rho^t m0 + n sqrt(s) (||B||^2 sigma_z^2 + sigma_w^2) tau / (1 - rho)``.
    """
    if rho >= 1.0 or rho < 0.0 or tau < 1.0:
        raise InvalidDecayPair(f"need tau >= 1 and rho in [0, 1), got tau={tau}, rho={rho}")
    n, s = model.n, model.s
    b_norm = 0.0 if model.p == 0 else max(np.linalg.norm(model.B[i], 2) for i in range(s))
    steady = n * np.sqrt(s) * (b_norm**2 * noise.sigma_z**2 + noise.sigma_w**2) * tau / (1.0 - rho)
    t = np.arange(horizon + 1)
    return np.sqrt(n * s) * tau * rho**t * x0_second_moment + steady
