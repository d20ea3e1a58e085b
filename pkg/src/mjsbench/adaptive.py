"""Epoch-based certainty-equivalent adaptive control with regret accounting.

Runs the jump system in epochs of geometrically growing length. Within an
epoch a fixed gain plus decaying exploration noise drives the system; at
the epoch boundary the trajectory is re-identified and the next gain is
synthesized from the estimated model. Regret compares realized cumulative
cost against the horizon times the optimal long-run average cost of the
true model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MjsBenchError, NoConvergence, SingularInnerSolve
from .markov import MarkovChain
from .mjs import MjsModel, ModeController, NoiseSpec, Trajectory, is_mss, simulate
from .lqr import CostSpec, infinite_horizon_avg_cost, optimal_controller, solve_cdare
from .sysid import (
    EstimationError,
    SysidConfig,
    SysidResult,
    estimation_error,
    mjs_sysid,
    mjs_sysid_known_B,
)


@dataclass(frozen=True)
class EpochSchedule:
    """Geometric epoch lengths: epoch i lasts floor(T0 * gamma^i) steps."""

    T0: int
    gamma: float
    num_epochs: int

    def __post_init__(self):
        if self.T0 < 1:
            raise ValueError("T0 must be at least 1")
        if self.gamma <= 1.0:
            raise ValueError("gamma must exceed 1")
        if self.num_epochs < 1:
            raise ValueError("num_epochs must be at least 1")

    def epoch_lengths(self) -> list[int]:
        return [int(math.floor(self.T0 * self.gamma**i)) for i in range(self.num_epochs)]

    def total_horizon(self) -> int:
        return sum(self.epoch_lengths())


@dataclass(frozen=True)
class EpochRecord:
    """Everything recorded about one epoch of an adaptive run."""

    epoch: int
    length: int
    sigma_z: float
    controller: ModeController
    trajectory: Trajectory
    sysid: SysidResult | None
    errors: EstimationError | None
    epoch_cost: float
    failed_cdare: bool


@dataclass(frozen=True)
class AdaptiveRunRecord:
    """Full record of an adaptive run against a known true model.

    ``costs[t]`` is the realized stage cost at time t over the whole run
    (one synthetic terminal input extends the last index so epoch sums
    telescope exactly); ``regret_samples`` holds (t, regret) at epoch
    boundaries.
    """

    epochs: tuple[EpochRecord, ...]
    j_star: float
    optimal_gains: ModeController
    costs: np.ndarray
    trajectory: Trajectory
    terminal_input: np.ndarray
    terminal_exploration: np.ndarray
    regret_samples: tuple[tuple[int, float], ...]
    schedule: EpochSchedule
    cumulative_costs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(costs[1:])])
        costs.flags.writeable = False
        cum.flags.writeable = False
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "cumulative_costs", cum)

    def to_json_dict(self) -> dict:
        return {
            "j_star": self.j_star,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "T_i": e.length,
                    "sigma_z": e.sigma_z,
                    "err_A": e.errors.err_A if e.errors else None,
                    "err_B": e.errors.err_B if e.errors else None,
                    "err_T": e.errors.err_T if e.errors else None,
                    "epoch_cost": e.epoch_cost,
                    "failed_cdare": e.failed_cdare,
                }
                for e in self.epochs
            ],
            "regret_samples": [[int(t), float(r)] for t, r in self.regret_samples],
        }


def regret(record: AdaptiveRunRecord, horizon_prefix: int) -> float:
    """Realized cumulative cost over steps 1..prefix minus prefix * J_star."""
    if horizon_prefix < 0 or horizon_prefix >= record.costs.shape[0]:
        raise ValueError("horizon_prefix outside the recorded run")
    return float(record.cumulative_costs[horizon_prefix] - horizon_prefix * record.j_star)


def _stage_costs(traj: Trajectory, cost: CostSpec, upto: int) -> np.ndarray:
    """Realized stage costs ``x_t' Q x_t + u_t' R u_t`` for t = 0 .. upto-1."""
    out = np.empty(upto)
    for t in range(upto):
        m = traj.modes[t]
        x = traj.states[t]
        u = traj.inputs[t]
        out[t] = x @ cost.Q[m] @ x + u @ cost.R[m] @ u
    return out


def _concatenate(trajs: list[Trajectory]) -> Trajectory:
    states = np.vstack([trajs[0].states] + [t.states[1:] for t in trajs[1:]])
    modes = np.concatenate([trajs[0].modes] + [t.modes[1:] for t in trajs[1:]])
    expl = np.vstack([t.explorations for t in trajs])
    inputs = np.vstack([t.inputs for t in trajs])
    return Trajectory(states=states, modes=modes, explorations=expl, inputs=inputs)


def adaptive_mjs_lqr(
    model: MjsModel,
    cost: CostSpec,
    noise_sigma_w: float,
    initial_controller: ModeController,
    schedule: EpochSchedule,
    sysid_config: SysidConfig,
    rng_seed: int | np.random.SeedSequence,
    x0: np.ndarray | None = None,
    omega0_dist: np.ndarray | int | None = None,
    oracle_model: MjsModel | None = None,
) -> AdaptiveRunRecord:
    """Run the epoch-based certainty-equivalent adaptive controller.

    Each epoch i evolves the system for ``floor(T0 gamma^i)`` steps under
    the current gains with exploration variance ``sigma_w^2 / sqrt(T_i)``
    (zero when ``sysid_config.known_B``), re-identifies the dynamics from
    that epoch's trajectory, and synthesizes the next gains from the
    estimate. Epochs continue the state and mode rather than restarting.

    If the Riccati solve on an estimate fails, the previous gains are kept
    and the epoch is flagged. Passing ``oracle_model`` bypasses the
    estimation step with a fixed model (used for oracle baselines).

    The reference value J_star is computed once from the true model, which
    this benchmark has access to for scoring only.
    """
    if noise_sigma_w <= 0:
        raise ValueError("noise_sigma_w must be positive")
    star_solution = solve_cdare(model, cost)
    k_star = optimal_controller(model, cost, star_solution)
    j_star = infinite_horizon_avg_cost(model, k_star, noise_sigma_w, cost)

    cert = is_mss(model, initial_controller)
    if not cert.stable:
        warnings.warn(
            f"initial controller is not mean-square stabilizing (rho={cert.rho:.4f})",
            stacklevel=2,
        )

    ss = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    lengths = schedule.epoch_lengths()
    epoch_seeds = ss.spawn(len(lengths) + 1)

    x = np.zeros(model.n) if x0 is None else np.asarray(x0, dtype=float)
    mode_start: np.ndarray | int = (
        np.full(model.s, 1.0 / model.s) if omega0_dist is None else omega0_dist
    )
    gains = initial_controller
    known_b = sysid_config.known_B

    trajs: list[Trajectory] = []
    stage_costs: list[np.ndarray] = []
    epoch_meta: list[dict] = []
    for i, T_i in enumerate(lengths):
        sigma_zi = 0.0 if known_b else math.sqrt(noise_sigma_w**2 / math.sqrt(T_i))
        noise_i = NoiseSpec(sigma_w=noise_sigma_w, sigma_z=sigma_zi)
        traj = simulate(model, gains, noise_i, x, mode_start, T_i, epoch_seeds[i])
        trajs.append(traj)
        stage_costs.append(_stage_costs(traj, cost, T_i))

        sysid_result: SysidResult | None = None
        if oracle_model is not None:
            est_model = oracle_model
            errors = estimation_error(est_model, model)
        else:
            if known_b:
                sysid_result = mjs_sysid_known_B(traj, gains, model.B, noise_i, sysid_config)
            else:
                sysid_result = mjs_sysid(traj, gains, noise_i, sysid_config)
            est_model = sysid_result.to_model()
            errors = estimation_error(sysid_result, model)

        failed = False
        try:
            est_solution = solve_cdare(est_model, cost)
            next_gains = optimal_controller(est_model, cost, est_solution)
        except (NoConvergence, SingularInnerSolve, np.linalg.LinAlgError):
            next_gains = gains
            failed = True

        epoch_meta.append(
            {
                "epoch": i,
                "length": T_i,
                "sigma_z": sigma_zi,
                "controller": gains,
                "trajectory": traj,
                "sysid": sysid_result,
                "errors": errors,
                "failed": failed,
            }
        )
        x = traj.states[-1]
        mode_start = int(traj.modes[-1])
        gains = next_gains

    # One synthetic terminal input closes the last stage cost so per-epoch
    # regrets telescope to the total exactly.
    next_len = int(math.floor(schedule.T0 * schedule.gamma ** len(lengths)))
    sigma_z_term = 0.0 if known_b else math.sqrt(noise_sigma_w**2 / math.sqrt(next_len))
    term_rng = np.random.default_rng(epoch_seeds[-1])
    z_term = (
        term_rng.standard_normal(model.p) * sigma_z_term
        if (model.p > 0 and sigma_z_term > 0)
        else np.zeros(model.p)
    )
    m_last = int(trajs[-1].modes[-1])
    u_term = gains.K[m_last] @ x + z_term
    c_term = float(x @ cost.Q[m_last] @ x + u_term @ cost.R[m_last] @ u_term)

    costs = np.concatenate(stage_costs + [[c_term]])
    full_traj = _concatenate(trajs)
    cum = np.concatenate([[0.0], np.cumsum(costs[1:])])

    boundaries = np.cumsum(lengths)
    samples = tuple((int(t), float(cum[t] - t * j_star)) for t in boundaries)

    records = []
    for meta, start, end in zip(epoch_meta, np.concatenate([[0], boundaries[:-1]]), boundaries):
        epoch_cost = float(cum[end] - cum[start])
        records.append(
            EpochRecord(
                epoch=meta["epoch"],
                length=meta["length"],
                sigma_z=meta["sigma_z"],
                controller=meta["controller"],
                trajectory=meta["trajectory"],
                sysid=meta["sysid"],
                errors=meta["errors"],
                epoch_cost=epoch_cost,
                failed_cdare=meta["failed"],
            )
        )
    return AdaptiveRunRecord(
        epochs=tuple(records),
        j_star=j_star,
        optimal_gains=k_star,
        costs=costs,
        trajectory=full_traj,
        terminal_input=u_term,
        terminal_exploration=z_term,
        regret_samples=samples,
        schedule=schedule,
    )


def random_model(
    n: int,
    p: int,
    s: int,
    spectral_cap: float = 0.5,
    rng_seed: int | np.random.SeedSequence = 0,
) -> tuple[MjsModel, CostSpec]:
    """Draw a random benchmark model and cost, open-loop mean-square stable.

    State matrices have standard normal entries rescaled to spectral norm
    ``spectral_cap`` exactly; input matrices are standard normal. Costs are
    Gram matrices of standard normal factors, with R lifted to minimum
    eigenvalue 1e-6. Each transition row is Dirichlet with concentration
    s on the diagonal slot and 1 elsewhere, which biases chains toward
    staying put while keeping them ergodic almost surely.
    """
    if n < 1 or p < 0 or s < 1:
        raise ValueError("need n >= 1, p >= 0, s >= 1")
    rng = np.random.default_rng(rng_seed)
    for _ in range(10):
        A = rng.standard_normal((s, n, n))
        for i in range(s):
            norm = np.linalg.norm(A[i], 2)
            if norm > 0:
                A[i] *= spectral_cap / norm
        B = rng.standard_normal((s, n, p))
        Q_factor = rng.standard_normal((s, n, n))
        Q = np.einsum("sij,skj->sik", Q_factor, Q_factor)
        R_factor = rng.standard_normal((s, p, p))
        R = np.einsum("sij,skj->sik", R_factor, R_factor)
        for i in range(s):
            if p > 0:
                low = float(np.linalg.eigvalsh(R[i]).min())
                if low < 1e-6:
                    R[i] += (1e-6 - low) * np.eye(p)
        T = np.empty((s, s))
        for i in range(s):
            alpha = np.ones(s)
            alpha[i] += s - 1
            T[i] = rng.dirichlet(alpha)
        model = MjsModel(A=A, B=B, chain=MarkovChain(T=T))
        if is_mss(model).stable:
            return model, CostSpec(Q=Q, R=R)
    raise MjsBenchError("could not draw an open-loop mean-square stable model in 10 tries")
