"""Experiment configs, seeded sweep execution, and CSV emission.

Sweeps run a grid of cells (dimensions x noise levels x horizons) with a
fixed number of replications per cell. Every task's randomness derives from
``SeedSequence(base_seed, spawn_key=...)`` so reruns are bit identical and
cells are independent of execution order; reruns of a single row can pass
the printed seed straight back in.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .adaptive import EpochSchedule, adaptive_mjs_lqr, random_model
from .errors import ConfigError
from .lqr import CostSpec, infinite_horizon_avg_cost, optimal_controller, solve_cdare
from .mjs import MjsModel, ModeController, NoiseSpec, is_mss, simulate
from .sysid import SysidConfig, estimation_error, mjs_sysid, mjs_sysid_known_B

SYSID_COLUMNS = (
    "kind", "n", "p", "s", "sigma_w", "sigma_z", "T", "seed",
    "err_A", "err_B", "err_T", "rel_Psi", "samples_min",
)
REGRET_COLUMNS = (
    "kind", "n", "p", "s", "sigma_w", "T0", "gamma", "epoch", "t", "seed",
    "regret", "err_A", "err_B", "err_T", "failed_cdare",
)

_KINDS = ("sysid-sweep", "regret-sweep", "single-run")
_CONFIG_KEYS = {
    "kind", "n", "p", "s", "sigma_w", "sigma_z", "T", "T0", "gamma",
    "num_epochs", "replications", "base_seed", "sysid", "known_B",
    "model_file", "out", "jobs", "plot", "shared_model", "spectral_cap",
}
_SYSID_KEYS = {"c_x", "c_z", "min_samples_per_mode"}


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass(frozen=True)
class ExperimentConfig:
    """Full recipe for a benchmark run.

    ``n``, ``p``, ``s``, ``sigma_w``, ``sigma_z``, and ``T`` may be scalars
    or lists; lists become grid axes. Regret sweeps ignore ``sigma_z`` and
    ``T`` and use the epoch schedule instead.
    """

    kind: str
    n: tuple[int, ...] = (5,)
    p: tuple[int, ...] = (3,)
    s: tuple[int, ...] = (5,)
    sigma_w: tuple[float, ...] = (0.01,)
    sigma_z: tuple[float, ...] = (0.01,)
    T: tuple[int, ...] = (4000, 16000, 64000)
    T0: int = 2000
    gamma: float = 2.0
    num_epochs: int = 5
    replications: int = 1
    base_seed: int = 0
    sysid: SysidConfig = field(default_factory=SysidConfig)
    known_B: bool = False
    model_file: str | None = None
    out: str | None = None
    jobs: int = 1
    plot: bool = True
    shared_model: bool = False
    spectral_cap: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"field 'kind': expected one of {_KINDS}, got {self.kind!r}")
        for name in ("n", "p", "s", "sigma_w", "sigma_z", "T"):
            values = tuple(_as_list(getattr(self, name)))
            object.__setattr__(self, name, values)
            if len(values) == 0:
                raise ConfigError(f"field '{name}': grid must be non-empty")
        if any(v < 1 for v in self.n) or any(v < 1 for v in self.s):
            raise ConfigError("fields 'n'/'s': entries must be >= 1")
        if any(v < 0 for v in self.p):
            raise ConfigError("field 'p': entries must be >= 0")
        if any(v <= 0 for v in self.sigma_w):
            raise ConfigError("field 'sigma_w': entries must be positive")
        if any(v < 0 for v in self.sigma_z):
            raise ConfigError("field 'sigma_z': entries must be nonnegative")
        if any(v < 2 for v in self.T):
            raise ConfigError("field 'T': horizons must be >= 2")
        if self.replications < 1:
            raise ConfigError("field 'replications': must be >= 1")
        if self.T0 < 1:
            raise ConfigError("field 'T0': must be >= 1")
        if self.gamma <= 1.0:
            raise ConfigError("field 'gamma': must exceed 1")
        if self.num_epochs < 1:
            raise ConfigError("field 'num_epochs': must be >= 1")
        if self.jobs < 1:
            raise ConfigError("field 'jobs': must be >= 1")

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        unknown = set(obj) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data = dict(obj)
        sysid_obj = data.pop("sysid", None)
        sysid = SysidConfig()
        if sysid_obj is not None:
            bad = set(sysid_obj) - _SYSID_KEYS
            if bad:
                raise ConfigError(f"unknown sysid fields: {sorted(bad)}")
            sysid = SysidConfig(known_B=bool(data.get("known_B", False)), **sysid_obj)
        elif data.get("known_B"):
            sysid = SysidConfig(known_B=True)
        return cls(sysid=sysid, **data)


def load_config(path: str) -> ExperimentConfig:
    """Parse a JSON config file; errors carry the byte offset or field name."""
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON in {path} at byte offset {exc.pos} (line {exc.lineno}): {exc.msg}"
        ) from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config root in {path} must be a JSON object")
    return ExperimentConfig.from_json_dict(obj)


def derive_seed(base_seed: int, *key: int) -> int:
    """Documented seed hash: first 64-bit word of SeedSequence(base, spawn_key=key)."""
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def rows_to_csv(rows: list[dict], columns: tuple[str, ...]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _quantiles(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0], method="linear")
    return float(q25), float(q50), float(q75)


def _aggregate(rows: list[dict], group_cols: tuple[str, ...], value_cols: tuple[str, ...],
               base_kind: str) -> list[dict]:
    """Median and quartile rows per cell, reusing the raw schema (seed = -1)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[c] for c in group_cols), []).append(row)
    out = []
    for key in sorted(groups):
        members = groups[key]
        stats = {c: _quantiles([float(r[c]) for r in members]) for c in value_cols}
        for slot, suffix in ((1, "median"), (0, "q25"), (2, "q75")):
            agg = dict(members[0])
            agg["kind"] = f"{base_kind}-{suffix}"
            agg["seed"] = -1
            for c in value_cols:
                agg[c] = stats[c][slot]
            out.append(agg)
    return out


def _sysid_cell(args: tuple) -> tuple[int, list[dict]]:
    (index, cfg_dict, cell) = args
    cfg = ExperimentConfig.from_json_dict(cfg_dict)
    (i_n, n), (i_p, p), (i_s, s), (i_w, sw), (i_z, sz), (i_T, T), rep = cell
    model_key = (1, i_n, i_p, i_s, 0, 0, 0, rep, 0) if cfg.shared_model else (
        1, i_n, i_p, i_s, i_w, i_z, i_T, rep, 0)
    rollout_seed = derive_seed(cfg.base_seed, 1, i_n, i_p, i_s, i_w, i_z, i_T, rep, 1)
    model, _ = random_model(n, p, s, cfg.spectral_cap, derive_seed(cfg.base_seed, *model_key))
    gains = ModeController.zero(model)
    noise = NoiseSpec(sigma_w=sw, sigma_z=0.0 if cfg.known_B else sz)
    traj = simulate(model, gains, noise, np.zeros(n), np.full(s, 1.0 / s), T, rollout_seed)
    if cfg.known_B:
        result = mjs_sysid_known_B(traj, gains, model.B, noise, cfg.sysid)
    else:
        result = mjs_sysid(traj, gains, noise, cfg.sysid)
    err = estimation_error(result, model)
    row = {
        "kind": "sysid", "n": n, "p": p, "s": s, "sigma_w": sw, "sigma_z": sz,
        "T": T, "seed": rollout_seed, "err_A": err.err_A, "err_B": err.err_B,
        "err_T": err.err_T, "rel_Psi": err.rel_Psi,
        "samples_min": int(result.samples_per_mode.min()),
    }
    return index, [row]


def _regret_cell(args: tuple) -> tuple[int, list[dict]]:
    (index, cfg_dict, cell) = args
    cfg = ExperimentConfig.from_json_dict(cfg_dict)
    (i_w, sw), (i_n, n), (i_p, p), (i_s, s), rep = cell
    model_seed = derive_seed(cfg.base_seed, 2, i_w, i_n, i_p, i_s, rep, 0)
    run_seed = derive_seed(cfg.base_seed, 2, i_w, i_n, i_p, i_s, rep, 1)
    model, cost = random_model(n, p, s, cfg.spectral_cap, model_seed)
    schedule = EpochSchedule(T0=cfg.T0, gamma=cfg.gamma, num_epochs=cfg.num_epochs)
    record = adaptive_mjs_lqr(
        model, cost, sw, ModeController.zero(model), schedule, cfg.sysid, run_seed
    )
    rows = []
    for epoch, (t, reg) in zip(record.epochs, record.regret_samples):
        rows.append({
            "kind": "regret", "n": n, "p": p, "s": s, "sigma_w": sw,
            "T0": cfg.T0, "gamma": cfg.gamma, "epoch": epoch.epoch, "t": t,
            "seed": run_seed, "regret": reg,
            "err_A": epoch.errors.err_A, "err_B": epoch.errors.err_B,
            "err_T": epoch.errors.err_T, "failed_cdare": int(epoch.failed_cdare),
        })
    return index, rows


def _run_pool(tasks: list[tuple], worker, jobs: int) -> list[dict]:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, tasks))
    else:
        results = [worker(t) for t in tasks]
    rows: list[dict] = []
    for _, cell_rows in sorted(results, key=lambda r: r[0]):
        rows.extend(cell_rows)
    return rows


def effective_jobs(cfg: ExperimentConfig) -> int:
    env = os.environ.get("MJS_BENCH_JOBS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"MJS_BENCH_JOBS must be an integer, got {env!r}") from exc
    return cfg.jobs


def run_sysid_sweep(cfg: ExperimentConfig) -> list[dict]:
    """All raw rows of a sysid sweep, followed by per-cell aggregate rows."""
    if cfg.kind != "sysid-sweep":
        raise ConfigError(f"field 'kind': expected 'sysid-sweep', got {cfg.kind!r}")
    cfg_dict = config_to_json_dict(cfg)
    cells = list(product(
        enumerate(cfg.n), enumerate(cfg.p), enumerate(cfg.s),
        enumerate(cfg.sigma_w), enumerate(cfg.sigma_z), enumerate(cfg.T),
        range(cfg.replications),
    ))
    tasks = [(i, cfg_dict, cell) for i, cell in enumerate(cells)]
    rows = _run_pool(tasks, _sysid_cell, effective_jobs(cfg))
    rows += _aggregate(
        rows, ("n", "p", "s", "sigma_w", "sigma_z", "T"),
        ("err_A", "err_B", "err_T", "rel_Psi", "samples_min"), "sysid",
    )
    return rows


def run_regret_sweep(cfg: ExperimentConfig) -> list[dict]:
    """All raw rows of a regret sweep, followed by per-cell-epoch aggregates."""
    if cfg.kind != "regret-sweep":
        raise ConfigError(f"field 'kind': expected 'regret-sweep', got {cfg.kind!r}")
    cfg_dict = config_to_json_dict(cfg)
    cells = list(product(
        enumerate(cfg.sigma_w), enumerate(cfg.n), enumerate(cfg.p), enumerate(cfg.s),
        range(cfg.replications),
    ))
    tasks = [(i, cfg_dict, cell) for i, cell in enumerate(cells)]
    rows = _run_pool(tasks, _regret_cell, effective_jobs(cfg))
    rows += _aggregate(
        rows, ("n", "p", "s", "sigma_w", "epoch"),
        ("regret", "err_A", "err_B", "err_T", "failed_cdare"), "regret",
    )
    return rows


def run_single(cfg: ExperimentConfig) -> dict:
    """End-to-end report for one model: stability, optimal control, one adaptive run."""
    if cfg.kind != "single-run":
        raise ConfigError(f"field 'kind': expected 'single-run', got {cfg.kind!r}")
    n, p, s = cfg.n[0], cfg.p[0], cfg.s[0]
    if cfg.model_file is not None:
        with open(cfg.model_file, "rb") as handle:
            raw = handle.read()
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"invalid JSON in {cfg.model_file} at byte offset {exc.pos} "
                f"(line {exc.lineno}): {exc.msg}"
            ) from exc
        model = MjsModel.from_json_dict(obj)
        if "Q" in obj and "R" in obj:
            cost = CostSpec.from_json_dict(obj)
        else:
            cost = CostSpec(
                Q=np.tile(np.eye(model.n), (model.s, 1, 1)),
                R=np.tile(np.eye(model.p), (model.s, 1, 1)),
            )
    else:
        model, cost = random_model(n, p, s, cfg.spectral_cap, derive_seed(cfg.base_seed, 3, 0))
    cert = is_mss(model)
    report: dict = {
        "model": model.to_json_dict(),
        "open_loop_rho": cert.rho,
        "mss": bool(cert.stable),
    }
    solution = solve_cdare(model, cost)
    gains = optimal_controller(model, cost, solution)
    report["K_star"] = [gains.K[i].tolist() for i in range(model.s)]
    sigma_w = cfg.sigma_w[0]
    report["J_star"] = infinite_horizon_avg_cost(model, gains, sigma_w, cost)
    schedule = EpochSchedule(T0=cfg.T0, gamma=cfg.gamma, num_epochs=cfg.num_epochs)
    record = adaptive_mjs_lqr(
        model, cost, sigma_w, ModeController.zero(model), schedule, cfg.sysid,
        derive_seed(cfg.base_seed, 3, 1),
    )
    report["adaptive_run"] = record.to_json_dict()
    return report


def config_to_json_dict(cfg: ExperimentConfig) -> dict:
    return {
        "kind": cfg.kind,
        "n": list(cfg.n), "p": list(cfg.p), "s": list(cfg.s),
        "sigma_w": list(cfg.sigma_w), "sigma_z": list(cfg.sigma_z), "T": list(cfg.T),
        "T0": cfg.T0, "gamma": cfg.gamma, "num_epochs": cfg.num_epochs,
        "replications": cfg.replications, "base_seed": cfg.base_seed,
        "sysid": {
            "c_x": cfg.sysid.c_x, "c_z": cfg.sysid.c_z,
            "min_samples_per_mode": cfg.sysid.min_samples_per_mode,
        },
        "known_B": cfg.known_B, "model_file": cfg.model_file, "out": cfg.out,
        "jobs": cfg.jobs, "plot": cfg.plot, "shared_model": cfg.shared_model,
        "spectral_cap": cfg.spectral_cap,
    }


def with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    """Copy with non-None overrides applied (CLI flags over config values)."""
    updates = {k: v for k, v in kwargs.items() if v is not None}
    if updates:
        cfg = replace(cfg, **updates)
    if cfg.sysid.known_B != cfg.known_B:
        cfg = replace(cfg, sysid=replace(cfg.sysid, known_B=cfg.known_B))
    return cfg
