"""Shared helpers: an independent batch Monte-Carlo rollout oracle.

The oracle simulates many trajectories at once with its own vectorized
stepping and RNG layout, deliberately sharing no code with the library's
single-rollout path, so moment and cost checks compare two genuinely
different computations.
"""

from __future__ import annotations

import numpy as np
import pytest


def batch_rollout(model, gains, sigma_w, sigma_z, x0, pi0, horizon, count, seed):
    """Simulate ``count`` independent rollouts; returns (states, modes, inputs).

    states: (horizon+1, count, n); modes: (horizon+1, count);
    inputs: (horizon, count, p).
    """
    rng = np.random.default_rng(seed)
    s, n, p = model.s, model.n, model.p
    cum = np.cumsum(model.chain.T, axis=1)
    modes = np.empty((horizon + 1, count), dtype=np.int64)
    start = np.searchsorted(np.cumsum(pi0), rng.random(count), side="right")
    modes[0] = np.minimum(start, s - 1)
    states = np.empty((horizon + 1, count, n))
    states[0] = np.asarray(x0, dtype=float)
    inputs = np.empty((horizon, count, p))
    K = np.asarray(gains.K)
    for t in range(horizon):
        m = modes[t]
        z = rng.standard_normal((count, p)) * sigma_z if p > 0 else np.zeros((count, 0))
        u = np.einsum("cpn,cn->cp", K[m], states[t]) + z
        w = rng.standard_normal((count, n)) * sigma_w
        states[t + 1] = (
            np.einsum("cij,cj->ci", model.A[m], states[t])
            + np.einsum("cij,cj->ci", model.B[m], u)
            + w
        )
        inputs[t] = u
        draws = rng.random(count)
        modes[t + 1] = np.minimum((cum[m] < draws[:, None]).sum(axis=1), s - 1)
    return states, modes, inputs


def mode_indicator_moments(states, modes, mode, t):
    """Monte-Carlo mean and standard error of x_t x_t^T 1{mode_t = i}."""
    x = states[t]
    hit = (modes[t] == mode).astype(float)
    samples = np.einsum("ci,cj->cij", x, x) * hit[:, None, None]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return mean, se


@pytest.fixture
def two_mode_scalar_chain():
    from mjsbench import MarkovChain

    return MarkovChain(T=np.array([[0.6, 0.4], [0.3, 0.7]]))


@pytest.fixture
def unstable_mode_model(two_mode_scalar_chain):
    """Two scalar modes (1.2, 0.7): mean-square stable despite the unstable mode."""
    from mjsbench import MjsModel

    return MjsModel(
        A=np.array([[[1.2]], [[0.7]]]),
        B=np.zeros((2, 1, 0)),
        chain=two_mode_scalar_chain,
    )
