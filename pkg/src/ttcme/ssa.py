"""Gillespie stochastic simulation and synthetic noisy observations.

Direct method: exponential waiting time with the total propensity as rate,
then a categorical draw proportional to the individual propensities.  The
generator is numpy's default PCG64, so trajectories are reproducible for a
given seed within this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ReactionNetwork


@dataclass(frozen=True)
class Trajectory:
    """Jump times and the state after each jump (state[0] at times[0]=0)."""

    times: np.ndarray
    states: np.ndarray
    initial_state: tuple[int, ...]
    seed: int

    def state_at(self, t: float) -> np.ndarray:
        """Right-continuous path value at time t."""
        if t < self.times[0]:
            raise ValueError(f"t={t} before trajectory start")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[j]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def ssa_sample(net: ReactionNetwork, x0, t_end: float, seed: int,
               max_events: int = 10_000_000) -> Trajectory:
    """One direct-method realization on [0, t_end] (no state truncation)."""
    x = np.array(x0, dtype=np.int64)
    if len(x) != net.dim:
        raise ValueError("initial state has wrong arity")
    rng = np.random.default_rng(seed)
    reactions = net.reactions
    changes = [np.array(r.change, dtype=np.int64) for r in reactions]
    times = [0.0]
    states = [x.copy()]
    t = 0.0
    for _ in range(max_events):
        alpha = net.propensities(x)
        total = alpha.sum()
        if total <= 0.0:
            break  # absorbing state
        t += rng.exponential(1.0 / total)
        if t >= t_end:
            break
        m = int(np.searchsorted(np.cumsum(alpha), rng.uniform(0, total),
                                side="right"))
        m = min(m, len(reactions) - 1)
        x = x + changes[m]
        times.append(t)
        states.append(x.copy())
    else:
        raise RuntimeError(f"exceeded {max_events} reaction events")
    return Trajectory(np.array(times), np.array(states), tuple(int(v) for v in x0),
                      seed)


def observe(traj: Trajectory, times, model, seed: int):
    """Noisy observations of a trajectory at given times.

    `model` is an ObservationModel; entries use each species' noise spec:
    additive gaussian y = x + sigma*Z, multiplicative lognormal
    y = x * exp(sigma*Z) (zero states observe as exactly zero), exact, or
    unobserved (emitted as NaN).
    """
    from .inference import ObservationSequence

    times = np.asarray(times, dtype=float)
    if np.any(times > traj.t_end) or np.any(times < traj.times[0]):
        raise ValueError("observation times outside the trajectory horizon")
    if np.any(np.diff(times) <= 0):
        raise ValueError("observation times must be strictly increasing")
    rng = np.random.default_rng(seed)
    rows = []
    for t in times:
        x = traj.state_at(t)
        y = np.empty(len(x))
        for k, spec in enumerate(model.species_models):
            kind, sigma = spec
            if kind == "unobserved":
                y[k] = np.nan
            elif kind == "exact":
                y[k] = float(x[k])
            elif kind == "gaussian":
                y[k] = x[k] + sigma * rng.standard_normal()
            elif kind == "lognormal":
                y[k] = x[k] * np.exp(sigma * rng.standard_normal())
            else:
                raise ValueError(f"unknown noise kind {kind!r}")
        rows.append(y)
    return ObservationSequence(times, np.array(rows), model)
