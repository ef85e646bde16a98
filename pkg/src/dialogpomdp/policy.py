"""Policy extraction (direct and one-step look-ahead), simulation and evaluation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .model import (
    ModelError,
    PomdpModel,
    VectorSet,
    action_groups,
    as_belief,
    sample_simplex,
    values_at,
)

MODES = ("direct", "lookahead")


class DirectPolicyUnavailable(ValueError):
    """Direct extraction needs every vector to carry an action label."""


@dataclass(frozen=True, eq=False)
class Policy:
    mode: str
    vector_set: VectorSet
    model: Optional[PomdpModel] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.mode == "direct" and not self.vector_set.labeled:
            raise DirectPolicyUnavailable(
                "direct policy unavailable: the vector set has unlabeled vectors")
        if self.mode == "lookahead" and self.model is None:
            raise ValueError("look-ahead policy needs the model")
        if self.model is not None and self.model.n_states != self.vector_set.dim:
            raise ModelError("vector dimension does not match the model's state count")
        if self.mode == "lookahead":
            reps, group = action_groups(self.model)
            T = np.ascontiguousarray(self.model.transition[reps])
            Z = np.ascontiguousarray(self.model.observation_fn[reps])
            object.__setattr__(self, "_dynamics", (T, Z, group))

    def __call__(self, b) -> int:
        return act_direct(self, b) if self.mode == "direct" else act_lookahead(self, b)


def make_policy(mode: str, vector_set: VectorSet, model: Optional[PomdpModel] = None) -> Policy:
    """Accepts ``dr``/``la`` shorthands as well as the full mode names."""
    mode = {"dr": "direct", "la": "lookahead"}.get(mode, mode)
    return Policy(mode, vector_set, model)


def act_direct(policy: Policy, b) -> int:
    vs = policy.vector_set
    if not vs.labeled:
        raise DirectPolicyUnavailable("direct policy unavailable: unlabeled vectors")
    return int(vs.actions[int(np.argmax(vs.vectors @ np.asarray(b, dtype=float)))])


def lookahead_values(policy: Policy, b) -> np.ndarray:
    """``rho(b, a) + gamma * sum_o Pr(o | a, b) V(tau(b, a, o))`` for every action."""
    m = policy.model
    T, Z, group = policy._dynamics
    b = np.ascontiguousarray(b, dtype=float)
    future = kernels.lookahead_terms(b, T, Z, policy.vector_set.vectors)
    return m.reward @ b + m.discount * future[group]


def act_lookahead(policy: Policy, b) -> int:
    """Greedy one-step look-ahead; zero-probability observations contribute nothing."""
    return int(np.argmax(lookahead_values(policy, b)))


@dataclass(frozen=True)
class SimConfig:
    steps: int = 10_000
    seed: int = 0
    initial_belief: Optional[np.ndarray] = None
    keep_trace: bool = False

    def __post_init__(self):
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class SimReport:
    steps: int
    total_reward: float
    reward_counts: dict  # category -> occurrences
    reward_values: dict  # category -> reward of that category
    observation_counts: dict  # category -> occurrences
    action_counts: dict
    decision_ms_mean: float
    decision_ms_max: float
    belief_trace: Optional[np.ndarray] = field(default=None, repr=False)

    def same_outcome(self, other: "SimReport") -> bool:
        """Equality ignoring wall-clock timing."""
        trace_eq = (self.belief_trace is None and other.belief_trace is None) or (
            self.belief_trace is not None and other.belief_trace is not None
            and np.array_equal(self.belief_trace, other.belief_trace))
        return (self.steps == other.steps and self.total_reward == other.total_reward
                and self.reward_counts == other.reward_counts
                and self.observation_counts == other.observation_counts
                and self.action_counts == other.action_counts and trace_eq)


def reward_categories(model: PomdpModel):
    """``(category name per (a, s) cell, ordered category -> value)``.

    Models without category metadata get one category per distinct reward value.
    """
    if model.reward_category is not None:
        cats = model.reward_category
        values = {}
        for c, r in zip(cats.ravel(), model.reward.ravel()):
            values.setdefault(c, float(r))
        return cats, values
    uniq = sorted(set(model.reward.ravel().tolist()), reverse=True)
    names = {r: f"reward {r:g}" for r in uniq}
    cats = np.vectorize(lambda r: names[r], otypes=[object])(model.reward)
    return cats, {names[r]: float(r) for r in uniq}


def observation_categories(model: PomdpModel) -> tuple:
    return model.observation_category or model.observations


def simulate(model: PomdpModel, policy, cfg: SimConfig = SimConfig()) -> SimReport:
    """Run ``policy`` against the model used as its own environment.

    ``policy`` is a :class:`Policy` or any callable mapping a belief to an action
    index. Deterministic for a given seed (timing fields aside).
    """
    if isinstance(policy, Policy) and policy.vector_set.dim != model.n_states:
        raise ModelError("policy dimension does not match the model")
    rng = np.random.default_rng(cfg.seed)
    b = as_belief(model.initial_belief if cfg.initial_belief is None else cfg.initial_belief,
                  model.n_states).copy()
    T, Z, R = model.transition, model.observation_fn, model.reward
    t_cdf = np.cumsum(T, axis=2)
    z_cdf = np.cumsum(Z, axis=2)
    cats, cat_values = reward_categories(model)
    obs_cats = observation_categories(model)
    reward_counts = dict.fromkeys(cat_values, 0)
    obs_counts = dict.fromkeys(dict.fromkeys(obs_cats), 0)
    action_counts = dict.fromkeys(model.actions, 0)
    trace = np.empty((cfg.steps, model.n_states)) if cfg.keep_trace else None

    s = _draw(np.cumsum(b), rng.random())
    total = 0.0
    times = np.empty(cfg.steps)
    for step in range(cfg.steps):
        t0 = time.perf_counter()
        a = policy(b)
        times[step] = time.perf_counter() - t0
        total += R[a, s]
        reward_counts[cats[a, s]] += 1
        action_counts[model.actions[a]] += 1
        s = _draw(t_cdf[a, s], rng.random())
        o = _draw(z_cdf[a, s], rng.random())
        obs_counts[obs_cats[o]] += 1
        w = (b @ T[a]) * Z[a, :, o]
        b = w / w.sum()
        if trace is not None:
            trace[step] = b
    return SimReport(
        steps=cfg.steps, total_reward=float(total), reward_counts=reward_counts,
        reward_values=cat_values, observation_counts=obs_counts, action_counts=action_counts,
        decision_ms_mean=float(times.mean() * 1e3), decision_ms_max=float(times.max() * 1e3),
        belief_trace=trace,
    )


def _draw(cdf: np.ndarray, u: float) -> int:
    # first index with cdf > u * total, which always has positive mass
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(i, cdf.shape[0] - 1)


def collect_sim_beliefs(model: PomdpModel, policy, cfg: SimConfig = SimConfig()) -> np.ndarray:
    """Belief after each simulated step, shape ``(steps, |S|)``."""
    cfg = SimConfig(cfg.steps, cfg.seed, cfg.initial_belief, keep_trace=True)
    return simulate(model, policy, cfg).belief_trace


def evaluate_avg_value(vector_set: VectorSet, n_points: int = 10_000, seed: int = 0) -> float:
    """Mean value over ``n_points`` seeded uniform-simplex beliefs."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    beliefs = sample_simplex(rng, n_points, vector_set.dim)
    return float(values_at(vector_set, beliefs).mean())
