"""Flat POMDP model, belief arithmetic and PWLC vector sets.

Tables are stored action-major:

* ``transition[a, s, s2]``  probability of landing in ``s2`` from ``s`` under ``a``
* ``observation_fn[a, s2, o]``  probability of observing ``o`` after ``a`` landed in ``s2``
* ``reward[a, s]``  immediate reward

Beliefs are plain 1-D float arrays of length ``|S|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels

PROB_TOL = 1e-9


class ModelError(ValueError):
    """Raised for malformed models or lookups of unknown names."""


class UnknownName(ModelError, LookupError):
    """A state, action or observation name or index the model does not have."""


class ImpossibleObservation(ValueError):
    """The observation has zero probability under the given belief and action."""


@dataclass(frozen=True, eq=False)
class PomdpModel:
    states: tuple
    actions: tuple
    observations: tuple
    transition: np.ndarray
    observation_fn: np.ndarray
    reward: np.ndarray
    discount: float
    initial_belief: np.ndarray
    # optional reporting metadata: category name per (a, s) reward cell / per observation
    reward_category: Optional[np.ndarray] = None
    observation_category: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        for attr in ("transition", "observation_fn", "reward", "initial_belief"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        for attr in ("states", "actions", "observations"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if self.reward_category is not None:
            cat = np.array(self.reward_category, dtype=object)
            cat.setflags(write=False)
            object.__setattr__(self, "reward_category", cat)
        if self.observation_category is not None:
            object.__setattr__(self, "observation_category", tuple(self.observation_category))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def action_index(self, a) -> int:
        return _lookup(self.actions, a, "action")

    def state_index(self, s) -> int:
        return _lookup(self.states, s, "state")

    def observation_index(self, o) -> int:
        return _lookup(self.observations, o, "observation")

    def tables_equal(self, other: "PomdpModel", atol: float = 0.0) -> bool:
        """Table-by-table comparison (names, shapes, values, discount, start)."""
        if (self.states, self.actions, self.observations) != (
            other.states, other.actions, other.observations
        ):
            return False
        pairs = [
            (self.transition, other.transition),
            (self.observation_fn, other.observation_fn),
            (self.reward, other.reward),
            (self.initial_belief, other.initial_belief),
        ]
        if any(a.shape != b.shape or not np.allclose(a, b, rtol=0, atol=atol) for a, b in pairs):
            return False
        return abs(self.discount - other.discount) <= atol


def _lookup(names: tuple, key, kind: str) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        if 0 <= key < len(names):
            return int(key)
        raise UnknownName(f"{kind} index {key} out of range")
    try:
        return names.index(key)
    except ValueError:
        raise UnknownName(f"unknown {kind} {key!r}") from None


def validate_model(model: PomdpModel) -> list:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems = []
    S, A, O = model.n_states, model.n_actions, model.n_observations
    for kind, names in (("state", model.states), ("action", model.actions),
                        ("observation", model.observations)):
        seen = set()
        for n in names:
            if n in seen:
                problems.append(f"duplicate {kind} {n!r}")
            seen.add(n)
    if model.transition.shape != (A, S, S):
        problems.append(f"transition shape {model.transition.shape} != {(A, S, S)}")
    if model.observation_fn.shape != (A, S, O):
        problems.append(f"observation shape {model.observation_fn.shape} != {(A, S, O)}")
    if model.reward.shape != (A, S):
        problems.append(f"reward shape {model.reward.shape} != {(A, S)}")
    if not 0.0 < model.discount < 1.0:
        problems.append(f"discount {model.discount} not in (0, 1)")
    if problems:
        return problems

    T, Z = model.transition, model.observation_fn
    for a, s, s2 in zip(*np.nonzero((T < 0) | (T > 1) | ~np.isfinite(T))):
        problems.append(f"T({model.actions[a]}, {model.states[s]}, {model.states[s2]}) = {T[a, s, s2]} outside [0, 1]")
    for a, s2, o in zip(*np.nonzero((Z < 0) | (Z > 1) | ~np.isfinite(Z))):
        problems.append(f"O({model.actions[a]}, {model.states[s2]}, {model.observations[o]}) = {Z[a, s2, o]} outside [0, 1]")
    rows = T.sum(axis=2)
    for a, s in zip(*np.nonzero(np.abs(rows - 1.0) > PROB_TOL)):
        problems.append(f"T row ({model.actions[a]}, {model.states[s]}) sums to {rows[a, s]:.12g}")
    rows = Z.sum(axis=2)
    for a, s2 in zip(*np.nonzero(np.abs(rows - 1.0) > PROB_TOL)):
        problems.append(f"O row ({model.actions[a]}, {model.states[s2]}) sums to {rows[a, s2]:.12g}")
    if not np.all(np.isfinite(model.reward)):
        problems.append("reward table contains non-finite entries")
    b0 = model.initial_belief
    if b0.shape != (S,):
        problems.append(f"initial belief has shape {b0.shape}, expected {(S,)}")
    elif np.any(b0 < 0) or abs(b0.sum() - 1.0) > PROB_TOL:
        problems.append(f"initial belief is not a distribution (sum {b0.sum():.12g})")
    return problems


def check_model(model: PomdpModel) -> PomdpModel:
    problems = validate_model(model)
    if problems:
        raise ModelError("invalid model: " + "; ".join(problems[:5])
                         + (f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""))
    return model


def as_belief(probs, n_states: Optional[int] = None) -> np.ndarray:
    b = np.asarray(probs, dtype=float)
    if b.ndim != 1 or (n_states is not None and b.shape[0] != n_states):
        raise ModelError(f"belief must be a vector of length {n_states}, got shape {b.shape}")
    if np.any(b < 0) or abs(b.sum() - 1.0) > PROB_TOL:
        raise ModelError("belief entries must be non-negative and sum to 1")
    return b


def predicted_observations(model: PomdpModel, b: np.ndarray, a: int) -> np.ndarray:
    """Unnormalised next-state weights per observation, shape ``(|O|, |S|)``."""
    pred = b @ model.transition[a]
    return model.observation_fn[a].T * pred


def obs_likelihood(model: PomdpModel, b, a, o) -> float:
    a, o = model.action_index(a), model.observation_index(o)
    pred = np.asarray(b, dtype=float) @ model.transition[a]
    return float(pred @ model.observation_fn[a, :, o])


def belief_update(model: PomdpModel, b, a, o) -> np.ndarray:
    a, o = model.action_index(a), model.observation_index(o)
    weights = (np.asarray(b, dtype=float) @ model.transition[a]) * model.observation_fn[a, :, o]
    total = weights.sum()
    if total <= 0.0:
        raise ImpossibleObservation(
            f"observation {model.observations[o]!r} impossible after {model.actions[a]!r}")
    return weights / total


def belief_reward(model: PomdpModel, b, a) -> float:
    return float(model.reward[model.action_index(a)] @ np.asarray(b, dtype=float))


def belief_entropy(b) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    p = np.asarray(b, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum()) + 0.0


def sample_simplex(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Draw ``n`` beliefs uniformly from the ``dim``-simplex (flat Dirichlet)."""
    e = rng.standard_exponential((n, dim))
    return e / e.sum(axis=1, keepdims=True)


def action_groups(model: PomdpModel):
    """Actions sharing identical transition and observation tables.

    Returns ``(representatives, group)`` where ``group[a]`` indexes into
    ``representatives``. Backups and look-ahead only need the dynamics once per group.
    """
    reps, group = [], np.empty(model.n_actions, dtype=np.int64)
    T, Z = model.transition, model.observation_fn
    for a in range(model.n_actions):
        for g, r in enumerate(reps):
            if np.array_equal(T[a], T[r]) and np.array_equal(Z[a], Z[r]):
                group[a] = g
                break
        else:
            group[a] = len(reps)
            reps.append(a)
    return np.array(reps, dtype=np.int64), group


@dataclass(frozen=True)
class AlphaVector:
    values: np.ndarray
    action: Optional[int] = None


@dataclass(frozen=True, eq=False)
class VectorSet:
    """A PWLC value function: ``V(b) = max_k b . vectors[k]``.

    ``actions[k]`` is the index of the action whose backup produced vector ``k``,
    or ``-1`` when the vector is unlabeled.
    """

    vectors: np.ndarray
    actions: np.ndarray = None
    solver: str = ""
    epochs: int = 0
    action_names: Optional[tuple] = None

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float, ndmin=2)
        if vecs.shape[0] == 0:
            raise ModelError("vector set must not be empty")
        acts = (np.full(vecs.shape[0], -1, dtype=np.int64) if self.actions is None
                else np.array(self.actions, dtype=np.int64).reshape(-1))
        if acts.shape[0] != vecs.shape[0]:
            raise ModelError("one action label per vector required")
        vecs.setflags(write=False)
        acts.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "actions", acts)
        if self.action_names is not None:
            object.__setattr__(self, "action_names", tuple(self.action_names))

    def __len__(self):
        return self.vectors.shape[0]

    def __iter__(self):
        for v, a in zip(self.vectors, self.actions):
            yield AlphaVector(v, None if a < 0 else int(a))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def labeled(self) -> bool:
        return bool(np.all(self.actions >= 0))

    def with_meta(self, **kw) -> "VectorSet":
        base = dict(vectors=self.vectors, actions=self.actions, solver=self.solver,
                    epochs=self.epochs, action_names=self.action_names)
        base.update(kw)
        return VectorSet(**base)


def value_of(vs: VectorSet, b) -> tuple:
    """Return ``(max_k b . alpha_k, k)``; ties go to the lowest index."""
    b = np.asarray(b, dtype=float)
    if b.shape != (vs.dim,):
        raise ModelError(f"belief dimension {b.shape} does not match vector dimension {vs.dim}")
    vals = vs.vectors @ b
    k = int(np.argmax(vals))
    return float(vals[k]), k


def values_at(vs: VectorSet, beliefs: np.ndarray) -> np.ndarray:
    """Vectorised ``value_of`` over the rows of ``beliefs``."""
    beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
    if beliefs.shape[1] != vs.dim:
        raise ModelError("belief dimension does not match vector dimension")
    return (beliefs @ vs.vectors.T).max(axis=1)


def unique_rows(vectors: np.ndarray, actions: np.ndarray, tol: float = 1e-12):
    """Collapse vectors equal within ``tol`` componentwise, keeping first occurrences."""
    n = vectors.shape[0]
    if n <= 1:
        return vectors, actions
    order = np.lexsort(vectors.T[::-1])
    srt = vectors[order]
    dup = np.zeros(n, dtype=bool)
    # equal rows end up adjacent after lexsort
    close = np.all(np.abs(srt[1:] - srt[:-1]) <= tol, axis=1)
    dup_sorted = np.r_[False, close]
    # keep the lowest original index within each run of duplicates
    run_start = np.cumsum(~dup_sorted) - 1
    keep_idx = np.full(run_start[-1] + 1, n, dtype=np.int64)
    np.minimum.at(keep_idx, run_start, order)
    dup[:] = True
    dup[keep_idx] = False
    keep = ~dup
    return vectors[keep], actions[keep]


def prune_pointwise(vectors: np.ndarray, actions: np.ndarray, tol: float = 1e-12):
    """Drop duplicates and vectors pointwise dominated by another vector.

    Relative order of the survivors is preserved.
    """
    vectors, actions = unique_rows(vectors, actions, tol)
    n = vectors.shape[0]
    if n <= 1:
        return vectors, actions
    dominated = kernels.pointwise_dominated(np.ascontiguousarray(vectors))
    keep = ~dominated
    return vectors[keep], actions[keep]


def prune_dominated(vs: VectorSet, eps: float = 1e-10) -> VectorSet:
    """Minimal subset of ``vs`` representing the same PWLC function.

    Pointwise dominance runs first; survivors go through Lark's filter, where each
    candidate gets an exact witness LP against the vectors kept so far.
    """
    vecs, acts = prune_pointwise(vs.vectors, vs.actions)
    vecs, acts = lark_filter(vecs, acts, eps)
    return vs.with_meta(vectors=vecs, actions=acts)


def witness(alpha: np.ndarray, kept: np.ndarray, tol: float = 1e-13):
    """``max_b min_k b.(alpha - kept_k)`` over the simplex, with its maximiser ``b``.

    Constraint generation around the dense LP kernel: solve against a small
    subset of ``kept``, add the most violated vector at the returned ``b`` and
    repeat. Stops with the full LP optimum once nothing is violated.
    """
    alpha = np.ascontiguousarray(alpha, dtype=float)
    kept = np.ascontiguousarray(kept, dtype=float)
    K, n = kept.shape
    if K <= n + 2:
        return kernels.witness_lp(alpha, kept)
    margins = kept @ (np.full(n, 1.0 / n)) - alpha.mean()
    active = [int(np.argmax(margins))]
    active += [int(k) for k in np.argmax(kept, axis=0) if k not in active]
    while True:
        delta, b = kernels.witness_lp(alpha, kept[active])
        gaps = (alpha - kept) @ b
        k = int(np.argmin(gaps))
        if gaps[k] >= delta - tol * max(1.0, abs(delta)) or k in active:
            return float(gaps[k]), b
        active.append(k)


def lark_filter(vectors: np.ndarray, actions: np.ndarray, eps: float = 1e-10):
    n, dim = vectors.shape
    if n <= 1:
        return vectors, actions
    remaining = list(range(n))
    kept = []

    def best_at(b, pool):
        # lexicographic max over pool: value at b, then componentwise
        cand = np.array(pool)
        vals = vectors[cand] @ b
        top = cand[vals >= vals.max() - 1e-15 * max(1.0, abs(vals.max()))]
        if top.size > 1:
            sub = vectors[top]
            order = np.lexsort(sub.T[::-1])
            top = top[order[-1:]]
        return int(top[0])

    for i in range(dim):
        if not remaining:
            break
        corner = np.zeros(dim)
        corner[i] = 1.0
        k = best_at(corner, range(n))
        if k not in kept:
            kept.append(k)
            remaining.remove(k)
    while remaining:
        cand = remaining[0]
        delta, b = witness(vectors[cand], vectors[kept])
        if delta > eps:
            k = best_at(b, remaining)
            kept.append(k)
            remaining.remove(k)
        else:
            remaining.pop(0)
    kept.sort()
    return vectors[kept], actions[kept]


def tiger85(discount: float = 0.95) -> PomdpModel:
    """Two-door tiger problem with 0.85 listening accuracy."""
    T = np.zeros((3, 2, 2))
    T[0] = np.eye(2)
    T[1:] = 0.5
    Z = np.zeros((3, 2, 2))
    Z[0] = [[0.85, 0.15], [0.15, 0.85]]
    Z[1:] = 0.5
    R = np.array([[-1.0, -1.0], [-100.0, 10.0], [10.0, -100.0]])
    return PomdpModel(
        states=("left", "right"),
        actions=("listen", "open-left", "open-right"),
        observations=("hear-left", "hear-right"),
        transition=T, observation_fn=Z, reward=R, discount=discount,
        initial_belief=np.array([0.5, 0.5]), name="tiger85",
    )


def random_model(rng: np.random.Generator, n_states: int, n_actions: int, n_obs: int,
                 discount: float = 0.9, reward_scale: float = 1.0,
                 concentration: float = 1.0) -> PomdpModel:
    """Random dense model; rows drawn from a symmetric Dirichlet."""
    T = rng.dirichlet(np.full(n_states, concentration), size=(n_actions, n_states))
    Z = rng.dirichlet(np.full(n_obs, concentration), size=(n_actions, n_states))
    R = rng.uniform(-reward_scale, reward_scale, size=(n_actions, n_states))
    return PomdpModel(
        states=tuple(f"s{i}" for i in range(n_states)),
        actions=tuple(f"a{i}" for i in range(n_actions)),
        observations=tuple(f"o{i}" for i in range(n_obs)),
        transition=T, observation_fn=Z, reward=R, discount=discount,
        initial_belief=np.full(n_states, 1.0 / n_states), name="random",
    )
