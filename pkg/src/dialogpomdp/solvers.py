"""Value-iteration solvers: exact (incremental pruning), MDP, QMDP, FIB and grid-based.

All solvers return a :class:`SolveResult` whose ``vector_set`` represents the value
function as a set of alpha vectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .model import (
    ModelError,
    PomdpModel,
    VectorSet,
    action_groups,
    belief_entropy,
    lark_filter,
    prune_pointwise,
    sample_simplex,
)

METHODS = ("exact", "mdp", "qmdp", "fib", "grid")
GRID_STRATEGIES = ("fixed", "random", "random-s-grid", "cluster-s-grid")


class ConfigError(ValueError):
    pass


class ResourceLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_epochs: int = 10_000
    # stop once the implied distance to the fixed point, gamma/(1-gamma) * residual, is below this
    residual_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if int(self.max_epochs) < 0:
            raise ConfigError("max_epochs must be >= 0")
        if not self.residual_tolerance > 0:
            raise ConfigError("residual_tolerance must be > 0")


@dataclass(frozen=True)
class GridConfig:
    strategy: str = "fixed"
    grid_size: int = 64
    incremental: bool = False
    simulation_beliefs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.strategy not in GRID_STRATEGIES:
            raise ConfigError(f"unknown grid strategy {self.strategy!r}")
        if int(self.grid_size) < 1:
            raise ConfigError("grid_size must be >= 1")
        if self.strategy.endswith("s-grid") and (
            self.simulation_beliefs is None or len(self.simulation_beliefs) == 0
        ):
            raise ConfigError(f"strategy {self.strategy!r} requires simulation beliefs")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    n_vectors: int
    residual: float
    seconds: float


@dataclass(frozen=True)
class SolveResult:
    vector_set: VectorSet
    stats: tuple = ()
    terminated_by: str = "epochs"

    @property
    def epochs(self) -> int:
        return len(self.stats)


def _converged(residual: float, gamma: float, tol: float) -> bool:
    return residual * gamma / (1.0 - gamma) < tol


def _finish(model, vectors, actions, solver, stats, terminated_by):
    vs = VectorSet(vectors, actions, solver=solver, epochs=len(stats), action_names=model.actions)
    return SolveResult(vs, tuple(stats), terminated_by)


def solve_mdp(model: PomdpModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Fully observable value iteration; one unlabeled vector."""
    T, R, gamma = model.transition, model.reward, model.discount
    v = np.zeros(model.n_states)
    stats, how = [], "epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        new = (R + gamma * (T @ v)).max(axis=0)
        res = float(np.abs(new - v).max())
        v = new
        stats.append(EpochStats(epoch, 1, res, time.perf_counter() - t0))
        if _converged(res, gamma, cfg.residual_tolerance):
            how = "tolerance"
            break
    return _finish(model, v[None, :], np.array([-1]), "mdp", stats, how)


def solve_qmdp(model: PomdpModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """One Q-vector per action, backed up through the MDP value of the next state."""
    T, R, gamma = model.transition, model.reward, model.discount
    q = np.zeros_like(R)
    stats, how = [], "epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        new = R + gamma * (T @ q.max(axis=0))
        res = float(np.abs(new - q).max())
        q = new
        stats.append(EpochStats(epoch, q.shape[0], res, time.perf_counter() - t0))
        if _converged(res, gamma, cfg.residual_tolerance):
            how = "tolerance"
            break
    return _finish(model, q, np.arange(model.n_actions), "qmdp", stats, how)


def solve_fib(model: PomdpModel, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    """Fast informed bound: best next vector chosen per (observation, current state)."""
    T, Z, R, gamma = model.transition, model.observation_fn, model.reward, model.discount
    # TZ[a, o, s, s'] = T(s, a, s') O(s', a, o)
    TZ = np.einsum("ast,ato->aost", T, Z)
    A, O, S = TZ.shape[:3]
    flat = np.ascontiguousarray(TZ.reshape(A * O * S, S))
    q = np.zeros_like(R)
    stats, how = [], "epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        proj = (flat @ q.T).reshape(A, O, S, -1)  # (A, O, S, A')
        new = R + gamma * proj.max(axis=3).sum(axis=1)
        res = float(np.abs(new - q).max())
        q = new
        stats.append(EpochStats(epoch, q.shape[0], res, time.perf_counter() - t0))
        if _converged(res, gamma, cfg.residual_tolerance):
            how = "tolerance"
            break
    return _finish(model, q, np.arange(model.n_actions), "fib", stats, how)


def _prune(vectors, actions, exact: bool):
    vectors, actions = prune_pointwise(vectors, actions)
    if exact:
        vectors, actions = lark_filter(vectors, actions)
    return vectors, actions


def _cross_sum(v1, a1, v2):
    out = (v1[:, None, :] + v2[None, :, :]).reshape(-1, v1.shape[1])
    return out, np.repeat(a1, v2.shape[0])


def _residual_beliefs(n_states: int, seed: int, n: int = 1000) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([np.eye(n_states), sample_simplex(rng, n, n_states)])


def solve_exact_vi(model: PomdpModel, cfg: SolverConfig = SolverConfig(max_epochs=10),
                   initial: Optional[np.ndarray] = None, prune: bool = True,
                   max_vectors: int = 100_000) -> SolveResult:
    """Exact value iteration with incremental pruning of the observation cross-sums.

    ``initial`` defaults to the single zero vector. With ``prune=False`` the full
    enumeration is kept (only useful as a reference on tiny models). The residual
    statistic is the sup-norm change measured on the corners plus 1000 seeded
    random beliefs.
    """
    T, Z, R, gamma = model.transition, model.observation_fn, model.reward, model.discount
    A, S, O = model.n_actions, model.n_states, model.n_observations
    gamma_set = (np.zeros((1, S)) if initial is None
                 else np.array(initial, dtype=float, ndmin=2))
    if gamma_set.shape[1] != S:
        raise ModelError("initial vectors do not match the state count")
    labels = np.full(gamma_set.shape[0], -1, dtype=np.int64)
    probe = _residual_beliefs(S, cfg.seed)
    old_vals = (probe @ gamma_set.T).max(axis=1)
    stats, how = [], "epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        G = kernels.project(T, Z, gamma, gamma_set)  # (A, O, S, n)
        pieces, piece_actions = [], []
        for a in range(A):
            acc, acc_a = None, None
            for o in range(O):
                proj = R[a][None, :] / O + G[a, o].T
                proj_a = np.full(proj.shape[0], a, dtype=np.int64)
                if prune:
                    proj, proj_a = _prune(proj, proj_a, True)
                if acc is None:
                    acc, acc_a = proj, proj_a
                else:
                    if acc.shape[0] * proj.shape[0] > max_vectors:
                        raise ResourceLimitExceeded(
                            f"cross-sum would hold {acc.shape[0] * proj.shape[0]} vectors "
                            f"(cap {max_vectors})")
                    acc, acc_a = _cross_sum(acc, acc_a, proj)
                    if prune:
                        acc, acc_a = _prune(acc, acc_a, True)
            pieces.append(acc)
            piece_actions.append(acc_a)
        gamma_set = np.vstack(pieces)
        labels = np.concatenate(piece_actions)
        if prune:
            gamma_set, labels = _prune(gamma_set, labels, True)
        if gamma_set.shape[0] > max_vectors:
            raise ResourceLimitExceeded(f"{gamma_set.shape[0]} vectors exceed cap {max_vectors}")
        vals = (probe @ gamma_set.T).max(axis=1)
        res = float(np.abs(vals - old_vals).max())
        old_vals = vals
        stats.append(EpochStats(epoch, gamma_set.shape[0], res, time.perf_counter() - t0))
        if _converged(res, gamma, cfg.residual_tolerance):
            how = "tolerance"
            break
    return _finish(model, gamma_set, labels, "exact", stats, how)


def belief_distance(b1, b2) -> float:
    """Entropy-weighted Euclidean distance used for clustering simulation beliefs."""
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1.shape != b2.shape:
        raise ModelError("belief dimensions differ")
    return float(np.sqrt(belief_entropy(b1) * belief_entropy(b2)) * np.linalg.norm(b1 - b2))


def _entropies(beliefs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(beliefs > 0, beliefs * np.log(beliefs), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def distance_matrix(beliefs: np.ndarray) -> np.ndarray:
    h = _entropies(beliefs)
    n = beliefs.shape[0]
    euclid = np.empty((n, n))
    # direct differences in row blocks; the expanded-square form cancels badly
    step = max(1, 2_000_000 // max(1, n * beliefs.shape[1]))
    for i in range(0, n, step):
        diff = beliefs[i:i + step, None, :] - beliefs[None, :, :]
        euclid[i:i + step] = np.sqrt((diff * diff).sum(axis=2))
    return np.sqrt(np.outer(h, h)) * euclid


def cluster_medoids(beliefs: np.ndarray, k: int, sweeps: int = 20,
                    weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Weighted k-medoids under :func:`belief_distance`; returns medoid indices.

    Farthest-point initialisation starting from the highest-entropy point; ties
    always resolve to the lowest index.
    """
    n = beliefs.shape[0]
    k = min(k, n)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    D = distance_matrix(beliefs)
    medoids = [int(np.argmax(_entropies(beliefs)))]
    while len(medoids) < k:
        mind = D[:, medoids].min(axis=1)
        mind[medoids] = -np.inf
        medoids.append(int(np.argmax(mind)))
    medoids = np.array(medoids)
    for _ in range(sweeps):
        assign = np.argmin(D[:, medoids], axis=1)
        assign[medoids] = np.arange(k)
        changed = False
        for c in range(k):
            members = np.nonzero(assign == c)[0]
            cost = (D[np.ix_(members, members)] * w[members][None, :]).sum(axis=1)
            cur = int(np.nonzero(members == medoids[c])[0][0])
            best = int(np.argmin(cost))
            if cost[best] < cost[cur]:
                medoids[c] = members[best]
                changed = True
        if not changed:
            break
    return medoids


def select_grid_points(strategy: str, grid_size: int, seed, n_states: int,
                       simulation_beliefs: Optional[np.ndarray] = None) -> np.ndarray:
    """Grid beliefs for one epoch, as rows of an array.

    ``seed`` may be an int or a ``numpy.random.Generator`` (advanced in place).
    """
    GridConfig(strategy, grid_size, simulation_beliefs=simulation_beliefs)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if strategy == "fixed":
        return np.eye(n_states)
    if strategy == "random":
        return sample_simplex(rng, grid_size, n_states)
    sims = np.asarray(simulation_beliefs, dtype=float)
    if sims.ndim != 2 or sims.shape[1] != n_states:
        raise ConfigError("simulation beliefs do not match the state count")
    if strategy == "random-s-grid":
        replace = grid_size > sims.shape[0]
        return sims[rng.choice(sims.shape[0], size=grid_size, replace=replace)]
    uniq, first, counts = np.unique(sims, axis=0, return_index=True, return_counts=True)
    # keep first-occurrence order so ties resolve to the earliest simulated belief
    order = np.argsort(first)
    uniq, counts = uniq[order], counts[order]
    return uniq[cluster_medoids(uniq, grid_size, weights=counts)]


def grid_lower_bound(model: PomdpModel) -> np.ndarray:
    return np.full(model.n_states, model.reward.min() / (1.0 - model.discount))


def solve_grid(model: PomdpModel, cfg: SolverConfig = SolverConfig(max_epochs=30),
               grid_cfg: GridConfig = GridConfig(), trace=None) -> SolveResult:
    """Point-based backups at grid beliefs, one Q-vector per (belief, action).

    Runs exactly ``cfg.max_epochs`` epochs from the lower-bound vector
    ``min R / (1 - gamma)``. ``trace``, when given, is called after every epoch
    with ``(epoch, grid_points, vectors, actions)``.
    """
    T, Z, R, gamma = model.transition, model.observation_fn, model.reward, model.discount
    S = model.n_states
    rng = np.random.default_rng(cfg.seed)
    vectors = grid_lower_bound(model)[None, :]
    actions = np.array([-1], dtype=np.int64)
    reps, group = action_groups(model)
    Tu = np.ascontiguousarray(T[reps])
    Zu = np.ascontiguousarray(Z[reps])
    A = model.n_actions
    fixed_points = None
    if grid_cfg.strategy in ("fixed", "cluster-s-grid"):
        fixed_points = select_grid_points(grid_cfg.strategy, grid_cfg.grid_size, rng, S,
                                          grid_cfg.simulation_beliefs)
    stats = []
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        points = fixed_points if fixed_points is not None else select_grid_points(
            grid_cfg.strategy, grid_cfg.grid_size, rng, S, grid_cfg.simulation_beliefs)
        points = np.ascontiguousarray(points, dtype=float)
        before = (points @ vectors.T).max(axis=1)
        future = kernels.backup_terms(Tu, Zu, np.ascontiguousarray(vectors), points)
        new = (R[None, :, :] + gamma * future[:, group, :]).reshape(-1, S)
        new_a = np.tile(np.arange(A, dtype=np.int64), points.shape[0])
        if grid_cfg.incremental:
            new = np.vstack([vectors, new])
            new_a = np.concatenate([actions, new_a])
        vectors, actions = prune_pointwise(new, new_a)
        after = (points @ vectors.T).max(axis=1)
        stats.append(EpochStats(epoch, vectors.shape[0], float(np.abs(after - before).max()),
                                time.perf_counter() - t0))
        if trace is not None:
            trace(epoch, points, vectors, actions)
    return _finish(model, vectors, actions, "grid", stats, "epochs")


def solve(model: PomdpModel, method: str, cfg: Optional[SolverConfig] = None,
          grid_cfg: Optional[GridConfig] = None) -> SolveResult:
    """Dispatch by method name (``exact``, ``mdp``, ``qmdp``, ``fib``, ``grid``)."""
    if method == "grid":
        return solve_grid(model, cfg or SolverConfig(max_epochs=30), grid_cfg or GridConfig())
    funcs = {"exact": solve_exact_vi, "mdp": solve_mdp, "qmdp": solve_qmdp, "fib": solve_fib}
    if method not in funcs:
        raise ConfigError(f"unknown method {method!r}")
    if method == "exact":
        return solve_exact_vi(model, cfg or SolverConfig(max_epochs=10))
    return funcs[method](model, cfg or SolverConfig())
