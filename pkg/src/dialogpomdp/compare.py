"""Multi-method, multi-seed comparison: solve, evaluate average value, simulate."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .model import PomdpModel
from .policy import SimConfig, collect_sim_beliefs, evaluate_avg_value, make_policy, simulate
from .solvers import GRID_STRATEGIES, METHODS, ConfigError, GridConfig, SolverConfig, solve, solve_qmdp

S_GRID = ("random-s-grid", "cluster-s-grid")


@dataclass(frozen=True)
class CompareConfig:
    methods: tuple = ("mdp", "qmdp", "fib", "grid")
    seeds: tuple = (0,)
    steps: int = 10_000
    points: int = 10_000
    grid_strategy: str = "random-s-grid"
    grid_size: int = 64
    grid_epochs: int = 30
    # length of the QMDP-LA run whose beliefs feed the s-grid strategies
    sim_belief_steps: int = 2_000

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s): {', '.join(bad)}")
        if self.grid_strategy not in GRID_STRATEGIES:
            raise ConfigError(f"unknown grid strategy {self.grid_strategy!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")


@dataclass
class CompareRow:
    method: str
    mode: str
    seed: int
    size: int
    avg_value: float
    total_reward: float
    decision_ms: float


def policy_modes(method: str) -> tuple:
    # the single MDP vector carries no action, so only look-ahead applies
    return ("la",) if method == "mdp" else ("dr", "la")


def grid_sim_beliefs(model: PomdpModel, seed: int, steps: int):
    q = solve_qmdp(model).vector_set
    return collect_sim_beliefs(model, make_policy("la", q, model), SimConfig(steps, seed=seed))


def solve_for_seed(model: PomdpModel, method: str, seed: int, cfg: CompareConfig):
    if method != "grid":
        return solve(model, method)
    sims = None
    if cfg.grid_strategy in S_GRID:
        sims = grid_sim_beliefs(model, seed + 10_000, cfg.sim_belief_steps)
    grid_cfg = GridConfig(cfg.grid_strategy, cfg.grid_size, simulation_beliefs=sims)
    return solve(model, "grid", SolverConfig(max_epochs=cfg.grid_epochs, seed=seed), grid_cfg)


def compare(model: PomdpModel, cfg: CompareConfig = CompareConfig(), progress=None) -> list:
    """One row per (method, policy mode, seed).

    Seed-independent solvers are solved once; the grid solver and every
    simulation draw from the row's seed.
    """
    cache = {}
    rows = []
    for seed in cfg.seeds:
        for method in cfg.methods:
            key = (method, seed if method == "grid" else None)
            if key not in cache:
                vs = solve_for_seed(model, method, seed, cfg).vector_set
                cache[key] = (vs, evaluate_avg_value(vs, cfg.points, seed))
            vs, avg = cache[key]
            for mode in policy_modes(method):
                t0 = time.perf_counter()
                rep = simulate(model, make_policy(mode, vs, model), SimConfig(cfg.steps, seed=seed))
                rows.append(CompareRow(method, mode, seed, len(vs), avg, rep.total_reward,
                                       rep.decision_ms_mean))
                if progress is not None:
                    progress(rows[-1], time.perf_counter() - t0)
    return rows


def totals(rows: list, seed: int) -> dict:
    """``{"grid-la": total, ...}`` for one seed."""
    return {f"{r.method}-{r.mode}": r.total_reward for r in rows if r.seed == seed}


def expected_ordering_holds(t: dict) -> bool:
    """Grid-LA > FIB-LA > QMDP-LA > MDP-LA and Grid-DR above QMDP-DR and FIB-DR."""
    return (t["grid-la"] > t["fib-la"] > t["qmdp-la"] > t["mdp-la"]
            and t["grid-dr"] > t["qmdp-dr"] and t["grid-dr"] > t["fib-dr"])
