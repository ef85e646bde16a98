"""Factored POMDP specifications built from two-stage temporal Bayesian networks.

A :class:`FactoredSpec` describes the state space as a product of discrete
variables. Transition nets give, for each post-state variable, a CPT conditioned
on pre-state variables; observation nets give a CPT over observations
conditioned on post-state variables. Each net applies to a set of actions and
every action must be covered by exactly one net of each kind.

Text format (``#`` starts a comment; names are whitespace-free tokens without
``:``, ``|`` or ``=``)::

    discount: 0.9
    variables:
      type: visit ask
      hidden: normal silent
    actions: a1 a2
    observations: o1 o2
    ocat:                       # optional observation categories
      o1: info
    start:
      type: 0.5 0.5
      hidden: 1 0
    tnet repair: a1
      type | type
        visit : 1 0
        ask : 0 1
      hidden |
        : 0.9 0.1
    onet all: a1 a2
      | type hidden
        visit normal : 0.8 0.2
        ...
    reward:
      * | * : 0
      a1 | type=visit hidden=normal : 10 right

Reward lines are ``<actions or *> | <var=value ... or *> : <value> [category]``;
later lines override earlier ones, unmatched cells are 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import PROB_TOL, PomdpModel, check_model


class FactoredSpecError(ValueError):
    pass


@dataclass(frozen=True)
class StateVariable:
    name: str
    domain: tuple

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        if not self.domain:
            raise FactoredSpecError(f"variable {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise FactoredSpecError(f"variable {self.name!r} has repeated values")


@dataclass(frozen=True)
class Cpt:
    """Rows keyed by the tuple of parent values; each row is a distribution."""

    parents: tuple
    rows: dict

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "rows", {tuple(k): tuple(float(p) for p in v)
                                          for k, v in self.rows.items()})


@dataclass(frozen=True)
class TwoStageNet:
    name: str
    actions: tuple
    cpts: dict  # post-state variable name -> Cpt over pre-state parents

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class ObservationNet:
    name: str
    actions: tuple
    cpt: Cpt  # over observations, parents are post-state variables

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class RewardEntry:
    actions: Optional[tuple]  # None matches every action
    condition: dict  # variable -> value
    value: float
    category: Optional[str] = None


@dataclass(frozen=True, eq=False)
class FactoredSpec:
    variables: tuple
    actions: tuple
    observations: tuple
    transition_nets: tuple
    observation_nets: tuple
    rewards: tuple
    discount: float
    start: dict  # variable -> marginal; the initial belief is their product
    observation_category: Optional[tuple] = None
    name: str = ""

    def variable(self, name: str) -> StateVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise FactoredSpecError(f"unknown variable {name!r}")

    def state_tuples(self) -> list:
        return list(itertools.product(*(v.domain for v in self.variables)))

    def state_names(self) -> tuple:
        return tuple(".".join(t) for t in self.state_tuples())


def _check_cpt(cpt: Cpt, parent_vars, child_size: int, where: str):
    combos = set(itertools.product(*(v.domain for v in parent_vars)))
    keys = set(cpt.rows)
    missing, extra = combos - keys, keys - combos
    if missing:
        raise FactoredSpecError(f"{where}: missing CPT row for parents {sorted(missing)[0]}")
    if extra:
        raise FactoredSpecError(f"{where}: CPT row references unknown values {sorted(extra)[0]}")
    for key, row in cpt.rows.items():
        if len(row) != child_size:
            raise FactoredSpecError(f"{where}: row {key} has {len(row)} entries, expected {child_size}")
        if any(p < 0 or p > 1 for p in row) or abs(sum(row) - 1.0) > PROB_TOL:
            raise FactoredSpecError(f"{where}: row {key} is not a distribution (sum {sum(row):.12g})")


def _net_for(action, nets, kind):
    found = [n for n in nets if action in n.actions]
    if len(found) != 1:
        raise FactoredSpecError(
            f"action {action!r} covered by {len(found)} {kind} nets (need exactly one)")
    return found[0]


def compile_factored(spec: FactoredSpec) -> PomdpModel:
    """Expand a factored spec into a flat :class:`PomdpModel` over the product space."""
    names = [v.name for v in spec.variables]
    if len(set(names)) != len(names):
        raise FactoredSpecError("duplicate variable names")
    var_of = {v.name: v for v in spec.variables}
    states = spec.state_tuples()
    S, A, O = len(states), len(spec.actions), len(spec.observations)
    # value index of each variable in each flat state
    val_idx = {v.name: np.array([v.domain.index(t[i]) for t in states])
               for i, v in enumerate(spec.variables)}
    obs_set = set(spec.observations)

    for net in spec.transition_nets + spec.observation_nets:
        for a in net.actions:
            if a not in spec.actions:
                raise FactoredSpecError(f"net {net.name!r} names unknown action {a!r}")

    def cpt_matrix(cpt: Cpt, child_size: int, where: str) -> np.ndarray:
        """Probability table indexed by (flat state, child value)."""
        try:
            parents = [var_of[p] for p in cpt.parents]
        except KeyError as e:
            raise FactoredSpecError(f"{where}: unknown parent variable {e.args[0]!r}") from None
        _check_cpt(cpt, parents, child_size, where)
        out = np.empty((S, child_size))
        for i, t in enumerate(states):
            key = tuple(t[names.index(p)] for p in cpt.parents)
            out[i] = cpt.rows[key]
        return out

    T = np.empty((A, S, S))
    Z = np.empty((A, S, O))
    t_cache, o_cache = {}, {}
    for ai, a in enumerate(spec.actions):
        tnet = _net_for(a, spec.transition_nets, "transition")
        if tnet.name not in t_cache:
            if set(tnet.cpts) != set(names):
                raise FactoredSpecError(
                    f"transition net {tnet.name!r} must give one CPT per state variable")
            mat = np.ones((S, S))
            for v in spec.variables:
                m = cpt_matrix(tnet.cpts[v.name], len(v.domain), f"tnet {tnet.name}/{v.name}")
                mat *= m[:, val_idx[v.name]]
            t_cache[tnet.name] = mat
        T[ai] = t_cache[tnet.name]
        onet = _net_for(a, spec.observation_nets, "observation")
        if onet.name not in o_cache:
            o_cache[onet.name] = cpt_matrix(onet.cpt, O, f"onet {onet.name}")
        Z[ai] = o_cache[onet.name]

    R = np.zeros((A, S))
    has_cat = any(e.category is not None for e in spec.rewards)
    cats = np.full((A, S), "other", dtype=object) if has_cat else None
    for e in spec.rewards:
        for var, val in e.condition.items():
            if var not in var_of:
                raise FactoredSpecError(f"reward condition names unknown variable {var!r}")
            if val not in var_of[var].domain:
                raise FactoredSpecError(f"reward condition {var}={val} uses an unknown value")
        acts = range(A) if e.actions is None else [_action_idx(spec, a) for a in e.actions]
        mask = np.ones(S, dtype=bool)
        for var, val in e.condition.items():
            mask &= val_idx[var] == var_of[var].domain.index(val)
        for ai in acts:
            R[ai, mask] = e.value
            if has_cat:
                cats[ai, mask] = e.category or "other"

    b0 = np.ones(S)
    for v in spec.variables:
        marg = spec.start.get(v.name)
        if marg is None:
            marg = np.full(len(v.domain), 1.0 / len(v.domain))
        marg = np.asarray(marg, dtype=float)
        if marg.shape != (len(v.domain),):
            raise FactoredSpecError(f"start marginal for {v.name!r} has the wrong length")
        b0 *= marg[val_idx[v.name]]
    if spec.observation_category is not None and len(spec.observation_category) != O:
        raise FactoredSpecError("one observation category per observation required")
    for o in spec.observations:
        if o not in obs_set:
            raise FactoredSpecError(f"unknown observation {o!r}")
    model = PomdpModel(
        states=spec.state_names(), actions=spec.actions, observations=spec.observations,
        transition=T, observation_fn=Z, reward=R, discount=spec.discount, initial_belief=b0,
        reward_category=cats, observation_category=spec.observation_category, name=spec.name,
    )
    return check_model(model)


def _action_idx(spec, a):
    try:
        return spec.actions.index(a)
    except ValueError:
        raise FactoredSpecError(f"reward entry names unknown action {a!r}") from None


# ---------------------------------------------------------------- text format

def _fmt(x: float) -> str:
    return repr(float(x))


def write_factored(spec: FactoredSpec) -> str:
    out = []
    if spec.name:
        out.append(f"# {spec.name}")
    out.append(f"discount: {_fmt(spec.discount)}")
    out.append("variables:")
    for v in spec.variables:
        out.append(f"  {v.name}: {' '.join(v.domain)}")
    out.append("actions: " + " ".join(spec.actions))
    out.append("observations: " + " ".join(spec.observations))
    if spec.observation_category is not None:
        out.append("ocat:")
        for o, c in zip(spec.observations, spec.observation_category):
            out.append(f"  {o}: {c}")
    out.append("start:")
    for v in spec.variables:
        if v.name in spec.start:
            out.append(f"  {v.name}: " + " ".join(_fmt(p) for p in spec.start[v.name]))
    for net in spec.transition_nets:
        out.append(f"tnet {net.name}: " + " ".join(net.actions))
        for v in spec.variables:
            cpt = net.cpts[v.name]
            out.append(f"  {v.name} | " + " ".join(cpt.parents))
            out.extend(_fmt_rows(cpt))
    for net in spec.observation_nets:
        out.append(f"onet {net.name}: " + " ".join(net.actions))
        out.append("  | " + " ".join(net.cpt.parents))
        out.extend(_fmt_rows(net.cpt))
    out.append("reward:")
    for e in spec.rewards:
        acts = "*" if e.actions is None else " ".join(e.actions)
        cond = " ".join(f"{k}={v}" for k, v in e.condition.items()) or "*"
        tail = f" {e.category}" if e.category else ""
        out.append(f"  {acts} | {cond} : {_fmt(e.value)}{tail}")
    return "\n".join(line.rstrip() for line in out) + "\n"


def _fmt_rows(cpt: Cpt):
    for key, row in cpt.rows.items():
        yield f"    {' '.join(key)} : " + " ".join(_fmt(p) for p in row)


def parse_factored(text: str) -> FactoredSpec:
    """Parse the text format documented in this module; errors carry line numbers."""
    lines = []
    for no, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].rstrip()
        if body.strip():
            lines.append((no, body))

    discount = None
    variables, actions, observations = [], None, None
    ocat, start = {}, {}
    tnets, onets, rewards = [], [], []
    section = None
    cur_net = None  # (kind, name, actions, cpts-or-parents, rows)
    cur_cpt = None

    def err(no, msg):
        return FactoredSpecError(f"line {no}: {msg}")

    def floats(no, toks):
        try:
            return [float(t) for t in toks]
        except ValueError:
            raise err(no, f"expected numbers, got {' '.join(toks)!r}") from None

    def close_net():
        nonlocal cur_net, cur_cpt
        if cur_net is None:
            return
        kind, name, acts, data = cur_net
        if kind == "tnet":
            tnets.append(TwoStageNet(name, acts, {v: Cpt(p, r) for v, (p, r) in data.items()}))
        else:
            if data is None:
                raise FactoredSpecError(f"onet {name!r} has no CPT")
            onets.append(ObservationNet(name, acts, Cpt(*data)))
        cur_net, cur_cpt = None, None

    for no, body in lines:
        indented = body[0] in " \t"
        s = body.strip()
        if not indented:
            close_net()
            head, sep, rest = s.partition(":")
            head = head.strip()
            if not sep:
                raise err(no, f"expected 'keyword:' but got {s!r}")
            words = head.split()
            if head == "discount":
                discount = floats(no, rest.split())[0]
                section = None
            elif head in ("variables", "start", "ocat", "reward"):
                section = head
            elif head == "actions":
                actions, section = tuple(rest.split()), None
            elif head == "observations":
                observations, section = tuple(rest.split()), None
            elif len(words) == 2 and words[0] in ("tnet", "onet"):
                section = words[0]
                cur_net = [words[0], words[1], tuple(rest.split()), {} if words[0] == "tnet" else None]
            else:
                raise err(no, f"unknown section {head!r}")
            continue
        if section == "variables":
            name, sep, rest = s.partition(":")
            if not sep:
                raise err(no, "expected 'name: values'")
            try:
                variables.append(StateVariable(name.strip(), tuple(rest.split())))
            except FactoredSpecError as e:
                raise err(no, str(e)) from None
        elif section == "start":
            name, sep, rest = s.partition(":")
            start[name.strip()] = tuple(floats(no, rest.split()))
        elif section == "ocat":
            name, sep, rest = s.partition(":")
            ocat[name.strip()] = rest.strip()
        elif section in ("tnet", "onet"):
            if "|" in s and ":" not in s:
                child, _, parents = s.partition("|")
                child = child.strip()
                parents = tuple(parents.split())
                if section == "tnet":
                    if not child:
                        raise err(no, "transition CPT header needs a variable name")
                    cur_net[3][child] = (parents, {})
                    cur_cpt = cur_net[3][child][1]
                else:
                    if child:
                        raise err(no, "observation CPT header is '| parents'")
                    cur_net[3] = (parents, {})
                    cur_cpt = cur_net[3][1]
            else:
                if cur_cpt is None:
                    raise err(no, "CPT row before a CPT header")
                key, sep, probs = s.partition(":")
                if not sep:
                    raise err(no, "CPT row must be 'parent values : probabilities'")
                cur_cpt[tuple(key.split())] = tuple(floats(no, probs.split()))
        elif section == "reward":
            left, sep, right = s.partition(":")
            acts, bar, cond = left.partition("|")
            if not sep or not bar:
                raise err(no, "reward line must be 'actions | conditions : value [category]'")
            acts = acts.split()
            condition = {}
            for tok in cond.split():
                if tok == "*":
                    continue
                k, eq, v = tok.partition("=")
                if not eq:
                    raise err(no, f"condition {tok!r} must be var=value")
                condition[k] = v
            vals = right.split()
            if not vals:
                raise err(no, "missing reward value")
            rewards.append(RewardEntry(None if acts == ["*"] else tuple(acts), condition,
                                       floats(no, vals[:1])[0], vals[1] if len(vals) > 1 else None))
        else:
            raise err(no, f"unexpected indented line {s!r}")
    close_net()
    if discount is None or actions is None or observations is None or not variables:
        raise FactoredSpecError("spec needs discount, variables, actions and observations")
    obs_cat = None
    if ocat:
        missing = [o for o in observations if o not in ocat]
        if missing:
            raise FactoredSpecError(f"ocat missing observation {missing[0]!r}")
        obs_cat = tuple(ocat[o] for o in observations)
    return FactoredSpec(tuple(variables), actions, observations, tuple(tnets), tuple(onets),
                        tuple(rewards), discount, start, obs_cat)
