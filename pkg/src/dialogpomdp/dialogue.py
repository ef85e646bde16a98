"""Generator for the tour-guide dialogue POMDP (40 states, 18 actions, 25 observations).

State variables: request ``type`` (visit/ask), ``place`` (gate/hall), ``property``
(height/size) and the ``hidden`` system state (normal, silent, error-noisy,
error-silent, overheard). The property is irrelevant for visit requests, which
yields 10 pairs of equivalent states.

Actions (6 domain + 12 repair)::

    answer-{gate,hall}-{height,size}, goto-{gate,hall},
    ask-repeat, ask-type, ask-place, ask-property,
    declare-{visit,ask,gate,hall,height,size}, ignore, troubleshoot

Observations: three low-level channel/signal observations, ``yes``, ``no`` and
20 request observations ``req-...`` (every non-empty partial assignment of
type/place/property except visit requests that mention a property).

Three transition nets (domain, repair, troubleshoot) and eleven observation
nets (one per declare action, one per ask-intention action, one shared by the
domain actions and ask-repeat, one shared by ignore and troubleshoot). All
numbers below are hand-set defaults; :class:`DialogueParams` exposes them.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field

import numpy as np

from .factored import (
    Cpt,
    FactoredSpec,
    ObservationNet,
    RewardEntry,
    StateVariable,
    TwoStageNet,
    compile_factored,
)
from .model import PomdpModel

TYPES = ("visit", "ask")
PLACES = ("gate", "hall")
PROPERTIES = ("height", "size")
HIDDEN = ("normal", "silent", "error-noisy", "error-silent", "overheard")
ABNORMAL = HIDDEN[1:]

DOMAIN_ACTIONS = tuple(f"answer-{p}-{q}" for p in PLACES for q in PROPERTIES) + tuple(
    f"goto-{p}" for p in PLACES)
ASK_ACTIONS = ("ask-type", "ask-place", "ask-property")
DECLARE_ACTIONS = tuple(f"declare-{v}" for v in TYPES + PLACES + PROPERTIES)
REPAIR_ACTIONS = ("ask-repeat",) + ASK_ACTIONS + DECLARE_ACTIONS + ("ignore", "troubleshoot")
ACTIONS = DOMAIN_ACTIONS + REPAIR_ACTIONS

LOW_LEVEL = ("no-channel-no-signal", "no-channel-signal", "channel-no-signal")


def _requests():
    reqs = []
    for t, p, q in itertools.product((None,) + TYPES, (None,) + PLACES, (None,) + PROPERTIES):
        if t is None and p is None and q is None:
            continue
        if t == "visit" and q is not None:
            continue
        reqs.append((t, p, q))
    return reqs


REQUESTS = tuple(_requests())
REQUEST_NAMES = tuple("req-" + "-".join(v for v in r if v) for r in REQUESTS)
OBSERVATIONS = LOW_LEVEL + ("yes", "no") + REQUEST_NAMES
UTTERANCES = ("yes", "no") + REQUEST_NAMES

REWARD_CATEGORIES = (
    "ask-repeat", "ignore-wrong", "ask-intention", "declare", "ignore-right",
    "troubleshoot-wrong", "action-wrong", "right-type-no-param", "right-type-has-param",
    "domain-right", "troubleshoot-right",
)
CATEGORY_LABELS = {
    "ask-repeat": "Asking for repeat",
    "ignore-wrong": "Ignoring (wrong)",
    "ask-intention": "Asking for user's intention",
    "declare": "Declaring user's intention",
    "ignore-right": "Ignoring (right)",
    "troubleshoot-wrong": "Trouble-shooting (wrong)",
    "action-wrong": "Action (wrong)",
    "right-type-no-param": "Action (right type, no right param)",
    "right-type-has-param": "Action (right type, has right param)",
    "domain-right": "Domain Action (right)",
    "troubleshoot-right": "Trouble-shooting (right)",
}
STANDARD_REWARDS = {
    "ask-repeat": -4.0, "ignore-wrong": -3.0, "ask-intention": -2.0, "declare": -1.0,
    "ignore-right": 0.0, "troubleshoot-wrong": -20.0, "action-wrong": -20.0,
    "right-type-no-param": -15.0, "right-type-has-param": -10.0, "domain-right": 10.0,
    "troubleshoot-right": 20.0,
}
# categories whose cost the lower-cost presets reduce
LOWER_COSTS = {"ignore-wrong": -1.5, "troubleshoot-wrong": -10.0, "action-wrong": -10.0,
               "right-type-no-param": -7.5, "right-type-has-param": -5.0}
LOWER_COST_REWARDS = dict(STANDARD_REWARDS, **LOWER_COSTS)

PRESETS = ("standard", "lower-cost", "noisy", "noisy-lower-cost")


def observation_category(name: str) -> str:
    """no-info / yes-no / partial / full grouping used in simulation reports."""
    if name in LOW_LEVEL:
        return "no-info"
    if name in ("yes", "no"):
        return "yes-no"
    t, p, q = REQUESTS[REQUEST_NAMES.index(name)]
    full = (t == "visit" and p is not None) or (t == "ask" and p is not None and q is not None)
    return "full" if full else "partial"


@dataclass(frozen=True)
class DialogueParams:
    preset: str = "standard"
    # per-step probability of entering each abnormal hidden state from normal
    enter: dict = field(default_factory=lambda: {
        "silent": 0.01, "error-noisy": 0.01, "error-silent": 0.01, "overheard": 0.01})
    # per-step probability of returning to normal without troubleshooting
    recover: dict = field(default_factory=lambda: {
        "silent": 0.5, "error-noisy": 0.2, "error-silent": 0.05, "overheard": 0.6})
    troubleshoot_fix: float = 0.9
    # user restating a request in the normal state
    full_request: float = 0.5
    partial_request: float = 0.2
    wrong_request: float = 0.1
    # mass of the clear response when answering an ask / confirming a declare
    answer: float = 0.5
    confirm: float = 0.9
    # chance the user stays quiet after being ignored
    ignored_quiet: float = 0.2
    # share of random utterances produced in the abnormal states
    garbage: dict = field(default_factory=lambda: {
        "silent": 0.1, "error-noisy": 0.5, "error-silent": 0.05, "overheard": 0.3})
    rewards: dict = field(default_factory=lambda: dict(STANDARD_REWARDS))
    discount: float = 0.9

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        probs = [self.troubleshoot_fix, self.full_request, self.partial_request,
                 self.wrong_request, self.answer, self.confirm, self.ignored_quiet]
        probs += list(self.enter.values()) + list(self.recover.values()) + list(self.garbage.values())
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("dialogue probabilities must lie in [0, 1]")
        if sum(self.enter.values()) > 1.0:
            raise ValueError("abnormal entry probabilities exceed 1")
        if self.full_request + self.partial_request + self.wrong_request > 1.0:
            raise ValueError("request observation masses exceed 1")
        if set(self.rewards) != set(REWARD_CATEGORIES):
            raise ValueError("rewards must give exactly the 11 reward categories")

    @classmethod
    def preset_params(cls, preset: str, **overrides) -> "DialogueParams":
        """Parameters for a preset; ``overrides`` set the base the preset modifies."""
        base = cls(**overrides)
        kw = {}
        if preset in ("noisy", "noisy-lower-cost"):
            kw.update(
                enter={k: 2 * v for k, v in base.enter.items()},
                full_request=base.full_request / 2,
                wrong_request=base.wrong_request + base.full_request / 2,
                answer=base.answer / 2,
                confirm=base.confirm / 2,
            )
        if preset in ("lower-cost", "noisy-lower-cost"):
            kw["rewards"] = dict(base.rewards, **LOWER_COSTS)
        return dataclasses.replace(base, preset=preset, **kw)


# ------------------------------------------------------------------ transitions

def _hidden_default(p: DialogueParams) -> dict:
    rows = {}
    stay_normal = 1.0 - sum(p.enter[h] for h in ABNORMAL)
    rows[("normal",)] = (stay_normal,) + tuple(p.enter[h] for h in ABNORMAL)
    for h in ABNORMAL:
        row = [0.0] * len(HIDDEN)
        row[0] = p.recover[h]
        row[HIDDEN.index(h)] = 1.0 - p.recover[h]
        rows[(h,)] = tuple(row)
    return rows


def _hidden_troubleshoot(p: DialogueParams) -> dict:
    rest = (1.0 - p.troubleshoot_fix) / len(ABNORMAL)
    row = (p.troubleshoot_fix,) + (rest,) * len(ABNORMAL)
    return {(h,): row for h in HIDDEN}


def _identity(name, domain) -> Cpt:
    return Cpt((name,), {(v,): tuple(1.0 if w == v else 0.0 for w in domain) for v in domain})


def _uniform(domain) -> Cpt:
    return Cpt((), {(): tuple(1.0 / len(domain) for _ in domain)})


def _transition_nets(p: DialogueParams):
    hidden_default = Cpt(("hidden",), _hidden_default(p))
    hidden_fix = Cpt(("hidden",), _hidden_troubleshoot(p))
    intention = (("type", TYPES), ("place", PLACES), ("property", PROPERTIES))
    domain = TwoStageNet("domain", DOMAIN_ACTIONS,
                         {**{n: _uniform(d) for n, d in intention}, "hidden": hidden_default})
    repair = TwoStageNet("repair", tuple(a for a in REPAIR_ACTIONS if a != "troubleshoot"),
                         {**{n: _identity(n, d) for n, d in intention}, "hidden": hidden_default})
    fix = TwoStageNet("troubleshoot", ("troubleshoot",),
                      {**{n: _identity(n, d) for n, d in intention}, "hidden": hidden_fix})
    return (domain, repair, fix)


# ----------------------------------------------------------------- observations

_OBS_INDEX = {o: i for i, o in enumerate(OBSERVATIONS)}


def _consistent(req, intent) -> bool:
    t, pl, q = intent
    rt, rp, rq = req
    if t == "visit" and rq is not None:
        return False
    return (rt is None or rt == t) and (rp is None or rp == pl) and (rq is None or rq == q)


def _full_request(intent):
    t, pl, q = intent
    return (t, pl, None) if t == "visit" else (t, pl, q)


def _spread(row, names, mass):
    if names and mass:
        for n in names:
            row[_OBS_INDEX[n]] += mass / len(names)


def _req_name(req) -> str:
    return REQUEST_NAMES[REQUESTS.index(req)]


def _request_profile(p: DialogueParams, intent, clarity: float = 1.0) -> np.ndarray:
    """User stating their request; ``clarity`` scales the full-request mass."""
    row = np.zeros(len(OBSERVATIONS))
    full = _full_request(intent)
    consistent = [r for r in REQUESTS if _consistent(r, intent) and r != full]
    wrong = [r for r in REQUESTS if not _consistent(r, intent)]
    f = p.full_request * clarity
    row[_OBS_INDEX[_req_name(full)]] += f
    _spread(row, [_req_name(r) for r in consistent], p.partial_request)
    _spread(row, [_req_name(r) for r in wrong], p.wrong_request)
    rest = 1.0 - f - p.partial_request - p.wrong_request
    row[_OBS_INDEX["channel-no-signal"]] += 0.6 * rest
    _spread(row, ["no-channel-signal", "no-channel-no-signal"], 0.4 * rest)
    return row


def _answer_profile(p: DialogueParams, intent, field_name: str) -> np.ndarray:
    """Reply to ask-type / ask-place / ask-property."""
    t, pl, q = intent
    row = np.zeros(len(OBSERVATIONS))
    slot = {"type": 0, "place": 1, "property": 2}[field_name]
    if field_name == "property" and t == "visit":
        # nothing to tell: the user denies or restates the visit request
        row[_OBS_INDEX["no"]] += p.answer / 2
        row[_OBS_INDEX[_req_name(_full_request(intent))]] += p.answer / 2
        wrong_vals = []
    else:
        value = intent[slot]
        answer = tuple(value if i == slot else None for i in range(3))
        row[_OBS_INDEX[_req_name(answer)]] += p.answer
        domain = (TYPES, PLACES, PROPERTIES)[slot]
        wrong_vals = [_req_name(tuple(v if i == slot else None for i in range(3)))
                      for v in domain if v != value]
    rest = 1.0 - p.answer
    _spread(row, wrong_vals or ["no"], 0.25 * rest)
    row[_OBS_INDEX[_req_name(_full_request(intent))]] += 0.25 * rest
    row[_OBS_INDEX["channel-no-signal"]] += 0.3 * rest
    _spread(row, ["no-channel-signal", "no-channel-no-signal"], 0.2 * rest)
    return row


def _declare_profile(p: DialogueParams, intent, action: str) -> np.ndarray:
    t, pl, q = intent
    value = action[len("declare-"):]
    if value in TYPES:
        right = t == value
    elif value in PLACES:
        right = pl == value
    else:
        right = t == "ask" and q == value
    row = np.zeros(len(OBSERVATIONS))
    row[_OBS_INDEX["yes" if right else "no"]] += p.confirm
    rest = 1.0 - p.confirm
    row[_OBS_INDEX["no" if right else "yes"]] += 0.25 * rest
    row[_OBS_INDEX[_req_name(_full_request(intent))]] += 0.25 * rest
    row[_OBS_INDEX["channel-no-signal"]] += 0.3 * rest
    _spread(row, ["no-channel-signal", "no-channel-no-signal"], 0.2 * rest)
    return row


_ABNORMAL_LOW = {
    # share of the non-garbage mass for (no-channel-no-signal, no-channel-signal, channel-no-signal)
    "silent": (0.15, 0.05, 0.8),
    "error-noisy": (0.2, 0.6, 0.2),
    "error-silent": (0.85, 0.05, 0.1),
    "overheard": (0.05, 0.85, 0.1),
}


def _abnormal_profile(p: DialogueParams, hidden: str) -> np.ndarray:
    row = np.zeros(len(OBSERVATIONS))
    g = p.garbage[hidden]
    _spread(row, list(UTTERANCES), g)
    for name, share in zip(LOW_LEVEL, _ABNORMAL_LOW[hidden]):
        row[_OBS_INDEX[name]] += (1.0 - g) * share
    return row


def _onet(p: DialogueParams, name, actions, normal_row) -> ObservationNet:
    rows = {}
    for t, pl, q, h in itertools.product(TYPES, PLACES, PROPERTIES, HIDDEN):
        intent = (t, pl, q)
        row = normal_row(intent) if h == "normal" else _abnormal_profile(p, h)
        rows[(t, pl, q, h)] = tuple(row / row.sum())
    return ObservationNet(name, actions, Cpt(("type", "place", "property", "hidden"), rows))


def _observation_nets(p: DialogueParams):
    nets = [
        _onet(p, "request", DOMAIN_ACTIONS + ("ask-repeat",),
              lambda i: _request_profile(p, i)),
        _onet(p, "waiting", ("ignore", "troubleshoot"),
              lambda i: (1 - p.ignored_quiet) * _request_profile(p, i)
              + p.ignored_quiet * np.eye(len(OBSERVATIONS))[_OBS_INDEX["channel-no-signal"]]),
    ]
    for a, fname in zip(ASK_ACTIONS, ("type", "place", "property")):
        nets.append(_onet(p, a, (a,), lambda i, f=fname: _answer_profile(p, i, f)))
    for a in DECLARE_ACTIONS:
        nets.append(_onet(p, a, (a,), lambda i, a=a: _declare_profile(p, i, a)))
    return tuple(nets)


# ---------------------------------------------------------------------- rewards

def _reward_entries(p: DialogueParams):
    r = p.rewards
    E = []

    def add(actions, cond, cat):
        E.append(RewardEntry(tuple(actions), dict(cond), r[cat], cat))

    add(["ask-repeat"], {}, "ask-repeat")
    add(["ignore"], {}, "ignore-wrong")
    for h in ("silent", "overheard"):
        add(["ignore"], {"hidden": h}, "ignore-right")
    add(ASK_ACTIONS, {}, "ask-intention")
    add(DECLARE_ACTIONS, {}, "declare")
    add(["troubleshoot"], {}, "troubleshoot-wrong")
    for h in ("error-noisy", "error-silent"):
        add(["troubleshoot"], {"hidden": h}, "troubleshoot-right")
    for pl in PLACES:
        for q in PROPERTIES:
            a = [f"answer-{pl}-{q}"]
            add(a, {"type": "visit"}, "action-wrong")
            add(a, {"type": "ask"}, "right-type-no-param")
            add(a, {"type": "ask", "place": pl}, "right-type-has-param")
            add(a, {"type": "ask", "property": q}, "right-type-has-param")
            add(a, {"type": "ask", "place": pl, "property": q}, "domain-right")
        a = [f"goto-{pl}"]
        add(a, {"type": "ask"}, "action-wrong")
        add(a, {"type": "visit"}, "right-type-no-param")
        add(a, {"type": "visit", "place": pl}, "domain-right")
    return tuple(E)


def build_dialogue_spec(params: DialogueParams | str = "standard") -> FactoredSpec:
    if isinstance(params, str):
        params = DialogueParams.preset_params(params)
    variables = (
        StateVariable("type", TYPES), StateVariable("place", PLACES),
        StateVariable("property", PROPERTIES), StateVariable("hidden", HIDDEN),
    )
    start = {"type": (0.5, 0.5), "place": (0.5, 0.5), "property": (0.5, 0.5),
             "hidden": (1.0, 0.0, 0.0, 0.0, 0.0)}
    return FactoredSpec(
        variables=variables, actions=ACTIONS, observations=OBSERVATIONS,
        transition_nets=_transition_nets(params), observation_nets=_observation_nets(params),
        rewards=_reward_entries(params), discount=params.discount, start=start,
        observation_category=tuple(observation_category(o) for o in OBSERVATIONS),
        name=f"dialogue-{params.preset}",
    )


def build_dialogue_model(params: DialogueParams | str = "standard") -> PomdpModel:
    """Flat dialogue model for a preset name or explicit :class:`DialogueParams`."""
    return compile_factored(build_dialogue_spec(params))


def find_equivalent_states(model: PomdpModel, atol: float = 1e-9) -> list:
    """All unordered pairs of bisimilar states.

    Two states are equivalent when they share rewards and observation rows and
    every action moves them into each equivalence class with the same
    probability; classes come from partition refinement starting from the
    (reward, observation) signature.
    """
    T, Z, R = model.transition, model.observation_fn, model.reward
    S = model.n_states
    decimals = max(0, int(round(-np.log10(atol))))

    def relabel(keys):
        index = {}
        return np.array([index.setdefault(k, len(index)) for k in keys])

    labels = relabel(
        (np.round(R[:, s], decimals) + 0.0).tobytes() + (np.round(Z[:, s], decimals) + 0.0).tobytes()
        for s in range(S))
    while True:
        n_blocks = labels.max() + 1
        into = np.zeros((T.shape[0], S, n_blocks))
        for blk in range(n_blocks):
            into[:, :, blk] = T[:, :, labels == blk].sum(axis=2)
        new = relabel((labels[s], (np.round(into[:, s], decimals) + 0.0).tobytes()) for s in range(S))
        if new.max() == labels.max():
            break
        labels = new
    return [(model.states[i], model.states[j])
            for i in range(S) for j in range(i + 1, S) if labels[i] == labels[j]]
