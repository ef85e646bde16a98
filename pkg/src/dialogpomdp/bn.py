"""Discrete Bayesian networks for channel/signal status and low-level observations.

Exact inference is by variable elimination. Two example networks are shipped:
``barge_in_net`` (per-hypothesis recogniser confidences feeding a signal node)
and ``turn_taking_net`` (adds parser score, element confidence and a channel
node observed through the user's focus). Their CPTs are illustrative.

Net text format, one directive per line, ``#`` starts a comment::

    node Signal : no yes          # name : ordered domain
    parents :                     # parent names (may be empty)
    cpt :
      : 0.5 0.5                   # one row per parent-value combination
    node EC1 : low medium high
    parents : Signal
    discretize : 0.4 0.7          # optional cut points for numeric evidence
    cpt :
      no : 0.5 0.3 0.2
      yes : 0.1 0.3 0.6
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

LOW_LEVEL_LABELS = ("no-channel-no-signal", "no-channel-signal", "channel-no-signal",
                    "channel-signal")
EC_CUTS = (0.4, 0.7)
EC_BINS = ("low", "medium", "high")


class BnError(ValueError):
    """Malformed network, evidence or net file."""


class ImpossibleEvidence(BnError):
    pass


class UnknownNode(LookupError):
    pass


@dataclass(frozen=True, eq=False)
class BnNode:
    name: str
    domain: tuple
    parents: tuple
    cpt: np.ndarray  # shape (*parent domain sizes, len(domain))
    cuts: Optional[tuple] = None  # numeric evidence: value < cuts[0] -> domain[0], ...


@dataclass(frozen=True, eq=False)
class DiscreteBayesNet:
    nodes: tuple

    def __post_init__(self):
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise BnError("duplicate node names")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})
        for n in self.nodes:
            _check_node(self, n)
        self.topological_order()

    def __contains__(self, name) -> bool:
        return name in self._index

    def node(self, name: str) -> BnNode:
        try:
            return self.nodes[self._index[name]]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    @property
    def names(self) -> tuple:
        return tuple(n.name for n in self.nodes)

    def topological_order(self) -> list:
        order, state = [], {}

        def visit(name, path):
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise BnError("network has a cycle through " + " -> ".join(path + [name]))
            state[name] = 1
            for p in self.node(name).parents:
                visit(p, path + [name])
            state[name] = 2
            order.append(name)

        for n in self.nodes:
            visit(n.name, [])
        return order

    def value_index(self, name: str, value) -> int:
        dom = self.node(name).domain
        try:
            return dom.index(value)
        except ValueError:
            raise BnError(f"value {value!r} not in the domain of {name}") from None


def _check_node(net: DiscreteBayesNet, n: BnNode):
    if len(n.domain) < 1 or len(set(n.domain)) != len(n.domain):
        raise BnError(f"node {n.name}: domain must be non-empty and distinct")
    for p in n.parents:
        if p not in net:
            raise BnError(f"node {n.name}: unknown parent {p!r}")
    if len(set(n.parents)) != len(n.parents) or n.name in n.parents:
        raise BnError(f"node {n.name}: repeated or self parent")
    shape = tuple(len(net.node(p).domain) for p in n.parents) + (len(n.domain),)
    if n.cpt.shape != shape:
        raise BnError(f"node {n.name}: CPT shape {n.cpt.shape}, expected {shape}")
    if np.any(n.cpt < 0) or not np.all(np.isfinite(n.cpt)):
        raise BnError(f"node {n.name}: CPT entries must be finite and non-negative")
    sums = n.cpt.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        bad = np.unravel_index(int(np.argmax(np.abs(sums - 1.0))), sums.shape)
        row = tuple(net.node(p).domain[i] for p, i in zip(n.parents, bad))
        raise BnError(f"node {n.name}: CPT row {row} sums to {sums[bad]:.12g}")
    if n.cuts is not None:
        if len(n.cuts) != len(n.domain) - 1 or list(n.cuts) != sorted(n.cuts):
            raise BnError(f"node {n.name}: need {len(n.domain) - 1} increasing cut points")


def make_net(specs) -> DiscreteBayesNet:
    """Build from ``(name, domain, parents, rows[, cuts])`` tuples.

    ``rows`` maps parent-value tuples to probability lists (``()`` for roots).
    """
    specs = list(specs)
    domains = {s[0]: tuple(s[1]) for s in specs}
    nodes = []
    for spec in specs:
        name, domain, parents, rows = spec[:4]
        cuts = tuple(spec[4]) if len(spec) > 4 and spec[4] is not None else None
        parents = tuple(parents)
        for p in parents:
            if p not in domains:
                raise BnError(f"node {name}: unknown parent {p!r}")
        pdoms = [domains[p] for p in parents]
        cpt = np.full(tuple(len(d) for d in pdoms) + (len(domain),), np.nan)
        for key, probs in rows.items():
            key = tuple(key)
            if len(key) != len(parents):
                raise BnError(f"node {name}: row {key} has the wrong number of parent values")
            try:
                idx = tuple(d.index(v) for d, v in zip(pdoms, key))
            except ValueError:
                raise BnError(f"node {name}: row {key} uses an unknown parent value") from None
            if not np.all(np.isnan(cpt[idx])):
                raise BnError(f"node {name}: row {key} given twice")
            if len(probs) != len(domain):
                raise BnError(f"node {name}: row {key} needs {len(domain)} probabilities")
            cpt[idx] = probs
        if np.any(np.isnan(cpt)):
            raise BnError(f"node {name}: not every parent combination has a CPT row")
        cpt.setflags(write=False)
        nodes.append(BnNode(name, tuple(domain), parents, cpt, cuts))
    return DiscreteBayesNet(tuple(nodes))


# ---------------------------------------------------------------- evidence


def discretize(node: BnNode, x: float):
    """Bin a numeric reading; values equal to a cut point go to the upper bin."""
    if node.cuts is None:
        raise BnError(f"node {node.name} takes symbolic evidence only")
    i = 0
    while i < len(node.cuts) and x >= node.cuts[i]:
        i += 1
    return node.domain[i]


def make_evidence(net: DiscreteBayesNet, raw: dict) -> dict:
    """Map ``name -> value`` (strings or numbers) to ``name -> domain value``.

    Numbers, or numeric strings not in the domain, are binned for nodes with cut points.
    """
    out = {}
    for name, v in raw.items():
        node = net.node(name)
        if v in node.domain:
            out[name] = v
            continue
        if isinstance(v, str) and str(v) not in node.domain:
            try:
                v = float(v)
            except ValueError:
                raise BnError(f"value {v!r} not in the domain of {name}") from None
        if isinstance(v, (int, float)) and node.cuts is not None:
            out[name] = discretize(node, float(v))
        elif str(v) in node.domain:
            out[name] = str(v)
        else:
            raise BnError(f"value {v!r} not in the domain of {name}")
    return out


def parse_evidence_pairs(pairs) -> dict:
    """``["AC1=1", "EC1=0.82"]`` -> ``{"AC1": "1", "EC1": "0.82"}``."""
    out = {}
    for p in pairs:
        name, sep, value = p.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise BnError(f"evidence must look like name=value, got {p!r}")
        out[name.strip()] = value.strip()
    return out


# ---------------------------------------------------------------- inference


def _factors(net: DiscreteBayesNet, evidence: dict):
    factors = []
    for n in net.nodes:
        scope = n.parents + (n.name,)
        sel = tuple(net.value_index(v, evidence[v]) if v in evidence else slice(None)
                    for v in scope)
        factors.append(([v for v in scope if v not in evidence], n.cpt[sel]))
    return factors


def _product(factors, keep: list):
    ids = {}
    args = []
    for scope, table in factors:
        args += [table, [ids.setdefault(v, len(ids)) for v in scope]]
    out = [ids.setdefault(v, len(ids)) for v in keep]
    if not args:
        return np.ones(())
    return np.einsum(*args, out)


def infer_posterior(net: DiscreteBayesNet, evidence: dict, query: str) -> dict:
    """Exact ``P(query | evidence)`` as ``{value: probability}``."""
    qnode = net.node(query)
    evidence = make_evidence(net, evidence)
    factors = _factors(net, evidence)
    hidden = [v for v in net.names if v not in evidence and v != query]
    while hidden:
        # min-fill style choice: smallest resulting scope, earliest node on ties
        def cost(v):
            scope = set()
            for s, _ in factors:
                if v in s:
                    scope |= set(s)
            return math.prod(len(net.node(u).domain) for u in scope if u != v)

        var = min(hidden, key=cost)
        hidden.remove(var)
        inv = [f for f in factors if var in f[0]]
        rest = [f for f in factors if var not in f[0]]
        scope = []
        for s, _ in inv:
            scope += [u for u in s if u != var and u not in scope]
        rest.append((scope, _product(inv, scope)))
        factors = rest
    if query in evidence:
        total = float(_product(factors, []))
        if total <= 0.0:
            raise ImpossibleEvidence("impossible evidence: zero joint probability")
        return {v: float(v == evidence[query]) for v in qnode.domain}
    joint = _product(factors, [query])
    total = float(joint.sum())
    if total <= 0.0:
        raise ImpossibleEvidence("impossible evidence: zero joint probability")
    return dict(zip(qnode.domain, (joint / total).tolist()))


# ---------------------------------------------------------------- extraction


@dataclass(frozen=True)
class ExtractionRule:
    time_point: str  # "barge-in" or "turn-taking"
    signal_node: str
    channel_node: Optional[str] = None  # None: channel taken as open
    signal_value: str = "yes"
    channel_value: str = "yes"
    signal_threshold: float = 0.5
    channel_threshold: float = 0.5

    def __post_init__(self):
        if self.time_point not in ("barge-in", "turn-taking"):
            raise BnError(f"unknown time point {self.time_point!r}")
        for t in (self.signal_threshold, self.channel_threshold):
            if not 0.0 < t < 1.0:
                raise BnError("thresholds must lie strictly between 0 and 1")


RULES = {
    "barge-in": ExtractionRule("barge-in", "Signal"),
    "turn-taking": ExtractionRule("turn-taking", "Signal", "Channel"),
}


@dataclass(frozen=True)
class Extraction:
    label: str
    p_channel: float
    p_signal: float

    @property
    def defers_to_parser(self) -> bool:
        """``channel-signal`` is resolved by the utterance parser, not here."""
        return self.label == "channel-signal"


def classify(p_channel: float, p_signal: float, rule: ExtractionRule) -> str:
    channel = p_channel >= rule.channel_threshold
    signal = p_signal >= rule.signal_threshold
    return LOW_LEVEL_LABELS[2 * channel + signal]


def extract_observation(net: DiscreteBayesNet, rule: ExtractionRule, evidence: dict) -> Extraction:
    for name in (rule.signal_node, rule.channel_node):
        if name is not None:
            net.node(name)
    p_signal = infer_posterior(net, evidence, rule.signal_node)[rule.signal_value]
    p_channel = 1.0
    if rule.channel_node is not None:
        p_channel = infer_posterior(net, evidence, rule.channel_node)[rule.channel_value]
    return Extraction(classify(p_channel, p_signal, rule), p_channel, p_signal)


# ---------------------------------------------------------------- example nets


def _hypothesis_nodes(k: int = 3):
    specs = []
    for i in range(1, k + 1):
        # later hypotheses carry less information about the signal
        w = 1.0 / i
        specs.append((f"AC{i}", ("0", "1"), ("Signal",), {
            ("no",): (1 - 0.25 * w, 0.25 * w),
            ("yes",): (1 - 0.8 * w, 0.8 * w),
        }))
        lo = (0.6, 0.3, 0.1)
        hi = (0.1, 0.3, 0.6)
        mix = lambda d: tuple(w * x + (1 - w) / 3 for x in d)  # noqa: E731
        specs.append((f"EC{i}", EC_BINS, ("Signal",), {("no",): mix(lo), ("yes",): mix(hi)},
                      EC_CUTS))
    return specs


def barge_in_net() -> DiscreteBayesNet:
    specs = [("Signal", ("no", "yes"), (), {(): (0.5, 0.5)})]
    return make_net(specs + _hypothesis_nodes())


def turn_taking_net() -> DiscreteBayesNet:
    specs = [
        ("Channel", ("no", "yes"), (), {(): (0.3, 0.7)}),
        ("UserFocus", ("away", "system"), ("Channel",), {
            ("no",): (0.75, 0.25), ("yes",): (0.15, 0.85)}),
        ("Signal", ("no", "yes"), ("Channel",), {("no",): (0.6, 0.4), ("yes",): (0.3, 0.7)}),
        ("ParserScore", EC_BINS, ("Signal",), {
            ("no",): (0.7, 0.2, 0.1), ("yes",): (0.1, 0.3, 0.6)}, EC_CUTS),
        ("ElementConfidence", EC_BINS, ("Signal",), {
            ("no",): (0.6, 0.3, 0.1), ("yes",): (0.15, 0.35, 0.5)}, EC_CUTS),
    ]
    return make_net(specs + _hypothesis_nodes())


EXAMPLE_NETS = {"barge-in": barge_in_net, "turn-taking": turn_taking_net}


def random_net(rng: np.random.Generator, n_nodes: int, max_domain: int = 4,
               max_parents: int = 3) -> DiscreteBayesNet:
    """Random DAG (parents drawn from earlier nodes) with Dirichlet CPT rows."""
    specs = []
    for i in range(n_nodes):
        dom = tuple(f"v{j}" for j in range(int(rng.integers(2, max_domain + 1))))
        k = int(rng.integers(0, min(i, max_parents) + 1))
        parents = tuple(f"X{j}" for j in sorted(rng.choice(i, size=k, replace=False))) if k else ()
        pdoms = [specs[int(p[1:])][1] for p in parents]
        rows = {key: tuple(rng.dirichlet(np.ones(len(dom)))) for key in itertools.product(*pdoms)}
        specs.append((f"X{i}", dom, parents, rows))
    return make_net(specs)


# ---------------------------------------------------------------- text format


def write_net(net: DiscreteBayesNet) -> str:
    lines = []
    for n in net.nodes:
        lines.append(f"node {n.name} : {' '.join(n.domain)}")
        lines.append(f"parents : {' '.join(n.parents)}".rstrip())
        if n.cuts is not None:
            lines.append("discretize : " + " ".join(repr(float(c)) for c in n.cuts))
        lines.append("cpt :")
        pdoms = [net.node(p).domain for p in n.parents]
        for key in itertools.product(*pdoms):
            idx = tuple(d.index(v) for d, v in zip(pdoms, key))
            probs = " ".join(repr(float(x)) for x in n.cpt[idx])
            lines.append(f"  {' '.join(key)} : {probs}".replace("   :", " :"))
    return "\n".join(lines) + "\n"


def parse_net(text: str) -> DiscreteBayesNet:
    specs = []
    cur = None
    in_cpt = False

    def fail(lineno, msg):
        raise BnError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            fail(lineno, f"expected ':' in {line!r}")
        words = head.split()
        rest = rest.split()
        if words and words[0] == "node":
            if len(words) != 2 or not rest:
                fail(lineno, "expected 'node NAME : values...'")
            cur = {"name": words[1], "domain": rest, "parents": None, "rows": {}, "cuts": None,
                   "line": lineno}
            specs.append(cur)
            in_cpt = False
            continue
        if cur is None:
            fail(lineno, "directive before the first node")
        if words == ["parents"]:
            cur["parents"] = rest
            in_cpt = False
        elif words == ["discretize"]:
            try:
                cur["cuts"] = [float(x) for x in rest]
            except ValueError:
                fail(lineno, "cut points must be numbers")
            in_cpt = False
        elif words == ["cpt"]:
            if rest:
                fail(lineno, "'cpt :' takes no values")
            in_cpt = True
        elif in_cpt:
            try:
                probs = [float(x) for x in rest]
            except ValueError:
                fail(lineno, "CPT probabilities must be numbers")
            key = tuple(words)
            if key in cur["rows"]:
                fail(lineno, f"CPT row {key} repeated")
            cur["rows"][key] = probs
        else:
            fail(lineno, f"unknown directive {head.strip()!r}")
    for s in specs:
        if s["parents"] is None:
            raise BnError(f"line {s['line']}: node {s['name']} has no 'parents' line")
    return make_net((s["name"], s["domain"], s["parents"], s["rows"], s["cuts"]) for s in specs)
