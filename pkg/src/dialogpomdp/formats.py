"""Text formats: flat model files, policy files and tab-separated reports.

Flat model file (``#`` starts a comment, ``*`` matches every name in its slot)::

    discount: 0.95
    states: left right
    actions: listen open-left open-right
    observations: hear-left hear-right
    start: 0.5 0.5
    T: listen : left : left 1.0
    O: listen : left : hear-left 0.85
    R: open-left : left -100
    rcat: open-left : left wrong-door     # optional reward category per cell
    ocat: hear-left informative           # optional observation category

Unlisted ``T``/``O`` entries are 0 and unlisted rewards are 0. Later entries
overwrite earlier ones. ``start`` defaults to uniform.

Policy file::

    policy: qmdp
    epochs: 176
    dimension: 2
    actions: listen open-left open-right
    vector listen : 189.0 189.0
    vector - : 200.0 200.0               # '-' marks an unlabeled vector

Numbers are written with ``repr`` so reading back is bit-exact.
"""

from __future__ import annotations

import numpy as np

from .model import ModelError, PomdpModel, VectorSet, check_model


class FormatError(ModelError):
    """Syntax or name error in a text file; the message carries the line number."""


def _fail(lineno: int, msg: str):
    raise FormatError(f"line {lineno}: {msg}")


def _num(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        _fail(lineno, f"expected a number, got {tok!r}")


def _fields(rest: str, n: int, lineno: int, what: str) -> list:
    # "a : s : s2 p" -> ["a", "s", "s2", "p"]
    parts = [p.strip() for p in rest.split(":")]
    last = parts[-1].split()
    parts = parts[:-1] + last
    if len(parts) != n or any(not p for p in parts):
        _fail(lineno, f"malformed {what} entry")
    return parts


# ------------------------------------------------------------------ models


def parse_model_file(text: str) -> PomdpModel:
    header = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep:
            _fail(lineno, f"expected 'key: ...', got {line!r}")
        if key in ("discount", "states", "actions", "observations", "start", "name"):
            if entries:
                _fail(lineno, f"'{key}' must come before the table entries")
            if key in header:
                _fail(lineno, f"'{key}' given twice")
            header[key] = (rest.split(), lineno)
        elif key in ("T", "O", "R", "rcat", "ocat"):
            entries.append((key, rest, lineno))
        else:
            _fail(lineno, f"unknown directive {key!r}")
    for k in ("discount", "states", "actions", "observations"):
        if k not in header:
            raise FormatError(f"missing '{k}:' line")
    toks, ln = header["discount"]
    if len(toks) != 1:
        _fail(ln, "discount takes one number")
    discount = _num(toks[0], ln)
    S, A, O = (tuple(header[k][0]) for k in ("states", "actions", "observations"))
    for k, names in (("states", S), ("actions", A), ("observations", O)):
        if not names:
            _fail(header[k][1], f"'{k}' needs at least one name")
    if "start" in header:
        toks, ln = header["start"]
        if len(toks) != len(S):
            _fail(ln, f"start needs {len(S)} probabilities")
        start = np.array([_num(t, ln) for t in toks])
    else:
        start = np.full(len(S), 1.0 / len(S))

    def pick(names, tok, kind, lineno):
        if tok == "*":
            return list(range(len(names)))
        try:
            return [names.index(tok)]
        except ValueError:
            _fail(lineno, f"unknown {kind} {tok!r}")

    T = np.zeros((len(A), len(S), len(S)))
    Z = np.zeros((len(A), len(S), len(O)))
    R = np.zeros((len(A), len(S)))
    rcat = None
    ocat = None
    for key, rest, ln in entries:
        if key == "T":
            a, s, s2, p = _fields(rest, 4, ln, "T")
            ia, is_, is2 = pick(A, a, "action", ln), pick(S, s, "state", ln), pick(S, s2, "state", ln)
            T[np.ix_(ia, is_, is2)] = _num(p, ln)
        elif key == "O":
            a, s2, o, p = _fields(rest, 4, ln, "O")
            ia, is2, io = pick(A, a, "action", ln), pick(S, s2, "state", ln), pick(O, o, "observation", ln)
            Z[np.ix_(ia, is2, io)] = _num(p, ln)
        elif key == "R":
            a, s, r = _fields(rest, 3, ln, "R")
            R[np.ix_(pick(A, a, "action", ln), pick(S, s, "state", ln))] = _num(r, ln)
        elif key == "rcat":
            a, s, c = _fields(rest, 3, ln, "rcat")
            if rcat is None:
                rcat = np.full((len(A), len(S)), None, dtype=object)
            rcat[np.ix_(pick(A, a, "action", ln), pick(S, s, "state", ln))] = c
        else:
            parts = rest.split()
            if len(parts) != 2:
                _fail(ln, "malformed ocat entry")
            if ocat is None:
                ocat = [None] * len(O)
            for i in pick(O, parts[0], "observation", ln):
                ocat[i] = parts[1]
    if rcat is not None and any(c is None for c in rcat.ravel()):
        raise FormatError("rcat lines must cover every (action, state) cell")
    if ocat is not None and any(c is None for c in ocat):
        raise FormatError("ocat lines must cover every observation")
    name = " ".join(header["name"][0]) if "name" in header else ""
    model = PomdpModel(S, A, O, T, Z, R, discount, start, rcat,
                       tuple(ocat) if ocat is not None else None, name)
    return check_model(model)


def write_model_file(model: PomdpModel) -> str:
    S, A, O = model.states, model.actions, model.observations
    lines = []
    if model.name:
        lines.append(f"name: {model.name}")
    lines += [
        f"discount: {model.discount!r}",
        "states: " + " ".join(S),
        "actions: " + " ".join(A),
        "observations: " + " ".join(O),
        "start: " + " ".join(repr(float(x)) for x in model.initial_belief),
    ]
    T, Z, R = model.transition, model.observation_fn, model.reward
    for a, s, s2 in zip(*np.nonzero(T)):
        lines.append(f"T: {A[a]} : {S[s]} : {S[s2]} {float(T[a, s, s2])!r}")
    for a, s2, o in zip(*np.nonzero(Z)):
        lines.append(f"O: {A[a]} : {S[s2]} : {O[o]} {float(Z[a, s2, o])!r}")
    for a, s in zip(*np.nonzero(R)):
        lines.append(f"R: {A[a]} : {S[s]} {float(R[a, s])!r}")
    if model.reward_category is not None:
        cats = model.reward_category
        values, counts = np.unique(cats.astype(str), return_counts=True)
        common = str(values[int(np.argmax(counts))])
        lines.append(f"rcat: * : * {common}")
        for a, s in zip(*np.nonzero(cats.astype(str) != common)):
            lines.append(f"rcat: {A[a]} : {S[s]} {cats[a, s]}")
    if model.observation_category is not None:
        for o, c in zip(O, model.observation_category):
            lines.append(f"ocat: {o} {c}")
    return "\n".join(lines) + "\n"


def read_model(path) -> PomdpModel:
    with open(path, encoding="utf-8") as f:
        return parse_model_file(f.read())


def save_model(model: PomdpModel, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_model_file(model))


# ---------------------------------------------------------------- policies


def write_policy(vs: VectorSet) -> str:
    names = vs.action_names
    lines = [f"policy: {vs.solver or '-'}", f"epochs: {vs.epochs}", f"dimension: {vs.dim}"]
    if names is not None:
        lines.append("actions: " + " ".join(names))
    for v, a in zip(vs.vectors, vs.actions):
        label = "-" if a < 0 else (names[a] if names is not None else str(int(a)))
        lines.append(f"vector {label} : " + " ".join(repr(float(x)) for x in v))
    return "\n".join(lines) + "\n"


def parse_policy(text: str) -> VectorSet:
    meta = {}
    vectors, actions = [], []
    names = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            _fail(lineno, f"expected ':' in {line!r}")
        words = head.split()
        if words in (["policy"], ["epochs"], ["dimension"]):
            meta[words[0]] = (rest.strip(), lineno)
        elif words == ["actions"]:
            names = tuple(rest.split())
        elif len(words) == 2 and words[0] == "vector":
            label = words[1]
            if label == "-":
                actions.append(-1)
            elif names is not None and label in names:
                actions.append(names.index(label))
            elif label.isdigit():
                actions.append(int(label))
            else:
                _fail(lineno, f"unknown action label {label!r}")
            vectors.append([_num(t, lineno) for t in rest.split()])
        else:
            _fail(lineno, f"unknown directive {head.strip()!r}")
    if "dimension" not in meta:
        raise FormatError("missing 'dimension:' line")
    dim_s, ln = meta["dimension"]
    if not dim_s.isdigit():
        _fail(ln, "dimension must be a positive integer")
    dim = int(dim_s)
    if not vectors:
        raise FormatError("policy file has no vectors")
    if any(len(v) != dim for v in vectors):
        raise FormatError(f"every vector needs {dim} values")
    solver = meta.get("policy", ("-", 0))[0]
    epochs_s, ln = meta.get("epochs", ("0", 0))
    if not epochs_s.isdigit():
        _fail(ln, "epochs must be a non-negative integer")
    return VectorSet(np.array(vectors), np.array(actions), "" if solver == "-" else solver,
                     int(epochs_s), names)


def read_policy(path) -> VectorSet:
    with open(path, encoding="utf-8") as f:
        return parse_policy(f.read())


def save_policy(vs: VectorSet, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(write_policy(vs))


# ----------------------------------------------------------------- reports

SIM_COLUMNS = ("section", "name", "count", "value")
COMPARE_COLUMNS = ("method", "mode", "seed", "size", "avg_value", "total_reward", "decision_ms")


def _tsv(rows) -> str:
    return "".join("\t".join(str(c) for c in r) + "\n" for r in rows)


def sim_report_tsv(report, labels=None) -> str:
    """Simulation report as ``section, name, count, value`` rows.

    Sections: ``summary``, ``reward`` (category counts and per-step reward),
    ``observation``, ``action`` and ``timing``. ``labels`` optionally renames
    reward categories. Only the ``timing`` rows vary between identical runs.
    """
    labels = labels or {}
    rows = [SIM_COLUMNS, ("summary", "steps", report.steps, ""),
            ("summary", "total_reward", "", repr(float(report.total_reward)))]
    for cat, n in report.reward_counts.items():
        rows.append(("reward", labels.get(cat, cat), n, repr(float(report.reward_values[cat]))))
    for cat, n in report.observation_counts.items():
        rows.append(("observation", cat, n, ""))
    for a, n in report.action_counts.items():
        rows.append(("action", a, n, ""))
    rows.append(("timing", "decision_ms_mean", "", f"{report.decision_ms_mean:.6f}"))
    rows.append(("timing", "decision_ms_max", "", f"{report.decision_ms_max:.6f}"))
    return _tsv(rows)


def compare_tsv(rows) -> str:
    """One line per (method, mode, seed); ``decision_ms`` is the only timing column."""
    out = [COMPARE_COLUMNS]
    for r in rows:
        out.append((r.method, r.mode, r.seed, r.size, repr(float(r.avg_value)),
                    repr(float(r.total_reward)), f"{r.decision_ms:.6f}"))
    return _tsv(out)
