import numpy as np
import pytest

from dialogpomdp.dialogue import build_dialogue_model
from dialogpomdp.formats import (
    COMPARE_COLUMNS, SIM_COLUMNS, FormatError, compare_tsv, parse_model_file, parse_policy,
    sim_report_tsv, write_model_file, write_policy,
)
from dialogpomdp.compare import CompareRow
from dialogpomdp.model import ModelError, VectorSet, random_model
from dialogpomdp.policy import SimConfig, make_policy, simulate
from dialogpomdp.solvers import solve

TIGER_FILE = """\
# classic two-door problem
discount: 0.95
states: left right
actions: listen open-left open-right
observations: hear-left hear-right
T: listen : left : left 1.0
T: listen : right : right 1.0
T: open-left : * : * 0.5
T: open-right : * : * 0.5
O: listen : left : hear-left 0.85
O: listen : left : hear-right 0.15
O: listen : right : hear-left 0.15
O: listen : right : hear-right 0.85
O: open-left : * : * 0.5
O: open-right : * : * 0.5
R: listen : * -1
R: open-left : left -100
R: open-left : right 10
R: open-right : left 10
R: open-right : right -100
"""


class TestModelFile:
    def test_reads_tiger(self, tiger):
        m = parse_model_file(TIGER_FILE)
        assert m.states == ("left", "right")
        np.testing.assert_array_equal(m.transition, tiger.transition)
        np.testing.assert_array_equal(m.observation_fn, tiger.observation_fn)
        np.testing.assert_array_equal(m.reward, tiger.reward)
        np.testing.assert_array_equal(m.initial_belief, [0.5, 0.5])

    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip_random(self, seed):
        m = random_model(np.random.default_rng(seed), 5, 3, 4)
        again = parse_model_file(write_model_file(m))
        assert again.tables_equal(m)
        assert write_model_file(again) == write_model_file(m)

    def test_round_trip_dialogue_keeps_categories(self):
        m = build_dialogue_model("noisy-lower-cost")
        again = parse_model_file(write_model_file(m))
        assert again.tables_equal(m)
        assert np.array_equal(again.reward_category, m.reward_category)
        assert again.observation_category == m.observation_category
        assert again.name == m.name

    def test_row_sum_error_names_cell(self):
        text = TIGER_FILE.replace("T: listen : right : right 1.0", "T: listen : right : right 0.7")
        with pytest.raises(ModelError, match=r"listen.*right|right.*listen") as e:
            parse_model_file(text)
        assert "0.7" in str(e.value)

    def test_unknown_state(self):
        text = TIGER_FILE + "T: listen : left : middle 0.1\n"
        with pytest.raises(FormatError, match=r"line 21: unknown state 'middle'"):
            parse_model_file(text)

    @pytest.mark.parametrize("text, line", [
        ("discount: 0.9\nstates: a\nactions: x\nobservations: o\nT: x : a 1\n", 5),
        ("discount: 0.9\nstates: a\nactions: x\nobservations: o\nR: x : a lots\n", 5),
        ("discount: 0.9\nstates: a\nwhatever: 1\n", 3),
        ("discount: 0.9\ndiscount: 0.8\n", 2),
    ])
    def test_syntax_errors(self, text, line):
        with pytest.raises(FormatError, match=f"line {line}:"):
            parse_model_file(text)

    def test_missing_header(self):
        with pytest.raises(FormatError, match="observations"):
            parse_model_file("discount: 0.9\nstates: a\nactions: x\n")


class TestPolicyFile:
    def test_bit_exact_round_trip(self, dialogue):
        vs = solve(dialogue, "qmdp").vector_set
        again = parse_policy(write_policy(vs))
        assert np.array_equal(again.vectors, vs.vectors)
        assert np.array_equal(again.actions, vs.actions)
        assert (again.solver, again.epochs, again.action_names) == (
            vs.solver, vs.epochs, vs.action_names)

    def test_awkward_floats(self):
        vals = np.array([[0.1 + 0.2, -1e-300, 1.0 / 3.0, 2.0**60 + 1]])
        again = parse_policy(write_policy(VectorSet(vals, actions=[-1])))
        assert np.array_equal(again.vectors, vals)
        assert again.actions.tolist() == [-1]

    def test_dimension_mismatch(self):
        with pytest.raises(FormatError):
            parse_policy("dimension: 3\nvector - : 1 2\n")

    def test_unknown_label(self):
        with pytest.raises(FormatError, match="line 3"):
            parse_policy("dimension: 1\nactions: a b\nvector c : 1\n")

    def test_empty(self):
        with pytest.raises(FormatError):
            parse_policy("dimension: 2\n")


class TestReports:
    def test_sim_report(self, dialogue):
        vs = solve(dialogue, "qmdp").vector_set
        rep = simulate(dialogue, make_policy("dr", vs), SimConfig(500, seed=3))
        text = sim_report_tsv(rep)
        rows = [line.split("\t") for line in text.splitlines()]
        assert tuple(rows[0]) == SIM_COLUMNS
        assert all(len(r) == 4 for r in rows)
        by = {}
        for sec, name, count, value in rows[1:]:
            by.setdefault(sec, {})[name] = (count, value)
        assert sum(int(c) for c, _ in by["reward"].values()) == 500
        assert sum(int(c) for c, _ in by["observation"].values()) == 500
        assert sum(int(c) for c, _ in by["action"].values()) == 500
        assert float(by["summary"]["total_reward"][1]) == rep.total_reward
        assert set(by["timing"]) == {"decision_ms_mean", "decision_ms_max"}

    def test_sim_report_deterministic_apart_from_timing(self, tiger):
        vs = solve(tiger, "qmdp").vector_set
        pol = make_policy("la", vs, tiger)
        a, b = (sim_report_tsv(simulate(tiger, pol, SimConfig(200, seed=1))) for _ in range(2))
        strip = lambda t: [r for r in t.splitlines() if not r.startswith("timing")]
        assert strip(a) == strip(b)

    def test_compare_columns(self):
        row = CompareRow("fib", "la", 2, 18, -3.5, 120.0, 0.25)
        lines = compare_tsv([row]).splitlines()
        assert tuple(lines[0].split("\t")) == COMPARE_COLUMNS
        assert lines[1].split("\t") == ["fib", "la", "2", "18", "-3.5", "120.0", "0.250000"]
