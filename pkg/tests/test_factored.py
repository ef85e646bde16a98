import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dialogpomdp.factored import (
    Cpt, FactoredSpec, FactoredSpecError, ObservationNet, RewardEntry, StateVariable,
    TwoStageNet, compile_factored, parse_factored, write_factored,
)
from dialogpomdp.dialogue import build_dialogue_spec
from dialogpomdp.model import validate_model


def _one_var_identity():
    x = StateVariable("x", ("lo", "hi"))
    tnet = TwoStageNet("stay", ("a",), {"x": Cpt(("x",), {("lo",): (1, 0), ("hi",): (0, 1)})})
    onet = ObservationNet("see", ("a",), Cpt(("x",), {("lo",): (0.7, 0.3), ("hi",): (0.2, 0.8)}))
    return FactoredSpec((x,), ("a",), ("o1", "o2"), (tnet,), (onet,),
                        (RewardEntry(None, {"x": "hi"}, 1.0),), 0.9, {})


def _random_two_var_spec(rng, dx=2, dy=3, n_actions=2):
    x = StateVariable("x", tuple(f"x{i}" for i in range(dx)))
    y = StateVariable("y", tuple(f"y{i}" for i in range(dy)))
    acts = tuple(f"a{i}" for i in range(n_actions))

    def rows(parents, size):
        doms = [dict(x=x.domain, y=y.domain)[p] for p in parents]
        return {k: tuple(rng.dirichlet(np.ones(size))) for k in itertools.product(*doms)}

    tnets = []
    for i, a in enumerate(acts):
        options = [(), ("x",), ("y",), ("x", "y")]
        px = options[rng.integers(4)]
        py = options[rng.integers(4)]
        tnets.append(TwoStageNet(f"t{i}", (a,), {"x": Cpt(px, rows(px, dx)),
                                                 "y": Cpt(py, rows(py, dy))}))
    onet = ObservationNet("o", acts, Cpt(("x", "y"), rows(("x", "y"), 2)))
    rewards = (RewardEntry(None, {}, -1.0), RewardEntry((acts[0],), {"x": "x1"}, 5.0))
    spec = FactoredSpec((x, y), acts, ("p", "q"), tuple(tnets), (onet,), rewards, 0.95,
                        {"x": (0.25, 0.75)})
    return spec


class TestCompile:
    def test_identity(self):
        m = compile_factored(_one_var_identity())
        assert m.states == ("lo", "hi")
        np.testing.assert_array_equal(m.transition[0], np.eye(2))
        np.testing.assert_array_equal(m.reward, [[0.0, 1.0]])
        np.testing.assert_allclose(m.initial_belief, [0.5, 0.5])

    def test_independent_variables_factorize(self):
        x = StateVariable("x", ("0", "1"))
        y = StateVariable("y", ("0", "1"))
        tx = {("0",): (0.9, 0.1), ("1",): (0.3, 0.7)}
        ty = {("0",): (0.6, 0.4), ("1",): (0.2, 0.8)}
        tnet = TwoStageNet("t", ("a",), {"x": Cpt(("x",), tx), "y": Cpt(("y",), ty)})
        onet = ObservationNet("o", ("a",), Cpt((), {(): (1.0,)}))
        m = compile_factored(FactoredSpec((x, y), ("a",), ("o",), (tnet,), (onet,), (), 0.9, {}))
        for (i, (x0, y0)), (j, (x1, y1)) in itertools.product(
                enumerate(itertools.product("01", "01")), repeat=2):
            assert m.transition[0, i, j] == pytest.approx(tx[(x0,)][int(x1)] * ty[(y0,)][int(y1)])

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force_product(self, seed):
        rng = np.random.default_rng(seed)
        spec = _random_two_var_spec(rng)
        m = compile_factored(spec)
        states = spec.state_tuples()
        for ai, net in enumerate(spec.transition_nets):
            for i, s in enumerate(states):
                pre = dict(zip(("x", "y"), s))
                for j, s2 in enumerate(states):
                    p = 1.0
                    for v, val in zip(("x", "y"), s2):
                        cpt = net.cpts[v]
                        row = cpt.rows[tuple(pre[q] for q in cpt.parents)]
                        p *= row[spec.variable(v).domain.index(val)]
                    assert abs(m.transition[ai, i, j] - p) <= 1e-12
        assert validate_model(m) == []
        # start marginal on x, uniform on the unspecified y
        assert m.initial_belief[states.index(("x1", "y0"))] == pytest.approx(0.75 / 3)
        assert m.reward[0, states.index(("x1", "y2"))] == 5.0
        assert m.reward[1, states.index(("x1", "y2"))] == -1.0

    def test_uncovered_action(self):
        spec = _one_var_identity()
        bad = FactoredSpec(spec.variables, ("a", "b"), spec.observations, spec.transition_nets,
                           spec.observation_nets, spec.rewards, 0.9, {})
        with pytest.raises(FactoredSpecError, match="b"):
            compile_factored(bad)

    def test_row_sum_violation(self):
        x = StateVariable("x", ("lo", "hi"))
        tnet = TwoStageNet("t", ("a",), {"x": Cpt(("x",), {("lo",): (0.5, 0.4), ("hi",): (0, 1)})})
        onet = ObservationNet("o", ("a",), Cpt((), {(): (1.0,)}))
        with pytest.raises(FactoredSpecError, match="sum"):
            compile_factored(FactoredSpec((x,), ("a",), ("o",), (tnet,), (onet,), (), 0.9, {}))

    def test_unknown_reward_value(self):
        spec = _one_var_identity()
        bad = FactoredSpec(spec.variables, spec.actions, spec.observations, spec.transition_nets,
                           spec.observation_nets, (RewardEntry(None, {"x": "mid"}, 1.0),), 0.9, {})
        with pytest.raises(FactoredSpecError, match="mid"):
            compile_factored(bad)

    def test_doubly_covered_action(self):
        spec = _one_var_identity()
        twice = spec.transition_nets * 2
        bad = FactoredSpec(spec.variables, spec.actions, spec.observations, twice,
                           spec.observation_nets, (), 0.9, {})
        with pytest.raises(FactoredSpecError):
            compile_factored(bad)

    def test_variable_validation(self):
        with pytest.raises(FactoredSpecError):
            StateVariable("x", ())
        with pytest.raises(FactoredSpecError):
            StateVariable("x", ("a", "a"))


class TestTextFormat:
    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip(self, seed):
        spec = _random_two_var_spec(np.random.default_rng(seed))
        text = write_factored(spec)
        again = parse_factored(text)
        assert write_factored(again) == text
        assert compile_factored(again).tables_equal(compile_factored(spec))

    def test_dialogue_round_trip(self):
        spec = build_dialogue_spec("noisy")
        again = parse_factored(write_factored(spec))
        assert compile_factored(again).tables_equal(compile_factored(spec))

    def test_hand_written(self):
        text = """
        discount: 0.5
        variables:
          x: lo hi
        actions: a
        observations: o
        tnet t: a
          x | x
            lo : 1 0
            hi : 0.5 0.5
        onet z: a
          |
            : 1
        reward:
          * | x=hi : 3
        """
        text = "\n".join(line[8:] for line in text.splitlines())
        m = compile_factored(parse_factored(text))
        np.testing.assert_array_equal(m.transition[0], [[1, 0], [0.5, 0.5]])
        np.testing.assert_array_equal(m.reward, [[0, 3]])

    def test_errors_have_line_numbers(self):
        with pytest.raises(FactoredSpecError, match="line 2"):
            parse_factored("discount: 0.9\nbogus: 1\n")
        with pytest.raises(FactoredSpecError, match="line 4"):
            parse_factored("variables:\n  x: a b\nstart:\n  x: 0.5 half\n")


@given(st.integers(0, 10_000))
def test_compiled_rows_are_distributions(seed):
    m = compile_factored(_random_two_var_spec(np.random.default_rng(seed)))
    np.testing.assert_allclose(m.transition.sum(axis=2), 1.0, atol=1e-12)
    np.testing.assert_allclose(m.observation_fn.sum(axis=2), 1.0, atol=1e-12)
