"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st

from dialogpomdp.model import random_model


@st.composite
def small_models(draw, max_states=4, max_actions=3, max_obs=3):
    seed = draw(st.integers(0, 2**32 - 1))
    S = draw(st.integers(2, max_states))
    A = draw(st.integers(1, max_actions))
    O = draw(st.integers(1, max_obs))
    conc = draw(st.sampled_from([0.3, 1.0, 5.0]))
    return random_model(np.random.default_rng(seed), S, A, O, concentration=conc)


@st.composite
def beliefs(draw, dim):
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=dim, max_size=dim))
    w = np.asarray(w)
    if w.sum() <= 1e-6:
        w = np.ones(dim)
    return w / w.sum()
