"""The compiled kernels and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dialogpomdp import _pykernels as py
from dialogpomdp import kernels

try:
    from dialogpomdp import _ckernels as cy
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _vectors(rng, n, dim, dup=True):
    v = rng.normal(size=(n, dim))
    if dup and n > 2:
        v[1] = v[0]  # exact duplicates exercise the tie rule
        v[2] = v[0] - 0.5
    return np.ascontiguousarray(v)


@needs_ext
class TestAgreement:
    @pytest.mark.parametrize("seed", range(20))
    def test_pointwise_dominated(self, seed):
        rng = np.random.default_rng(seed)
        v = _vectors(rng, int(rng.integers(1, 40)), int(rng.integers(1, 6)))
        assert np.array_equal(cy.pointwise_dominated(v), py.pointwise_dominated(v))

    @pytest.mark.parametrize("seed", range(40))
    def test_witness_lp(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 7))
        kept = _vectors(rng, int(rng.integers(1, 12)), dim, dup=False)
        alpha = np.ascontiguousarray(rng.normal(size=dim))
        dc, bc = cy.witness_lp(alpha, kept)
        dp, bp = py.witness_lp(alpha, kept)
        assert dc == pytest.approx(dp, abs=1e-9)
        # both witnesses must achieve the margin they report
        for d, b in ((dc, bc), (dp, bp)):
            assert abs(b.sum() - 1.0) < 1e-12 and np.all(b >= 0)
            assert np.min((alpha - kept) @ b) == pytest.approx(d, abs=1e-12)

    def test_witness_empty(self):
        d, b = cy.witness_lp(np.array([1.0, 2.0]), np.zeros((0, 2)))
        assert d == np.inf and b.sum() == 1.0


@given(st.integers(0, 2**32 - 1))
def test_pointwise_dominated_matches_definition(seed):
    rng = np.random.default_rng(seed)
    v = np.round(rng.normal(size=(int(rng.integers(1, 12)), 3)), 1)
    expect = []
    for i in range(len(v)):
        expect.append(any(
            j != i and np.all(v[j] >= v[i]) and (np.any(v[j] > v[i]) or j < i)
            for j in range(len(v))))
    assert py.pointwise_dominated(v).tolist() == expect
    if cy is not None:
        assert cy.pointwise_dominated(np.ascontiguousarray(v)).tolist() == expect


def test_project_matches_loops():
    rng = np.random.default_rng(1)
    A, S, O, n = 2, 3, 2, 4
    T = rng.dirichlet(np.ones(S), size=(A, S))
    Z = rng.dirichlet(np.ones(O), size=(A, S))
    V = rng.normal(size=(n, S))
    G = py.project(T, Z, 0.9, V)
    for a in range(A):
        for o in range(O):
            ref = 0.9 * T[a] @ np.diag(Z[a, :, o]) @ V.T
            np.testing.assert_allclose(G[a, o], ref, atol=1e-14)


def test_backup_terms_matches_loops():
    rng = np.random.default_rng(2)
    A, S, O = 3, 4, 3
    T = rng.dirichlet(np.ones(S), size=(A, S))
    Z = rng.dirichlet(np.ones(O), size=(A, S))
    V = rng.normal(size=(5, S))
    B = rng.dirichlet(np.ones(S), size=6)
    out = py.backup_terms(T, Z, V, B)
    for i, b in enumerate(B):
        for a in range(A):
            ref = np.zeros(S)
            for o in range(O):
                g = T[a] @ (Z[a, :, o][:, None] * V.T)  # (S, n)
                ref += g[:, int(np.argmax(b @ g))]
            np.testing.assert_allclose(out[i, a], ref, atol=1e-13)


def test_backend_switch():
    code = "from dialogpomdp import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DIALOGPOMDP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    if cy is not None:
        assert kernels.BACKEND == "cython" or os.environ.get("DIALOGPOMDP_PURE_PYTHON")
