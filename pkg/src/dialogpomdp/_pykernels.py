"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when the
extension is unavailable or ``DIALOGPOMDP_PURE_PYTHON`` is set.
"""

import numpy as np

PIVOT_TOL = 1e-12


def pointwise_dominated(vectors):
    """Mask of rows dominated componentwise by another row.

    Row ``i`` is dominated by ``j`` when ``v[j] >= v[i]`` everywhere and either
    some component is strictly larger or the rows are equal and ``j < i``.
    """
    n = vectors.shape[0]
    out = np.zeros(n, dtype=bool)
    chunk = max(1, 4_000_000 // max(1, n * vectors.shape[1]))
    idx = np.arange(n)
    for start in range(0, n, chunk):
        block = vectors[start:start + chunk]
        ge = np.all(vectors[None, :, :] >= block[:, None, :], axis=2)
        gt = np.any(vectors[None, :, :] > block[:, None, :], axis=2)
        rows = idx[start:start + chunk]
        earlier = idx[None, :] < rows[:, None]
        dom = ge & (gt | earlier)
        dom[np.arange(len(rows)), rows] = False
        out[start:start + chunk] = dom.any(axis=1)
    return out


def witness_lp(alpha, kept):
    """Best margin of ``alpha`` over ``kept`` anywhere on the belief simplex.

    Solves ``max delta  s.t.  b.(alpha - kept_k) >= delta  for all k, b in simplex``
    with a dense tableau simplex (Bland's rule). Returns ``(delta, b)`` where
    ``delta`` is re-evaluated directly at the optimal ``b``.
    """
    K, n = kept.shape
    if K == 0:
        b = np.zeros(n)
        b[0] = 1.0
        return np.inf, b
    D = kept - alpha
    big = max(0.0, float(D.max())) + 1.0
    nv = n  # n-1 free belief coordinates plus the shifted margin t = delta + big
    m = K + 1
    tab = np.zeros((m + 1, nv + m + 1))
    tab[:K, :n - 1] = D[:, :n - 1] - D[:, n - 1:n]
    tab[:K, n - 1] = 1.0
    tab[K, :n - 1] = 1.0
    tab[:m, nv:nv + m] = np.eye(m)
    tab[:K, -1] = big - D[:, n - 1]
    tab[K, -1] = 1.0
    tab[m, n - 1] = -1.0
    basis = list(range(nv, nv + m))
    for _ in range(50 * (m + nv)):
        cost = tab[m, :-1]
        cand = np.nonzero(cost < -PIVOT_TOL)[0]
        if cand.size == 0:
            break
        j = int(cand[0])
        col = tab[:m, j]
        rows = np.nonzero(col > PIVOT_TOL)[0]
        if rows.size == 0:
            break
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-15 * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: basis[r]))
        tab[i] /= tab[i, j]
        for r in range(m + 1):
            if r != i and tab[r, j] != 0.0:
                tab[r] -= tab[r, j] * tab[i]
        basis[i] = j
    x = np.zeros(nv)
    for i, bi in enumerate(basis):
        if bi < nv:
            x[bi] = tab[i, -1]
    b = np.empty(n)
    b[:n - 1] = np.clip(x[:n - 1], 0.0, None)
    b[n - 1] = max(0.0, 1.0 - b[:n - 1].sum())
    b /= b.sum()
    delta = float(np.min((alpha - kept) @ b))
    return delta, b


def project(T, Z, gamma, vectors):
    """``G[a, o] = gamma * T_a diag(Z[a, :, o]) vectors^T``, shape ``(A, O, S, n)``."""
    # (A, O, S', n) weights then contract s'
    weighted = Z.transpose(0, 2, 1)[:, :, :, None] * vectors.T[None, None, :, :]
    return gamma * np.einsum("ast,aotk->aosk", T, weighted)


def backup_terms(T, Z, vectors, beliefs):
    """Expected next-step value part of the point-based backup.

    ``out[i, a] = sum_o T_a diag(Z[a, :, o]) alpha_j`` where ``alpha_j`` maximises
    ``tau(b_i, a, o) . alpha`` (lowest index on ties). Shape ``(nb, A, S)``.
    """
    A, S, _ = T.shape
    O = Z.shape[2]
    nb = beliefs.shape[0]
    out = np.empty((nb, A, S))
    VT = vectors.T
    for a in range(A):
        pred = beliefs @ T[a]
        U = pred[:, None, :] * Z[a].T[None, :, :]  # (nb, O, S')
        best = (U.reshape(nb * O, S) @ VT).argmax(axis=1).reshape(nb, O)
        W = (vectors[best] * Z[a].T[None, :, :]).sum(axis=1)  # (nb, S')
        out[:, a] = W @ T[a].T
    return out


def lookahead_terms(b, T, Z, vectors):
    """``sum_o max_k (unnormalised tau(b, a, o)) . alpha_k`` for each action."""
    pred = np.einsum("s,ast->at", b, T)  # (A, S')
    U = Z.transpose(0, 2, 1) * pred[:, None, :]  # (A, O, S')
    A, O, S = U.shape
    return (U.reshape(A * O, S) @ vectors.T).max(axis=1).reshape(A, O).sum(axis=1)
