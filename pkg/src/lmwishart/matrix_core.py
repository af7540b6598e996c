"""Dense symmetric-matrix tools on decomposable graphs.

Vertex ``v`` lives at row/column ``v - 1``.  Vertices are assumed to be
``1..p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_core import Dag, PerfectOrder, UndirectedGraph, is_perfect_dag, maximal_cliques, perfect_order_from_dag, NotPerfectDag

PD_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    pass


class NotPartialPD(ValueError):
    pass


class SparsityViolation(ValueError):
    pass


def _ix(vs):
    return [v - 1 for v in sorted(vs)]


def is_pd(a):
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    if p == 0:
        return True
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        return False
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    tr = np.trace(a) / p
    return bool(np.all(np.diag(c) ** 2 > PD_RTOL * tr))


def require_pd(a, what="matrix"):
    if not is_pd(a):
        raise NotPositiveDefinite(f"{what} is not positive definite")


def logdet(a):
    if len(a) == 0:
        return 0.0
    c = np.linalg.cholesky(a)
    return 2.0 * float(np.log(np.diag(c)).sum())


def logdet_sub(a, vs):
    vs = _ix(vs)
    if not vs:
        return 0.0
    return logdet(a[np.ix_(vs, vs)])


def cond_var(a, j, given):
    """Schur complement a_{jj|given}."""
    g = _ix(given)
    if not g:
        return float(a[j - 1, j - 1])
    b = a[np.ix_(g, [j - 1])]
    return float(a[j - 1, j - 1] - (b.T @ np.linalg.solve(a[np.ix_(g, g)], b))[0, 0])


def log_cond_det(a, vs, given):
    """log det a_{vs|given} = log det a_{vs ∪ given} - log det a_{given}."""
    return logdet_sub(a, set(vs) | set(given)) - logdet_sub(a, given)


@dataclass
class GIncompleteMatrix:
    graph: UndirectedGraph
    values: dict  # frozenset({i,j}) or frozenset({i}) -> float

    @classmethod
    def from_full(cls, a, g: UndirectedGraph):
        a = np.asarray(a, dtype=float)
        vals = {frozenset({v}): float(a[v - 1, v - 1]) for v in g.vertices}
        for e in g.edges:
            i, j = sorted(e)
            vals[e] = float(a[i - 1, j - 1])
        return cls(g, vals)

    def entry(self, i, j):
        return self.values[frozenset({i, j})]

    def block(self, vs):
        vs = sorted(vs)
        return np.array([[self.entry(i, j) for j in vs] for i in vs])

    def is_partial_pd(self):
        return all(is_pd(self.block(C)) for C in maximal_cliques(self.graph))

    def to_json(self):
        p = self.graph.p
        return {
            "diag": [self.entry(v, v) for v in range(1, p + 1)],
            "edges": [[i, j, self.entry(i, j)] for i, j in self.graph.sorted_edges()],
        }

    @classmethod
    def from_json(cls, g, obj):
        vals = {frozenset({i + 1}): float(x) for i, x in enumerate(obj["diag"])}
        for i, j, x in obj["edges"]:
            vals[frozenset({int(i), int(j)})] = float(x)
        m = cls(g, vals)
        for e in list(g.edges):
            if e not in vals:
                raise ValueError(f"missing entry for edge {sorted(e)}")
        return m


def symmatrix_from_json(obj):
    p = int(obj["p"])
    a = np.asarray(obj["data"], dtype=float).reshape(p, p)
    # keep only the upper triangle so symmetry is exact
    return np.triu(a) + np.triu(a, 1).T


def pd_completion(gamma: GIncompleteMatrix, order: PerfectOrder | None = None):
    """Unique PD completion whose inverse vanishes off the edge set."""
    if not gamma.is_partial_pd():
        raise NotPartialPD("some clique block is not positive definite")
    g = gamma.graph
    if order is None:
        order = _any_order(g)
    p = g.p
    sig = np.zeros((p, p))
    C1 = sorted(order.cliques[0])
    sig[np.ix_(_ix(C1), _ix(C1))] = gamma.block(C1)
    for j in range(1, order.r):
        C, S, H = order.cliques[j], order.separators[j - 1], order.histories[j - 1]
        sig[np.ix_(_ix(C), _ix(C))] = gamma.block(C)
        R = C - H
        K = H - S
        if not K:
            continue
        if S:
            coef = np.linalg.solve(sig[np.ix_(_ix(S), _ix(S))], sig[np.ix_(_ix(S), _ix(K))])
            blk = sig[np.ix_(_ix(R), _ix(S))] @ coef
        else:
            blk = np.zeros((len(R), len(K)))
        sig[np.ix_(_ix(R), _ix(K))] = blk
        sig[np.ix_(_ix(K), _ix(R))] = blk.T
    return sig


def _any_order(g):
    from .graph_core import _build_order, is_decomposable

    # cliques in reverse elimination order always satisfy running intersection
    _, peo = is_decomposable(g)
    pos = {v: i for i, v in enumerate(peo)}
    cl = maximal_cliques(g)
    cl.sort(key=lambda C: -min(pos[v] for v in C))
    return _build_order(tuple(cl))


def project_to_E(omega, g: UndirectedGraph):
    require_pd(omega, "omega")
    return GIncompleteMatrix.from_full(np.linalg.inv(omega), g)


@dataclass
class CholeskyFactors:
    L: np.ndarray
    D: np.ndarray  # conditional variances, D[v-1]

    @property
    def Lambda(self):
        return 1.0 / self.D


def modified_cholesky(omega, d: Dag, tol=1e-8):
    """Omega = L diag(1/D) L^T with L supported on the DAG's arcs."""
    omega = np.asarray(omega, dtype=float)
    require_pd(omega, "omega")
    sig = np.linalg.inv(omega)
    p = omega.shape[0]
    L = np.eye(p)
    D = np.zeros(p)
    for j in d.vertices:
        pa = _ix(d.parents(j))
        if pa:
            coef = np.linalg.solve(sig[np.ix_(pa, pa)], sig[pa, j - 1])
            L[pa, j - 1] = -coef
            D[j - 1] = sig[j - 1, j - 1] - sig[pa, j - 1] @ coef
        else:
            D[j - 1] = sig[j - 1, j - 1]
    recon = L @ np.diag(1.0 / D) @ L.T
    scale = max(1.0, np.abs(omega).max())
    if np.abs(recon - omega).max() > tol * scale:
        raise SparsityViolation("omega does not factor along the DAG's parent sets")
    return CholeskyFactors(L, D)


def omega_from_factors(L, lam):
    return (L * lam) @ L.T


def conditional_variances(sigma, d: Dag):
    return {j: cond_var(sigma, j, d.parents(j)) for j in d.vertices}


def markov_ratio_numeric(order: PerfectOrder, sigma_e, a, b):
    """log H = sum a_j log det Σ_{C_j} - sum b_j log det Σ_{S_j}.

    ``sigma_e`` may be a :class:`GIncompleteMatrix` or any full symmetric
    matrix agreeing with it on the cliques.
    """
    if isinstance(sigma_e, GIncompleteMatrix):
        if not sigma_e.is_partial_pd():
            raise NotPartialPD("Σ^E is not partial positive definite")
        blocks = lambda vs: logdet(sigma_e.block(vs)) if vs else 0.0
    else:
        blocks = lambda vs: logdet_sub(sigma_e, vs)
    out = sum(float(a[j]) * blocks(C) for j, C in enumerate(order.cliques))
    out -= sum(float(b[j]) * blocks(S) for j, S in enumerate(order.separators))
    return out


def jacobian_identity_check(d: Dag, sigma):
    """Both sides of the clique/separator vs. parent-set identity (log scale)."""
    if not is_perfect_dag(d):
        raise NotPerfectDag("DAG has an immorality")
    sigma = np.asarray(sigma, dtype=float)
    order = perfect_order_from_dag(d)
    lhs = -sum((len(C) + 1) / 2 * logdet_sub(sigma, C) for C in order.cliques)
    lhs += sum((len(S) + 1) / 2 * logdet_sub(sigma, S) for S in order.separators)
    rhs = 0.0
    for j in d.vertices:
        pa = d.parents(j)
        rhs -= (len(pa) + 2) / 2 * np.log(cond_var(sigma, j, pa))
        rhs -= 0.5 * logdet_sub(sigma, pa)
    return lhs, rhs


def random_spd(p, rng, df=None):
    df = df or p + 2
    x = rng.standard_normal((df, p))
    return x.T @ x / df + 0.1 * np.eye(p)


def random_sigma_in_pd_g(g: UndirectedGraph, rng):
    """Random covariance whose inverse has the sparsity pattern of g."""
    full = random_spd(g.p, rng)
    return pd_completion(GIncompleteMatrix.from_full(full, g))
