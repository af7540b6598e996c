"""Counterexample pipelines, Monte Carlo integrability checks and sweeps."""

from __future__ import annotations

import functools
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .distributions import (
    DagWishartParams,
    closed_form_b2_ratio,
    evaluate_closed_form,
    gamma_from_decomposition,
    log_b2_ratio_numeric,
    log_proposal_density,
    sample_dag_wishart_factors,
    factors_to_omega,
    typeII_markov_exponents,
    z_dag_wishart,
)
from .graph_core import (
    Dag,
    GraphError,
    PerfectOrder,
    UndirectedGraph,
    ancestral_separators,
    canonical_key,
    connected_chordal_graphs,
    enumerate_perfect_orders,
    induced_dag_variants,
    is_decomposable,
    is_homogeneous,
    random_chordal_graph,
    random_perfect_dag,
)
from .matrix_core import (
    GIncompleteMatrix,
    jacobian_identity_check,
    markov_ratio_numeric,
    pd_completion,
    random_sigma_in_pd_g,
    random_spd,
)
from .symbolic import (
    TYPE_I,
    TYPE_II,
    Infeasible,
    LinearConstraintSet,
    decompose_markov_ratio,
    feasible_dimension,
    integrability_set_from_decomposition,
    sample_points,
    set_AP,
    set_BP,
    witness_point,
)

SCHEMA_VERSION = "1.0"
DEFAULT_SAMPLES = 200_000
ESS_GATE = 0.1
CHUNK = 20_000


# ------------------------------------------------------------- importance sampling

@dataclass
class MCResult:
    log_estimate: float
    rel_se: float
    ess: float
    n: int
    divergent: bool
    reference: float | None = None

    @property
    def z_score(self):
        if self.reference is None or not np.isfinite(self.log_estimate) or self.rel_se == 0:
            return None
        return (self.log_estimate - self.reference) / self.rel_se

    @property
    def agrees(self):
        z = self.z_score
        return (not self.divergent) and z is not None and abs(z) < 3

    def to_json(self):
        f = lambda x: None if x is None or not np.isfinite(x) else float(x)
        return {
            "log_estimate": f(self.log_estimate),
            "rel_se": f(self.rel_se),
            "ess": f(self.ess),
            "n": self.n,
            "divergent": bool(self.divergent),
            "reference": f(self.reference),
            "z_score": f(self.z_score),
            "finite_estimate": bool(not self.divergent and np.isfinite(self.log_estimate)),
        }


def _summarize(logw, reference=None):
    n = len(logw)
    if not np.all(np.isfinite(logw)):
        return MCResult(float("nan"), float("inf"), 0.0, n, True, reference)
    m = logw.max()
    w = np.exp(logw - m)
    mean = w.mean()
    ess = float(w.sum() ** 2 / (w ** 2).sum())
    rel_se = float(w.std(ddof=1) / (mean * np.sqrt(n)))
    est = float(m + np.log(mean))
    return MCResult(est, rel_se, ess, n, ess < ESS_GATE * n, reference)


def _index_sets(sets):
    return kernels.pack_index_sets(sets)


def _proposal_params(d: Dag, U, gamma, shrink=0.85, shape_scale=0.9):
    """γ-form DAG Wishart proposal slightly wider than the target's D-part."""
    g2 = {}
    for j in d.vertices:
        half = len(d.parents(j)) / 2 + 1
        k = half - float(gamma[j])
        k2 = shape_scale * k if k > 0 else 0.5
        g2[j] = half - k2
    return DagWishartParams(U=shrink * np.asarray(U, dtype=float), gamma=g2)


def _is_loop(d: Dag, prop: DagWishartParams, log_target, n, rng, chunk=CHUNK):
    out = []
    left = n
    while left > 0:
        m = min(chunk, left)
        L, lam = sample_dag_wishart_factors(d, prop, m, rng=rng)
        omega = factors_to_omega(L, lam)
        # Σ = F^T F with F = Λ^{-1/2} L^{-1}; minors of Σ are taken from F
        # because forming Σ loses its small directions when some Λ_j is tiny
        F = np.linalg.inv(L) / np.sqrt(lam)[:, :, None]
        out.append(log_target(omega, F) - log_proposal_density(d, prop, L, lam))
        left -= m
    return np.concatenate(out)


def is_log_z_dag_wishart(d: Dag, params: DagWishartParams, n=20_000, seed=0):
    """Importance-sampling estimate of log z_D, independent of the closed form.

    The target's conditional variances come from principal minors of Ω^{-1}.
    """
    rng = np.random.default_rng(seed)
    U = np.asarray(params.U, dtype=float)
    fam_idx, fam_ptr = _index_sets([d.family(j) for j in d.vertices])
    pa_idx, pa_ptr = _index_sets([d.parents(j) for j in d.vertices])
    if params.gamma is not None:
        ex = np.array([float(params.gamma[j]) for j in d.vertices])
        c = 1.0
    else:
        ex = np.array([-float(params.eta[j]) / 2 + len(d.parents(j)) + 2 for j in d.vertices])
        c = 0.5

    def log_target(omega, F):
        logD = kernels.logdet_gram_minors(F, fam_idx, fam_ptr) - kernels.logdet_gram_minors(F, pa_idx, pa_ptr)
        return -c * np.einsum("nij,ij->n", omega, U) + logD @ ex

    gam = params.gamma
    if gam is None:
        gam = {j: -float(params.eta[j]) / 2 + len(d.parents(j)) + 2 for j in d.vertices}
    prop = _proposal_params(d, c * U, gam)
    logw = _is_loop(d, prop, log_target, n, rng)
    return _summarize(logw, z_dag_wishart(d, params))


def mc_b1_check(order: PerfectOrder, d: Dag, point, U, n_samples=DEFAULT_SAMPLES, seed=0, dec=None):
    """Importance-sampling evidence that the Type II integral is finite.

    The proposal is a γ-form DAG Wishart built from the D-part of the
    decomposition at ``point``.  When every residual exponent vanishes the
    estimate is compared with the exact DAG Wishart constant.
    """
    rng = np.random.default_rng(seed)
    U = np.asarray(U, dtype=float)
    dec = dec or decompose_markov_ratio(order, d, TYPE_II)
    gam = gamma_from_decomposition(dec, point)
    a, b = typeII_markov_exponents(order, point)
    idx, ptr = _index_sets(list(order.cliques) + list(order.separators))
    coef = np.array(list(a) + [-x for x in b])

    def log_target(omega, F):
        ld = kernels.logdet_gram_minors(F, idx, ptr)
        return -np.einsum("nij,ij->n", omega, U) + ld @ coef

    prop = _proposal_params(d, U, gam)
    logw = _is_loop(d, prop, log_target, n_samples, rng)
    ref = None
    pure = all(t.exponent.evaluate(point) == 0 for t in dec.residuals)
    in_domain = all(len(d.parents(j)) / 2 + 1 - gam[j] > 0 for j in d.vertices)
    if pure and in_domain:
        ref = z_dag_wishart(d, DagWishartParams(U=U, gamma=gam))
    return _summarize(logw, ref)


def random_scales(g: UndirectedGraph, k, rng):
    return [GIncompleteMatrix.from_full(random_spd(g.p, rng), g) for _ in range(k)]


def b2_numeric_check(order: PerfectOrder, d: Dag, point, U_list, convention=TYPE_II, dec=None, n_samples=20_000, seed=0):
    """Spread of log(∫ω / H_G) over several scale matrices.

    Closed form (tolerance 1e-9) when the residual exponents vanish at the
    point; Monte Carlo otherwise (Type II only), passing when every pairwise
    gap is under 3 combined standard errors.
    """
    if len(U_list) < 3:
        raise ValueError("need at least three scale matrices")
    dec = dec or decompose_markov_ratio(order, d, convention)
    terms = closed_form_b2_ratio(dec)
    residual_values = [float(e.evaluate(point)) for _, e in terms]
    pure = all(v == 0 for v in residual_values)
    out = {"residual_exponents": [{"term": t.label(), "exponent": str(e), "value": v} for (t, e), v in zip(terms, residual_values)]}
    if convention == TYPE_I:
        vals = [evaluate_closed_form(terms, point, pd_completion(UE, order)) for UE in U_list]
        spread = max(vals) - min(vals)
        out.update(method="closed_form", values=vals, spread=spread, passed=bool(pure and spread < 1e-9))
        return out
    if pure:
        vals = [log_b2_ratio_numeric(dec, point, UE) for UE in U_list]
        spread = max(vals) - min(vals)
        out.update(method="closed_form", values=vals, spread=spread, passed=bool(spread < 1e-9))
        return out
    al = [float(point[f"alpha_{j}"]) for j in range(1, order.r + 1)]
    be = [float(point[f"beta_{j}"]) for j in range(2, order.r + 1)]
    vals, ses, div = [], [], False
    for i, UE in enumerate(U_list):
        U = pd_completion(UE, order)
        res = mc_b1_check(order, d, point, U, n_samples, seed + i, dec=dec)
        div |= res.divergent
        vals.append(res.log_estimate - markov_ratio_numeric(order, U, al, be))
        ses.append(res.rel_se)
    worst = 0.0
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            worst = max(worst, abs(vals[i] - vals[j]) / np.hypot(ses[i], ses[j]))
    spread = max(vals) - min(vals) if all(np.isfinite(vals)) else float("inf")
    out.update(method="monte_carlo", values=vals, spread=spread, max_z=worst, passed=bool(not div and worst < 3))
    return out


# ------------------------------------------------------------------ reports

def _fraction_json(x: Fraction):
    return str(x)


@dataclass
class CounterexampleReport:
    convention: str
    graph: UndirectedGraph
    order: PerfectOrder
    dag: Dag
    r_D: int
    ancestral: list
    conjectured_dimension: int
    union_dimension: int | None
    achieved_dimension: int | None
    dimensions: dict
    constraint_set: LinearConstraintSet | None
    decomposition: object
    witness: dict | None
    witness_outside_all_orders: bool | None
    mc: MCResult | None
    b2: dict | None
    refuted: bool
    status: str
    seed: int
    samples: int
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "counterexample_report",
            "convention": self.convention,
            "status": self.status,
            "refuted": bool(self.refuted),
            "graph": self.graph.to_json(),
            "order": self.order.to_json(),
            "dag": self.dag.to_json() if self.dag is not None else None,
            "r_D": self.r_D,
            "ancestral_separators": [sorted(S) for S in self.ancestral],
            "conjectured_dimension": self.conjectured_dimension,
            "union_dimension": self.union_dimension,
            "achieved_dimension": self.achieved_dimension,
            "dimensions": self.dimensions,
            "constraint_set": self.constraint_set.to_json() if self.constraint_set is not None else [],
            "decomposition": self.decomposition.to_json() if self.decomposition is not None else None,
            "witness": {k: _fraction_json(v) for k, v in self.witness.items()} if self.witness else None,
            "witness_outside_all_orders": self.witness_outside_all_orders,
            "mc_b1": self.mc.to_json() if self.mc is not None else None,
            "b2": self.b2,
            "seed": self.seed,
            "samples": self.samples,
            "notes": list(self.notes),
        }


def transport_point(point, src: PerfectOrder, dst: PerfectOrder):
    """Re-index a parameter point from one perfect order to another.

    α follows clique identity.  β enters every density only through its sum
    over the slots of each separator, so that sum is kept and put on the
    first slot of the separator in ``dst``.
    """
    out = {}
    cpos = {C: j + 1 for j, C in enumerate(src.cliques)}
    for j, C in enumerate(dst.cliques):
        out[f"alpha_{j + 1}"] = Fraction(point[f"alpha_{cpos[C]}"])
    for S in dst.distinct_separators():
        tot = sum((Fraction(point[f"beta_{j}"]) for j in src.J(S)), Fraction(0))
        J = dst.J(S)
        out[f"beta_{J[0]}"] = tot
        for j in J[1:]:
            out[f"beta_{j}"] = Fraction(0)
    return out


def _lm_set(order, convention):
    return set_BP(order) if convention == TYPE_II else set_AP(order)


@functools.lru_cache(maxsize=256)
def _union_dimension_cached(vertices, edges, convention):
    return union_dimension(UndirectedGraph(vertices, edges), convention, cache=False)


def union_dimension(g: UndirectedGraph, convention=TYPE_II, cache=True):
    """Largest dimension of the per-order sets B_P (or A_P)."""
    if cache:
        return _union_dimension_cached(tuple(g.vertices), tuple(g.sorted_edges()), convention)
    best = None
    for P in enumerate_perfect_orders(g):
        dim = feasible_dimension(_lm_set(P, convention))
        if dim is not Infeasible and (best is None or dim > best):
            best = dim
    return best


def witness_outside_all(g, order, point, convention=TYPE_II):
    for P in enumerate_perfect_orders(g):
        if _lm_set(P, convention).contains(transport_point(point, order, P)):
            return False
    return True


def _max_r_D(order: PerfectOrder):
    return max(ancestral_separators(order, d)[1] for d in induced_dag_variants(order))


def select_dag(order: PerfectOrder, convention=TYPE_II):
    """Induced DAG version with the most ancestral separators.

    Ties are broken by the dimension of the refined integrability set, so
    the variant that leaves the fewest residual equalities wins.
    """
    variants = induced_dag_variants(order)
    scored = [(ancestral_separators(order, d)[1], d) for d in variants]
    top = max(r for r, _ in scored)
    best, best_dim = None, -1
    for r, d in scored:
        if r != top:
            continue
        dim = feasible_dimension(integrability_set_from_decomposition(decompose_markov_ratio(order, d, convention)))
        dim = -1 if dim is Infeasible else dim
        if dim > best_dim:
            best, best_dim = d, dim
    return best


def _verify(g, order, convention, dag=None, seed=0, samples=DEFAULT_SAMPLES, run_mc=True, n_scales=5):
    ok, _ = is_decomposable(g)
    if not ok:
        raise GraphError("graph is not decomposable")
    conj = order.r + 1
    if order.r == 1:
        return CounterexampleReport(
            convention, g, order, None, 0, [], conj, None, None, {}, None, None, None, None, None, None,
            False, "inapplicable", seed, samples, ["single clique: no separators"],
        )
    d = dag if dag is not None else select_dag(order, convention)
    anc, r_D = ancestral_separators(order, d)
    decs, dims = {}, {}
    for mode in ("refined", "grouped"):
        dec = decompose_markov_ratio(order, d, convention, mode)
        cs = integrability_set_from_decomposition(dec)
        dim = feasible_dimension(cs)
        decs[mode] = (dec, cs, dim)
        dims[mode] = None if dim is Infeasible else dim
    mode = max(decs, key=lambda m: -1 if dims[m] is None else dims[m])
    dec, cs, achieved = decs[mode]
    achieved = dims[mode]
    notes = [f"decomposition mode: {mode}"]
    witness = witness_point(cs) if achieved is not None else None
    ss = np.random.SeedSequence([seed, zlib.crc32(_task_key(g, order).encode())])
    s_mc, s_u = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    urng = np.random.default_rng(s_u)
    mc = b2 = None
    outside = None
    union = None
    if achieved is not None and achieved > conj:
        union = union_dimension(g, convention)
        outside = witness_outside_all(g, order, witness, convention)
    if witness is not None:
        scales = random_scales(g, n_scales, urng)
        if convention == TYPE_II and run_mc:
            U = pd_completion(scales[0], order)
            mc = mc_b1_check(order, d, witness, U, samples, s_mc, dec=dec)
        elif convention == TYPE_I:
            notes.append("Type I integrability from the Riesz condition; no Monte Carlo run")
        b2 = b2_numeric_check(order, d, witness, scales, convention, dec=dec, seed=s_mc)
    checks = witness is not None and b2 is not None and b2["passed"]
    if convention == TYPE_II and run_mc:
        checks = checks and mc is not None and mc.agrees
    refuted = bool(achieved is not None and achieved > conj and outside and checks)
    status = "refuted" if refuted else "consistent"
    return CounterexampleReport(
        convention, g, order, d, r_D, anc, conj, union, achieved, dims, cs, dec, witness, outside,
        mc, b2, refuted, status, seed, samples, notes,
    )


def verify_counterexample_II(g, order, dag=None, seed=0, samples=DEFAULT_SAMPLES, run_mc=True):
    return _verify(g, order, TYPE_II, dag, seed, samples, run_mc)


def verify_counterexample_I(g, order, dag=None, seed=0, samples=DEFAULT_SAMPLES):
    return _verify(g, order, TYPE_I, dag, seed, samples, run_mc=False)


# ------------------------------------------------------------------- search

def _task_key(g, order):
    n, edges = canonical_key(g)
    return f"{n}:{edges}:{[sorted(C) for C in order.cliques]}"


def _search_task(args):
    g, cliques, convention, seed, samples = args
    from .graph_core import derive_order

    order = derive_order(g, cliques)
    if _max_r_D(order) < 2:
        return None
    rep = _verify(g, order, convention, None, seed, samples)
    return rep.to_json() if rep.refuted else None


def search_tasks(max_vertices, convention=TYPE_II, seed=0, samples=20_000, cap=8):
    if max_vertices > cap:
        raise GraphError(f"max_vertices above the cap of {cap}")
    tasks = []
    for g in connected_chordal_graphs(max_vertices):
        if is_homogeneous(g):
            continue
        for P in enumerate_perfect_orders(g):
            tasks.append((_task_key(g, P), (g, [sorted(C) for C in P.cliques], convention, seed, samples)))
    tasks.sort(key=lambda t: t[0])
    return tasks


def search_counterexamples(max_vertices, convention=TYPE_II, seed=0, samples=20_000, workers=None):
    """Refuting reports over connected non-homogeneous decomposable graphs.

    One task per (graph, perfect order); the induced DAG with the most
    ancestral separators is used.  Output order is the sorted task key, so
    results do not depend on the worker count.
    """
    tasks = search_tasks(max_vertices, convention, seed, samples)
    workers = workers or int(os.environ.get("LMWISHART_WORKERS", "1"))
    args = [a for _, a in tasks]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            res = list(ex.map(_search_task, args, chunksize=4))
    else:
        res = [_search_task(a) for a in args]
    return [r for r in res if r is not None]


# ------------------------------------------------------------------- sweeps

def jacobian_sweep(n=200, max_vertices=8, seed=0):
    """Worst relative gap between both sides of the Jacobian identity."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        p = int(rng.integers(1, max_vertices + 1))
        g = random_chordal_graph(p, rng, density=float(rng.uniform(0.2, 0.8)))
        d = random_perfect_dag(g, rng)
        sigma = random_sigma_in_pd_g(g, rng)
        lhs, rhs = jacobian_identity_check(d, sigma)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return worst


def theorem_sweep(max_vertices=7, points=10, seed=0):
    """Check that exact points of every B_P lie in the induced-DAG set.

    Returns (pairs checked, points checked, violations).
    """
    from .graph_core import dag_induced_by_order

    rng = np.random.default_rng(seed)
    pairs = pts = 0
    bad = []
    for g in connected_chordal_graphs(max_vertices):
        for P in enumerate_perfect_orders(g):
            pairs += 1
            B = set_BP(P)
            d = dag_induced_by_order(P)
            cs = integrability_set_from_decomposition(decompose_markov_ratio(P, d, TYPE_II))
            for x in sample_points(B, points, rng):
                pts += 1
                if not cs.contains(x):
                    bad.append((g.to_json(), P.to_json(), {k: str(v) for k, v in x.items()}))
    return pairs, pts, bad
