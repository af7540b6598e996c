from fractions import Fraction

import numpy as np
import pytest
from scipy.special import multigammaln

from lmwishart.distributions import DagWishartParams, z_dag_wishart
from lmwishart.graph_core import (
    Dag,
    GraphError,
    UndirectedGraph,
    ancestral_separators,
    dag_induced_by_order,
    derive_order,
    enumerate_perfect_orders,
    random_perfect_dag,
    transitive_dag,
)
from lmwishart.matrix_core import GIncompleteMatrix, pd_completion, random_spd
from lmwishart.symbolic import (
    TYPE_I,
    TYPE_II,
    decompose_markov_ratio,
    integrability_set_from_decomposition,
    set_BP,
    witness_point,
)
from lmwishart.verification import (
    _summarize,
    b2_numeric_check,
    is_log_z_dag_wishart,
    jacobian_sweep,
    mc_b1_check,
    random_scales,
    search_counterexamples,
    search_tasks,
    select_dag,
    theorem_sweep,
    transport_point,
    union_dimension,
    verify_counterexample_I,
    verify_counterexample_II,
    witness_outside_all,
)


@pytest.fixture(scope="module")
def ce1_setup():
    from conftest import CE1_EDGES, CE1_ORDER

    g = UndirectedGraph(range(1, 7), CE1_EDGES)
    P = derive_order(g, CE1_ORDER)
    d = dag_induced_by_order(P)
    dec = decompose_markov_ratio(P, d, TYPE_II)
    w = witness_point(integrability_set_from_decomposition(dec))
    U = pd_completion(random_scales(g, 1, np.random.default_rng(0))[0], P)
    return g, P, d, dec, w, U


class TestSummary:
    def test_uniform_weights(self):
        r = _summarize(np.full(100, np.log(3.0)), reference=np.log(3.0))
        assert r.log_estimate == pytest.approx(np.log(3.0)) and r.ess == pytest.approx(100)
        assert r.rel_se == 0 and not r.divergent

    def test_nonfinite_weights_flag(self):
        r = _summarize(np.array([0.0, np.inf]))
        assert r.divergent and not r.agrees


class TestMonteCarlo:
    def test_b1_witness_agrees(self, ce1_setup):
        _, P, d, dec, w, U = ce1_setup
        r = mc_b1_check(P, d, w, U, 20_000, seed=0, dec=dec)
        assert not r.divergent and r.ess > 0.1 * r.n and r.agrees

    def test_b1_divergence_flag(self, ce1_setup):
        # [DERIVED] α_1 = 1 keeps the equality but breaks the Gamma shape of D_44
        _, P, d, dec, w, U = ce1_setup
        bad = dict(w, alpha_1=Fraction(1))
        r = mc_b1_check(P, d, bad, U, 20_000, seed=0, dec=dec)
        assert r.divergent and not r.agrees

    def test_b1_two_proposals_agree(self, ce1_setup):
        # [DERIVED] the integral does not depend on the proposal used to estimate it
        _, P, d, dec, w, U = ce1_setup
        from lmwishart import verification as V

        a = mc_b1_check(P, d, w, U, 20_000, seed=1, dec=dec)
        old = V._proposal_params.__defaults__
        try:
            V._proposal_params.__defaults__ = (0.7, 0.8)
            b = mc_b1_check(P, d, w, U, 20_000, seed=2, dec=dec)
        finally:
            V._proposal_params.__defaults__ = old
        assert abs(a.log_estimate - b.log_estimate) < 3 * np.hypot(a.rel_se, b.rel_se)

    def test_complete_graph_classical_constant(self):
        # [DERIVED] ∫ exp(-tr ΩU)|Ω|^{(m-p-1)/2} dΩ = |U|^{-m/2} Γ_p(m/2); here m = -2α
        p = 3
        K = UndirectedGraph.complete(p)
        P = derive_order(K, [set(range(1, p + 1))])
        U = random_spd(p, np.random.default_rng(1))
        for a in (Fraction(-3), Fraction(-9, 4)):
            m = -2 * float(a)
            ref = -m / 2 * np.linalg.slogdet(U)[1] + multigammaln(m / 2, p)
            r = mc_b1_check(P, transitive_dag(K), {"alpha_1": a}, U, 20_000, seed=3)
            assert r.reference == pytest.approx(ref, rel=1e-12)
            assert abs(r.log_estimate - ref) < 3 * r.rel_se

    def test_is_constant_random_dags(self):
        rng = np.random.default_rng(4)
        from lmwishart.graph_core import random_chordal_graph

        for k in range(3):
            g = random_chordal_graph(4, rng)
            d = random_perfect_dag(g, rng)
            eta = {j: len(d.parents(j)) + 2 + float(rng.uniform(1, 4)) for j in d.vertices}
            pr = DagWishartParams(U=random_spd(4, rng), eta=eta)
            res = is_log_z_dag_wishart(d, pr, n=20_000, seed=k)
            assert abs(res.log_estimate - z_dag_wishart(d, pr)) < 3 * res.rel_se


class TestB2:
    def test_closed_form_witness(self, ce1_setup):
        g, P, d, dec, w, _ = ce1_setup
        out = b2_numeric_check(P, d, w, random_scales(g, 5, np.random.default_rng(5)), dec=dec)
        assert out["method"] == "closed_form" and out["passed"] and out["spread"] < 1e-9

    def test_off_constraint_fails(self, ce1_setup):
        # [DERIVED] β_4 shifted: the U_44 exponent is nonzero, so the MC ratio moves with U
        g, P, d, dec, w, _ = ce1_setup
        bad = dict(w, beta_4=w["beta_4"] - 1)
        out = b2_numeric_check(P, d, bad, random_scales(g, 3, np.random.default_rng(6)), dec=dec, n_samples=5_000)
        assert out["method"] == "monte_carlo" and not out["passed"]

    def test_homogeneous_3path(self):
        g = UndirectedGraph.path(3)
        P = derive_order(g, [{1, 2}, {2, 3}])
        d = transitive_dag(g)
        pt = {"alpha_1": Fraction(-2), "alpha_2": Fraction(-1), "beta_2": Fraction(-1)}
        out = b2_numeric_check(P, d, pt, random_scales(g, 4, np.random.default_rng(7)))
        assert out["passed"] and out["residual_exponents"] == []

    def test_needs_three(self, ce1_setup):
        g, P, d, _, w, _ = ce1_setup
        with pytest.raises(ValueError):
            b2_numeric_check(P, d, w, random_scales(g, 2, np.random.default_rng(0)))


class TestReports:
    def test_counterexample1(self, ce1):
        g, P = ce1
        rep = verify_counterexample_II(g, P, samples=20_000, run_mc=False)
        assert rep.r_D == 2 and rep.conjectured_dimension == 5
        assert rep.achieved_dimension == 6 and rep.union_dimension == 5
        assert rep.witness_outside_all_orders and rep.refuted
        assert rep.to_json()["status"] == "refuted"

    def test_counterexample2_both_parts(self, ce2):
        g, P, d = ce2
        r2 = verify_counterexample_II(g, P, dag=d, samples=20_000)
        assert r2.r_D == 2 and r2.achieved_dimension >= 7 > 6 and r2.refuted
        r1 = verify_counterexample_I(g, P, dag=d)
        assert r1.achieved_dimension >= 8 and r1.refuted and r1.mc is None

    def test_counterexample1_typeI(self, ce1):
        g, P = ce1
        assert verify_counterexample_I(g, P).refuted

    def test_path4_consistent(self, path4):
        for P in enumerate_perfect_orders(path4):
            rep = verify_counterexample_II(path4, P, samples=20_000, run_mc=False)
            assert not rep.refuted and rep.r_D <= 1

    def test_complete_inapplicable(self):
        K = UndirectedGraph.complete(3)
        rep = verify_counterexample_II(K, derive_order(K, [{1, 2, 3}]))
        assert rep.status == "inapplicable" and not rep.refuted

    def test_not_decomposable(self, path4):
        c4 = UndirectedGraph(range(1, 5), [(1, 2), (2, 3), (3, 4), (4, 1)])
        P = derive_order(path4, [{1, 2}, {2, 3}, {3, 4}])
        with pytest.raises(GraphError):
            verify_counterexample_II(c4, P)

    def test_deterministic(self, ce1):
        g, P = ce1
        a = verify_counterexample_II(g, P, seed=3, samples=5_000).to_json()
        b = verify_counterexample_II(g, P, seed=3, samples=5_000).to_json()
        assert a == b

    def test_select_dag_maximizes_r_D(self, ce1):
        _, P = ce1
        assert ancestral_separators(P, select_dag(P))[1] == 2


class TestHelpers:
    def test_transport_roundtrip(self, path4):
        orders = enumerate_perfect_orders(path4)
        B = set_BP(orders[0])
        w = witness_point(B)
        for Q in orders:
            back = transport_point(transport_point(w, orders[0], Q), Q, orders[0])
            assert back == w

    def test_witness_inside_own_order(self, path4):
        P = enumerate_perfect_orders(path4)[0]
        assert not witness_outside_all(path4, P, witness_point(set_BP(P)))

    def test_union_dimension_path4(self, path4):
        # [PAPER] each B_P of the 4-path has dimension r + 1 = 4
        assert union_dimension(path4) == 4
        assert union_dimension(path4, TYPE_I) == 4


class TestSweeps:
    def test_jacobian_sweep_small(self):
        assert jacobian_sweep(40, max_vertices=6, seed=1) <= 1e-10

    def test_theorem_sweep_p5(self):
        pairs, pts, bad = theorem_sweep(5, points=5, seed=2)
        assert pairs == 109 and pts == 545 and bad == []

    def test_search_p4_empty(self):
        assert search_counterexamples(4, samples=2_000) == []

    def test_search_p6_finds_counterexample1(self):
        # [PAPER] the 6-vertex graph of the first counterexample shows up
        from conftest import CE1_EDGES

        from lmwishart.graph_core import canonical_key

        key = canonical_key(UndirectedGraph(range(1, 7), CE1_EDGES))
        reps = search_counterexamples(6)
        assert reps and all(r["refuted"] for r in reps)
        assert any(canonical_key(UndirectedGraph(r["graph"]["vertices"], r["graph"]["edges"])) == key for r in reps)

    def test_search_cap(self):
        with pytest.raises(GraphError):
            search_tasks(9)

    def test_search_skips_homogeneous(self):
        keys = [k for k, _ in search_tasks(4)]
        # the 4-path is the only non-homogeneous connected chordal graph on 4 vertices
        assert len(keys) == len(enumerate_perfect_orders(UndirectedGraph.path(4)))
