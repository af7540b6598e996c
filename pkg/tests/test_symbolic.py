from fractions import Fraction

import numpy as np
import pytest

from lmwishart.graph_core import (
    Dag,
    UndirectedGraph,
    ancestral_separators,
    connected_chordal_graphs,
    dag_induced_by_order,
    derive_order,
    enumerate_perfect_orders,
    hasse_tree,
    is_homogeneous,
    random_chordal_graph,
    transitive_dag,
)
from lmwishart.matrix_core import markov_ratio_numeric, random_sigma_in_pd_g
from lmwishart.symbolic import (
    TYPE_I,
    TYPE_II,
    AffineForm,
    DagNotInducedByOrder,
    Infeasible,
    LinearConstraintSet,
    decompose_markov_ratio,
    feasible_dimension,
    gindikin_membership,
    hasse_rho,
    homogeneous_B,
    integrability_set_from_decomposition,
    is_subset,
    residual_count_expected,
    same_solution_set,
    sample_points,
    set_AP,
    set_BP,
    strict_feasible_point,
    witness_point,
)

F = AffineForm.parse


def cs_from(r, eqs=(), gts=()):
    cs = LinearConstraintSet.for_order(r)
    for e in eqs:
        cs.add_eq(F(e))
    for g in gts:
        cs.add_gt(F(g))
    return cs


PATH4_CLIQUES = [{1, 2}, {2, 3}, {3, 4}]
PATH4_SEPS = {2: {2}, 3: {3}}
PATH4_B1 = (["alpha_3 - beta_3 + 1/2"], ["-alpha_1", "-alpha_2", "-alpha_3", "-alpha_1 - alpha_2 + beta_2 - 1"])
PATH4_B2 = (["alpha_1 - beta_2 + 1/2"], ["-alpha_1", "-alpha_2", "-alpha_3", "-alpha_2 - alpha_3 + beta_3 - 1"])


def paper_set(g, P, eqs, gts):
    """Constraint set written with clique/separator labels, moved to P's positions."""
    ren = {f"alpha_{i + 1}": f"alpha_{P.cliques.index(frozenset(C)) + 1}" for i, C in enumerate(PATH4_CLIQUES)}
    ren.update({f"beta_{j}": f"beta_{P.separators.index(frozenset(S)) + 2}" for j, S in PATH4_SEPS.items()})
    move = lambda f: AffineForm({ren[k]: v for k, v in f.coeffs.items()}, f.const)
    cs = LinearConstraintSet.for_order(P.r)
    for e in eqs:
        cs.add_eq(move(F(e)))
    for x in gts:
        cs.add_gt(move(F(x)))
    return cs


# graph vertex -> DAG label used in the displayed first-counterexample computation
CE1_PAPER_LABELS = {6: 1, 1: 2, 3: 3, 4: 4, 5: 5, 2: 6}


def by_label(dec):
    num = dec.dag.numbering
    return {num[v]: str(dec.exponent(v)) for v in dec.dag.vertices}


class TestAffineForm:
    def test_parse_and_print(self):
        f = F("alpha_1 + alpha_2 - beta_2 + 5/2")
        assert f.coeffs == {"alpha_1": 1, "alpha_2": 1, "beta_2": -1}
        assert f.const == Fraction(5, 2)
        assert str(f) == "alpha_1 + alpha_2 - beta_2 + 5/2"
        assert F(str(f)) == f

    def test_canonical(self):
        assert (F("alpha_1") - F("alpha_1")).is_zero()
        assert F("2*alpha_1 - 1/3") * 3 == F("6*alpha_1 - 1")
        assert hash(F("alpha_1 + 1")) == hash(F("1 + alpha_1"))

    def test_evaluate_exact(self):
        f = F("alpha_1 - 1/2*beta_2")
        assert f.evaluate({"alpha_1": Fraction(1, 3), "beta_2": Fraction(2, 3)}) == 0

    def test_json(self):
        f = F("-alpha_2 + 3*beta_3 - 7/4")
        assert AffineForm.from_json(f.to_json()) == f

    def test_bad_parse(self):
        with pytest.raises(ValueError):
            F("alpha_1 + * 2")


class TestDecomposition:
    def test_path4_chain(self):
        # [PAPER] D_11^{α3+3/2} D_22^{α1+3/2} D_33^{α2+3/2} D_44^{α2+3/2}, Σ residuals α1−β2+1/2, α3−β3+1/2
        g = UndirectedGraph.path(4)
        P = derive_order(g, [{2, 3}, {3, 4}, {1, 2}])
        d = Dag(range(1, 5), [(4, 3), (3, 2), (2, 1)])
        dec = decompose_markov_ratio(P, d, TYPE_II)
        assert by_label(dec) == {1: "alpha_3 + 3/2", 2: "alpha_1 + 3/2", 3: "alpha_2 + 3/2", 4: "alpha_2 + 3/2"}
        assert {str(t.exponent) for t in dec.residuals} == {"alpha_1 - beta_2 + 1/2", "alpha_3 - beta_3 + 1/2"}

    def test_path4_induced_order(self, path4):
        # [PAPER] D_11^{α1+3/2} D_22^{α3+3/2} D_33^{α2+3/2} D_44^{α1+α2−β2+2} on B_P1,
        # where the one leftover factor has exponent zero
        P = derive_order(path4, [{1, 2}, {2, 3}, {3, 4}])
        d = dag_induced_by_order(P)
        dec = decompose_markov_ratio(P, d, TYPE_II)
        [t] = dec.residuals
        assert F("alpha_3 - beta_3 + 1/2") in set_BP(P).equalities and t.exponent == F("alpha_3 - beta_3 + 1/2")
        assert sorted(by_label(dec).values()) == sorted(
            ["alpha_1 + 3/2", "alpha_3 + 3/2", "alpha_2 + 3/2", "alpha_1 + alpha_2 - beta_2 + 2"])

    def test_counterexample1(self, ce1):
        # [PAPER] the rewritten Markov ratio of the first counterexample.  Vertices 3 and 4
        # share the parents {2,5}, so the labelling there puts the separator vertex at 4;
        # any such tie-break is a valid DAG numbering.
        _, P = ce1
        d = dag_induced_by_order(P)
        dec = decompose_markov_ratio(P, d, TYPE_II)
        lab = CE1_PAPER_LABELS
        assert all(lab[u] > lab[v] for u, v in d.arcs)
        assert {lab[v]: str(dec.exponent(v)) for v in d.vertices} == {
            1: "alpha_4 + 3/2",
            2: "alpha_3 + 3/2",
            3: "alpha_1 + 2",
            4: "alpha_2 + 2",
            5: "alpha_1 + alpha_2 - beta_2 + 5/2",
            6: "alpha_1 + alpha_2 + alpha_3 - beta_2 - beta_3 + 3",
        }
        [t] = dec.residuals
        assert [lab[v] for v in t.vertices] == [4] and not t.given
        assert str(t.exponent) == "alpha_4 - beta_4 + 1/2"

    def test_counterexample2_typeI(self, ce2):
        # [PAPER] Type I exponent table of the second counterexample
        _, P, d = ce2
        dec = decompose_markov_ratio(P, d, TYPE_I)
        assert by_label(dec) == {
            1: "alpha_5", 2: "alpha_4", 3: "alpha_2", 4: "alpha_1",
            5: "alpha_4 + alpha_5 - beta_5", 6: "alpha_3",
            7: "alpha_1 + alpha_2 - beta_2", 8: "alpha_1 + alpha_2 + alpha_3 - beta_2 - beta_3",
        }
        [t] = dec.residuals
        assert t.vertices == {6} and str(t.exponent) == "alpha_4 + alpha_5 - beta_4 - beta_5"

    def test_counterexample2_grouped_vs_refined(self, ce2):
        _, P, d = ce2
        grouped = decompose_markov_ratio(P, d, TYPE_II, mode="grouped")
        refined = decompose_markov_ratio(P, d, TYPE_II, mode="refined")
        assert len(grouped.residuals) == 2 and len(refined.residuals) == 1
        assert feasible_dimension(integrability_set_from_decomposition(grouped)) == 7
        assert feasible_dimension(integrability_set_from_decomposition(refined)) == 8

    def test_complete_graph(self):
        g = UndirectedGraph.complete(4)
        P = derive_order(g, [{1, 2, 3, 4}])
        dec = decompose_markov_ratio(P, transitive_dag(g), TYPE_II)
        assert not dec.residuals
        assert set(by_label(dec).values()) == {"alpha_1 + 5/2"}

    def test_grouped_requires_induced(self, path4):
        P = derive_order(path4, [{1, 2}, {2, 3}, {3, 4}])
        with pytest.raises(DagNotInducedByOrder):
            decompose_markov_ratio(P, Dag(range(1, 5), [(4, 3), (3, 2), (2, 1)]), TYPE_II, mode="grouped")

    def test_numeric_agreement(self):
        # [DERIVED] symbolic decomposition vs direct Markov ratio, 100 random tuples
        rng = np.random.default_rng(0)
        n = 0
        while n < 100:
            g = random_chordal_graph(int(rng.integers(2, 8)), rng)
            if not g.is_connected():
                continue
            orders = enumerate_perfect_orders(g)
            P = orders[int(rng.integers(len(orders)))]
            d = dag_induced_by_order(P)
            sig = random_sigma_in_pd_g(g, rng)
            pt = {f"alpha_{j}": float(rng.normal()) for j in range(1, P.r + 1)}
            pt.update({f"beta_{j}": float(rng.normal()) for j in range(2, P.r + 1)})
            for conv, off in ((TYPE_II, 1), (TYPE_I, 0)):
                for mode in ("refined", "grouped"):
                    dec = decompose_markov_ratio(P, d, conv, mode)
                    a = [pt[f"alpha_{j + 1}"] + off * (len(C) + 1) / 2 for j, C in enumerate(P.cliques)]
                    b = [pt[f"beta_{j + 2}"] + off * (len(S) + 1) / 2 for j, S in enumerate(P.separators)]
                    ref = markov_ratio_numeric(P, sig, a, b)
                    assert dec.evaluate_log(pt, sig) == pytest.approx(ref, rel=1e-9, abs=1e-9)
            n += 1

    def test_grouped_residuals_match_non_ancestral(self):
        # [DERIVED] residual count equals the number of non-ancestral distinct separators
        for g in connected_chordal_graphs(6):
            for P in enumerate_perfect_orders(g):
                d = dag_induced_by_order(P)
                dec = decompose_markov_ratio(P, d, TYPE_I, mode="grouped")
                assert len(dec.residuals) <= residual_count_expected(P, d)


class TestSets:
    def test_path4_BP(self, path4):
        # [PAPER] both displayed sets; α_i and β_j there are tied to cliques C_i and separators S_j
        for P in enumerate_perfect_orders(path4):
            ref = PATH4_B1 if P.separators[0] == {2} else PATH4_B2
            assert same_solution_set(set_BP(P), paper_set(path4, P, *ref))
        P1 = derive_order(path4, [{1, 2}, {2, 3}, {3, 4}])
        assert feasible_dimension(set_BP(P1)) == 4

    def test_literal_threshold_differs(self, path4):
        P1 = derive_order(path4, [{1, 2}, {2, 3}, {3, 4}])
        assert is_subset(set_BP(P1, literal_c=True), set_BP(P1))
        assert not is_subset(set_BP(P1), set_BP(P1, literal_c=True))

    def test_path3_BP_dimension(self):
        for P in enumerate_perfect_orders(UndirectedGraph.path(3)):
            assert feasible_dimension(set_BP(P)) == 3

    def test_AP_feasible(self, ce1):
        g, _ = ce1
        for P in enumerate_perfect_orders(g):
            assert feasible_dimension(set_AP(P)) == P.r + 1

    def test_counterexample1_set(self, ce1):
        # [PAPER] the convergence set of the first counterexample
        _, P = ce1
        cs = integrability_set_from_decomposition(decompose_markov_ratio(P, dag_induced_by_order(P), TYPE_II))
        ref = cs_from(4, ["alpha_4 - beta_4 + 1/2"],
                      ["-alpha_1", "-alpha_2", "-alpha_3", "-alpha_4",
                       "-alpha_1 - alpha_2 + beta_2 - 1", "-alpha_1 - alpha_2 - alpha_3 + beta_2 + beta_3 - 2"])
        assert same_solution_set(cs, ref)
        assert feasible_dimension(cs) == 6

    def test_dimension_infeasible(self):
        assert feasible_dimension(cs_from(1, ["alpha_1", "alpha_1 - 1"])) is Infeasible
        assert feasible_dimension(cs_from(1, [], ["alpha_1", "-alpha_1"])) is Infeasible
        assert strict_feasible_point(cs_from(1, [], ["alpha_1", "-alpha_1"])) is None

    def test_dimension_lower_bound(self):
        # [DERIVED] dimension >= r + r_D on every small graph
        for g in connected_chordal_graphs(5):
            for P in enumerate_perfect_orders(g):
                d = dag_induced_by_order(P)
                dim = feasible_dimension(integrability_set_from_decomposition(decompose_markov_ratio(P, d, TYPE_II)))
                assert dim >= P.r + ancestral_separators(P, d)[1]

    def test_witness_and_samples_are_exact(self, ce1):
        _, P = ce1
        cs = integrability_set_from_decomposition(decompose_markov_ratio(P, dag_induced_by_order(P), TYPE_II))
        w = witness_point(cs)
        assert cs.contains(w) and all(isinstance(v, Fraction) for v in w.values())
        assert all(abs(v) <= 10 for v in w.values())
        pts = sample_points(cs, 15, np.random.default_rng(0))
        assert len(pts) == 15 and all(cs.contains(p) for p in pts)
        assert len({tuple(p.values()) for p in pts}) > 1

    def test_sample_points_infeasible(self):
        assert sample_points(cs_from(1, ["alpha_1", "alpha_1 - 1"]), 3, np.random.default_rng(0)) == []

    def test_json_roundtrip(self, ce1):
        _, P = ce1
        cs = set_BP(P)
        back = LinearConstraintSet.from_json(cs.names, cs.to_json())
        assert same_solution_set(cs, back)


class TestHomogeneous:
    def test_path3_rho(self):
        g = UndirectedGraph.path(3)
        P = derive_order(g, [{1, 2}, {2, 3}])
        t = hasse_tree(g)
        rho = {min(u): str(f) for u, f in hasse_rho(t, P).items()}
        assert rho == {1: "alpha_1", 3: "alpha_2", 2: "alpha_1 + alpha_2 - beta_2"}
        assert all(len(u) == 1 for u in t.nodes)

    def test_path3_equivalence(self):
        # printed threshold is a misprint; the derived one is β2−α1−α2 > 1
        g = UndirectedGraph.path(3)
        P = derive_order(g, [{1, 2}, {2, 3}])
        B = homogeneous_B(hasse_tree(g), P)
        dag_set = integrability_set_from_decomposition(decompose_markov_ratio(P, transitive_dag(g), TYPE_II))
        assert same_solution_set(B, dag_set)
        assert same_solution_set(B, cs_from(2, [], ["-alpha_1", "-alpha_2", "beta_2 - alpha_1 - alpha_2 - 1"]))

    def test_two_triangles_equivalence(self):
        # [PAPER] α1<0, α2<0, α1+α2−β2<−3/2
        g = UndirectedGraph.from_cliques([{1, 3, 4}, {2, 3, 4}])
        P = derive_order(g, [{1, 3, 4}, {2, 3, 4}])
        B = homogeneous_B(hasse_tree(g), P)
        dag_set = integrability_set_from_decomposition(decompose_markov_ratio(P, transitive_dag(g), TYPE_II))
        ref = cs_from(2, [], ["-alpha_1", "-alpha_2", "-alpha_1 - alpha_2 + beta_2 - 3/2"])
        assert same_solution_set(B, dag_set) and same_solution_set(B, ref)

    def test_all_homogeneous_small(self):
        # [DERIVED] exhaustive: homogeneous_B equals the transitive-DAG set, p <= 5
        for g in connected_chordal_graphs(5):
            if not is_homogeneous(g):
                continue
            d = transitive_dag(g)
            t = hasse_tree(g)
            for P in enumerate_perfect_orders(g):
                dec = decompose_markov_ratio(P, d, TYPE_II)
                assert not dec.residuals
                assert same_solution_set(homogeneous_B(t, P), integrability_set_from_decomposition(dec))

    def test_complete_graph_gindikin(self):
        g = UndirectedGraph.complete(3)
        P = derive_order(g, [{1, 2, 3}])
        B = homogeneous_B(hasse_tree(g), P)
        assert len(B.inequalities) == 1
        # −α1 > 1: equivalently λ = −α1 lies above the continuous Gindikin threshold (p−1)/2
        assert same_solution_set(B, cs_from(1, [], ["-alpha_1 - 1"]))


class TestGindikin:
    def test_examples(self):
        assert gindikin_membership(4, Fraction(3, 2))
        assert not gindikin_membership(3, 0.7)
        assert gindikin_membership(1, Fraction(1, 100))
        assert gindikin_membership(3, Fraction(1, 2)) and gindikin_membership(3, 1)
        assert not gindikin_membership(3, 0)
        with pytest.raises(ValueError):
            gindikin_membership(0, 1)
