"""Graph structure for decomposable graphs and their perfect DAG versions.

Vertices are positive integers.  Undirected graphs never store loops.  A
:class:`Dag` keeps the vertex labels of the undirected graph it orients and
carries a separate *numbering*, a bijection onto ``1..p`` such that every
arc ``u -> v`` has ``numbering[u] > numbering[v]`` (parents get the larger
numbers).  ``Dag.relabeled()`` produces the same DAG written in those numbers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx


class GraphError(ValueError):
    pass


class NotDecomposable(GraphError):
    pass


class NotPerfectOrder(GraphError):
    pass


class NotHomogeneous(GraphError):
    pass


class NotPerfectDag(GraphError):
    pass


class CombinatorialLimit(GraphError):
    pass


def _pair(u, v):
    return frozenset((u, v))


@dataclass(frozen=True)
class UndirectedGraph:
    vertices: tuple
    edges: frozenset

    def __init__(self, vertices: Iterable[int], edges: Iterable = ()):
        verts = tuple(sorted(set(int(v) for v in vertices)))
        es = set()
        vs = set(verts)
        for e in edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if u not in vs or v not in vs:
                raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
            es.add(_pair(u, v))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", frozenset(es))
        adj = {v: set() for v in verts}
        for e in es:
            u, v = tuple(e)
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})

    @property
    def p(self):
        return len(self.vertices)

    def neighbors(self, v):
        return self._adj[v]

    def closed_neighborhood(self, v):
        return self._adj[v] | {v}

    def adjacent(self, u, v):
        return v in self._adj[u]

    def is_complete_set(self, vs):
        vs = list(vs)
        return all(self.adjacent(a, b) for a, b in itertools.combinations(vs, 2))

    def subgraph(self, vs):
        vs = set(vs)
        return UndirectedGraph(vs, [tuple(e) for e in self.edges if e <= vs])

    def sorted_edges(self):
        return sorted(tuple(sorted(e)) for e in self.edges)

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.sorted_edges())
        return g

    @classmethod
    def from_networkx(cls, g, relabel=True):
        nodes = sorted(g.nodes())
        if relabel:
            m = {v: i + 1 for i, v in enumerate(nodes)}
            return cls(m.values(), [(m[a], m[b]) for a, b in g.edges()])
        return cls(nodes, g.edges())

    @classmethod
    def from_cliques(cls, cliques):
        verts = set().union(*map(set, cliques))
        es = [e for c in cliques for e in itertools.combinations(sorted(c), 2)]
        return cls(verts, es)

    @classmethod
    def path(cls, n):
        return cls(range(1, n + 1), [(i, i + 1) for i in range(1, n)])

    @classmethod
    def complete(cls, n):
        return cls(range(1, n + 1), itertools.combinations(range(1, n + 1), 2))

    def to_json(self):
        return {"vertices": list(self.vertices), "edges": [list(e) for e in self.sorted_edges()]}

    def is_connected(self):
        if not self.vertices:
            return True
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for w in self._adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.p


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on the vertices of an undirected graph.

    Parameters
    ----------
    vertices : iterable of int
    arcs : iterable of (parent, child) pairs
    numbering : dict, optional
        Parent-compatible bijection ``vertex -> 1..p``.  When omitted, one is
        the labels themselves when they are ``1..p`` and parent-ordered,
        otherwise derived from a topological order (ties by ascending label).
    """

    vertices: tuple
    arcs: frozenset
    numbering: dict = field(compare=False)

    def __init__(self, vertices, arcs, numbering=None):
        verts = tuple(sorted(set(int(v) for v in vertices)))
        arcset = frozenset((int(a), int(b)) for a, b in arcs)
        vs = set(verts)
        for a, b in arcset:
            if a == b or a not in vs or b not in vs:
                raise GraphError(f"bad arc ({a}, {b})")
            if (b, a) in arcset:
                raise GraphError(f"arc ({a}, {b}) given in both directions")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "arcs", arcset)
        pa = {v: set() for v in verts}
        ch = {v: set() for v in verts}
        for a, b in arcset:
            pa[b].add(a)
            ch[a].add(b)
        object.__setattr__(self, "_pa", {v: frozenset(s) for v, s in pa.items()})
        object.__setattr__(self, "_ch", {v: frozenset(s) for v, s in ch.items()})
        topo = self._topological_order()
        if numbering is None:
            if verts == tuple(range(1, len(verts) + 1)) and all(a > b for a, b in arcset):
                numbering = {v: v for v in verts}
            else:
                # sources first in topo order, so they receive the largest numbers
                numbering = {v: len(verts) - i for i, v in enumerate(topo)}
        numbering = {int(k): int(x) for k, x in numbering.items()}
        if sorted(numbering) != list(verts) or sorted(numbering.values()) != list(range(1, len(verts) + 1)):
            raise GraphError("numbering must be a bijection onto 1..p")
        for a, b in arcset:
            if numbering[a] <= numbering[b]:
                raise GraphError(f"numbering is not parent-compatible on arc ({a}, {b})")
        object.__setattr__(self, "numbering", numbering)

    def _topological_order(self):
        indeg = {v: len(self._pa[v]) for v in self.vertices}
        ready = sorted(v for v in self.vertices if indeg[v] == 0)
        out = []
        while ready:
            v = ready.pop(0)
            out.append(v)
            for w in sorted(self._ch[v]):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
            ready.sort()
        if len(out) != len(self.vertices):
            raise GraphError("graph has a directed cycle")
        return out

    @property
    def p(self):
        return len(self.vertices)

    @property
    def parent_ordered(self):
        """True when the raw labels already satisfy ``u -> v  =>  u > v``."""
        return all(a > b for a, b in self.arcs)

    def parents(self, v):
        return self._pa[v]

    def children(self, v):
        return self._ch[v]

    def family(self, v):
        return self._pa[v] | {v}

    def ancestors(self, v):
        out, stack = set(), list(self._pa[v])
        while stack:
            u = stack.pop()
            if u not in out:
                out.add(u)
                stack.extend(self._pa[u])
        return out

    def nondescendants(self, v):
        desc, stack = set(), list(self._ch[v])
        while stack:
            u = stack.pop()
            if u not in desc:
                desc.add(u)
                stack.extend(self._ch[u])
        return set(self.vertices) - desc - {v}

    def ancestral_closure(self, vs):
        out = set(vs)
        for v in vs:
            out |= self.ancestors(v)
        return out

    def skeleton(self):
        return UndirectedGraph(self.vertices, self.arcs)

    def relabeled(self):
        m = self.numbering
        return Dag(m.values(), [(m[a], m[b]) for a, b in self.arcs], {m[v]: m[v] for v in self.vertices})

    def sorted_arcs(self):
        return sorted(self.arcs, key=lambda a: (-self.numbering[a[0]], -self.numbering[a[1]]))

    def to_json(self):
        return {
            "vertices": list(self.vertices),
            "arcs": [list(a) for a in sorted(self.arcs)],
            "numbering": {str(v): self.numbering[v] for v in self.vertices},
        }


@dataclass(frozen=True)
class PerfectOrder:
    cliques: tuple
    separators: tuple
    histories: tuple
    residuals: tuple

    @property
    def r(self):
        return len(self.cliques)

    @property
    def c(self):
        return tuple(len(C) for C in self.cliques)

    @property
    def s(self):
        """Separator sizes, indexed so that ``s[j]`` belongs to ``S_{j+2}``."""
        return tuple(len(S) for S in self.separators)

    def separator(self, j):
        """S_j with the 1-based clique index used in formulas (j >= 2)."""
        return self.separators[j - 2]

    def distinct_separators(self):
        out = []
        for S in self.separators:
            if S not in out:
                out.append(S)
        return out

    def J(self, S):
        """Indices j (1-based, j >= 2) with S_j == S."""
        return [j for j in range(2, self.r + 1) if self.separators[j - 2] == S]

    def nu(self, S):
        return len(self.J(S))

    def vertices(self):
        return tuple(sorted(self.histories[-1]))

    def to_json(self):
        return {
            "cliques": [sorted(C) for C in self.cliques],
            "separators": [sorted(S) for S in self.separators],
        }


# ---------------------------------------------------------------- chordality

def maximum_cardinality_search(g: UndirectedGraph):
    """Visit order of maximum cardinality search, ties by smallest label."""
    weight = {v: 0 for v in g.vertices}
    order = []
    left = set(g.vertices)
    while left:
        v = min(left, key=lambda u: (-weight[u], u))
        order.append(v)
        left.remove(v)
        for w in g.neighbors(v):
            if w in left:
                weight[w] += 1
    return order


def is_decomposable(g: UndirectedGraph):
    """Return ``(True, peo)`` for a chordal graph, else ``(False, None)``.

    ``peo`` is a perfect elimination ordering: each vertex's neighbours that
    come later in the list form a clique.
    """
    peo = list(reversed(maximum_cardinality_search(g)))
    pos = {v: i for i, v in enumerate(peo)}
    for v in peo:
        later = [w for w in g.neighbors(v) if pos[w] > pos[v]]
        if not later:
            continue
        # zero fill-in: the earliest later neighbour must see all the others
        u = min(later, key=pos.get)
        for w in later:
            if w != u and not g.adjacent(u, w):
                return False, None
    return True, peo


def maximal_cliques(g: UndirectedGraph):
    ok, peo = is_decomposable(g)
    if not ok:
        raise NotDecomposable("graph is not decomposable")
    pos = {v: i for i, v in enumerate(peo)}
    cands = [frozenset({v} | {w for w in g.neighbors(v) if pos[w] > pos[v]}) for v in peo]
    cands = set(cands)
    out = [C for C in cands if not any(C < D for D in cands)]
    return sorted(out, key=lambda C: sorted(C))


def derive_order(g: UndirectedGraph, clique_sequence) -> PerfectOrder:
    cliques = tuple(frozenset(C) for C in clique_sequence)
    if sorted(map(sorted, cliques)) != sorted(map(sorted, maximal_cliques(g))):
        raise NotPerfectOrder("sequence is not a permutation of the maximal cliques")
    return _build_order(cliques)


def _build_order(cliques):
    H = set(cliques[0])
    hist, seps, res = [frozenset(H)], [], [cliques[0]]
    for j in range(1, len(cliques)):
        C = cliques[j]
        S = frozenset(H & C)
        if not any(S <= cliques[k] for k in range(j)):
            raise NotPerfectOrder(f"S_{j + 1} = {sorted(S)} is not inside an earlier clique")
        seps.append(S)
        res.append(frozenset(C - H))
        H |= C
        hist.append(frozenset(H))
    return PerfectOrder(cliques, tuple(seps), tuple(hist), tuple(res))


def enumerate_perfect_orders(g: UndirectedGraph, max_cliques=8):
    cliques = maximal_cliques(g)
    if len(cliques) > max_cliques:
        raise CombinatorialLimit(f"{len(cliques)} cliques exceeds the cap of {max_cliques}")
    out = []

    def extend(seq, H):
        if len(seq) == len(cliques):
            out.append(_build_order(tuple(seq)))
            return
        for C in cliques:
            if C in seq:
                continue
            S = H & C
            if seq and not any(S <= D for D in seq):
                continue
            extend(seq + [C], H | C)

    extend([], frozenset())
    return out


# --------------------------------------------------------------- homogeneity

def is_homogeneous(g: UndirectedGraph):
    ok, _ = is_decomposable(g)
    if not ok:
        return False
    for e in g.edges:
        u, v = tuple(e)
        Nu, Nv = g.closed_neighborhood(u), g.closed_neighborhood(v)
        if not (Nu <= Nv or Nv <= Nu):
            return False
    return True


@dataclass(frozen=True)
class HasseTree:
    """Rooted tree of closed-neighbourhood classes of a homogeneous graph.

    Roots are the classes with the largest closed neighbourhood.  Going down
    the tree the closed neighbourhoods shrink.  The union of the classes on
    the path from a root to a leaf is a clique; the same union ending at a
    node with at least two children is a separator.
    """

    nodes: tuple
    parent: dict
    children: dict

    def n(self, t):
        return len(t)

    def is_leaf(self, t):
        return not self.children[t]

    def roots(self):
        return [t for t in self.nodes if self.parent[t] is None]

    def path_to_root(self, t):
        out = [t]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out

    def closure(self, t):
        """Union of ``t`` and all its ancestors."""
        return frozenset().union(*self.path_to_root(t))

    def subtree(self, t):
        out, stack = [], [t]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        return out

    def class_of(self, v):
        for t in self.nodes:
            if v in t:
                return t
        raise KeyError(v)

    def clique_nodes(self):
        return [t for t in self.nodes if self.is_leaf(t)]

    def separator_nodes(self):
        return [t for t in self.nodes if len(self.children[t]) >= 2]


def hasse_tree(g: UndirectedGraph) -> HasseTree:
    if not is_homogeneous(g):
        raise NotHomogeneous("graph is not homogeneous")
    classes = {}
    for v in g.vertices:
        classes.setdefault(g.closed_neighborhood(v), set()).add(v)
    nodes = [frozenset(s) for s in classes.values()]
    nodes.sort(key=lambda t: min(t))
    nb = {t: g.closed_neighborhood(min(t)) for t in nodes}
    parent = {}
    for t in nodes:
        above = [u for u in nodes if u != t and nb[t] < nb[u]]
        # the covering class is the one with the smallest neighbourhood above
        parent[t] = min(above, key=lambda u: (len(nb[u]), min(u))) if above else None
    children = {t: [] for t in nodes}
    for t in nodes:
        if parent[t] is not None:
            children[parent[t]].append(t)
    return HasseTree(tuple(nodes), parent, {t: tuple(c) for t, c in children.items()})


def transitive_dag(g: UndirectedGraph) -> Dag:
    """DAG version oriented along a linear extension of neighbourhood inclusion.

    Vertices with larger closed neighbourhoods get larger numbers; ties go by
    ascending label.  For homogeneous graphs the result is perfect and
    transitive.
    """
    order = sorted(g.vertices, key=lambda v: (len(g.closed_neighborhood(v)), v))
    num = {v: i + 1 for i, v in enumerate(order)}
    return _orient(g, num)


# ---------------------------------------------------------------- DAG tools

def _orient(g: UndirectedGraph, numbering) -> Dag:
    arcs = []
    for e in g.edges:
        u, v = tuple(e)
        arcs.append((u, v) if numbering[u] > numbering[v] else (v, u))
    return Dag(g.vertices, arcs, numbering)


def is_perfect_dag(d: Dag):
    return all(
        (b in d.parents(a)) or (a in d.parents(b))
        for v in d.vertices
        for a, b in itertools.combinations(sorted(d.parents(v)), 2)
    )


def transitive(d: Dag):
    for a, b in d.arcs:
        for c in d.children(b):
            if c not in d.children(a):
                return False
    return True


def is_ancestral(d: Dag, A):
    A = set(A)
    return all(d.parents(v) <= A for v in A)


def dag_induced_by_order(order: PerfectOrder, s2_ancestral=True) -> Dag:
    """Perfect DAG version in which every history H_1..H_{r-1} is ancestral.

    Vertices are numbered from the top down: first S_2 (when
    ``s2_ancestral``), then the rest of C_1, then R_2, R_3, ... in turn.
    Inside a block ties go by ascending label.  Edges point from larger to
    smaller numbers.
    """
    seq = [v for b in _order_blocks(order, s2_ancestral) for v in b]
    p = len(seq)
    num = {v: p - i for i, v in enumerate(seq)}
    g = UndirectedGraph.from_cliques(order.cliques)
    return _orient(g, num)


def _order_blocks(order: PerfectOrder, s2_ancestral=True):
    C1 = order.cliques[0]
    if s2_ancestral and order.r > 1:
        S2 = order.separators[0]
        blocks = [sorted(S2), sorted(C1 - S2)]
    else:
        blocks = [sorted(C1)]
    return [b for b in blocks + [sorted(R) for R in order.residuals[1:]] if b]


def induced_dag_variants(order: PerfectOrder, s2_ancestral=True, cap=5040):
    """Distinct induced DAG versions obtained by reordering inside blocks.

    The first entry is :func:`dag_induced_by_order`.  Enumeration stops once
    ``cap`` block permutations have been tried.
    """
    blocks = _order_blocks(order, s2_ancestral)
    g = UndirectedGraph.from_cliques(order.cliques)
    p = g.p
    seen, out = set(), []
    perms = itertools.product(*[itertools.permutations(b) for b in blocks])
    for n, combo in enumerate(perms):
        if n >= cap:
            break
        seq = [v for b in combo for v in b]
        d = _orient(g, {v: p - i for i, v in enumerate(seq)})
        if d.arcs not in seen:
            seen.add(d.arcs)
            out.append(d)
    return out


def best_induced_dag(order: PerfectOrder, s2_ancestral=True, cap=5040):
    """Induced DAG version with the most ancestral separators (first wins ties)."""
    best, best_r = None, -1
    for d in induced_dag_variants(order, s2_ancestral, cap):
        r = ancestral_separators(order, d)[1]
        if r > best_r:
            best, best_r = d, r
    return best


def is_induced_by(d: Dag, order: PerfectOrder):
    return all(is_ancestral(d, H) for H in order.histories[:-1])


def perfect_order_from_dag(d: Dag, reproduce=True) -> PerfectOrder:
    """A perfect order of the cliques of the skeleton inducing ``d``.

    With ``reproduce`` the search prefers an order whose own
    :func:`dag_induced_by_order` gives back exactly the arcs of ``d``; the
    first inducing order found is the fallback.
    """
    if not is_perfect_dag(d):
        raise NotPerfectDag("DAG has an immorality")
    g = d.skeleton()
    cliques = maximal_cliques(g)
    # try cliques with the highest numbers first (descending number tuples,
    # compared lexicographically)
    cliques.sort(key=lambda C: sorted((d.numbering[v] for v in C), reverse=True), reverse=True)
    found = []
    exact = []

    def extend(seq, H):
        if exact or (found and not reproduce):
            return
        if len(seq) == len(cliques):
            found.append(tuple(seq))
            if reproduce and dag_induced_by_order(_build_order(tuple(seq))).arcs == d.arcs:
                exact.append(tuple(seq))
            return
        for C in cliques:
            if C in seq:
                continue
            S = H & C
            if seq and not any(S <= D for D in seq):
                continue
            nH = H | C
            if len(seq) + 1 < len(cliques) and not is_ancestral(d, nH):
                continue
            extend(seq + [C], nH)

    extend([], frozenset())
    if not found:
        raise NotPerfectDag("no perfect order induces this DAG")
    return _build_order(exact[0] if exact else found[0])


def ancestral_separators(order: PerfectOrder, d: Dag):
    anc = [S for S in order.distinct_separators() if is_ancestral(d, S)]
    return anc, len(anc)


def random_perfect_dag(g: UndirectedGraph, rng) -> Dag:
    """Perfect DAG version from maximum cardinality search with random ties."""
    weight = {v: 0 for v in g.vertices}
    left = set(g.vertices)
    visit = []
    while left:
        best = max(weight[v] for v in left)
        cands = sorted(v for v in left if weight[v] == best)
        v = cands[int(rng.integers(len(cands)))]
        visit.append(v)
        left.remove(v)
        for w in g.neighbors(v):
            if w in left:
                weight[w] += 1
    p = len(visit)
    # first visited is eliminated last, so it is a source: biggest number
    num = {v: p - i for i, v in enumerate(visit)}
    return _orient(g, num)


def random_chordal_graph(p, rng, density=0.5) -> UndirectedGraph:
    """Connected chordal graph grown by attaching vertices to clique subsets."""
    verts = [1]
    edges = []
    cliques = [frozenset({1})]
    for v in range(2, p + 1):
        C = sorted(cliques[int(rng.integers(len(cliques)))])
        k = 1 + int(rng.binomial(len(C) - 1, density)) if len(C) > 1 else 1
        nbrs = sorted(rng.choice(C, size=k, replace=False).tolist())
        verts.append(v)
        edges += [(u, v) for u in nbrs]
        cliques.append(frozenset(nbrs) | {v})
    return UndirectedGraph(verts, edges)


def connected_chordal_graphs(max_vertices, min_vertices=1):
    """All connected chordal graphs up to isomorphism, grouped by order.

    Up to 7 vertices the networkx graph atlas is filtered; above that graphs
    are grown by adding a simplicial vertex and deduplicated by isomorphism.
    """
    out = []
    by_n = {}
    for G in nx.graph_atlas_g():
        n = G.number_of_nodes()
        if n == 0 or n > min(max_vertices, 7):
            continue
        if nx.is_connected(G) and nx.is_chordal(G):
            by_n.setdefault(n, []).append(G)
    n = 7
    while n < max_vertices:
        nxt = []
        buckets = {}
        for G in by_n.get(n, []):
            for C in nx.chordal_graph_cliques(G):
                C = sorted(C)
                for k in range(1, len(C) + 1):
                    for sub in itertools.combinations(C, k):
                        H = G.copy()
                        H.add_node(n)
                        H.add_edges_from((u, n) for u in sub)
                        key = nx.weisfeiler_lehman_graph_hash(H, iterations=3)
                        bucket = buckets.setdefault(key, [])
                        if not any(nx.is_isomorphic(H, K) for K in bucket):
                            bucket.append(H)
                            nxt.append(H)
        n += 1
        by_n[n] = nxt
    for n in sorted(by_n):
        if min_vertices <= n <= max_vertices:
            out += [UndirectedGraph.from_networkx(G) for G in by_n[n]]
    return out


def canonical_key(g: UndirectedGraph):
    """Canonical form by exhaustive relabeling; fine up to about 8 vertices."""
    vs = list(g.vertices)
    best = None
    degs = {v: len(g.neighbors(v)) for v in vs}
    # refine: only permutations that sort vertices by degree are tried
    groups = itertools.groupby(sorted(vs, key=lambda v: degs[v]), key=lambda v: degs[v])
    parts = [list(gr) for _, gr in groups]
    for combo in itertools.product(*[itertools.permutations(pt) for pt in parts]):
        seq = [v for part in combo for v in part]
        pos = {v: i for i, v in enumerate(seq)}
        key = tuple(sorted(tuple(sorted((pos[a], pos[b]))) for a, b in map(tuple, g.edges)))
        if best is None or key < best:
            best = key
    return (len(vs), best)
