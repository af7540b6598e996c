"""Command-line front end.

Exit codes: 0 consistent / success, 10 conjecture refuted, 1 a sweep check
failed, 64 malformed input or usage, 65 parameters outside their domain,
70 any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .distributions import DagWishartParams, OutOfDomain, sample_dag_wishart
from .graph_core import (
    Dag,
    GraphError,
    UndirectedGraph,
    ancestral_separators,
    derive_order,
    enumerate_perfect_orders,
    hasse_tree,
    induced_dag_variants,
    is_decomposable,
    is_homogeneous,
    is_perfect_dag,
    maximal_cliques,
)
from .matrix_core import NotPositiveDefinite
from .symbolic import TYPE_I, TYPE_II, Infeasible, decompose_markov_ratio, feasible_dimension, integrability_set_from_decomposition
from .verification import (
    DEFAULT_SAMPLES,
    SCHEMA_VERSION,
    jacobian_sweep,
    search_counterexamples,
    search_tasks,
    select_dag,
    verify_counterexample_I,
    verify_counterexample_II,
)

EXIT_OK, EXIT_FAILED, EXIT_REFUTED = 0, 1, 10
EXIT_USAGE, EXIT_DOMAIN, EXIT_SOFTWARE = 64, 65, 70


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


@dataclass
class RunConfig:
    command: str
    input: str | None
    seed: int
    samples: int
    max_vertices: int
    output: str | None
    convention: str
    pretty: bool
    order_index: int | None = None
    order: str | None = None
    params: str | None = None
    n: int = 1

    def validate(self):
        if self.samples <= 0:
            raise InputError("--samples must be positive")
        if not 1 <= self.max_vertices <= 8:
            raise InputError("--max-vertices must be between 1 and 8")
        if self.n <= 0:
            raise InputError("--n must be positive")
        if self.order_index is not None and self.order_index < 0:
            raise InputError("--order-index must be non-negative")


# ------------------------------------------------------------------ input

def _read_json(path):
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None


def _int_list(x, what):
    if not isinstance(x, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in x):
        raise InputError(f"{what} must be a list of integers")
    return x


def parse_graph(obj):
    if not isinstance(obj, dict) or "edges" not in obj:
        raise InputError("graph JSON needs an 'edges' list")
    edges = obj["edges"]
    if not isinstance(edges, list):
        raise InputError("'edges' must be a list")
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2):
            raise InputError(f"edge #{i} must be a pair")
        _int_list(e, f"edge #{i}")
    verts = obj.get("vertices")
    if verts is None:
        verts = sorted({v for e in edges for v in e})
    verts = _int_list(verts, "'vertices'")
    if sorted(verts) != list(range(1, len(verts) + 1)):
        raise InputError("vertices must be labelled 1..p")
    try:
        g = UndirectedGraph(verts, edges)
    except (GraphError, ValueError) as e:
        raise InputError(str(e)) from None
    if not is_decomposable(g)[0]:
        raise InputError("graph is not decomposable")
    return g


def _pick_order(g, obj, cfg: RunConfig, convention):
    if cfg.order is not None:
        try:
            seq = json.loads(cfg.order)
        except json.JSONDecodeError as e:
            raise InputError(f"--order: {e.msg}") from None
    elif cfg.order_index is None and isinstance(obj, dict) and "order" in obj:
        seq = obj["order"]
    else:
        seq = None
    if seq is not None:
        if not isinstance(seq, list):
            raise InputError("order must be a list of cliques")
        try:
            return derive_order(g, [set(_int_list(C, "clique")) for C in seq])
        except GraphError as e:
            raise InputError(str(e)) from None
    orders = enumerate_perfect_orders(g)
    if cfg.order_index is not None:
        if cfg.order_index >= len(orders):
            raise InputError(f"--order-index out of range (graph has {len(orders)} perfect orders)")
        return orders[cfg.order_index]
    # default: first order reaching the largest r_D
    best, best_r = orders[0], -1
    for P in orders:
        r = max(ancestral_separators(P, d)[1] for d in induced_dag_variants(P))
        if r > best_r:
            best, best_r = P, r
    return best


def _convention(text):
    t = text.lower()
    if t in ("typeii", "ii", "2"):
        return TYPE_II
    if t in ("typei", "i", "1"):
        return TYPE_I
    raise argparse.ArgumentTypeError(f"unknown convention {text!r} (use typeI or typeII)")


# ------------------------------------------------------------------ output

_SCHEMA = None


def _validator():
    global _SCHEMA
    if _SCHEMA is None:
        text = resources.files("lmwishart").joinpath("schemas/report.schema.json").read_text(encoding="utf-8")
        _SCHEMA = jsonschema.Draft202012Validator(json.loads(text))
    return _SCHEMA


def validate_report(obj):
    _validator().validate(obj)
    return obj


def _dump(obj):
    return json.dumps(obj, sort_keys=True)


class _Out:
    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8") if path else sys.stdout

    def write(self, text):
        self.fh.write(text if text.endswith("\n") else text + "\n")

    def close(self):
        if self.fh is not sys.stdout:
            self.fh.close()


def _emit(out, obj, pretty_text=None, pretty=False):
    validate_report(obj)
    out.write(pretty_text if pretty and pretty_text is not None else _dump(obj))


# ------------------------------------------------------------------ commands

def cmd_analyze(cfg: RunConfig, out):
    obj = _read_json(cfg.input)
    g = parse_graph(obj)
    orders = []
    for i, P in enumerate(enumerate_perfect_orders(g)):
        scored = [(ancestral_separators(P, d)[1], d) for d in induced_dag_variants(P)]
        r, d = max(scored, key=lambda x: x[0])
        anc = ancestral_separators(P, d)[0]
        orders.append({"index": i, "order": P.to_json(), "dag": d.to_json(), "r_D": r, "ancestral_separators": [sorted(S) for S in anc]})
    homog = is_homogeneous(g)
    tree = None
    if homog:
        t = hasse_tree(g)
        tree = [{"class": sorted(u), "parent": sorted(t.parent[u]) if t.parent[u] else None} for u in t.nodes]
    cl = sorted(sorted(C) for C in maximal_cliques(g))
    rep = {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis",
        "graph": g.to_json(),
        "p": g.p,
        "r": len(cl),
        "homogeneous": homog,
        "cliques": cl,
        "hasse_tree": tree,
        "orders": orders,
        "max_r_D": max(o["r_D"] for o in orders),
    }
    lines = [f"p = {g.p}, r = {len(cl)}, homogeneous = {homog}, max r_D = {rep['max_r_D']}"]
    for o in orders:
        lines.append(f"  [{o['index']}] {o['order']['cliques']}  r_D = {o['r_D']}")
    _emit(out, rep, "\n".join(lines), cfg.pretty)
    return EXIT_OK


def cmd_decompose(cfg: RunConfig, out):
    obj = _read_json(cfg.input)
    g = parse_graph(obj)
    P = _pick_order(g, obj, cfg, cfg.convention)
    d = select_dag(P, cfg.convention) if P.r > 1 else induced_dag_variants(P)[0]
    dec = decompose_markov_ratio(P, d, cfg.convention)
    cs = integrability_set_from_decomposition(dec)
    dim = feasible_dimension(cs)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "kind": "decomposition",
        "graph": g.to_json(),
        "order": P.to_json(),
        "dag": d.to_json(),
        "decomposition": dec.to_json(),
        "constraint_set": cs.to_json(),
        "dimension": None if dim is Infeasible else dim,
    }
    num = d.numbering
    lines = [f"order {P.to_json()['cliques']}  ({cfg.convention})"]
    for v in sorted(d.vertices, key=lambda u: num[u]):
        lines.append(f"  D_{num[v]}{num[v]}  (vertex {v}):  {dec.exponent(v)}")
    for t in dec.residuals:
        lines.append(f"  {t.label()}:  {t.exponent}")
    lines.append("integrability set:")
    lines.append(cs.pretty())
    lines.append(f"dimension: {rep['dimension']}")
    _emit(out, rep, "\n".join(lines), cfg.pretty)
    return EXIT_OK


def _pretty_report(rep):
    lines = [
        f"{rep['convention']}: {rep['status']}",
        f"order {rep['order']['cliques']}, r_D = {rep['r_D']}",
        f"dimension achieved {rep['achieved_dimension']} vs conjectured {rep['conjectured_dimension']}",
    ]
    for c in rep["constraint_set"]:
        lines.append(f"  {c['text']}")
    if rep["witness"]:
        lines.append("witness: " + ", ".join(f"{k}={v}" for k, v in rep["witness"].items()))
    if rep["mc_b1"]:
        m = rep["mc_b1"]
        lines.append(f"MC: log estimate {m['log_estimate']} (rel. s.e. {m['rel_se']}), reference {m['reference']}, ESS {m['ess']}")
    if rep["b2"]:
        lines.append(f"B2 ({rep['b2']['method']}): spread {rep['b2']['spread']}, passed {rep['b2']['passed']}")
    return "\n".join(lines)


def cmd_verify(cfg: RunConfig, out):
    obj = _read_json(cfg.input)
    g = parse_graph(obj)
    P = _pick_order(g, obj, cfg, cfg.convention)
    if cfg.convention == TYPE_II:
        rep = verify_counterexample_II(g, P, seed=cfg.seed, samples=cfg.samples)
    else:
        rep = verify_counterexample_I(g, P, seed=cfg.seed, samples=cfg.samples)
    js = rep.to_json()
    _emit(out, js, _pretty_report(js), cfg.pretty)
    return EXIT_REFUTED if rep.refuted else EXIT_OK


def cmd_search(cfg: RunConfig, out):
    n_tasks = len(search_tasks(cfg.max_vertices, cfg.convention, cfg.seed, cfg.samples))
    reps = search_counterexamples(cfg.max_vertices, cfg.convention, cfg.seed, cfg.samples)
    for r in reps:
        _emit(out, r, _pretty_report(r), cfg.pretty)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "search_summary",
        "max_vertices": cfg.max_vertices,
        "convention": cfg.convention,
        "seed": cfg.seed,
        "tasks": n_tasks,
        "refutations": len(reps),
    }
    _emit(out, summary, f"{len(reps)} refuting (graph, order) pairs out of {n_tasks}", cfg.pretty)
    return EXIT_REFUTED if reps else EXIT_OK


def _parse_dag(obj):
    if not isinstance(obj, dict) or "arcs" not in obj:
        raise InputError("DAG JSON needs an 'arcs' list")
    arcs = obj["arcs"]
    if not isinstance(arcs, list) or not all(isinstance(a, list) and len(a) == 2 for a in arcs):
        raise InputError("'arcs' must be a list of [parent, child] pairs")
    for a in arcs:
        _int_list(a, "arc")
    verts = obj.get("vertices") or sorted({v for a in arcs for v in a})
    verts = _int_list(verts, "'vertices'")
    if sorted(verts) != list(range(1, len(verts) + 1)):
        raise InputError("vertices must be labelled 1..p")
    try:
        d = Dag(verts, arcs)
    except GraphError as e:
        raise InputError(str(e)) from None
    if not is_perfect_dag(d):
        raise InputError("DAG has an immorality (parents not all adjacent)")
    return d


def _parse_matrix(x, p):
    if isinstance(x, dict):
        if int(x.get("p", p)) != p:
            raise InputError("scale matrix has the wrong size")
        a = np.asarray(x["data"], dtype=float).reshape(p, p)
    else:
        a = np.asarray(x, dtype=float)
    if a.shape != (p, p):
        raise InputError(f"scale matrix must be {p}x{p}")
    return np.triu(a) + np.triu(a, 1).T


def cmd_sample(cfg: RunConfig, out):
    obj = _read_json(cfg.input)
    d = _parse_dag(obj.get("dag", obj) if isinstance(obj, dict) else obj)
    pobj = _read_json(cfg.params) if cfg.params else obj.get("params") if isinstance(obj, dict) else None
    if not isinstance(pobj, dict) or "U" not in pobj or not ("eta" in pobj or "gamma" in pobj):
        raise InputError("parameters need 'U' and one of 'eta' or 'gamma'")
    try:
        U = _parse_matrix(pobj["U"], d.p)
        key = "eta" if "eta" in pobj else "gamma"
        vec = [float(v) for v in pobj[key]]
    except (TypeError, ValueError, KeyError) as e:
        raise InputError(f"bad parameters: {e}") from None
    if len(vec) != d.p:
        raise InputError(f"'{key}' must have {d.p} entries")
    vals = {j: vec[j - 1] for j in d.vertices}
    params = DagWishartParams(U=U, **{key: vals})
    draws = sample_dag_wishart(d, params, n=cfg.n, seed=cfg.seed)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "kind": "samples",
        "dag": d.to_json(),
        "n": cfg.n,
        "seed": cfg.seed,
        "samples": [m.tolist() for m in draws],
    }
    _emit(out, rep, "\n\n".join(np.array2string(m, precision=6) for m in draws), cfg.pretty)
    return EXIT_OK


def cmd_jacobian(cfg: RunConfig, out):
    worst = jacobian_sweep(cfg.n, cfg.max_vertices, cfg.seed)
    rep = {
        "schema_version": SCHEMA_VERSION,
        "kind": "jacobian_check",
        "instances": cfg.n,
        "max_vertices": cfg.max_vertices,
        "seed": cfg.seed,
        "max_relative_gap": worst,
        "passed": bool(worst <= 1e-10),
    }
    _emit(out, rep, f"{cfg.n} instances, worst relative gap {worst:.3e}", cfg.pretty)
    return EXIT_OK if rep["passed"] else EXIT_FAILED


COMMANDS = {
    "analyze": cmd_analyze,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "search": cmd_search,
    "sample": cmd_sample,
    "jacobian-check": cmd_jacobian,
}


def build_parser():
    p = _Parser(prog="lmwishart", description="Markov-ratio decompositions and counterexample checks for Type I/II Wisharts.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("input", help="JSON input file, or - for stdin")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        sp.add_argument("--max-vertices", type=int, default=8)
        sp.add_argument("--convention", type=_convention, default=TYPE_II)
        sp.add_argument("--pretty", action="store_true", help="human-readable output instead of JSON")
        sp.add_argument("-o", "--output")
        return sp

    common(sub.add_parser("analyze", help="cliques, perfect orders, homogeneity, induced DAGs"))
    for name in ("decompose", "verify"):
        sp = common(sub.add_parser(name))
        sp.add_argument("--order-index", type=int)
        sp.add_argument("--order", help="explicit clique order as JSON, e.g. '[[1,2],[2,3]]'")
    sp = common(sub.add_parser("search"), graph=False)
    sp.set_defaults(samples=20_000, max_vertices=6)
    sp = common(sub.add_parser("sample"))
    sp.add_argument("--params", help="parameter JSON (default: 'params' inside the input)")
    sp.add_argument("--n", type=int, default=1)
    sp = common(sub.add_parser("jacobian-check"), graph=False)
    sp.add_argument("--n", type=int, default=200)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        input=getattr(args, "input", None),
        seed=args.seed,
        samples=args.samples,
        max_vertices=args.max_vertices,
        output=args.output,
        convention=args.convention,
        pretty=args.pretty,
        order_index=getattr(args, "order_index", None),
        order=getattr(args, "order", None),
        params=getattr(args, "params", None),
        n=getattr(args, "n", 1),
    )
    out = None
    try:
        cfg.validate()
        out = _Out(cfg.output)
        return COMMANDS[cfg.command](cfg, out)
    except InputError as e:
        sys.stderr.write(f"lmwishart: input error: {e}\n")
        return EXIT_USAGE
    except (OutOfDomain, NotPositiveDefinite) as e:
        sys.stderr.write(f"lmwishart: {e}\n")
        return EXIT_DOMAIN
    except Exception as e:  # report anything else as an internal failure
        sys.stderr.write(f"lmwishart: error: {type(e).__name__}: {e}\n")
        return EXIT_SOFTWARE
    finally:
        if out is not None:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
