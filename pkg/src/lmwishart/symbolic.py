"""Exact exponent algebra over the shape parameters.

Parameters are ``alpha_1..alpha_r`` and ``beta_2..beta_r``; every exponent
that appears in a Markov-ratio rewrite is an :class:`AffineForm` over them
with :class:`fractions.Fraction` coefficients.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy
from sympy import QQ
from sympy.polys.matrices import DomainMatrix
from scipy.optimize import linprog as float_linprog
import cdd

from .graph_core import (
    Dag,
    GraphError,
    HasseTree,
    PerfectOrder,
    is_ancestral,
    is_induced_by,
)

TYPE_I = "typeI"
TYPE_II = "typeII"


class DagNotInducedByOrder(GraphError):
    pass


def alpha(j):
    return f"alpha_{j}"


def beta(j):
    return f"beta_{j}"


def _sym_key(name):
    kind, idx = name.split("_")
    return (0 if kind == "alpha" else 1, int(idx))


def variables(r):
    return [alpha(j) for j in range(1, r + 1)] + [beta(j) for j in range(2, r + 1)]


class AffineForm:
    """``sum coeffs[s] * s + const`` with exact rational coefficients."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=0):
        cs = {}
        for k, v in (coeffs or {}).items():
            v = Fraction(v)
            if v:
                cs[k] = v
        self.coeffs = cs
        self.const = Fraction(const)

    @classmethod
    def sym(cls, name):
        return cls({name: 1})

    @classmethod
    def constant(cls, c):
        return cls({}, c)

    def _coerce(self, other):
        return other if isinstance(other, AffineForm) else AffineForm.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        cs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            cs[k] = cs.get(k, 0) + v
        return AffineForm(cs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return AffineForm({k: -v for k, v in self.coeffs.items()}, -self.const)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, k):
        k = Fraction(k)
        return AffineForm({s: v * k for s, v in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = self._coerce(other)
        return self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.const))

    def is_zero(self):
        return not self.coeffs and self.const == 0

    def is_constant(self):
        return not self.coeffs

    def evaluate(self, point):
        """Exact when ``point`` maps symbols to Fractions; float otherwise."""
        return sum((v * point[k] for k, v in self.coeffs.items()), self.const)

    def vector(self, names):
        return [self.coeffs.get(n, Fraction(0)) for n in names]

    def __repr__(self):
        return f"AffineForm({self})"

    def __str__(self):
        parts = []
        for k in sorted(self.coeffs, key=_sym_key):
            v = self.coeffs[k]
            mag = abs(v)
            sign = "-" if v < 0 else "+"
            term = k if mag == 1 else f"{mag}*{k}"
            parts.append((sign, term))
        if self.const or not parts:
            parts.append(("-" if self.const < 0 else "+", str(abs(self.const))))
        head_sign, head = parts[0]
        out = ("-" if head_sign == "-" else "") + head
        for sign, term in parts[1:]:
            out += f" {sign} {term}"
        return out

    def to_json(self):
        return {"coeffs": {k: str(v) for k, v in sorted(self.coeffs.items(), key=lambda kv: _sym_key(kv[0]))}, "const": str(self.const)}

    @classmethod
    def from_json(cls, obj):
        return cls({k: Fraction(v) for k, v in obj["coeffs"].items()}, Fraction(obj["const"]))

    _TOKEN = re.compile(r"\s*([+-]?)\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?((?:alpha|beta)_\d+)?")

    @classmethod
    def parse(cls, text):
        """Parse strings such as ``"alpha_1 + alpha_2 - beta_2 + 5/2"``."""
        text = text.replace(" ", "")
        pos, out = 0, cls()
        while pos < len(text):
            m = cls._TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"cannot parse affine form near {text[pos:]!r}")
            sign = -1 if m.group(1) == "-" else 1
            num = Fraction(m.group(2)) if m.group(2) else None
            if m.group(3):
                out = out + cls({m.group(3): sign * (num if num is not None else 1)})
            elif num is not None:
                out = out + sign * num
            else:
                raise ValueError(f"dangling sign in {text!r}")
            pos = m.end()
        return out


def _key_str(vs):
    return "{" + ",".join(str(v) for v in sorted(vs)) + "}"


@dataclass(frozen=True)
class ResidualTerm:
    """det Σ_{vertices | given} raised to ``exponent``."""

    vertices: frozenset
    given: frozenset
    exponent: AffineForm

    def label(self):
        if self.given:
            return f"Sigma[{_key_str(self.vertices)}|{_key_str(self.given)}]"
        return f"Sigma[{_key_str(self.vertices)}]"

    def to_json(self):
        return {"vertices": sorted(self.vertices), "given": sorted(self.given), "exponent": self.exponent.to_json(), "text": str(self.exponent)}


@dataclass
class MarkovRatioDecomposition:
    order: PerfectOrder
    dag: Dag
    convention: str
    mode: str
    exponents: dict  # vertex -> AffineForm on D_vv
    residuals: list = field(default_factory=list)

    def exponent(self, v):
        return self.exponents.get(v, AffineForm())

    def evaluate_log(self, point, sigma):
        """log of Π D^γ · Π residual^e at a numeric parameter point."""
        from .matrix_core import cond_var, log_cond_det

        out = 0.0
        for v in self.dag.vertices:
            e = float(self.exponent(v).evaluate(point))
            if e:
                out += e * np.log(cond_var(sigma, v, self.dag.parents(v)))
        for t in self.residuals:
            out += float(t.exponent.evaluate(point)) * log_cond_det(sigma, t.vertices, t.given)
        return out

    def to_json(self):
        num = self.dag.numbering
        return {
            "convention": self.convention,
            "mode": self.mode,
            "exponents": [
                {"vertex": v, "dag_label": num[v], "exponent": self.exponent(v).to_json(), "text": str(self.exponent(v))}
                for v in sorted(self.dag.vertices, key=lambda u: num[u])
            ],
            "residuals": [t.to_json() for t in self.residuals],
        }


def _input_exponents(order: PerfectOrder, convention):
    if convention == TYPE_II:
        a = [AffineForm.sym(alpha(j + 1)) + Fraction(len(C) + 1, 2) for j, C in enumerate(order.cliques)]
        b = [AffineForm.sym(beta(j + 2)) + Fraction(len(S) + 1, 2) for j, S in enumerate(order.separators)]
    elif convention == TYPE_I:
        a = [AffineForm.sym(alpha(j + 1)) for j in range(order.r)]
        b = [AffineForm.sym(beta(j + 2)) for j in range(order.r - 1)]
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return a, b


def decompose_markov_ratio(order: PerfectOrder, d: Dag, convention=TYPE_II, mode="refined"):
    """Rewrite the Markov ratio as a product of D_vv powers and residual minors.

    ``mode="refined"`` splits every clique and separator determinant into
    one-dimensional conditional variances along the DAG numbering, so any
    perfect DAG version works and equal residual factors merge.
    ``mode="grouped"`` keeps each non-ancestral separator determinant whole
    and needs ``d`` to be induced by ``order``.

    For Type II the exponents fed in are ``alpha_j + (c_j+1)/2`` and
    ``beta_j + (s_j+1)/2``; for Type I they are ``alpha_j`` and ``beta_j``
    and the Jacobian factor is left out.
    """
    a, b = _input_exponents(order, convention)
    num = d.numbering
    exps: dict = {}
    res: dict = {}

    def add(table, key, e):
        table[key] = table.get(key, AffineForm()) + e

    if mode == "refined":
        terms = list(zip(order.cliques, a)) + [(S, -e) for S, e in zip(order.separators, b)]
        for K, e in terms:
            for v in K:
                higher = frozenset(u for u in K if num[u] > num[v])
                if d.parents(v) <= K:
                    add(exps, v, e)
                else:
                    add(res, (frozenset({v}), higher), e)
    elif mode == "grouped":
        if not is_induced_by(d, order):
            raise DagNotInducedByOrder("DAG is not induced by the order")
        for v in order.cliques[0]:
            add(exps, v, a[0])
        seps: dict = {}
        for j in range(1, order.r):
            for v in order.residuals[j]:
                add(exps, v, a[j])
            add(seps, order.separators[j - 1], a[j] - b[j - 1])
        for S, e in seps.items():
            if is_ancestral(d, S):
                for v in S:
                    add(exps, v, e)
            else:
                add(res, (S, frozenset()), e)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    residuals = [
        ResidualTerm(vs, given, e)
        for (vs, given), e in sorted(res.items(), key=lambda kv: (sorted(num[v] for v in kv[0][0]), sorted(kv[0][1])))
        if not e.is_zero()
    ]
    exps = {v: e for v, e in exps.items() if not e.is_zero()}
    return MarkovRatioDecomposition(order, d, convention, mode, exps, residuals)


# ------------------------------------------------------------ constraint sets

@dataclass
class LinearConstraintSet:
    """Equalities ``f = 0`` and strict inequalities ``g > 0`` in ``names``."""

    names: list
    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)

    @classmethod
    def for_order(cls, r):
        return cls(variables(r))

    @property
    def n(self):
        return len(self.names)

    def add_eq(self, f):
        if not any(f == g for g in self.equalities):
            self.equalities.append(f)

    def add_gt(self, f):
        if not any(f == g for g in self.inequalities):
            self.inequalities.append(f)

    def add_lt(self, f, bound=0):
        self.add_gt(Fraction(bound) - f)

    def contains(self, point):
        return all(f.evaluate(point) == 0 for f in self.equalities) and all(g.evaluate(point) > 0 for g in self.inequalities)

    def point(self, values):
        return {n: Fraction(v) for n, v in zip(self.names, values)}

    def _mat(self, forms):
        A = [[f.coeffs.get(n, Fraction(0)) for n in self.names] for f in forms]
        c = [f.const for f in forms]
        return A, c

    def eq_rank(self):
        if not self.equalities:
            return 0
        A, _ = self._mat(self.equalities)
        return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in A]).rank()

    def to_json(self):
        return [dict(f.to_json(), rel="eq", text=f"{f} = 0") for f in self.equalities] + [
            dict(g.to_json(), rel="gt", text=f"{g} > 0") for g in self.inequalities
        ]

    @classmethod
    def from_json(cls, names, items):
        cs = cls(list(names))
        for it in items:
            f = AffineForm.from_json(it)
            (cs.add_eq if it["rel"] == "eq" else cs.add_gt)(f)
        return cs

    def pretty(self):
        lines = [f"  {f} = 0" for f in self.equalities] + [f"  {g} > 0" for g in self.inequalities]
        return "\n".join(lines)


class _Infeasible:
    def __repr__(self):
        return "Infeasible"

    def to_json(self):
        return "infeasible"


Infeasible = _Infeasible()


def _R(x):
    x = Fraction(x)
    return sympy.Rational(x.numerator, x.denominator)


def _Q(x):
    return Fraction(int(x.numerator), int(x.denominator))


def _F(x):
    x = sympy.Rational(x)
    return Fraction(int(x.p), int(x.q))


class InfeasibleLPError(ValueError):
    pass


class UnboundedLPError(ValueError):
    pass


def _lp(c, A, b, A_eq, b_eq):
    """Exact minimisation of ``c.x`` over ``A x <= b, A_eq x = b_eq``, free x.

    Solved by cddlib in rational arithmetic; the optimum is re-checked
    against every constraint before it is returned.
    """
    k = len(c)
    rows = [[Fraction(bi)] + [-Fraction(v) for v in row] for row, bi in zip(A, b)]
    rows += [[Fraction(bi)] + [-Fraction(v) for v in row] for row, bi in zip(A_eq, b_eq)]
    if not rows:
        rows = [[Fraction(0)] * (k + 1)]
    mat = cdd.Matrix(rows, number_type="fraction")
    mat.lin_set = frozenset(range(len(A), len(A) + len(A_eq)))
    mat.obj_type = cdd.LPObjType.MIN
    mat.obj_func = [Fraction(0)] + [Fraction(v) for v in c]
    lp = cdd.LinProg(mat)
    lp.solve()
    st = lp.status
    if st in (cdd.LPStatusType.INCONSISTENT, cdd.LPStatusType.STRUC_INCONSISTENT):
        raise InfeasibleLPError("constraint set is empty")
    if st in (cdd.LPStatusType.DUAL_INCONSISTENT, cdd.LPStatusType.STRUC_DUAL_INCONSISTENT):
        raise UnboundedLPError("objective is unbounded")
    if st != cdd.LPStatusType.OPTIMAL:
        raise RuntimeError(f"exact LP ended with status {st}")
    x = [Fraction(v) for v in lp.primal_solution]
    dot = lambda row: sum((Fraction(a) * xi for a, xi in zip(row, x)), Fraction(0))
    if any(dot(row) > bi for row, bi in zip(A, b)) or any(dot(row) != bi for row, bi in zip(A_eq, b_eq)):
        raise RuntimeError("exact LP returned a point violating its constraints")
    return dot(c), x


def _slack_lp(cs: LinearConstraintSet, box=None, extra=None):
    """max t s.t. g_i(x) >= t, t <= 1, equalities; optional |x_k| <= box."""
    n = cs.n
    G, g0 = cs._mat(cs.inequalities)
    E, e0 = cs._mat(cs.equalities)
    A, b = [], []
    for row, c0 in zip(G, g0):
        A.append([-v for v in row] + [Fraction(1)])
        b.append(c0)
    A.append([Fraction(0)] * n + [Fraction(1)])
    b.append(Fraction(1))
    if box is not None:
        for k in range(n):
            for s in (1, -1):
                row = [Fraction(0)] * (n + 1)
                row[k] = Fraction(s)
                A.append(row)
                b.append(Fraction(box))
    if extra:
        for row, rhs in extra:
            A.append(row)
            b.append(rhs)
    A_eq = [row + [Fraction(0)] for row in E]
    b_eq = [-v for v in e0]
    return A, b, A_eq, b_eq


def strict_feasible_point(cs: LinearConstraintSet, box=None):
    """An exact point satisfying every constraint strictly, or ``None``."""
    n = cs.n
    A, b, A_eq, b_eq = _slack_lp(cs, box)
    c = [Fraction(0)] * n + [Fraction(-1)]
    try:
        val, x = _lp(c, A, b, A_eq, b_eq)
    except InfeasibleLPError:
        return None
    if -val <= 0:
        return None
    return cs.point(x[:n])


def feasible_dimension(cs: LinearConstraintSet):
    """Dimension of the solution set, or ``Infeasible``.

    A floating-point LP proposes an interior point which is then checked
    exactly; only when that fails does the exact simplex decide.
    """
    par = _Param(cs)
    if par.consistent and par.fast_base() is not None:
        return par.k
    if strict_feasible_point(cs) is None:
        return Infeasible
    return cs.n - cs.eq_rank()


def _min_over_closure(cs: LinearConstraintSet, f: AffineForm):
    G, g0 = cs._mat(cs.inequalities)
    E, e0 = cs._mat(cs.equalities)
    A = [[-v for v in row] for row in G]
    b = list(g0)
    try:
        val, _ = _lp(f.vector(cs.names), A, b, E, [-v for v in e0])
    except UnboundedLPError:
        return None
    return val + f.const


def _in_affine_span(cs: LinearConstraintSet, f: AffineForm):
    rows = [g.vector(cs.names) + [g.const] for g in cs.equalities]
    target = f.vector(cs.names) + [f.const]
    if not rows:
        return all(v == 0 for v in target)
    M = sympy.Matrix([[_R(v) for v in r] for r in rows])
    return M.rank() == M.col_join(sympy.Matrix([[_R(v) for v in target]])).rank()


def is_subset(P: LinearConstraintSet, Q: LinearConstraintSet):
    """Exact test of ``sol(P) ⊆ sol(Q)`` for strict/equality systems."""
    if strict_feasible_point(P) is None:
        return True
    for f in Q.equalities:
        if not _in_affine_span(P, f):
            return False
    for g in Q.inequalities:
        if _in_affine_span(P, g):
            # g is constant on aff(P)
            pt = strict_feasible_point(P)
            if g.evaluate(pt) <= 0:
                return False
            continue
        m = _min_over_closure(P, g)
        if m is None or m < 0:
            return False
    return True


def same_solution_set(P, Q):
    return is_subset(P, Q) and is_subset(Q, P)


def witness_point(cs: LinearConstraintSet, box=10):
    """Exact interior point away from the boundary.

    The analytic centre of the set cut by the box ``|x_k| <= box`` is found
    in floating point on the equality solution space, then rounded to small
    denominators and checked exactly.  An exact simplex construction is the
    fallback.
    """
    par = _Param(cs)
    if par.consistent:
        pt = par.fast_witness(box)
        if pt is not None:
            return pt
    return _exact_witness(cs, box)


def _exact_witness(cs: LinearConstraintSet, box=10):
    n = cs.n
    A, b, A_eq, b_eq = _slack_lp(cs, box)
    try:
        val, x = _lp([Fraction(0)] * n + [Fraction(-1)], A, b, A_eq, b_eq)
    except InfeasibleLPError:
        return None
    tstar = -val
    if tstar <= 0:
        return None
    A.append([Fraction(0)] * n + [Fraction(-1)])
    b.append(-tstar / 2)
    pts = []
    for k in range(n):
        for s in (1, -1):
            c = [Fraction(0)] * (n + 1)
            c[k] = Fraction(s)
            _, y = _lp(c, A, b, A_eq, b_eq)
            pts.append(y[:n])
    centre = [sum(p[k] for p in pts) / len(pts) for k in range(n)]
    pt = cs.point(centre)
    return pt if cs.contains(pt) else cs.point(x[:n])


# -------------------------------------------------------- sampling exact points

class _Param:
    """x = x0 + N z over the equality solution space, exact."""

    def __init__(self, cs: LinearConstraintSet):
        self.cs = cs
        self.consistent = True
        n = cs.n
        if cs.equalities:
            E, e0 = cs._mat(cs.equalities)
            aug = DomainMatrix([[QQ(v.numerator, v.denominator) for v in row] + [QQ(-c.numerator, c.denominator)]
                                for row, c in zip(E, e0)], (len(E), n + 1), QQ)
            R, piv = aug.rref()
            if n in piv:
                self.consistent = False
                self.x0, self.N, self.ineq, self.hz, self.h0 = [], [], [], [], []
                return
            rows = R.to_list()
            self.x0 = [Fraction(0)] * n
            for i, c in enumerate(piv):
                self.x0[c] = _Q(rows[i][n])
            free = [c for c in range(n) if c not in piv]
            self.N = []
            for f in free:
                col = [Fraction(0)] * n
                col[f] = Fraction(1)
                for i, c in enumerate(piv):
                    col[c] = -_Q(rows[i][f])
                self.N.append(col)
        else:
            self.x0 = [Fraction(0)] * n
            self.N = [[Fraction(int(i == k)) for i in range(n)] for k in range(n)]
        self.ineq = [(g.vector(cs.names), g.const) for g in cs.inequalities]
        # inequality g in z-coordinates: h0 + hz . z
        self.hz = [[sum(v * col[i] for i, v in enumerate(gv)) for col in self.N] for gv, _ in self.ineq]
        self.h0 = [sum(v * self.x0[i] for i, v in enumerate(gv)) + g0 for gv, g0 in self.ineq]

    @property
    def k(self):
        return len(self.N)

    def x(self, z):
        return [self.x0[i] + sum(z[m] * self.N[m][i] for m in range(self.k)) for i in range(self.cs.n)]

    def h(self, z):
        return [h0 + sum(a * b for a, b in zip(hz, z)) for h0, hz in zip(self.h0, self.hz)]

    def _float_rows(self):
        hz = np.array([[float(v) for v in row] for row in self.hz]).reshape(len(self.hz), self.k)
        h0 = np.array([float(v) for v in self.h0])
        return hz, h0

    def fast_base(self):
        """Interior z from a float LP, verified exactly; ``None`` if that fails."""
        k = self.k
        if not self.ineq:
            return [Fraction(0)] * k
        if k == 0:
            return [] if all(v > 0 for v in self.h0) else None
        hz, h0 = self._float_rows()
        A = np.hstack([-hz, np.ones((len(h0), 1))])
        c = np.zeros(k + 1)
        c[-1] = -1
        res = float_linprog(c, A_ub=A, b_ub=h0, bounds=[(-1e3, 1e3)] * k + [(None, 1.0)], method="highs")
        if res.status == 0 and res.x[-1] > 1e-9:
            z = [Fraction(v).limit_denominator(10**6) for v in res.x[:k]]
            if all(v > 0 for v in self.h(z)):
                return z
        return None

    def fast_witness(self, box):
        """Analytic centre of the set cut by the box |x_k| <= box, rounded."""
        k, n = self.k, self.cs.n
        if k == 0:
            pt = self.cs.point(self.x0)
            return pt if self.cs.contains(pt) else None
        hz, h0 = self._float_rows()
        N = np.array([[float(v) for v in col] for col in self.N]).T.reshape(n, k)
        x0 = np.array([float(v) for v in self.x0])
        G = np.vstack([hz, -N, N])  # every row must stay positive: g0 + G z > 0
        g0 = np.concatenate([h0, box - x0, box + x0])
        c = np.zeros(k + 1)
        c[-1] = -1
        res = float_linprog(c, A_ub=np.hstack([-G, np.ones((len(g0), 1))]), b_ub=g0,
                            bounds=[(None, None)] * k + [(None, 1.0)], method="highs")
        if res.status != 0 or res.x[-1] <= 1e-9:
            return None
        z = res.x[:k]
        # damped Newton on -sum log(slack)
        for _ in range(100):
            sl = g0 + G @ z
            gr = -(G / sl[:, None]).sum(axis=0)
            H = (G / sl[:, None]).T @ (G / sl[:, None])
            step = np.linalg.solve(H, -gr)
            dec = float(-gr @ step)
            t = 1.0
            f0 = -np.log(sl).sum()
            while True:
                zn = z + t * step
                sn = g0 + G @ zn
                if np.all(sn > 0) and -np.log(sn).sum() <= f0 - 0.25 * t * dec:
                    break
                t /= 2
                if t < 1e-12:
                    break
            z = zn if t >= 1e-12 else z
            if dec < 1e-14:
                break
        for den in (4, 12, 60, 420, 2520, 10**6):
            zq = [Fraction(float(v)).limit_denominator(den) for v in z]
            pt = self.cs.point(self.x(zq))
            if self.cs.contains(pt):
                return pt
        return None

    def base(self):
        z = self.fast_base()
        if z is not None or not self.ineq or self.k == 0:
            return z
        pt = strict_feasible_point(self.cs)
        if pt is None:
            return None
        # project the exact point back onto z via least squares over N (exact)
        x = [pt[nm] for nm in self.cs.names]
        Nm = sympy.Matrix([[_R(v) for v in col] for col in self.N]).T
        d = sympy.Matrix([_R(a - b) for a, b in zip(x, self.x0)])
        z = (Nm.T * Nm).solve(Nm.T * d)
        return [_F(v) for v in z]


def _int_affine(consts, rows):
    """Scale each affine row c + a.z by its common denominator (integers)."""
    out = []
    for c, a in zip(consts, rows):
        m = math.lcm(c.denominator, *(v.denominator for v in a))
        out.append((int(c * m), [int(v * m) for v in a], m))
    return out


def _round_inside(par, zf, dens=(64, 420, 2520, 10**6)):
    """Round z to a common denominator so every inequality stays strict."""
    if not hasattr(par, "_hint"):
        par._hint = _int_affine(par.h0, par.hz)
    for den in dens:
        zn = [round(float(v) * den) for v in zf]
        if all(c * den + sum(a * b for a, b in zip(row, zn)) > 0 for c, row, _ in par._hint):
            return zn, den
    return None


def _x_exact(par, zn, den):
    if not hasattr(par, "_xint"):
        par._xint = _int_affine(par.x0, [[col[i] for col in par.N] for i in range(par.cs.n)])
    return [Fraction(c * den + sum(a * b for a, b in zip(row, zn)), m * den) for c, row, m in par._xint]


def sample_points(cs: LinearConstraintSet, n_points, rng, steps=3, span=10):
    """Exact strictly feasible points by hit-and-run.

    The walk runs in floats, staying in the middle of each chord; every
    emitted point is rounded to small denominators and re-checked exactly
    in integer arithmetic.
    """
    par = _Param(cs)
    z = par.base() if par.consistent else None
    if z is None:
        return []
    k = par.k
    if k == 0:
        return [cs.point(par.x(z))] * n_points
    hz, h0 = par._float_rows() if par.ineq else (np.zeros((0, k)), np.zeros(0))
    zf = np.array([float(v) for v in z])
    out = []
    tries = 0
    while len(out) < n_points:
        tries += 1
        if tries > 50 * n_points:
            raise RuntimeError("hit-and-run could not round to an interior point")
        for _ in range(steps):
            d = rng.integers(-4, 5, size=k).astype(float)
            if not d.any():
                continue
            hv = h0 + hz @ zf
            slope = hz @ d
            lo, hi = -float(span), float(span)
            if (slope > 0).any():
                lo = max(lo, float(np.max(-hv[slope > 0] / slope[slope > 0])))
            if (slope < 0).any():
                hi = min(hi, float(np.min(-hv[slope < 0] / slope[slope < 0])))
            u = int(rng.integers(1, 20)) / 20
            zn = zf + (lo + u * (hi - lo)) * d
            zf = zn
        cand = _round_inside(par, zf)
        if cand is None:
            continue
        out.append(cs.point(_x_exact(par, *cand)))
    return out


# ------------------------------------------------------------ parameter sets

def set_BP(order: PerfectOrder, literal_c=False):
    """The set B_P for the order.

    Condition (c) uses the threshold ``(s_2 - 2)/2`` by default, the value
    that agrees with the worked 4-path sets and the DAG Wishart integrability
    thresholds; ``literal_c=True`` uses ``(s_2 - 1)/2`` instead.
    """
    r = order.r
    cs = LinearConstraintSet.for_order(r)
    A = lambda j: AffineForm.sym(alpha(j))
    B = lambda j: AffineForm.sym(beta(j))
    c = order.c
    s2 = len(order.separators[0]) if r > 1 else 0
    S2 = order.separators[0] if r > 1 else None
    for S in order.distinct_separators():
        if S == S2:
            continue
        J = order.J(S)
        cs.add_eq(sum((A(j) + Fraction(c[j - 1] - len(S), 2) - B(j) for j in J), AffineForm()))
    for j in range(2, r + 1):
        cs.add_gt(-A(j) - Fraction(c[j - 1] - len(order.separator(j)) - 1, 2))
    cs.add_gt(-A(1) - Fraction(c[0] - s2 - 1, 2))
    if r > 1:
        eta2 = sum((A(j) + Fraction(c[j - 1] - s2, 2) - B(j) for j in order.J(S2)), AffineForm())
        rhs = Fraction(s2 - 1, 2) if literal_c else Fraction(s2 - 2, 2)
        cs.add_gt(-A(1) - Fraction(c[0] - s2 + 1, 2) - eta2 - rhs)
    return cs


def set_AP(order: PerfectOrder):
    """The set A_P, conditions taken as stated."""
    r = order.r
    cs = LinearConstraintSet.for_order(r)
    A = lambda j: AffineForm.sym(alpha(j))
    B = lambda j: AffineForm.sym(beta(j))
    S2 = order.separators[0] if r > 1 else None
    for S in order.distinct_separators():
        if S == S2:
            continue
        cs.add_eq(sum((A(j) - B(j) for j in order.J(S)), AffineForm()))
    for j in range(2, r + 1):
        cs.add_gt(A(j) - Fraction(order.c[j - 1] - 1, 2))
    if r > 1:
        s2 = len(S2)
        delta2 = sum((A(j) - B(j) for j in order.J(S2)), AffineForm())
        cs.add_gt(A(1) - delta2 - Fraction(s2 - 1, 2))
    return cs


def integrability_set_from_decomposition(dec: MarkovRatioDecomposition, d: Dag | None = None, convention=None):
    """Parameters for which the decomposition is a pure, integrable D-product.

    Type II: exponent γ_v of D_vv must satisfy γ_v < pa_v/2 + 1.
    Type I: exponent λ_v must satisfy λ_v > pa_v/2.
    Every residual exponent is pinned to zero.
    """
    d = d or dec.dag
    convention = convention or dec.convention
    cs = LinearConstraintSet.for_order(dec.order.r)
    for t in dec.residuals:
        cs.add_eq(t.exponent)
    for v in sorted(d.vertices, key=lambda u: d.numbering[u]):
        e = dec.exponent(v)
        half_pa = Fraction(len(d.parents(v)), 2)
        if convention == TYPE_II:
            cs.add_gt(half_pa + 1 - e)
        else:
            cs.add_gt(e - half_pa)
    return cs


def hasse_rho(tree: HasseTree, order: PerfectOrder):
    """ρ_[i] for every Hasse node, in terms of the order's α and β labels."""
    clique_index = {C: j + 1 for j, C in enumerate(order.cliques)}
    out = {}
    for t in tree.nodes:
        rho = AffineForm()
        for u in tree.subtree(t):
            if tree.is_leaf(u):
                rho = rho + AffineForm.sym(alpha(clique_index[tree.closure(u)]))
            elif len(tree.children[u]) >= 2:
                for j in order.J(tree.closure(u)):
                    rho = rho - AffineForm.sym(beta(j))
        out[t] = rho
    return out


def homogeneous_B(tree: HasseTree, order: PerfectOrder):
    """One strict inequality per Hasse node: −ρ_[i] > (Σ_subtree n_t − 1)/2."""
    cs = LinearConstraintSet.for_order(order.r)
    rho = hasse_rho(tree, order)
    for t in sorted(tree.nodes, key=lambda u: min(u)):
        m = sum(len(u) for u in tree.subtree(t))
        cs.add_gt(-rho[t] - Fraction(m - 1, 2))
    return cs


def gindikin_membership(p, lam):
    lam = Fraction(lam)
    if p < 1:
        raise ValueError("p must be positive")
    if lam > Fraction(p - 1, 2):
        return True
    return lam > 0 and (2 * lam).denominator == 1


def residual_count_expected(order: PerfectOrder, d: Dag):
    """Number of distinct separators that are not ancestral in ``d``."""
    return sum(1 for S in order.distinct_separators() if not is_ancestral(d, S))
