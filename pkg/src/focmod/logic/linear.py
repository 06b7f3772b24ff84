"""Quantifier elimination for linear arithmetic over the rationals.

Each ``E x`` is removed by substituting a finite set of test points: every
solution ``b`` of an atom for ``x``, midpoints between boundary points, and
``b - 1`` / ``b + 1`` to cover the unbounded regions.  Equations in a
conjunction are used directly (``E x. (x = t & φ)`` is ``φ[t/x]``).
"""

from __future__ import annotations

from fractions import Fraction

from . import syntax as S
from .terms import CountTerm


class NotLinearError(ValueError):
    pass


def canonical_atom(op: str, lhs: CountTerm, rhs: CountTerm) -> S.Node:
    """``lhs op rhs`` as ``t op 0`` with the first coefficient scaled to ±1.

    Constant atoms fold to ⊤/⊥.  Equalities get a positive leading coefficient.
    """
    d = lhs - rhs
    if d.is_constant():
        if op == "=":
            return S.true() if d.constant == 0 else S.false()
        return S.true() if d.constant < 0 else S.false()
    lead = d.coeffs[0][1]
    factor = 1 / abs(lead) if op == "<" else 1 / lead
    return S.compare(d.scale(factor), op, CountTerm.const(0))


_SOLVED: dict = {}


def solve_for(atom: S.Node, x: str) -> CountTerm | None:
    """The boundary value of ``x`` in a comparison atom (None if x is absent)."""
    key = (atom.id, x)
    if key in _SOLVED:
        return _SOLVED[key]
    out = _solve_for(atom, x)
    _SOLVED[key] = out
    return out


def _solve_for(atom: S.Node, x: str) -> CountTerm | None:
    _, lhs, rhs = atom.args
    d = lhs - rhs
    c = d.coeff(x)
    if c == 0:
        return None
    rest = d.substitute(x, CountTerm.const(0))
    return rest.scale(Fraction(-1) / c)


def substitute(f: S.Node, x: str, t: CountTerm) -> S.Node:
    """Substitute into a quantifier-free formula, folding constants and canonicalizing."""
    memo: dict[int, S.Node] = {}

    def go(n: S.Node) -> S.Node:
        if x not in S.free_variables(n)[1]:
            return n
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == S.CMP:
            op, lhs, rhs = n.args
            out = canonical_atom(op, lhs.substitute(x, t), rhs.substitute(x, t))
        elif k == S.NOT:
            out = S.neg(go(n.args[0]))
        elif k == S.AND:
            out = S.conj([go(n.args[0]), go(n.args[1])])
        elif k == S.OR:
            out = S.disj([go(n.args[0]), go(n.args[1])])
        else:
            raise NotLinearError(f"substitution into non-quantifier-free node {n.kind}")
        memo[n.id] = out
        return out

    return S._deep(go, f)


def atoms_with(f: S.Node, x: str) -> list[S.Node]:
    """Comparison atoms in which ``x`` has a nonzero net coefficient."""
    return sorted(
        (n for n in S.iter_nodes(f)
         if n.kind == S.CMP and x in S.free_variables(n)[1] and solve_for(n, x) is not None),
        key=lambda n: n.id,
    )


def test_points(bounds: list[CountTerm]) -> list[CountTerm]:
    """Candidate values covering every region cut out by ``bounds``."""
    if not bounds:
        return [CountTerm.const(0)]
    uniq = list(dict.fromkeys(bounds))
    if all(b.is_constant() for b in uniq):
        vals = sorted({b.constant for b in uniq})
        pts = [vals[0] - 1] + vals + [vals[-1] + 1]
        pts += [(a + b) / 2 for a, b in zip(vals, vals[1:])]
        return [CountTerm.const(v) for v in sorted(set(pts))]
    pts: list[CountTerm] = []
    for i, a in enumerate(uniq):
        for b in uniq[i:]:
            pts.append((a + b).scale(Fraction(1, 2)))
        pts.append(a - CountTerm.const(1))
        pts.append(a + CountTerm.const(1))
    return list(dict.fromkeys(pts))


def qe_exists(x: str, f: S.Node) -> S.Node:
    """Quantifier-free equivalent of ``E x. f`` for quantifier-free ``f``."""
    if x not in S.free_variables(f)[1]:
        return f
    ds = S.disjuncts(f)
    if len(ds) > 1:
        return S.disj([qe_exists(x, d) for d in ds])
    cs = S.conjuncts(f)
    indep = [c for c in cs if x not in S.free_variables(c)[1]]
    dep = [c for c in cs if x in S.free_variables(c)[1]]
    for c in dep:
        t = solve_for(c, x) if c.kind == S.CMP and c.args[0] == "=" else None
        if t is not None:
            rest = [substitute(d, x, t) for d in dep if d is not c]
            return S.conj(indep + rest)
    body = S.conj(dep)
    bounds = [solve_for(a, x) for a in atoms_with(body, x)]
    pts = test_points(bounds)
    return S.conj(indep + [S.disj(substitute(body, x, t) for t in pts)])


def qe_forall(x: str, f: S.Node) -> S.Node:
    return S.neg(qe_exists(x, push_negation(S.neg(f))))


def push_negation(f: S.Node) -> S.Node:
    """Negation normal form for quantifier-free formulas (¬ only on atoms)."""
    memo: dict[tuple[int, bool], S.Node] = {}

    def go(n: S.Node, negate: bool) -> S.Node:
        key = (n.id, negate)
        hit = memo.get(key)
        if hit is not None:
            return hit
        k = n.kind
        if k == S.NOT:
            out = go(n.args[0], not negate)
        elif k == S.AND:
            parts = [go(n.args[0], negate), go(n.args[1], negate)]
            out = S.disj(parts) if negate else S.conj(parts)
        elif k == S.OR:
            parts = [go(n.args[0], negate), go(n.args[1], negate)]
            out = S.conj(parts) if negate else S.disj(parts)
        elif k == S.CMP and negate:
            out = _negate_atom(n)
        else:
            out = S.neg(n) if negate else n
        memo[key] = out
        return out

    return S._deep(lambda g: go(g, False), f)


def _negate_atom(a: S.Node) -> S.Node:
    op, lhs, rhs = a.args
    if op == "<":
        # ¬(l < r)  ⟺  r < l ∨ l = r
        return S.disj([canonical_atom("<", rhs, lhs), canonical_atom("=", lhs, rhs)])
    return S.disj([canonical_atom("<", lhs, rhs), canonical_atom("<", rhs, lhs)])


def eval_qf(f: S.Node, env) -> bool:
    """Evaluate a quantifier-free count formula under a full assignment."""
    memo: dict[int, bool] = {}

    def go(n: S.Node) -> bool:
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == S.TRUE:
            out = True
        elif k == S.FALSE:
            out = False
        elif k == S.CMP:
            op, lhs, rhs = n.args
            a, b = lhs.value(env), rhs.value(env)
            out = a == b if op == "=" else a < b
        elif k == S.NOT:
            out = not go(n.args[0])
        elif k == S.AND:
            out = go(n.args[0]) and go(n.args[1])
        elif k == S.OR:
            out = go(n.args[0]) or go(n.args[1])
        else:
            raise NotLinearError(f"eval_qf on node kind {k}")
        memo[n.id] = out
        return out

    return S._deep(go, f)


_SIMPLIFY: dict[int, S.Node] = {}


def _linear_key(atom: S.Node):
    """(op, variable part, constant) of a canonical ``t op 0`` atom."""
    op, lhs, rhs = atom.args
    d = lhs - rhs
    return op, d.coeffs, d.constant


def simplify(f: S.Node) -> S.Node:
    """Light cleanup of quantifier-free count formulas.

    Within one conjunction (disjunction) of atoms sharing a variable part,
    only the strongest (weakest) strict bound is kept, and an equation
    decides every other atom over the same variable part.
    """
    hit = _SIMPLIFY.get(f.id)
    if hit is not None:
        return hit
    k = f.kind
    if k == S.NOT:
        out = S.neg(simplify(f.args[0]))
    elif k in (S.AND, S.OR):
        items = [simplify(c) for c in (S.conjuncts(f) if k == S.AND else S.disjuncts(f))]
        items = _prune(items, k == S.AND)
        out = S.conj(items) if k == S.AND else S.disj(items)
    else:
        out = f
    _SIMPLIFY[f.id] = out
    _SIMPLIFY[out.id] = out
    return out


def _prune(items: list[S.Node], is_conj: bool) -> list[S.Node]:
    bounds: dict[tuple, Fraction] = {}
    eqs: dict[tuple, Fraction] = {}
    for c in items:
        if c.kind != S.CMP or c.args[2] != CountTerm.const(0):
            continue
        op, vars_, const = _linear_key(c)
        if op == "<":
            cur = bounds.get(vars_)
            if cur is None or (const > cur if is_conj else const < cur):
                bounds[vars_] = const
        elif is_conj:
            eqs.setdefault(vars_, const)
    out = []
    for c in items:
        if c.kind == S.CMP and c.args[2] == CountTerm.const(0):
            op, vars_, const = _linear_key(c)
            if op == "<" and bounds.get(vars_) != const:
                continue
            if is_conj:
                decided = _decide_by_equation(op, vars_, const, eqs)
                if decided is not None and not (op == "=" and eqs.get(vars_) == const):
                    if not decided:
                        return [S.false()]
                    continue
        out.append(c)
    return out


def _decide_by_equation(op, vars_, const, eqs) -> bool | None:
    """Truth of ``v + const op 0`` given equations ``v + c = 0`` (also for ``-v``)."""
    if vars_ in eqs:
        value = const - eqs[vars_]
    else:
        neg_vars = tuple((n, -c) for n, c in vars_)
        if neg_vars not in eqs:
            return None
        value = const + eqs[neg_vars]
    return value == 0 if op == "=" else value < 0
