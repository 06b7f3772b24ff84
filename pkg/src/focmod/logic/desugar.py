from __future__ import annotations

from . import syntax as S
from .terms import CountTerm


def desugar(f: S.Node) -> S.Node:
    """Rewrite ->, <->, Ep, Ap into core constructors.

    ``Ep p. φ`` becomes ``E x. (0 < x & #[x] p. φ)`` and ``Ap p. φ`` becomes
    ``E x. (#[x] p. T & #[x] p. φ)`` with fresh ``x``.  A core-only formula is
    returned unchanged (same node).
    """
    if not S.has_sugar(f):
        return f
    fresh = S.fresh_namer(S.all_names(f), prefix="_d")

    def step(n: S.Node, kids: tuple[S.Node, ...]) -> S.Node:
        k = n.kind
        if k == S.IMPLIES:
            return S.or_(S.not_(kids[0]), kids[1])
        if k == S.IFF:
            a, b = kids
            return S.and_(S.or_(S.not_(a), b), S.or_(S.not_(b), a))
        if k == S.EXISTS_POS:
            x = fresh()
            positive = S.compare(CountTerm.const(0), "<", CountTerm.var(x))
            return S.exists(x, S.and_(positive, S.count_eq(x, n.args[0], kids[0])))
        if k == S.FORALL_POS:
            x = fresh()
            p = n.args[0]
            return S.exists(x, S.and_(S.count_eq(x, p, S.true()), S.count_eq(x, p, kids[0])))
        return S.rebuild(n, kids)

    return S.transform(f, step)
