"""Normal form ``E x1 ... E xk. (#[x1] p. ψ1 & ... & #[xk] p. ψk & χ)``.

Three stages:

1. ``to_clear_form``: every ``E x`` body has no free position variables and
   every counting body is quantifier-free with only its own position free.
2. Each ``#[y] p. ψ`` is replaced by ``y = xi`` with one fresh ``xi`` per
   distinct ``ψ`` (bound position renamed to ``p`` first).
3. The remaining count formula goes through quantifier elimination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .logic import linear as L
from .logic import syntax as S
from .logic.alphabet import Alphabet
from .logic.desugar import desugar
from .logic.evaluator import Evaluator
from .logic.parser import parse_formula
from .logic.printer import render_formula
from .logic.terms import CountTerm

POS = "p"


@dataclass(frozen=True)
class NormalForm:
    count_vars: tuple[str, ...]
    psis: tuple[S.Node, ...]
    chi: S.Node
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.count_vars) != len(self.psis):
            raise ValueError("count_vars and psis differ in length")
        for psi in self.psis:
            pv, cv = S.free_variables(psi)
            if not S.is_quantifier_free(psi) or cv or not pv <= {POS}:
                raise ValueError(f"bad psi: {render_formula(psi)}")
        if not S.is_quantifier_free(self.chi):
            raise ValueError("chi must be quantifier-free")
        pv, cv = S.free_variables(self.chi)
        if pv or not cv <= set(self.count_vars):
            raise ValueError("chi may only mention the count variables")
        if any(n.kind in (S.LETTER, S.MOD, S.COUNT) for n in S.iter_nodes(self.chi)):
            raise ValueError("chi must contain only count atoms")

    @property
    def k(self) -> int:
        return len(self.psis)

    def to_formula(self) -> S.Node:
        parts = [S.count_eq(x, POS, psi) for x, psi in zip(self.count_vars, self.psis)]
        body = S.conj(parts + [self.chi])
        for x in reversed(self.count_vars):
            body = S.exists(x, body)
        return body

    def sidecar(self) -> dict:
        return {
            "k": self.k,
            "count_vars": list(self.count_vars),
            "psi": [render_formula(p) for p in self.psis],
            "chi": render_formula(self.chi),
        }

    @classmethod
    def from_sidecar(cls, data: dict | str, alphabet: Alphabet | None = None) -> NormalForm:
        if isinstance(data, str):
            data = json.loads(data)
        psis = tuple(parse_formula(t, alphabet) for t in data["psi"])
        return cls(tuple(data["count_vars"]), psis, parse_formula(data["chi"], alphabet))


def counts(nf: NormalForm, w: Sequence[str]) -> list[int]:
    ev = Evaluator(w)
    return [sum(1 for i in range(1, ev.n + 1) if ev.holds(psi, {POS: i} if S.free_variables(psi)[0] else {}))
            for psi in nf.psis]


def evaluate_normal(nf: NormalForm, w: Sequence[str]) -> bool:
    env = {x: Fraction(c) for x, c in zip(nf.count_vars, counts(nf, w))}
    return L.eval_qf(nf.chi, env)


# --- count distribution and hoisting as standalone rewrites ---------------------

def distribute_count(f: S.Node, fresh=None) -> S.Node:
    """Inclusion-exclusion for ``#[x] p. (φ1 | ... | φl)``.

    Produces ``E x1 ... (#[x1] p. ... & ... & x = x1 + x2 - x3 ...)`` where each
    counting body is a conjunction of a subset of the φi.
    """
    if f.kind != S.COUNT:
        raise ValueError("distribute_count expects a counting quantifier")
    x, p, body = f.args
    ds = S.disjuncts(body)
    if len(ds) == 1:
        return f
    fresh = fresh or S.fresh_namer(S.all_names(f), prefix="x")
    vars_: list[str] = []
    parts: list[S.Node] = []

    def dist(target: str, items: list[S.Node]) -> None:
        if len(items) == 1:
            parts.append(S.count_eq(target, p, items[0]))
            return
        x1, x2, x3 = fresh(), fresh(), fresh()
        vars_.extend([x1, x2, x3])
        dist(x1, items[:-1])
        parts.append(S.count_eq(x2, p, items[-1]))
        dist(x3, [S.conj([d, items[-1]]) for d in items[:-1]])
        rhs = CountTerm.var(x1) + CountTerm.var(x2) - CountTerm.var(x3)
        parts.append(S.compare(CountTerm.var(target), "=", rhs))

    dist(x, ds)
    counts_ = [c for c in parts if c.kind == S.COUNT]
    eqs = [c for c in parts if c.kind != S.COUNT]
    out = S.conj(counts_ + eqs)
    for v in reversed(vars_):
        out = S.exists(v, out)
    return out


def hoist_from_count(f: S.Node, phi: S.Node | None = None) -> S.Node:
    """``#[x] p. (φ & ψ)`` with p not free in φ  ⟹  ``(!φ & x = 0) | (φ & #[x] p. ψ)``.

    Without ``phi`` every conjunct of the body that does not mention p is hoisted.
    """
    if f.kind != S.COUNT:
        raise ValueError("hoist_from_count expects a counting quantifier")
    x, p, body = f.args
    cs = S.conjuncts(body)
    if phi is None:
        hoisted = [c for c in cs if p not in S.free_variables(c)[0]]
    else:
        if p in S.free_variables(phi)[0]:
            raise ValueError(f"cannot hoist: {p} occurs free in {render_formula(phi)}")
        hoisted = S.conjuncts(phi)
        if any(h not in cs for h in hoisted):
            raise ValueError("phi is not a conjunct of the counting body")
    ids = {h.id for h in hoisted}
    phi_f = S.conj(hoisted)
    psi = S.conj(c for c in cs if c.id not in ids)
    zero = L.canonical_atom("=", CountTerm.var(x), CountTerm.const(0))
    return S.disj([S.conj([S.neg(phi_f), zero]), S.conj([phi_f, S.count_eq(x, p, psi)])])


# --- clear form ---------------------------------------------------------------

def is_clear(f: S.Node) -> bool:
    for n in S.iter_nodes(f):
        if n.kind in (S.EXISTS, S.FORALL) and S.free_variables(n)[0]:
            return False
        if n.kind == S.COUNT:
            body = n.args[2]
            pv, cv = S.free_variables(body)
            if not S.is_quantifier_free(body) or cv or not pv <= {n.args[1]}:
                return False
        if n.kind in S.SUGAR_KINDS:
            return False
    return True


def _skeleton_components(f: S.Node, keep) -> list[S.Node]:
    """Maximal non-boolean subformulas of ``f`` for which ``keep`` is false."""
    out: dict[int, S.Node] = {}
    seen = set()
    stack = [f]
    while stack:
        n = stack.pop()
        if n.id in seen:
            continue
        seen.add(n.id)
        if n.kind in (S.AND, S.OR, S.NOT):
            stack.extend(n.children)
        elif n.kind not in (S.TRUE, S.FALSE) and not keep(n):
            out[n.id] = n
    return [out[i] for i in sorted(out)]


def _assign(f: S.Node, atom: S.Node, value: bool) -> S.Node:
    """Replace ``atom`` in the boolean skeleton of ``f`` by a constant."""
    const = S.true() if value else S.false()
    memo: dict[int, S.Node] = {}

    def go(n: S.Node) -> S.Node:
        if n is atom:
            return const
        if n.kind not in (S.AND, S.OR, S.NOT):
            return n
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        if n.kind == S.NOT:
            out = S.neg(go(n.args[0]))
        elif n.kind == S.AND:
            out = S.conj([go(n.args[0]), go(n.args[1])])
        else:
            out = S.disj([go(n.args[0]), go(n.args[1])])
        memo[n.id] = out
        return out

    return S._deep(go, f)


def _case_split(f: S.Node, components: list[S.Node],
                keep_false: bool = False) -> list[tuple[list[S.Node], S.Node]]:
    """Exclusive, exhaustive cases ``(literals, residue)`` with ``f ≡ ⋁ lits ∧ residue``.

    Branching stops as soon as no remaining component occurs in the residue.
    Cases whose residue folds to ⊥ are dropped unless ``keep_false``.
    """
    out: list[tuple[list[S.Node], S.Node]] = []

    def go(g: S.Node, lits: list[S.Node], rest: list[S.Node]) -> None:
        if g.kind == S.FALSE and not keep_false:
            return
        present = {n.id for n in S.iter_nodes(g)}
        rest = [c for c in rest if c.id in present]
        if not rest:
            out.append((lits, g))
            return
        c, tail = rest[0], rest[1:]
        go(_assign(g, c, True), lits + [c], tail)
        go(_assign(g, c, False), lits + [S.neg(c)], tail)

    go(f, [], components)
    return out


def to_clear_form(f: S.Node) -> S.Node:
    """Equivalent formula with the two clear-form properties (input desugared or not)."""
    f = desugar(f)
    memo: dict[int, S.Node] = {}

    def go(n: S.Node) -> S.Node:
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k in (S.TRUE, S.FALSE, S.LETTER, S.MOD):
            out = n
        elif k == S.CMP:
            out = L.canonical_atom(n.args[0], n.args[1], n.args[2])
        elif k == S.NOT:
            out = S.neg(go(n.args[0]))
        elif k == S.AND:
            out = S.conj([go(n.args[0]), go(n.args[1])])
        elif k == S.OR:
            out = S.disj([go(n.args[0]), go(n.args[1])])
        elif k == S.FORALL:
            out = S.neg(_clear_exists(n.args[0], S.neg(go(n.args[1]))))
        elif k == S.EXISTS:
            out = _clear_exists(n.args[0], go(n.args[1]))
        elif k == S.COUNT:
            out = _clear_count(n.args[0], n.args[1], go(n.args[2]))
        else:
            raise S.FormulaError(f"unexpected node kind {k}")
        memo[n.id] = out
        return out

    return S._deep(go, f)


def _clear_exists(x: str, body: S.Node) -> S.Node:
    """``E x. body`` for clear ``body``: move position literals out."""
    if x not in S.free_variables(body)[1]:
        return body
    if not S.free_variables(body)[0]:
        return S.exists(x, body)
    comps = _skeleton_components(body, keep=lambda n: not S.free_variables(n)[0])
    cases = _case_split(body, comps)
    return S.disj(S.conj(lits + [S.exists(x, g) if x in S.free_variables(g)[1] else g])
                  for lits, g in cases)


def _clear_count(x: str, p: str, body: S.Node) -> S.Node:
    """``#[x] p. body`` for clear ``body``.

    Components of the body that do not mention ``p`` are split into exclusive
    cases; within a case they are constant in ``p`` and hoist out of the count
    (``#[x] p. (φ & ψ)`` with φ true is ``#[x] p. ψ``; with φ false, ``x = 0``).
    """
    def local(n: S.Node) -> bool:
        return n.kind in (S.LETTER, S.MOD) and S.free_variables(n)[0] == {p}

    comps = _skeleton_components(body, keep=local)
    if not comps:
        return S.count_eq(x, p, body)
    zero = L.canonical_atom("=", CountTerm.var(x), CountTerm.const(0))
    parts = []
    for lits, g in _case_split(body, comps, keep_false=True):
        parts.append(S.conj(lits + [zero if g.kind == S.FALSE else S.count_eq(x, p, g)]))
    return S.disj(parts)


# --- quantifier elimination on the count part -------------------------------

def eliminate_count_quantifiers(chi: S.Node) -> S.Node:
    """Quantifier-free equivalent of a formula over count variables only."""
    if S.free_variables(chi)[0] or any(n.kind in (S.LETTER, S.MOD, S.COUNT) for n in S.iter_nodes(chi)):
        raise ValueError("eliminate_count_quantifiers needs a formula without positions")
    memo: dict[int, S.Node] = {}

    def go(n: S.Node) -> S.Node:
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k in (S.TRUE, S.FALSE):
            out = n
        elif k == S.CMP:
            out = L.canonical_atom(*n.args)
        elif k == S.NOT:
            out = S.neg(go(n.args[0]))
        elif k == S.AND:
            out = S.conj([go(n.args[0]), go(n.args[1])])
        elif k == S.OR:
            out = S.disj([go(n.args[0]), go(n.args[1])])
        elif k == S.IMPLIES:
            out = S.disj([S.neg(go(n.args[0])), go(n.args[1])])
        elif k == S.IFF:
            a, b = go(n.args[0]), go(n.args[1])
            out = S.disj([S.conj([a, b]), S.conj([S.neg(a), S.neg(b)])])
        elif k == S.EXISTS:
            out = L.qe_exists(n.args[0], L.push_negation(go(n.args[1])))
        elif k == S.FORALL:
            out = L.qe_forall(n.args[0], go(n.args[1]))
        else:
            raise S.FormulaError(f"unexpected node kind {k}")
        out = L.simplify(out)
        memo[n.id] = out
        return out

    return S._deep(go, chi)


# --- the full pipeline --------------------------------------------------------

def extract_counts(clear: S.Node, fresh) -> tuple[S.Node, list[str], list[S.Node]]:
    """Replace every ``#[y] q. ψ`` by ``y = xi``; identical ψ share one ``xi``."""
    names: list[str] = []
    psis: list[S.Node] = []
    index: dict[int, int] = {}

    def replace(n: S.Node) -> S.Node:
        y, q, body = n.args
        psi = body if q == POS else S.rename_free_pos(body, q, POS)
        if psi.id not in index:
            index[psi.id] = len(psis)
            psis.append(psi)
            names.append(fresh())
        xi = names[index[psi.id]]
        return L.canonical_atom("=", CountTerm.var(y), CountTerm.var(xi))

    memo: dict[int, S.Node] = {}
    order = sorted(S.iter_nodes(clear), key=lambda n: n.id)
    for n in order:
        if n.kind == S.COUNT:
            memo[n.id] = replace(n)
        else:
            kids = tuple(memo.get(c.id, c) for c in n.children)
            memo[n.id] = S.rebuild(n, kids) if kids else n
    return memo[clear.id], names, psis


def normalize(sentence: S.Node) -> NormalForm:
    """Normal form of a sentence (sugar allowed)."""
    if not S.is_sentence(sentence):
        raise ValueError("normalize expects a sentence (no free variables)")
    clear = to_clear_form(sentence)
    fresh = S.fresh_namer(S.all_names(clear), prefix="x")
    chi, names, psis = extract_counts(clear, fresh)
    chi = eliminate_count_quantifiers(chi)
    used = S.free_variables(chi)[1]
    keep = [i for i, x in enumerate(names) if x in used]
    return NormalForm(tuple(names[i] for i in keep), tuple(psis[i] for i in keep), chi)
