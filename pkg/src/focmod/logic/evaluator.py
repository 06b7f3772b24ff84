"""Exact model checker for FOC[+;MOD] over finite strings.

Count quantifiers range over the rationals.  ``E x. φ`` is decided by trying
a finite set of candidate values for ``x``:

* a cheap *witness set* when the body pins ``x`` down (``#[x] p. ψ`` forces
  ``x`` to be a count, an equation with all other variables bound forces a
  single value, and so on);
* otherwise the test points of every boundary value of ``x`` in the body's
  atoms, together with the integers ``0..n``;
* if some atom relates ``x`` to a variable bound further inside, the body is
  first reduced symbolically to a quantifier-free formula in ``x`` and the
  test points of that formula are used.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Mapping, Sequence

from . import linear as L
from . import syntax as S
from .alphabet import Alphabet
from .terms import CountTerm


class UnboundVariableError(LookupError):
    pass


_FV: dict[int, tuple[tuple[str, ...], tuple[str, ...]]] = {}
_ATOM: dict[int, tuple] = {}


def _free_sorted(n: S.Node) -> tuple[tuple[str, ...], tuple[str, ...]]:
    hit = _FV.get(n.id)
    if hit is None:
        pv, cv = S.free_variables(n)
        hit = (tuple(sorted(pv)), tuple(sorted(cv)))
        _FV[n.id] = hit
    return hit


def _key(n: S.Node, penv: Mapping[str, int], cenv: Mapping[str, Fraction]):
    pv, cv = _free_sorted(n)
    pk = tuple([penv[v] if v in penv else None for v in pv]) if pv else ()
    ck = tuple([cenv[v] if v in cenv else None for v in cv]) if cv else ()
    return (n.id, pk, ck)


def _num(v):
    """Integral rationals as ints: cheaper to hash and add."""
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def _atom_form(f: S.Node) -> tuple:
    """(op, constant, ((name, coeff), ...)) of ``lhs - rhs``, ints where integral."""
    hit = _ATOM.get(f.id)
    if hit is None:
        op, lhs, rhs = f.args
        d = lhs - rhs
        hit = (op, _num(d.constant), tuple((n, _num(c)) for n, c in d.coeffs))
        _ATOM[f.id] = hit
    return hit


_PARTS: dict = {}


def _rank(c: S.Node, x: str) -> int:
    if c.kind == S.COUNT and c.args[0] == x:
        return 0
    if c.kind == S.CMP and c.args[0] == "=":
        return 1
    return 2


def _parts(f: S.Node, x: str, split) -> list[S.Node] | None:
    """Conjuncts or disjuncts of ``f`` with ``x`` free, those pinning ``x`` directly first.

    For disjunctions, None when some disjunct does not mention ``x``.
    """
    key = (f.id, x, split)
    if key in _PARTS:
        return _PARTS[key]
    every = split(f)
    hit = sorted((c for c in every if x in S.free_variables(c)[1]), key=lambda c: _rank(c, x))
    if split is S.disjuncts and len(hit) < len(every):
        hit = None
    _PARTS[key] = hit
    return hit


class Evaluator:
    """Evaluates formulas over one fixed string; results are memoized."""

    def __init__(self, w: Sequence[str]):
        self.w = tuple(w)
        self.n = len(self.w)
        self._holds: dict = {}
        self._reduce: dict = {}
        self._wit: dict = {}

    # -- boolean evaluation ------------------------------------------------
    def holds(self, f: S.Node, penv: Mapping[str, int] | None = None,
              cenv: Mapping[str, Fraction] | None = None) -> bool:
        penv = dict(penv or {})
        cenv = {k: _num(Fraction(v)) for k, v in (cenv or {}).items()}
        pv, cv = S.free_variables(f)
        missing = sorted((pv - penv.keys()) | (cv - cenv.keys()))
        if missing:
            raise UnboundVariableError(f"free variable(s) without binding: {', '.join(missing)}")
        for v, i in penv.items():
            if not 1 <= i <= self.n:
                raise ValueError(f"position {v}={i} outside [1, {self.n}]")
        return S._deep(lambda _: self._holds_at(f, penv, cenv), None)

    def _holds_at(self, f: S.Node, penv, cenv) -> bool:
        k = f.kind
        if k == S.TRUE:
            return True
        if k == S.FALSE:
            return False
        if k == S.LETTER:
            return self.w[penv[f.args[1]] - 1] == f.args[0]
        if k == S.MOD:
            return penv[f.args[2]] % f.args[1] == f.args[0]
        if k == S.CMP:
            op, total, coeffs = _atom_form(f)
            for name, c in coeffs:
                total += c * cenv[name]
            return total == 0 if op == "=" else total < 0
        if k == S.NOT:
            return not self._holds_at(f.args[0], penv, cenv)
        key = _key(f, penv, cenv)
        hit = self._holds.get(key)
        if hit is not None:
            return hit
        if k == S.AND:
            out = self._holds_at(f.args[0], penv, cenv) and self._holds_at(f.args[1], penv, cenv)
        elif k == S.OR:
            out = self._holds_at(f.args[0], penv, cenv) or self._holds_at(f.args[1], penv, cenv)
        elif k == S.IMPLIES:
            out = not self._holds_at(f.args[0], penv, cenv) or self._holds_at(f.args[1], penv, cenv)
        elif k == S.IFF:
            out = self._holds_at(f.args[0], penv, cenv) == self._holds_at(f.args[1], penv, cenv)
        elif k == S.EXISTS_POS:
            p, body = f.args
            out = any(self._holds_at(body, {**penv, p: i}, cenv) for i in range(1, self.n + 1))
        elif k == S.FORALL_POS:
            p, body = f.args
            out = all(self._holds_at(body, {**penv, p: i}, cenv) for i in range(1, self.n + 1))
        elif k == S.COUNT:
            x, p, body = f.args
            out = cenv[x] == self._count(p, body, penv, cenv)
        elif k == S.EXISTS:
            x, body = f.args
            out = any(self._holds_at(body, penv, {**cenv, x: _num(v)})
                      for v in self._candidates(x, body, penv, cenv, True))
        elif k == S.FORALL:
            x, body = f.args
            out = all(self._holds_at(body, penv, {**cenv, x: _num(v)})
                      for v in self._candidates(x, body, penv, cenv, False))
        else:
            raise S.FormulaError(f"unknown node kind {k}")
        self._holds[key] = out
        return out

    def _count(self, p: str, body: S.Node, penv, cenv) -> int:
        return sum(1 for i in range(1, self.n + 1) if self._holds_at(body, {**penv, p: i}, cenv))

    # -- candidate values for a count quantifier ---------------------------
    def _candidates(self, x: str, body: S.Node, penv, cenv, existential: bool) -> list[Fraction]:
        cenv_x = {k: v for k, v in cenv.items() if k != x}
        if x not in S.free_variables(body)[1]:
            return [Fraction(0)]
        if existential:
            wit = self._witnesses(body, x, penv, cenv_x)
            if wit is not None:
                return sorted(wit)
        bounds = self._boundaries(body, x, penv, cenv_x)
        if bounds is None:
            reduced = self.reduce(body, penv, cenv_x)
            bounds = set()
            for a in L.atoms_with(reduced, x):
                bounds.add(L.solve_for(a, x).constant)
        return [t.constant for t in L.test_points([CountTerm.const(b) for b in sorted(bounds)])]

    def _witnesses(self, f: S.Node, x: str, penv, cenv) -> set[Fraction] | None:
        """A finite superset of the values of ``x`` making ``f`` true, or None."""
        if x not in S.free_variables(f)[1]:
            return None
        key = (x,) + _key(f, penv, cenv)
        if key in self._wit:
            return self._wit[key]
        k = f.kind
        out = None
        if k == S.COUNT and f.args[0] == x:
            _, p, body = f.args
            if x in S.free_variables(body)[1] or not S.free_variables(body)[1] <= cenv.keys():
                out = set(range(self.n + 1))
            else:
                out = {self._count(p, body, penv, cenv)}
        elif k == S.CMP and f.args[0] == "=":
            t = L.solve_for(f, x)
            if t is not None and t.variables <= cenv.keys():
                out = {_num(t.value(cenv))}
        elif k == S.AND:
            best = None
            for c in _parts(f, x, S.conjuncts):
                wc = self._witnesses(c, x, penv, cenv)
                if wc is not None and (best is None or len(wc) < len(best)):
                    best = wc
                    if len(best) <= 1:
                        break
            out = best
        elif k == S.OR:
            acc: set[Fraction] = set()
            parts = _parts(f, x, S.disjuncts)
            if parts is None:  # some disjunct leaves x unconstrained
                parts = ()
                acc = None
            for c in parts:
                wc = self._witnesses(c, x, penv, cenv)
                if wc is None:
                    acc = None
                    break
                acc |= wc
            out = acc
        elif k == S.EXISTS and f.args[0] != x:
            y, body = f.args
            inner = {k2: v for k2, v in cenv.items() if k2 != y}
            # a set found with y unbound cannot depend on y
            out = self._witnesses(body, x, penv, inner)
            if out is None and y in S.free_variables(body)[1]:
                wy = self._witnesses(body, y, penv, inner)
                if wy is not None:
                    acc = set()
                    for v in wy:
                        wx = self._witnesses(body, x, penv, {**inner, y: v})
                        if wx is None:
                            acc = None
                            break
                        acc |= wx
                    out = acc
        self._wit[key] = out
        return out

    def _boundaries(self, f: S.Node, x: str, penv, cenv) -> set[Fraction] | None:
        """Boundary values of ``x`` in ``f`` when they only depend on bound variables."""
        out: set[Fraction] = set(Fraction(i) for i in range(self.n + 1))
        stack = [(f, frozenset())]
        seen = set()
        while stack:
            n, shadowed = stack.pop()
            if (n.id, shadowed) in seen or x not in S.free_variables(n)[1]:
                continue
            seen.add((n.id, shadowed))
            k = n.kind
            if k == S.CMP:
                t = L.solve_for(n, x)
                if t is None:
                    continue
                if not t.variables <= cenv.keys() or t.variables & shadowed:
                    return None
                out.add(t.value(cenv))
            elif k in (S.EXISTS, S.FORALL):
                stack.append((n.args[1], shadowed | {n.args[0]}))
            else:
                for c in n.children:
                    stack.append((c, shadowed))
        return out

    # -- symbolic reduction -------------------------------------------------
    def reduce(self, f: S.Node, penv, cenv) -> S.Node:
        """Quantifier-free formula over the count variables unbound in ``cenv``.

        Position variables must all be bound by ``penv`` or inside ``f``.
        """
        key = _key(f, penv, cenv)
        hit = self._reduce.get(key)
        if hit is not None:
            return hit
        k = f.kind
        if k in (S.TRUE, S.FALSE, S.LETTER, S.MOD):
            out = S.true() if self._holds_at(f, penv, cenv) else S.false()
        elif k == S.CMP:
            op, lhs, rhs = f.args
            out = L.canonical_atom(op, lhs.partial(cenv), rhs.partial(cenv))
        elif k == S.NOT:
            out = S.neg(self.reduce(f.args[0], penv, cenv))
        elif k == S.AND:
            a = self.reduce(f.args[0], penv, cenv)
            out = a if a.kind == S.FALSE else S.conj([a, self.reduce(f.args[1], penv, cenv)])
        elif k == S.OR:
            a = self.reduce(f.args[0], penv, cenv)
            out = a if a.kind == S.TRUE else S.disj([a, self.reduce(f.args[1], penv, cenv)])
        elif k == S.IMPLIES:
            out = S.disj([S.neg(self.reduce(f.args[0], penv, cenv)), self.reduce(f.args[1], penv, cenv)])
        elif k == S.IFF:
            a, b = self.reduce(f.args[0], penv, cenv), self.reduce(f.args[1], penv, cenv)
            out = S.disj([S.conj([a, b]), S.conj([S.neg(a), S.neg(b)])])
        elif k == S.EXISTS_POS:
            p, body = f.args
            out = S.disj(self.reduce(body, {**penv, p: i}, cenv) for i in range(1, self.n + 1))
        elif k == S.FORALL_POS:
            p, body = f.args
            out = S.conj(self.reduce(body, {**penv, p: i}, cenv) for i in range(1, self.n + 1))
        elif k in (S.EXISTS, S.FORALL):
            y, body = f.args
            inner = {k2: v for k2, v in cenv.items() if k2 != y}
            r = self.reduce(body, penv, inner)
            out = L.qe_exists(y, r) if k == S.EXISTS else L.qe_forall(y, r)
        elif k == S.COUNT:
            out = self._reduce_count(f, penv, cenv)
        else:
            raise S.FormulaError(f"unknown node kind {k}")
        self._reduce[key] = out
        return out

    def _reduce_count(self, f: S.Node, penv, cenv) -> S.Node:
        x, p, body = f.args
        base = 0
        groups: dict[int, list] = {}
        for i in range(1, self.n + 1):
            g = self.reduce(body, {**penv, p: i}, cenv)
            if g.kind == S.TRUE:
                base += 1
            elif g.kind != S.FALSE:
                groups.setdefault(g.id, [g, 0])[1] += 1
        xt = CountTerm.const(cenv[x]) if x in cenv else CountTerm.var(x)
        parts = list(groups.values())
        options = []
        for bits in itertools.product((0, 1), repeat=len(parts)):
            total = base + sum(m for (g, m), b in zip(parts, bits) if b)
            guard = S.conj(g if b else S.neg(g) for (g, _), b in zip(parts, bits))
            options.append(S.conj([guard, L.canonical_atom("=", xt, CountTerm.const(total))]))
        return S.disj(options)


def evaluate(f: S.Node, w: Sequence[str], penv: Mapping[str, int] | None = None,
             cenv: Mapping | None = None, alphabet: Alphabet | None = None) -> bool:
    """``w ⊨ f`` under the given bindings (a sentence needs none)."""
    if alphabet is not None:
        w = alphabet.tokenize(w)
    return Evaluator(w).holds(f, penv, cenv)


def evaluate_bruteforce(f: S.Node, w: Sequence[str]) -> bool:
    """Naive checker that tries ``x ∈ {0..n}`` for every count quantifier.

    Only sound for sentences where each ``E x`` body pins ``x`` to a count
    (``#[x] p. ψ`` inside), which is what the oracle tests use it for.
    """
    w = tuple(w)
    n = len(w)

    def go(g: S.Node, penv: dict, cenv: dict) -> bool:
        k = g.kind
        if k == S.TRUE:
            return True
        if k == S.FALSE:
            return False
        if k == S.LETTER:
            return w[penv[g.args[1]] - 1] == g.args[0]
        if k == S.MOD:
            return penv[g.args[2]] % g.args[1] == g.args[0]
        if k == S.CMP:
            op, lhs, rhs = g.args
            a, b = lhs.value(cenv), rhs.value(cenv)
            return a == b if op == "=" else a < b
        if k == S.NOT:
            return not go(g.args[0], penv, cenv)
        if k == S.AND:
            return go(g.args[0], penv, cenv) and go(g.args[1], penv, cenv)
        if k == S.OR:
            return go(g.args[0], penv, cenv) or go(g.args[1], penv, cenv)
        if k == S.IMPLIES:
            return not go(g.args[0], penv, cenv) or go(g.args[1], penv, cenv)
        if k == S.IFF:
            return go(g.args[0], penv, cenv) == go(g.args[1], penv, cenv)
        if k == S.EXISTS_POS:
            return any(go(g.args[1], {**penv, g.args[0]: i}, cenv) for i in range(1, n + 1))
        if k == S.FORALL_POS:
            return all(go(g.args[1], {**penv, g.args[0]: i}, cenv) for i in range(1, n + 1))
        if k == S.COUNT:
            x, p, body = g.args
            c = sum(1 for i in range(1, n + 1) if go(body, {**penv, p: i}, cenv))
            return cenv[x] == c
        if k == S.EXISTS:
            return any(go(g.args[1], penv, {**cenv, g.args[0]: Fraction(v)}) for v in range(n + 1))
        if k == S.FORALL:
            return all(go(g.args[1], penv, {**cenv, g.args[0]: Fraction(v)}) for v in range(n + 1))
        raise S.FormulaError(f"unknown node kind {k}")

    return S._deep(lambda _: go(f, {}, {}), None)


def is_anchored(f: S.Node) -> bool:
    """Every ``E x`` has a ``#[x] p.`` directly among its body's atoms and no ``A x`` occurs."""
    for n in S.iter_nodes(f):
        if n.kind == S.FORALL:
            return False
        if n.kind == S.EXISTS:
            x = n.args[0]
            if not any(c.kind == S.COUNT and c.args[0] == x for c in S.conjuncts(n.args[1])):
                return False
    return True
