"""Random formula generation for property tests and the normalization check."""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import syntax as S
from .alphabet import BINARY, Alphabet
from .terms import CountTerm


@dataclass
class GenConfig:
    depth: int = 3
    max_modulus: int = 4
    coeff_range: int = 2
    sugar: bool = True
    count_vars: tuple[str, ...] = ("x", "y", "z")
    pos_vars: tuple[str, ...] = ("p", "q")


class FormulaGenerator:
    def __init__(self, seed: int = 0, alphabet: Alphabet = BINARY, config: GenConfig | None = None):
        self.rng = random.Random(seed)
        self.alphabet = alphabet
        self.cfg = config or GenConfig()

    def sentence(self) -> S.Node:
        return self.formula(self.cfg.depth, (), ())

    def anchored_sentence(self) -> S.Node:
        """Sentence whose count quantifiers all carry a ``#[x] p.`` conjunct."""
        return self._anchored(self.cfg.depth, (), ())

    # -- pieces ------------------------------------------------------------
    def term(self, cvars) -> CountTerm:
        r = self.cfg.coeff_range
        t = CountTerm.const(self.rng.randint(-r, r))
        for v in cvars:
            if self.rng.random() < 0.6:
                t = t + CountTerm.var(v, self.rng.choice([c for c in range(-r, r + 1) if c]))
        return t

    def atom(self, pvars, cvars) -> S.Node:
        choices = ["const"]
        if pvars:
            choices += ["letter", "letter", "mod"]
        if cvars:
            choices += ["cmp", "cmp"]
        c = self.rng.choice(choices)
        if c == "const":
            return self.rng.choice([S.true(), S.false()])
        if c == "letter":
            return S.letter(self.rng.choice(self.alphabet), self.rng.choice(pvars))
        if c == "mod":
            m = self.rng.randint(1, self.cfg.max_modulus)
            return S.mod(self.rng.randrange(m), m, self.rng.choice(pvars))
        op = self.rng.choice(["=", "<"])
        return S.compare(self.term(cvars), op, self.term(cvars))

    def formula(self, depth: int, pvars: tuple, cvars: tuple) -> S.Node:
        if depth <= 0:
            return self.atom(pvars, cvars)
        kinds = ["not", "and", "or", "E", "count"]
        if cvars:
            kinds += ["A"]
        if self.cfg.sugar:
            kinds += ["Ep", "Ap", "imp", "iff"]
        if pvars or cvars:
            kinds += ["atom"]
        k = self.rng.choice(kinds)
        d = depth - 1
        if k == "atom":
            return self.atom(pvars, cvars)
        if k == "not":
            return S.not_(self.formula(d, pvars, cvars))
        if k in ("and", "or", "imp", "iff"):
            a, b = self.formula(d, pvars, cvars), self.formula(d, pvars, cvars)
            return {"and": S.and_, "or": S.or_, "imp": S.implies, "iff": S.iff}[k](a, b)
        if k in ("E", "A"):
            x = self._new(self.cfg.count_vars, cvars)
            body = self.formula(d, pvars, cvars + (x,))
            return (S.exists if k == "E" else S.forall)(x, body)
        if k in ("Ep", "Ap"):
            p = self._new(self.cfg.pos_vars, pvars)
            body = self.formula(d, pvars + (p,), cvars)
            return (S.exists_pos if k == "Ep" else S.forall_pos)(p, body)
        # counting quantifier, wrapped in E x when no count variable is in scope
        p = self._new(self.cfg.pos_vars, pvars)
        if cvars and self.rng.random() < 0.5:
            x = self.rng.choice(cvars)
            return S.count_eq(x, p, self.formula(d, pvars + (p,), cvars))
        x = self._new(self.cfg.count_vars, cvars)
        inner = S.count_eq(x, p, self.formula(max(d - 1, 0), pvars + (p,), cvars))
        rest = self.formula(max(d - 1, 0), pvars, cvars + (x,))
        return S.exists(x, S.and_(inner, rest))

    def _anchored(self, depth: int, pvars: tuple, cvars: tuple) -> S.Node:
        if depth <= 0:
            return self.atom(pvars, cvars)
        k = self.rng.choice(["not", "and", "or", "E", "Ap", "Ep", "atom"])
        d = depth - 1
        if k == "atom":
            return self.atom(pvars, cvars)
        if k == "not":
            return S.not_(self._anchored(d, pvars, cvars))
        if k in ("and", "or"):
            a, b = self._anchored(d, pvars, cvars), self._anchored(d, pvars, cvars)
            return (S.and_ if k == "and" else S.or_)(a, b)
        if k in ("Ap", "Ep"):
            p = self._new(self.cfg.pos_vars, pvars)
            body = self._anchored(d, pvars + (p,), cvars)
            return (S.exists_pos if k == "Ep" else S.forall_pos)(p, body)
        x = self._new(self.cfg.count_vars, cvars)
        p = self._new(self.cfg.pos_vars, pvars)
        inner = S.count_eq(x, p, self._anchored(max(d - 1, 0), pvars + (p,), cvars))
        rest = self._anchored(max(d - 1, 0), pvars, cvars + (x,))
        return S.exists(x, S.and_(inner, rest))

    def _new(self, pool, used) -> str:
        free = [v for v in pool if v not in used]
        if free:
            return self.rng.choice(free)
        return f"{pool[0]}{len(used)}"
