"""Simplified stateless counter machines and their translation to FOC[+;MOD].

A machine adds ``u(a)`` to a vector of k integer counters for every symbol
``a`` read, starting from zero.  It accepts when counter i ends at zero
exactly for the indices with ``F[i] = 0``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .logic import syntax as S
from .logic.alphabet import Alphabet
from .logic.terms import CountTerm

POS = "p"


class SscmError(ValueError):
    pass


@dataclass(frozen=True)
class Sscm:
    alphabet: Alphabet
    k: int
    update: dict  # symbol -> tuple of k ints
    mask: tuple[int, ...]

    def __post_init__(self):
        if self.k < 0:
            raise SscmError("k must be non-negative")
        if len(self.mask) != self.k or any(b not in (0, 1) for b in self.mask):
            raise SscmError(f"mask must be {self.k} bits")
        missing = [a for a in self.alphabet if a not in self.update]
        if missing:
            raise SscmError(f"no update for symbol(s) {missing}")
        extra = [a for a in self.update if a not in self.alphabet]
        if extra:
            raise SscmError(f"update for unknown symbol(s) {extra}")
        for a, u in self.update.items():
            if len(u) != self.k:
                raise SscmError(f"update for {a!r} has {len(u)} entries, expected {self.k}")

    def __hash__(self):
        return hash((self.alphabet, self.k, tuple(self.update[a] for a in self.alphabet), self.mask))


@dataclass
class SscmRun:
    accept: bool
    counters: tuple[int, ...]

    def __iter__(self):
        return iter((self.accept, self.counters))


def sscm_run(m: Sscm, w: Sequence[str]) -> SscmRun:
    c = [0] * m.k
    for a in w:
        if a not in m.alphabet:
            raise SscmError(f"symbol {a!r} not in the alphabet")
        for i, d in enumerate(m.update[a]):
            c[i] += d
    accept = all((ci != 0) == bool(fi) for ci, fi in zip(c, m.mask))
    return SscmRun(accept, tuple(c))


def count_var(j: int) -> str:
    return f"x{j + 1}"


def sscm_to_sentence(m: Sscm) -> S.Node:
    """``E x1..xm. (AND_j #[xj] p. Q_aj(p)) & (AND_i phi_i)``.

    ``phi_i`` is ``sum_j u(a_j)_i x_j = 0``, negated when ``F[i] = 1``.
    """
    counts = [S.count_eq(count_var(j), POS, S.letter(a, POS)) for j, a in enumerate(m.alphabet)]
    conds = []
    for i in range(m.k):
        total = CountTerm.const(0)
        for j, a in enumerate(m.alphabet):
            c = m.update[a][i]
            if c:
                total = total + CountTerm.var(count_var(j), c)
        eq = S.compare(total, "=", CountTerm.const(0))
        conds.append(S.not_(eq) if m.mask[i] else eq)
    body = S.conj(counts + conds)
    for j in reversed(range(len(m.alphabet))):
        body = S.exists(count_var(j), body)
    return body


# --- text format -------------------------------------------------------------------

def parse_sscm(text: str) -> Sscm:
    alphabet = None
    k = None
    update: dict = {}
    mask = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("alphabet:"):
                alphabet = Alphabet(line[len("alphabet:"):].split())
            elif line.startswith("k:"):
                k = int(line[2:])
            elif line.startswith("F:"):
                body = line[2:].split()
                bits = body[0] if len(body) == 1 and len(body[0]) > 1 else "".join(body)
                mask = tuple(int(b) for b in bits)
            elif line.split()[0] == "u":
                parts = line.split()
                if len(parts) < 2:
                    raise ValueError("missing symbol")
                if parts[1] in update:
                    raise ValueError(f"duplicate update for {parts[1]!r}")
                update[parts[1]] = tuple(int(x) for x in parts[2:])
            else:
                raise ValueError(f"unrecognized line {line!r}")
        except ValueError as e:
            raise SscmError(f"line {lineno}: {e}") from None
    if alphabet is None or k is None or mask is None:
        raise SscmError("machine needs alphabet:, k: and F: lines")
    return Sscm(alphabet, k, update, mask)


def format_sscm(m: Sscm) -> str:
    lines = ["alphabet: " + " ".join(m.alphabet), f"k: {m.k}"]
    for a in m.alphabet:
        lines.append(" ".join(["u", a] + [str(x) for x in m.update[a]]))
    lines.append("F: " + " ".join(str(b) for b in m.mask))
    return "\n".join(lines) + "\n"


# --- random machines -----------------------------------------------------------------

SYMBOLS = ("0", "1", "2")


def random_sscm(rng: random.Random, max_k: int = 2, max_symbols: int = 3, bound: int = 2,
                alphabet: Alphabet | None = None) -> Sscm:
    if alphabet is None:
        alphabet = Alphabet(SYMBOLS[:rng.randint(1, max_symbols)])
    k = rng.randint(0, max_k)
    update = {a: tuple(rng.randint(-bound, bound) for _ in range(k)) for a in alphabet}
    mask = tuple(rng.randint(0, 1) for _ in range(k))
    return Sscm(alphabet, k, update, mask)


def permutation_invariant(m: Sscm, w: Sequence[str], rng: random.Random) -> bool:
    perm = list(w)
    rng.shuffle(perm)
    return sscm_run(m, w) == sscm_run(m, perm)
