from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

CLS = "CLS"
DELIMITERS = frozenset("()[]{},.#*+-!&|<>=%@:;\"'")


class Alphabet(tuple):
    """Ordered finite set of symbols.  ``CLS`` is reserved for the transformer side."""

    def __new__(cls, symbols: Iterable[str]):
        syms = tuple(symbols)
        if not syms:
            raise ValueError("alphabet must be nonempty")
        if len(set(syms)) != len(syms):
            raise ValueError(f"duplicate symbols in alphabet {syms}")
        for s in syms:
            if not isinstance(s, str) or not s:
                raise ValueError(f"bad symbol {s!r}")
            if s == CLS:
                raise ValueError("CLS is reserved and cannot be an alphabet symbol")
            if any(c.isspace() or c in DELIMITERS or not c.isprintable() or ord(c) > 126 for c in s):
                raise ValueError(f"symbol {s!r} contains a reserved or non-visible character")
        return super().__new__(cls, syms)

    def __repr__(self):
        return f"Alphabet({list(self)!r})"

    def tokenize(self, w: str | Sequence[str]) -> tuple[str, ...]:
        """Split a string into symbols.

        Single-character alphabets accept plain strings; otherwise symbols must be
        separated by whitespace (or ``w`` passed as a sequence).
        """
        if not isinstance(w, str):
            out = tuple(w)
        elif all(len(s) == 1 for s in self):
            out = tuple(w.replace(" ", ""))
        else:
            out = tuple(w.split())
        bad = [s for s in out if s not in self]
        if bad:
            raise ValueError(f"symbols {bad} not in alphabet {list(self)}")
        return out

    def strings(self, max_len: int, min_len: int = 0) -> Iterator[tuple[str, ...]]:
        """All strings of length min_len..max_len, shortest first, then lexicographic."""
        for n in range(min_len, max_len + 1):
            yield from itertools.product(self, repeat=n)


BINARY = Alphabet(["0", "1"])


def show(w: Sequence[str]) -> str:
    if all(len(s) == 1 for s in w):
        return "".join(w)
    return " ".join(w)
