"""Linear terms over count variables with exact rational coefficients."""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Mapping

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact rationals")
    return Fraction(value)


def format_rational(q: Fraction) -> str:
    q = as_fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class CountTerm:
    """``c0 + c1*x1 + ... + ck*xk``; immutable, zero coefficients dropped."""

    __slots__ = ("constant", "coeffs", "_hash")

    def __init__(self, constant=0, coeffs: Mapping[str, object] | Iterable = ()):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[str, Fraction] = {}
        for name, c in items:
            if not IDENT_RE.match(name):
                raise ValueError(f"malformed count variable name {name!r}")
            acc[name] = acc.get(name, Fraction(0)) + as_fraction(c)
        object.__setattr__(self, "constant", as_fraction(constant))
        object.__setattr__(
            self, "coeffs", tuple(sorted((n, c) for n, c in acc.items() if c != 0))
        )
        object.__setattr__(self, "_hash", hash((self.constant, self.coeffs)))

    def __setattr__(self, name, value):
        raise AttributeError("CountTerm is immutable")

    @classmethod
    def const(cls, c) -> CountTerm:
        return cls(c)

    @classmethod
    def var(cls, name: str, coeff=1) -> CountTerm:
        return cls(0, {name: coeff})

    def __eq__(self, other):
        return (
            isinstance(other, CountTerm)
            and self.constant == other.constant
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"CountTerm({render_term(self)!r})"

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.coeffs)

    def coeff(self, name: str) -> Fraction:
        for n, c in self.coeffs:
            if n == name:
                return c
        return Fraction(0)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: CountTerm) -> CountTerm:
        if not isinstance(other, CountTerm):
            other = CountTerm(other)
        return CountTerm(self.constant + other.constant, self.coeffs + other.coeffs)

    def __neg__(self) -> CountTerm:
        return self.scale(-1)

    def __sub__(self, other: CountTerm) -> CountTerm:
        if not isinstance(other, CountTerm):
            other = CountTerm(other)
        return self + (-other)

    def scale(self, factor) -> CountTerm:
        f = as_fraction(factor)
        return CountTerm(self.constant * f, [(n, c * f) for n, c in self.coeffs])

    def substitute(self, name: str, replacement: CountTerm) -> CountTerm:
        c = self.coeff(name)
        if c == 0:
            return self
        rest = CountTerm(self.constant, [(n, k) for n, k in self.coeffs if n != name])
        return rest + replacement.scale(c)

    def value(self, env: Mapping[str, Fraction]) -> Fraction:
        total = self.constant
        for n, c in self.coeffs:
            total += c * env[n]
        return total

    def partial(self, env: Mapping[str, Fraction]) -> CountTerm:
        """Substitute the bound variables of ``env`` and keep the rest symbolic."""
        if not any(n in env for n, _ in self.coeffs):
            return self
        const = self.constant
        rest = []
        for n, c in self.coeffs:
            if n in env:
                const += c * env[n]
            else:
                rest.append((n, c))
        return CountTerm(const, rest)


def render_term(t: CountTerm) -> str:
    parts: list[str] = []
    if t.constant != 0 or not t.coeffs:
        parts.append(format_rational(t.constant))
    for name, c in t.coeffs:
        mag = abs(c)
        body = name if mag == 1 else f"{format_rational(mag)}*{name}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts)
