"""Weight entries: exact rationals or symbolic trigonometric constants."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

from ..logic.terms import as_fraction, format_rational

_PREC_DIGITS = 60


@lru_cache(maxsize=None)
def _sin_turns(t: Fraction) -> Fraction | None:
    """Exact sin(2πt) when rational (only multiples of 1/12 can be)."""
    t = t % 1
    table = {Fraction(0): 0, Fraction(1, 12): Fraction(1, 2), Fraction(1, 4): 1,
             Fraction(5, 12): Fraction(1, 2), Fraction(1, 2): 0, Fraction(7, 12): Fraction(-1, 2),
             Fraction(3, 4): -1, Fraction(11, 12): Fraction(-1, 2)}
    v = table.get(t)
    return None if v is None else Fraction(v)


def trig_exact(fn: str, t: Fraction) -> Fraction | None:
    """Rational value of sin/cos(2πt), or None when irrational."""
    if fn == "sin":
        return _sin_turns(t)
    return _sin_turns(t + Fraction(1, 4))


@lru_cache(maxsize=None)
def trig_mp(fn: str, t: Fraction) -> mpmath.mpf:
    with mpmath.workdps(_PREC_DIGITS):
        t = t % 1
        angle = 2 * mpmath.pi * mpmath.mpf(t.numerator) / t.denominator
        return +(mpmath.sin(angle) if fn == "sin" else mpmath.cos(angle))


@lru_cache(maxsize=None)
def trig_float(fn: str, t: Fraction) -> float:
    exact = trig_exact(fn, t)
    if exact is not None:
        return float(exact)
    return float(trig_mp(fn, t))


@dataclass(frozen=True)
class WeightEntry:
    """One weight: ``q`` (rational), ``sin``/``cos`` of 2π·a/b, or ``rcos1m``.

    ``rcos1m`` is 1/(1 - cos 2π·a/b), the output scale of the modular gadget.
    """

    kind: str
    value: Fraction

    def __post_init__(self):
        if self.kind not in ("q", "sin", "cos", "rcos1m"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "rcos1m" and self.value % 1 == 0:
            raise ValueError("rcos1m undefined at integer turns")

    @staticmethod
    def q(x) -> WeightEntry:
        return WeightEntry("q", as_fraction(x))

    @staticmethod
    def sin(a: int, b: int) -> WeightEntry:
        return WeightEntry("sin", _turns(a, b))

    @staticmethod
    def cos(a: int, b: int) -> WeightEntry:
        return WeightEntry("cos", _turns(a, b))

    @staticmethod
    def rcos1m(a: int, b: int) -> WeightEntry:
        return WeightEntry("rcos1m", _turns(a, b))

    def exact(self) -> Fraction | None:
        if self.kind == "q":
            return self.value
        if self.kind in ("sin", "cos"):
            return trig_exact(self.kind, self.value)
        c = trig_exact("cos", self.value)
        return None if c is None else 1 / (1 - c)

    def mp(self) -> mpmath.mpf:
        """High-precision value (for rounding decisions)."""
        ex = self.exact()
        with mpmath.workdps(_PREC_DIGITS):
            if ex is not None:
                return mpmath.mpf(ex.numerator) / ex.denominator
            if self.kind in ("sin", "cos"):
                return trig_mp(self.kind, self.value)
            return 1 / (1 - trig_mp("cos", self.value))

    def __float__(self) -> float:
        ex = self.exact()
        return float(ex) if ex is not None else float(self.mp())

    def is_zero(self) -> bool:
        return self.exact() == 0

    def to_json(self):
        if self.kind == "q":
            return format_rational(self.value)
        return {self.kind: [self.value.numerator, self.value.denominator]}

    @staticmethod
    def from_json(obj) -> WeightEntry:
        if isinstance(obj, (int, str)):
            return WeightEntry.q(obj)
        if isinstance(obj, dict) and len(obj) == 1:
            (kind, (a, b)), = obj.items()
            if int(b) <= 0:
                raise ValueError("trig weight needs b > 0")
            return WeightEntry(kind, _turns(int(a), int(b)))
        raise ValueError(f"bad weight entry {obj!r}")

    def __repr__(self):
        return f"W({self.to_json()})"


def _turns(a: int, b: int) -> Fraction:
    if b <= 0:
        raise ValueError("denominator must be positive")
    return Fraction(a, b)


ZERO = WeightEntry.q(0)
ONE = WeightEntry.q(1)


def W(x) -> WeightEntry:
    """Coerce ints, Fractions, strings and entries to a WeightEntry."""
    if isinstance(x, WeightEntry):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted as weights; use Fraction")
    return WeightEntry.q(x)
