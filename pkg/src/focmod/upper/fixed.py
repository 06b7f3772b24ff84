"""Fixed-precision and extra-precision numbers and the rounded primitive operations.

A fixed-precision value in F(r, s) is stored as its integer mantissa ``i``
(value ``i / 2**s``) with ``-2**(r+s) <= i < 2**(r+s)``.  Every primitive
here maps mantissas to mantissas exactly; the executor and the compiler both
use these functions, so they agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from ..transformer.weights import WeightEntry

_DIGITS = 50


@dataclass(frozen=True)
class Precision:
    r: int
    s: int

    def __post_init__(self):
        if self.r < 0 or self.s < 0:
            raise ValueError("r and s must be non-negative")

    @property
    def bits(self) -> int:
        return self.r + self.s + 1

    @property
    def lo(self) -> int:
        return -(1 << (self.r + self.s))

    @property
    def hi(self) -> int:
        return (1 << (self.r + self.s)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.s

    def values(self) -> range:
        return range(self.lo, self.hi + 1)

    def clamp(self, i: int) -> int:
        return self.lo if i < self.lo else self.hi if i > self.hi else i

    def to_bits(self, i: int) -> tuple[int, ...]:
        """Two's-complement bits, index 0 is k = -s."""
        u = i & ((1 << self.bits) - 1)
        return tuple((u >> j) & 1 for j in range(self.bits))

    def from_bits(self, bits) -> int:
        u = sum(b << j for j, b in enumerate(bits))
        return u - (1 << self.bits) if bits[-1] else u


@dataclass(frozen=True)
class FixedPoint:
    r: int
    s: int
    value: int  # mantissa

    def __post_init__(self):
        p = Precision(self.r, self.s)
        if not p.lo <= self.value <= p.hi:
            raise ValueError(f"mantissa {self.value} out of range for F({self.r},{self.s})")

    def __float__(self):
        return self.value / (1 << self.s)

    def as_fraction(self) -> Fraction:
        return Fraction(self.value, 1 << self.s)

    def __str__(self):
        return format_fixed(self.value, Precision(self.r, self.s))


@dataclass(frozen=True)
class ExtraPrecision:
    r: int
    s: int
    base: int  # n'
    value: int  # value is value / (2**s * base)

    def __post_init__(self):
        if self.base <= 0:
            raise ValueError("base must be positive")
        bound = (1 << (self.r + self.s)) * self.base
        if not -bound <= self.value < bound:
            raise ValueError("extra-precision value out of range")

    @property
    def extra(self) -> int:
        return self.value - (self.value // self.base) * self.base

    @property
    def fixed(self) -> FixedPoint:
        return FixedPoint(self.r, self.s, self.value // self.base)

    def as_fraction(self) -> Fraction:
        return Fraction(self.value, (1 << self.s) * self.base)

    @staticmethod
    def from_fraction(x: Fraction, r: int, s: int, base: int) -> ExtraPrecision:
        i = x * (1 << s) * base
        if i.denominator != 1:
            raise ValueError(f"{x} is not in E({r},{s},{base})")
        return ExtraPrecision(r, s, base, int(i))

    def digits(self) -> str:
        """Binary digits of the fixed part followed by the extra digit, e.g. ``01.012``."""
        return format_fixed(self.value // self.base, Precision(self.r, self.s)) + str(self.extra)


def format_fixed(i: int, prec: Precision) -> str:
    bits = prec.to_bits(i)
    text = "".join(str(b) for b in reversed(bits))
    return text[: prec.r + 1] + "." + text[prec.r + 1:]


def bit_of(k: int, x: Fraction, prec: Precision | None = None) -> int:
    """``floor(x / 2**k) - 2 floor(x / 2**(k+1))``."""
    if prec is not None and not -prec.s <= k <= prec.r:
        raise ValueError(f"bit index {k} outside [-{prec.s}, {prec.r}]")
    x = Fraction(x)
    two = Fraction(2) ** k
    return math.floor(x / two) - 2 * math.floor(x / (2 * two))


def _round_half_even(num: int, den: int) -> int:
    """Nearest integer to num/den, ties to even (den > 0)."""
    q, rem = divmod(num, den)
    twice = 2 * rem
    if twice > den or (twice == den and q % 2 == 1):
        q += 1
    return q


def round_fraction(x: Fraction, prec: Precision) -> int:
    x = Fraction(x)
    return prec.clamp(_round_half_even(x.numerator * prec.scale, x.denominator))


def round_mp(x, prec: Precision) -> int:
    """Round an mpmath real; exact ties are impossible for the irrational values passed here."""
    with mpmath.workdps(_DIGITS):
        t = mpmath.mpf(x) * prec.scale
        fl = int(mpmath.floor(t))
        frac = t - fl
        half = mpmath.mpf(1) / 2
        if frac > half or (frac == half and fl % 2 == 1):
            fl += 1
    return prec.clamp(fl)


def round_to_fixed(x, r: int, s: int) -> FixedPoint:
    prec = Precision(r, s)
    if isinstance(x, (int, Fraction, str)):
        i = round_fraction(Fraction(x), prec)
    elif isinstance(x, float):
        i = round_fraction(Fraction(x), prec)
    else:
        i = round_mp(x, prec)
    return FixedPoint(r, s, i)


def round_entry(e: WeightEntry, prec: Precision) -> int:
    ex = e.exact()
    if ex is not None:
        return round_fraction(ex, prec)
    return round_mp(e.mp(), prec)


# --- primitive operations on mantissas ----------------------------------------

class Ops:
    """Rounded primitives for one precision; ``table`` caches full lookup tables."""

    def __init__(self, prec: Precision):
        self.prec = prec
        self._tables: dict = {}

    def add(self, a: int, b: int) -> int:
        return self.prec.clamp(a + b)

    def add1(self, a: int, b: int) -> int:
        """a + b + one unit in the last place (the carry case)."""
        return self.prec.clamp(a + b + 1)

    def sub(self, a: int, b: int) -> int:
        return self.prec.clamp(a - b)

    def mul(self, a: int, b: int) -> int:
        return self.prec.clamp(_round_half_even(a * b, self.prec.scale))

    def relu(self, a: int) -> int:
        return a if a > 0 else 0

    def neg(self, a: int) -> int:
        return self.prec.clamp(-a)

    def bitnot(self, a: int) -> int:
        return -a - 1

    def div(self, a: int, b: int) -> int:
        """Rounded a / b; division by zero gives 0."""
        if b == 0:
            return 0
        num, den = a * self.prec.scale, b
        if den < 0:
            num, den = -num, -den
        return self.prec.clamp(_round_half_even(num, den))

    def div_int(self, a: int, d: int) -> int:
        return self.div(a, d * self.prec.scale)

    def exp(self, a: int) -> int:
        return self._unary_table("exp")[a - self.prec.lo]

    def scale_logit(self, a: int, d: int) -> int:
        """Rounded a / sqrt(d)."""
        return self._unary_table(("scale", d))[a - self.prec.lo]

    def sqrt(self, a: int) -> int:
        return self._unary_table("sqrt")[a - self.prec.lo]

    def _unary_table(self, key) -> list[int]:
        tab = self._tables.get(key)
        if tab is None:
            tab = [self._compute(key, a) for a in self.prec.values()]
            self._tables[key] = tab
        return tab

    def _compute(self, key, a: int) -> int:
        prec = self.prec
        x = Fraction(a, prec.scale)
        if key == "exp":
            if a == 0:
                return round_fraction(Fraction(1), prec)
            with mpmath.workdps(_DIGITS):
                return round_mp(mpmath.exp(mpmath.mpf(a) / prec.scale), prec)
        if key == "sqrt":
            if a <= 0:
                return 0
            root = math.isqrt(a * prec.scale)
            if root * root == a * prec.scale:
                return round_fraction(Fraction(root, prec.scale), prec)
            with mpmath.workdps(_DIGITS):
                return round_mp(mpmath.sqrt(mpmath.mpf(a) / prec.scale), prec)
        if key[0] == "scale":
            d = key[1]
            root = math.isqrt(d)
            if root * root == d:
                return round_fraction(x / root, prec)
            with mpmath.workdps(_DIGITS):
                return round_mp(mpmath.mpf(a) / prec.scale / mpmath.sqrt(d), prec)
        raise KeyError(key)

    def unary(self, name):
        """Callable for a named unary op: "relu", "exp", "sqrt", ("scale", d), ("mulc", w) ..."""
        if name == "relu":
            return self.relu
        if name == "exp":
            return self.exp
        if name == "sqrt":
            return self.sqrt
        if name == "neg":
            return self.neg
        if name == "bitnot":
            return self.bitnot
        if name == "inc":
            return lambda a: self.prec.clamp(a + 1)
        tag = name[0]
        if tag == "scale":
            return lambda a: self.scale_logit(a, name[1])
        if tag == "mulc":
            return lambda a: self.mul(name[1], a)
        if tag == "addc":
            return lambda a: self.add(a, name[1])
        if tag == "divint":
            return lambda a: self.div_int(a, name[1])
        if tag == "const":
            return lambda a: name[1]
        raise KeyError(name)

    def binary(self, name):
        return {"add": self.add, "add1": self.add1, "sub": self.sub, "mul": self.mul,
                "div": self.div}[name]

    def table(self, name, arity: int) -> tuple[int, ...]:
        """Full lookup table indexed by the unsigned bit patterns of the inputs."""
        key = ("table", name, arity)
        tab = self._tables.get(key)
        if tab is None:
            p = self.prec
            nb = p.bits
            vals = [u - (1 << nb) if u >> (nb - 1) else u for u in range(1 << nb)]
            if arity == 1:
                fn = self.unary(name)
                tab = tuple(fn(v) for v in vals)
            else:
                fn = self.binary(name)
                tab = tuple(fn(a, b) for a in vals for b in vals)
            self._tables[key] = tab
        return tab
