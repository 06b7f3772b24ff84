"""Lifting finite functions on F(r, s) to bit-formula families.

A *scalar* is a tuple of formulas, one per bit (index 0 is bit k = -s).
Lifting builds, for each output bit, the Shannon expansion of its truth
table over the non-constant input bits; with hash-consing this is a reduced
decision diagram whose shared sub-selections are shared DAG nodes.
"""

from __future__ import annotations

from ..logic import syntax as S
from .fixed import Ops, Precision

Scalar = tuple  # tuple[S.Node, ...]


def const_scalar(i: int, prec: Precision) -> Scalar:
    return tuple(S.true() if b else S.false() for b in prec.to_bits(i))


def scalar_value(sc: Scalar) -> list[int] | None:
    """Bits when every formula is a constant, else None."""
    out = []
    for f in sc:
        if f.kind == S.TRUE:
            out.append(1)
        elif f.kind == S.FALSE:
            out.append(0)
        else:
            return None
    return out


class Lifter:
    """Memoized lifting for one precision."""

    def __init__(self, ops: Ops):
        self.ops = ops
        self.prec = ops.prec
        self._memo: dict = {}
        self.lifts = 0

    def lift(self, name, args: list[Scalar]) -> Scalar:
        key = (name, tuple(f.id for a in args for f in a))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._lift(name, args)
        self._memo[key] = out
        return out

    def _lift(self, name, args: list[Scalar]) -> Scalar:
        self.lifts += 1
        prec = self.prec
        nb = prec.bits
        table = self.ops.table(name, len(args))
        # variables: non-constant input bits, most significant first, argument by argument
        fixed_u = []
        variables = []
        for a, sc in enumerate(args):
            u = 0
            for j in range(nb):
                f = sc[j]
                if f.kind == S.TRUE:
                    u |= 1 << j
                elif f.kind != S.FALSE:
                    variables.append((a, j, f))
            fixed_u.append(u)
        variables.sort(key=lambda t: (t[0], -t[1]))
        nv = len(variables)
        outs = []
        for idx in range(1 << nv):
            us = list(fixed_u)
            for pos, (a, j, _) in enumerate(variables):
                if (idx >> (nv - 1 - pos)) & 1:
                    us[a] |= 1 << j
            if len(us) == 1:
                v = table[us[0]]
            else:
                v = table[(us[0] << nb) | us[1]]
            outs.append(v & ((1 << nb) - 1))
        result = []
        formulas = [f for _, _, f in variables]
        for j in range(nb):
            mask = 0
            for idx, v in enumerate(outs):
                if (v >> j) & 1:
                    mask |= 1 << idx
            result.append(_shannon(formulas, mask, nv))
        return tuple(result)


def _shannon(formulas: list, mask: int, nv: int):
    """Formula for the truth table ``mask`` (bit idx set iff true) over ``formulas``.

    Index bit nv-1-level corresponds to formulas[level].
    """
    memo: dict = {}

    def go(level: int, m: int):
        size = 1 << (nv - level)
        if m == 0:
            return S.false()
        if m == (1 << size) - 1:
            return S.true()
        key = (level, m)
        hit = memo.get(key)
        if hit is not None:
            return hit
        half = size >> 1
        lo = m & ((1 << half) - 1)
        hi = m >> half
        out = S.ite(formulas[level], go(level + 1, hi), go(level + 1, lo))
        memo[key] = out
        return out

    return go(0, mask)


class SymBackend:
    """Backend whose numbers are bit-formula scalars."""

    def __init__(self, lifter: Lifter):
        self.lifter = lifter
        self.prec = lifter.prec

    def const(self, i: int) -> Scalar:
        return const_scalar(i, self.prec)

    def un(self, name, a: Scalar) -> Scalar:
        return self.lifter.lift(name, [a])

    def bin(self, name, a: Scalar, b: Scalar) -> Scalar:
        return self.lifter.lift(name, [a, b])


def lift_function(fn, inputs: list[Scalar], prec: Precision) -> Scalar:
    """Lift an arbitrary Python function on mantissas (unary or binary)."""
    ops = _TableOps(prec, fn, len(inputs))
    return Lifter(ops).lift("fn", inputs)


class _TableOps(Ops):
    def __init__(self, prec: Precision, fn, arity: int):
        super().__init__(prec)
        self._fn = fn
        self._arity = arity

    def unary(self, name):
        return self._fn if name == "fn" else super().unary(name)

    def binary(self, name):
        return self._fn if name == "fn" else super().binary(name)
