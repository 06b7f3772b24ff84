"""The fixed-precision forward pass, written once over an abstract number backend.

A backend supplies ``const``, ``un`` and ``bin``.  The executor instantiates
it with plain mantissas; the compiler instantiates it with bit-formula
families.  Everything that is not averaging over positions goes through the
helpers in this module, so both follow the same operation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..logic.alphabet import CLS, Alphabet
from ..transformer.model import TransformerModel
from .fixed import Ops, Precision, round_entry


@dataclass
class RHead:
    wq: list[list[int]]
    wk: list[list[int]]
    wv: list[list[int]]


@dataclass
class RLayerNorm:
    gamma: list[int]
    beta: list[int]
    eps: int


@dataclass
class RLayer:
    heads: list[RHead]
    w1: list[list[int]]
    b1: list[int]
    w2: list[list[int]]
    b2: list[int]
    ln1: RLayerNorm | None
    ln2: RLayerNorm | None


@dataclass
class RoundedModel:
    """A model with every weight rounded into F(r, s)."""

    prec: Precision
    alphabet: Alphabet
    d: int
    we: dict[str, list[int]]
    pe_period: list[int]  # 0 for a constant channel
    pe_table: list[list[int]]  # per channel, values for p mod period (one entry if constant)
    layers: list[RLayer]
    out_w: list[int]
    out_b: int

    def pe(self, channel: int, p: int) -> int:
        m = self.pe_period[channel]
        return self.pe_table[channel][p % m if m else 0]


def round_model(model: TransformerModel, prec: Precision) -> RoundedModel:
    def m(rows):
        return [[round_entry(e, prec) for e in row] for row in rows]

    def v(xs):
        return [round_entry(e, prec) for e in xs]

    periods, tables = [], []
    for ch in model.pe:
        if ch.fn == "zero" or ch.xi.numerator == 0:
            periods.append(0)
            tables.append([round_entry(ch.entry(0), prec)])
        else:
            b = ch.xi.denominator
            periods.append(b)
            tables.append([round_entry(ch.entry(rho), prec) for rho in range(b)])
    layers = []
    for layer in model.layers:
        heads = [RHead(m(h.wq), m(h.wk), m(h.wv)) for h in layer.heads]
        lns = [None if ln is None else RLayerNorm(v(ln.gamma), v(ln.beta), round_entry(ln.eps, prec))
               for ln in (layer.ln1, layer.ln2)]
        f = layer.ffn
        layers.append(RLayer(heads, m(f.w1), v(f.b1), m(f.w2), v(f.b2), *lns))
    return RoundedModel(prec, model.alphabet, model.d, {s: v(e) for s, e in model.we.items()},
                        periods, tables, layers, v(model.out_w), round_entry(model.out_b, prec))


# --- backend-generic column operations ------------------------------------------

def linear(be, row: list[int], xs: list, bias: int = 0):
    """``bias + Σ w_i x_i`` as a left-to-right chain of rounded products and sums.

    Zero weights are skipped; this is exact since round(acc + 0) = acc.
    """
    acc = None
    for w, x in zip(row, xs):
        if w == 0:
            continue
        t = be.un(("mulc", w), x)
        acc = t if acc is None else be.bin("add", acc, t)
    if bias != 0:
        acc = be.const(bias) if acc is None else be.un(("addc", bias), acc)
    return be.const(0) if acc is None else acc


def chain_sum(be, xs: list):
    acc = xs[0]
    for x in xs[1:]:
        acc = be.bin("add", acc, x)
    return acc


def layer_norm(be, ln: RLayerNorm, xs: list) -> list:
    d = len(xs)
    mean = be.un(("divint", d), chain_sum(be, xs))
    dev = [be.bin("sub", x, mean) for x in xs]
    var = be.un(("divint", d), chain_sum(be, [be.bin("mul", t, t) for t in dev]))
    sd = be.un("sqrt", be.un(("addc", ln.eps), var) if ln.eps else var)
    out = []
    for i, t in enumerate(dev):
        z = be.bin("div", t, sd)
        out.append(be.un(("addc", ln.beta[i]), be.un(("mulc", ln.gamma[i]), z))
                   if ln.beta[i] else be.un(("mulc", ln.gamma[i]), z))
    return out


def projections(be, head: RHead, xs: list) -> tuple[list, list, list]:
    return ([linear(be, row, xs) for row in head.wq], [linear(be, row, xs) for row in head.wk],
            [linear(be, row, xs) for row in head.wv])


def pair_terms(be, d: int, qv: list, kv: list, vv: list) -> tuple[object, list]:
    """exp of the scaled logit for one (query, key) pair, and exp times each value."""
    if qv:
        dot = be.bin("mul", qv[0], kv[0])
        for a, b in zip(qv[1:], kv[1:]):
            dot = be.bin("add", dot, be.bin("mul", a, b))
    else:
        dot = be.const(0)
    e = be.un("exp", be.un(("scale", d), dot))
    return e, [be.bin("mul", e, v) for v in vv]


def after_attention(be, layer: RLayer, xs: list, contexts: list[list]) -> list:
    """Residual, LN1, FFN, residual, LN2 for one column given each head's context."""
    a1 = []
    for i, x in enumerate(xs):
        acc = x
        for ctx in contexts:
            acc = be.bin("add", acc, ctx[i])
        a1.append(acc)
    if layer.ln1 is not None:
        a1 = layer_norm(be, layer.ln1, a1)
    hidden = [be.un("relu", linear(be, row, a1, b)) for row, b in zip(layer.w1, layer.b1)]
    a2 = [be.bin("add", a1[i], linear(be, row, hidden, b)) for i, (row, b) in enumerate(zip(layer.w2, layer.b2))]
    if layer.ln2 is not None:
        a2 = layer_norm(be, layer.ln2, a2)
    return a2


def output(be, rm: RoundedModel, cls_col: list):
    return linear(be, rm.out_w, cls_col, rm.out_b)


class IntBackend:
    """Concrete mantissa arithmetic."""

    def __init__(self, ops: Ops):
        self.ops = ops

    def const(self, i: int) -> int:
        return i

    def un(self, name, a: int) -> int:
        return self.ops.unary(name)(a)

    def bin(self, name, a: int, b: int) -> int:
        return self.ops.binary(name)(a, b)


def input_column(rm: RoundedModel, ops: Ops, symbol: str, p: int) -> list[int]:
    return [ops.add(rm.we[symbol][i], rm.pe(i, p)) for i in range(rm.d)]


def floor_average(values: list[int]) -> int:
    """Exact mean of mantissas, truncated toward -inf (drop the extra digit)."""
    return sum(values) // len(values)


def exact_average(values: list[int], prec: Precision) -> Fraction:
    return Fraction(sum(values), len(values) * prec.scale)


def symbols(w, alphabet: Alphabet) -> list[str]:
    out = [CLS]
    for a in w:
        if a not in alphabet:
            raise ValueError(f"symbol {a!r} not in the alphabet")
        out.append(a)
    return out
