"""Compile a fixed-precision transformer into an equivalent FOC[+;MOD] sentence.

Every activation is described by bit formulas: one family with a free
position variable ``p`` for the ordinary positions, and one family of
sentences for the CLS column.  Averages over positions use extra-precision
numbers whose extra digit is a count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from ..logic import syntax as S
from ..logic.alphabet import CLS
from ..logic.evaluator import Evaluator
from ..logic.terms import CountTerm
from ..transformer.model import TransformerModel
from .fixed import ExtraPrecision, Ops, Precision
from .lift import Lifter, Scalar, SymBackend, const_scalar
from .pipeline import (RoundedModel, after_attention, output, pair_terms, projections, round_model)

POS = "p"
N = "n"  # |w|, bound by a count over ⊤
N_POS = "c"  # position variable of the #[n] c. ⊤ counts


@dataclass
class BitFamily:
    """Bits of one activation: ``pos[j]`` has ``p`` free, ``cls[j]`` is closed."""

    pos: Scalar | None
    cls: Scalar


@dataclass
class ExtraFamily:
    """Extra-precision value: fixed-part bits plus ``phi`` defining the extra digit in ``var``."""

    bits: Scalar
    var: str
    phi: S.Node


def _v(name: str, c=1) -> CountTerm:
    return CountTerm.var(name, c)


AVERAGE_MODES = ("chain", "direct")


class UpperCompiler:
    """``average`` selects how position averages are defined: ``"chain"`` builds
    them from extra-precision additions and doublings, ``"direct"`` from per-bit
    counts and one linear range test per mantissa."""

    def __init__(self, prec: Precision, average: str = "direct"):
        if average not in AVERAGE_MODES:
            raise ValueError(f"average mode must be one of {AVERAGE_MODES}")
        self.average = average
        self.prec = prec
        self.ops = Ops(prec)
        self.lifter = Lifter(self.ops)
        self.be = SymBackend(self.lifter)
        self._names = itertools.count(1)
        self._n_count = S.count_eq(N, N_POS, S.true())

    # -- names --------------------------------------------------------------
    def fresh(self) -> str:
        return f"e{next(self._names)}"

    # -- input layer --------------------------------------------------------
    def define_input_layer(self, rm: RoundedModel) -> list[BitFamily]:
        prec = self.prec
        out = []
        for i in range(rm.d):
            we_pos = []
            for j in range(prec.bits):
                we_pos.append(S.disj([S.letter(a, POS) for a in rm.alphabet if prec.to_bits(rm.we[a][i])[j]]))
            m = rm.pe_period[i]
            if m:
                pe_pos = tuple(S.disj([S.mod(rho, m, POS) for rho in range(m)
                                       if prec.to_bits(rm.pe_table[i][rho])[j]]) for j in range(prec.bits))
            else:
                pe_pos = const_scalar(rm.pe_table[i][0], prec)
            pos = self.be.bin("add", tuple(we_pos), pe_pos)
            cls = const_scalar(self.ops.add(rm.we[CLS][i], rm.pe(i, 0)), prec)
            out.append(BitFamily(pos, cls))
        return out

    # -- extra precision ----------------------------------------------------
    def count_bits(self, phi: S.Node, omega: S.Node, kv: str) -> ExtraFamily | None:
        """v_k: the number of positions (CLS included) whose bit is set, in the extra digit.

        When all n' positions are set the value is one unit of the fixed part.
        """
        if phi.kind == S.FALSE and omega.kind == S.FALSE:
            return None
        x, y = self.fresh(), "y"
        cnt = S.count_eq(y, kv, phi)
        base = [cnt, self._n_count]
        body = S.conj(base + [S.disj([
            S.conj([omega, S.lt_atom(_v(y), _v(N)), S.eq_atom(_v(x), _v(y) + CountTerm(1))]),
            S.conj([S.neg(omega), S.eq_atom(_v(x), _v(y))]),
            S.conj([omega, S.eq_atom(_v(y), _v(N)), S.eq_atom(_v(x), CountTerm(0))]),
        ])])
        phi_x = S.exists(y, S.exists(N, body))
        full = S.exists(y, S.exists(N, S.conj(base + [omega, S.eq_atom(_v(y), _v(N))])))
        bits = (full,) + tuple(S.false() for _ in range(self.prec.bits - 1))
        return ExtraFamily(bits, x, phi_x)

    def constant_extra(self, x: ExtraPrecision) -> ExtraFamily:
        """Family for a fixed value; the extra digit is meaningful when ``x.base`` is |w|+1."""
        z = self.fresh()
        return ExtraFamily(const_scalar(x.value // x.base, self.prec), z, S.eq_atom(_v(z), CountTerm(x.extra)))

    def extra_add(self, a: ExtraFamily, b: ExtraFamily) -> ExtraFamily:
        z = self.fresh()
        sigma0 = self.be.bin("add", a.bits, b.bits)
        sigma1 = self.be.bin("add1", a.bits, b.bits)
        if a is b:
            xa = a.var
            total = _v(xa, 2)
            defs = [a.phi, self._n_count]
            binders = [xa, N]
        else:
            xa, xb = a.var, b.var
            total = _v(xa) + _v(xb)
            defs = [a.phi, b.phi, self._n_count]
            binders = [xa, xb, N]
        n1 = _v(N) + CountTerm(1)
        no_carry = S.lt_atom(total, n1)
        carry = S.neg(no_carry)
        phi = S.conj(defs + [S.disj([S.conj([no_carry, S.eq_atom(_v(z), total)]),
                                     S.conj([carry, S.eq_atom(_v(z), total - n1)])])])
        bits = tuple(_close(binders, S.conj(defs + [S.disj([S.conj([no_carry, s0]), S.conj([carry, s1])])]))
                     for s0, s1 in zip(sigma0, sigma1))
        return ExtraFamily(bits, z, _close(binders, phi))

    def extra_negate(self, b: ExtraFamily) -> ExtraFamily:
        z = self.fresh()
        sigma0 = tuple(S.neg(f) for f in b.bits)  # bitwise not
        sigma1 = self.be.un("inc", sigma0)
        y = b.var
        pos = S.lt_atom(CountTerm(0), _v(y))
        zero = S.eq_atom(_v(y), CountTerm(0))
        defs = [b.phi, self._n_count]
        phi = S.conj(defs + [S.disj([S.conj([pos, S.eq_atom(_v(z), _v(N) + CountTerm(1) - _v(y))]),
                                     S.conj([zero, S.eq_atom(_v(z), CountTerm(0))])])])
        bits = tuple(_close([y, N], S.conj(defs + [S.disj([S.conj([pos, s0]), S.conj([zero, s1])])]))
                     for s0, s1 in zip(sigma0, sigma1))
        return ExtraFamily(bits, z, _close([y, N], phi))

    def double(self, a: ExtraFamily | None, times: int) -> ExtraFamily | None:
        for _ in range(times):
            if a is None:
                return None
            a = self.extra_add(a, a)
        return a

    def add_opt(self, a: ExtraFamily | None, b: ExtraFamily | None) -> ExtraFamily | None:
        if a is None:
            return b
        if b is None:
            return a
        return self.extra_add(a, b)

    def define_average(self, key: Scalar, cls: Scalar, kv: str) -> ExtraFamily | None:
        """Mean over CLS and positions 1..n of a value whose bits are ``cls`` and ``key`` (free kv)."""
        prec = self.prec
        r, s = prec.r, prec.s
        acc = None
        for j in range(prec.bits - 1):  # k = j - s ascending, k < r
            v = self.count_bits(key[j], cls[j], kv)
            acc = self.add_opt(acc, self.double(v, j))
        sign = self.count_bits(key[-1], cls[-1], kv)
        if sign is not None:
            acc = self.add_opt(acc, self.double(self.extra_negate(sign), r + s))
        return acc

    def define_average_direct(self, key: Scalar, cls: Scalar, kv: str) -> Scalar:
        """Bits of floor(mean) from per-bit counts and linear range tests.

        With c_j the number of positions whose bit j is set, the mantissa sum is
        S = sum_{j<top} 2^j c_j - 2^top c_top, and bit j of floor(S/n') is the
        disjunction over mantissas v with that bit of ``v n' <= S < (v+1) n'``.
        """
        prec = self.prec
        nb = prec.bits
        if all(f.kind == S.FALSE for f in key) and all(f.kind == S.FALSE for f in cls):
            return const_scalar(0, prec)
        defs = [self._n_count]
        binders = [N]
        total = CountTerm(0)
        for j in range(nb):
            phi, omega = key[j], cls[j]
            if phi.kind == S.FALSE and omega.kind == S.FALSE:
                continue
            y, c = self.fresh(), self.fresh()
            weight = -(1 << j) if j == nb - 1 else (1 << j)
            defs.append(S.count_eq(y, kv, phi))
            defs.append(S.disj([S.conj([omega, S.eq_atom(_v(c), _v(y) + CountTerm(1))]),
                                S.conj([S.neg(omega), S.eq_atom(_v(c), _v(y))])]))
            binders += [y, c]
            total = total + _v(c, weight)
        n1 = _v(N) + CountTerm(1)
        ranges = {}
        for v in prec.values():
            lo = S.neg(S.lt_atom(total, n1.scale(v)))
            hi = S.lt_atom(total, n1.scale(v + 1))
            ranges[v] = S.conj([lo, hi])
        bits = []
        for j in range(nb):
            sel = S.disj([ranges[v] for v in prec.values() if prec.to_bits(v)[j]])
            bits.append(_close(binders, S.conj(defs + [sel])))
        return tuple(bits)

    def average_fixed(self, key: Scalar, cls: Scalar, kv: str) -> Scalar:
        if self.average == "direct":
            return self.define_average_direct(key, cls, kv)
        avg = self.define_average(key, cls, kv)
        return const_scalar(0, self.prec) if avg is None else avg.bits

    # -- layers ---------------------------------------------------------------
    def attention_layer(self, rm: RoundedModel, layer, cols: list[BitFamily], index: int,
                        need_pos: bool) -> list[BitFamily]:
        be = self.be
        kv = f"k{index}"
        pos_x = [c.pos for c in cols]
        cls_x = [c.cls for c in cols]
        ctx_pos, ctx_cls = [], []
        for head in layer.heads:
            qp, kp, vp = projections(be, head, pos_x)
            qc, kc, vc = projections(be, head, cls_x)
            renamer = _Renamer(POS, kv)
            kk = [renamer.scalar(t) for t in kp]
            vk = [renamer.scalar(t) for t in vp]
            queries = [("cls", qc)] + ([("pos", qp)] if need_pos else [])
            for tag, qv in queries:
                e_key, num_key = pair_terms(be, rm.d, qv, kk, vk)
                e_cls, num_cls = pair_terms(be, rm.d, qv, kc, vc)
                den = self.average_fixed(e_key, e_cls, kv)
                ctx = [be.bin("div", self.average_fixed(num_key[i], num_cls[i], kv), den) for i in range(rm.d)]
                (ctx_cls if tag == "cls" else ctx_pos).append(ctx)
        new_cls = after_attention(be, layer, cls_x, ctx_cls)
        new_pos = after_attention(be, layer, pos_x, ctx_pos) if need_pos else [None] * rm.d
        return [BitFamily(p, c) for p, c in zip(new_pos, new_cls)]

    def compile(self, model: TransformerModel) -> S.Node:
        rm = round_model(model, self.prec)
        cols = self.define_input_layer(rm)
        for index, layer in enumerate(rm.layers, 1):
            need_pos = index < len(rm.layers)
            cols = self.attention_layer(rm, layer, cols, index, need_pos)
        pre = output(self.be, rm, [c.cls for c in cols])
        return S.neg(pre[-1])  # accept iff the sign bit is 0


def decode_extra(fam: ExtraFamily, w, prec: Precision, ev: Evaluator | None = None) -> ExtraPrecision:
    """Value of an extra-precision family on ``w`` (base |w|+1); ``ev`` may be a shared evaluator for ``w``."""
    base = len(w) + 1
    ev = ev or Evaluator(tuple(w))
    fixed = prec.from_bits([1 if ev.holds(f) else 0 for f in fam.bits])
    digits = [e for e in range(base) if ev.holds(fam.phi, cenv={fam.var: e})]
    if len(digits) != 1:
        raise ValueError(f"extra digit not uniquely defined: {digits}")
    return ExtraPrecision(prec.r, prec.s, base, fixed * base + digits[0])


def _close(binders: list[str], body: S.Node) -> S.Node:
    for x in reversed(binders):
        body = S.exists(x, body)
    return body


class _Renamer:
    """Rename a free position variable across many formulas with one shared memo."""

    def __init__(self, old: str, new: str):
        self.old, self.new = old, new
        self.memo: dict[int, S.Node] = {}

    def scalar(self, sc: Scalar) -> Scalar:
        return tuple(S.deep_call(self.go, f) for f in sc)

    def go(self, n: S.Node) -> S.Node:
        if self.old not in S.free_variables(n)[0]:
            return n
        hit = self.memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == S.LETTER:
            out = S.letter(n.args[0], self.new)
        elif k == S.MOD:
            out = S.mod(n.args[0], n.args[1], self.new)
        elif k == S.COUNT and n.args[1] == self.new:
            raise S.FormulaError(f"renaming {self.old}->{self.new} would be captured")
        else:
            out = S.rebuild(n, tuple(self.go(c) for c in n.children))
        self.memo[n.id] = out
        return out


@dataclass
class DagStats:
    nodes: int
    depth: int
    lifts: int

    def to_json(self) -> dict:
        return {"nodes": self.nodes, "depth": self.depth, "lifts": self.lifts}


def compile_model(model: TransformerModel, r: int = 2, s: int = 2, average: str = "direct") -> S.Node:
    return UpperCompiler(Precision(r, s), average).compile(model)


def compile_model_with_stats(model: TransformerModel, r: int = 2, s: int = 2,
                             average: str = "direct") -> tuple[S.Node, DagStats]:
    uc = UpperCompiler(Precision(r, s), average)
    sentence = uc.compile(model)
    return sentence, DagStats(S.dag_size(sentence), S.dag_depth(sentence), uc.lifter.lifts)
