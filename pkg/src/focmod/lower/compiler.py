"""Compile normal-form sentences into transformer classifiers.

Layout of the compiled model (bottom to top):

* position formulas psi_1..psi_k, each masked at CLS, side by side;
* one uniform-attention layer writing (x_1/n', ..., x_k/n', 1/n') into the
  top k+1 channels;
* a stack of gadget layers for chi reading those top channels and leaving
  +-1/n' in the last channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

from ..logic import syntax as S
from ..logic.alphabet import CLS, Alphabet
from ..logic.desugar import desugar
from ..logic.printer import render_formula
from ..normal_form import POS, NormalForm, normalize
from ..transformer.model import PEChannel, TransformerModel
from ..transformer.weights import WeightEntry
from .fragments import (SFFN, Fragment, SHead, SLayer, cancel_residual_sparse, concat, concat_all,
                        empty_fragment, relabel, shift, to_model)

CONSTRUCTION = "normal-form/count-layer/chi-gadgets"


class CompileError(ValueError):
    pass


@dataclass
class ChannelMeta:
    """Channel roles used by the invariant checks in the tests."""

    truth_channel: int
    psi_channels: list[int] = field(default_factory=list)  # boolean after the psi layers
    cls_channel: int = -1
    count_slots: list[int] = field(default_factory=list)
    psi_depth: int = 0  # layers before the count layer

    def to_json(self) -> dict:
        return {"truth_channel": self.truth_channel, "psi_channels": self.psi_channels,
                "cls_channel": self.cls_channel, "count_slots": self.count_slots,
                "psi_depth": self.psi_depth}


# --- position formulas ---------------------------------------------------------

def _single_layer(frag: Fragment, ffn: SFFN, cancel: bool) -> Fragment:
    if cancel:
        ffn = cancel_residual_sparse(ffn, frag.d)
    return Fragment(frag.alphabet, frag.d, frag.we, frag.pe, frag.layers + [SLayer([], ffn)])


def letter_fragment(alphabet: Alphabet, a: str) -> Fragment:
    """Channel 0 holds 1[a], channel 1 the constant cos 0; output 1[a] on top."""
    frag = empty_fragment(alphabet, 2)
    frag.we[a][0] = WeightEntry.q(1)
    frag.pe[1] = PEChannel("cos", Fraction(0))
    ffn = SFFN()
    h = ffn.unit({0: 1})
    ffn.out(1, h, 1)
    return _single_layer(frag, ffn, cancel=True)


def mod_fragment(alphabet: Alphabet, r: int, m: int) -> Fragment:
    """``p ≡ r (mod m)`` via the cosine of the angle between p and r."""
    if m == 1:
        return const_fragment(alphabet, True)
    frag = empty_fragment(alphabet, 2)
    xi = Fraction(1, m)
    frag.pe[0] = PEChannel("sin", xi)
    frag.pe[1] = PEChannel("cos", xi)
    ffn = SFFN()
    h = ffn.unit({0: WeightEntry.sin(r, m), 1: WeightEntry.cos(r, m)}, bias=0)
    # bias -cos(2π/m): cos of the angle is 1 on residue r and at most cos(2π/m) elsewhere
    ffn.b1[h] = _negated_cos(m)
    ffn.out(1, h, WeightEntry.rcos1m(1, m))
    return _single_layer(frag, ffn, cancel=True)


def _negated_cos(m: int) -> WeightEntry:
    # -cos(2π/m) = cos(2π(1/2 - 1/m))
    return WeightEntry("cos", (Fraction(1, 2) - Fraction(1, m)) % 1)


def const_fragment(alphabet: Alphabet, value: bool) -> Fragment:
    frag = empty_fragment(alphabet, 1)
    if value:
        for s in frag.we:
            frag.we[s][0] = WeightEntry.q(1)
    return frag


def not_fragment(child: Fragment) -> Fragment:
    ffn = SFFN()
    h = ffn.unit({child.truth: 1})
    ffn.out(child.truth, h, -1)
    ffn.out_bias(child.truth, 1)
    return _single_layer(child, ffn, cancel=True)


def minmax_fragment(f1: Fragment, f2: Fragment, op: str) -> Fragment:
    """min (op "and") or max (op "or") of the two truth channels."""
    both = concat(f1, f2)
    x, y = f1.truth, both.truth
    ffn = SFFN()
    if op == "and":
        h = ffn.unit({y: 1, x: -1})
        ffn.out(y, h, -1)
    else:
        h = ffn.unit({x: 1, y: -1})
        ffn.out(y, h, 1)
    return _single_layer(both, ffn, cancel=False)


def compile_psi(psi: S.Node, alphabet: Alphabet, memo: dict | None = None) -> Fragment:
    """Fragment whose last channel is 1[psi holds at p] (CLS column unspecified)."""
    memo = {} if memo is None else memo
    psi = desugar(psi)

    def go(n: S.Node) -> Fragment:
        if n.id in memo:
            return memo[n.id]
        k = n.kind
        if k == S.TRUE:
            out = const_fragment(alphabet, True)
        elif k == S.FALSE:
            out = const_fragment(alphabet, False)
        elif k == S.LETTER:
            if n.args[0] not in alphabet:
                raise CompileError(f"letter {n.args[0]!r} not in the alphabet")
            out = letter_fragment(alphabet, n.args[0])
        elif k == S.MOD:
            out = mod_fragment(alphabet, n.args[0], n.args[1])
        elif k == S.NOT:
            out = not_fragment(go(n.child))
        elif k in (S.AND, S.OR):
            out = minmax_fragment(go(n.left), go(n.right), "and" if k == S.AND else "or")
        else:
            raise CompileError(f"position formula may not contain {k}")
        memo[n.id] = out
        return out

    return S.deep_call(go, psi)


def not_cls_fragment(alphabet: Alphabet) -> Fragment:
    frag = empty_fragment(alphabet, 1)
    for a in alphabet:
        frag.we[a][0] = WeightEntry.q(1)
    return frag


def mask_cls(frag: Fragment) -> Fragment:
    """Force the truth channel to 0 at the CLS column."""
    return minmax_fragment(frag, not_cls_fragment(frag.alphabet), "and")


def build_count_layer(masked: list[Fragment], alphabet: Alphabet) -> tuple[Fragment, ChannelMeta]:
    """Masked psi fragments plus one averaging layer; counts land in the top k+1 channels."""
    k = len(masked)
    body = concat_all(masked, alphabet)
    truths, off = [], 0
    for f in masked:
        off += f.d
        truths.append(off - 1)
    u = empty_fragment(alphabet, k + 2)
    u.we[CLS][0] = WeightEntry.q(1)
    base = concat(body, u)
    cls = body.d
    slots = [cls + 1 + i for i in range(k + 1)]
    head = SHead(1)
    for t, s in zip(truths, slots):
        head.wv[(s, t)] = WeightEntry.q(1)
    head.wv[(slots[-1], cls)] = WeightEntry.q(1)
    frag = Fragment(alphabet, base.d, base.we, base.pe, base.layers + [SLayer([head], SFFN())])
    meta = ChannelMeta(frag.d - 1, truths, cls, slots, base.depth)
    return frag, meta


# --- count formula chi ----------------------------------------------------------

def integer_atom(atom: S.Node, count_vars: tuple[str, ...]) -> tuple[str, list[int], int]:
    """``(op, [c_1..c_k], c_0)`` with integer coefficients, op in {">", "="}.

    ``t1 < t2`` becomes ``t2 - t1 > 0``; ``=`` keeps ``t1 - t2``.
    """
    op, lhs, rhs = atom.args
    t = lhs - rhs
    if op == "<":
        t = -t
    stray = t.variables - set(count_vars)
    if stray:
        raise CompileError(f"count atom mentions unknown variables {sorted(stray)}")
    coeffs = [t.coeff(x) for x in count_vars]
    den = lcm(t.constant.denominator, *(c.denominator for c in coeffs))
    return (">" if op == "<" else "="), [int(c * den) for c in coeffs], int(t.constant * den)


def atom_layer(op: str, coeffs: list[int], c0: int) -> SFFN:
    """One FFN on the k+1 input slots (alpha*x_1..alpha*x_k, alpha) writing +-alpha."""
    k = len(coeffs)
    one = k

    def lin(shift_by: int) -> dict:
        d = {i: c for i, c in enumerate(coeffs) if c}
        if c0 + shift_by:
            d[one] = c0 + shift_by
        return d

    ffn = SFFN()
    if op == ">":
        terms = [(lin(0), 2), (lin(-1), -2), ({one: 1}, -1)]
    else:
        terms = [(lin(1), 2), (lin(0), -4), (lin(-1), 2), ({one: 1}, -1)]
    for inputs, weight in terms:
        h = ffn.unit(inputs)
        ffn.out(one, h, weight)
    return cancel_residual_sparse(ffn, k + 1)


def _chi_atom(op: str, coeffs: list[int], c0: int, alphabet: Alphabet) -> Fragment:
    k = len(coeffs)
    frag = empty_fragment(alphabet, k + 1)
    frag.layers.append(SLayer([], atom_layer(op, coeffs, c0)))
    return frag


def _chi_not(child: Fragment) -> Fragment:
    t = child.truth
    ffn = SFFN()
    pos = ffn.unit({t: 1})
    neg = ffn.unit({t: -1})
    ffn.out(t, pos, -2)
    ffn.out(t, neg, 2)
    return _single_layer(child, ffn, cancel=False)


def _chi_binary(x1: Fragment, x2: Fragment, op: str, k: int) -> Fragment:
    both = concat(x1, x2)
    top = both.d - (k + 1)
    low = x1.d - (k + 1)
    copy = SFFN()
    for j in range(k + 1):
        pos = copy.unit({top + j: 1})
        neg = copy.unit({top + j: -1})
        copy.out(low + j, pos, 1)
        copy.out(low + j, neg, -1)
    layers = [SLayer([], copy)] + both.layers
    xt, yt = x1.truth, both.truth
    ffn = SFFN()
    if op == "and":
        h = ffn.unit({yt: 1, xt: -1})
        ffn.out(yt, h, -1)
    else:
        h = ffn.unit({xt: 1, yt: -1})
        ffn.out(yt, h, 1)
    layers.append(SLayer([], ffn))
    return Fragment(both.alphabet, both.d, both.we, both.pe, layers)


def compile_chi(chi: S.Node, count_vars: tuple[str, ...], alphabet: Alphabet) -> Fragment:
    """Gadget stack: input in the top k+1 channels, sign of the truth in the last."""
    k = len(count_vars)
    chi = desugar(chi)
    memo: dict[int, Fragment] = {}

    def go(n: S.Node) -> Fragment:
        if n.id in memo:
            return memo[n.id]
        kind = n.kind
        if kind in (S.TRUE, S.FALSE):
            # constant: 1 > 0 or 0 > 0, which keeps the +-alpha margin
            out = _chi_atom(">", [0] * k, 1 if kind == S.TRUE else 0, alphabet)
        elif kind == S.CMP:
            out = _chi_atom(*integer_atom(n, count_vars), alphabet)
        elif kind == S.NOT:
            out = _chi_not(go(n.child))
        elif kind in (S.AND, S.OR):
            out = _chi_binary(go(n.left), go(n.right), "and" if kind == S.AND else "or", k)
        else:
            raise CompileError(f"count formula may not contain {kind}")
        memo[n.id] = out
        return out

    return S.deep_call(go, chi)


# --- whole sentences --------------------------------------------------------------

def compile_normal_form(nf: NormalForm, alphabet: Alphabet) -> TransformerModel:
    k = nf.k
    memo: dict = {}
    masked = [mask_cls(compile_psi(psi, alphabet, memo)) for psi in nf.psis]
    counter, cmeta = build_count_layer(masked, alphabet)
    chi = compile_chi(nf.chi, nf.count_vars, alphabet)

    # counts move to the very top; chi sits right below C's residue
    d_c = counter.d
    base = d_c - (k + 1)
    d = base + chi.d
    mapping = {d_c - (k + 1) + j: d - (k + 1) + j for j in range(k + 1)}
    lower = relabel(counter, mapping, d)
    upper = shift(chi, base, d)
    frag = Fragment(alphabet, d, lower.we, lower.pe, lower.layers + upper.layers)
    cmeta = ChannelMeta(d - 1, cmeta.psi_channels, cmeta.cls_channel,
                        [mapping[s] for s in cmeta.count_slots], cmeta.psi_depth)
    meta = {
        "truth_channel": d - 1,
        "k": k,
        "count_vars": list(nf.count_vars),
        "psi": [render_formula(p) for p in nf.psis],
        "chi": render_formula(nf.chi),
        "construction": CONSTRUCTION,
        "channels": cmeta.to_json(),
    }
    return to_model(frag, {d - 1: 1}, 0, meta)


def compile_sentence(sentence: S.Node, alphabet: Alphabet) -> TransformerModel:
    """Normalize, then compile; accepts exactly the words satisfying the sentence."""
    nf = normalize(sentence)
    return compile_normal_form(nf, alphabet)


def psi_model(psi: S.Node, alphabet: Alphabet) -> TransformerModel:
    """A single position formula as a model; the truth channel is the output."""
    frag = compile_psi(psi, alphabet)
    return to_model(frag, {frag.truth: 1}, 0, {"truth_channel": frag.truth})


def chi_model_layers(chi: S.Node, count_vars: tuple[str, ...], alphabet: Alphabet) -> Fragment:
    return compile_chi(chi, count_vars, alphabet)
