"""Sparse encoder fragments and the block operations used to assemble them.

A fragment is a transformer encoder without an output layer.  Weights are
kept in dictionaries keyed by (row, column) while compiling so that block
operations are cheap; ``to_model`` densifies the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..logic.alphabet import CLS, Alphabet
from ..transformer.model import FFN, Head, Layer, PEChannel, TransformerModel
from ..transformer.weights import ONE, ZERO, W, WeightEntry


@dataclass
class SFFN:
    dff: int = 0
    w1: dict = field(default_factory=dict)  # (hidden, input) -> entry
    b1: dict = field(default_factory=dict)  # hidden -> entry
    w2: dict = field(default_factory=dict)  # (output, hidden) -> entry
    b2: dict = field(default_factory=dict)  # output -> entry

    def unit(self, inputs: dict, bias=0) -> int:
        """Add a ReLU unit ``max(0, Σ w·x_i + bias)``; returns its index."""
        h = self.dff
        self.dff += 1
        for i, wt in inputs.items():
            wt = W(wt)
            if not wt.is_zero():
                self.w1[(h, i)] = wt
        bias = W(bias)
        if not bias.is_zero():
            self.b1[h] = bias
        return h

    def out(self, channel: int, unit: int, weight) -> None:
        weight = W(weight)
        if not weight.is_zero():
            self.w2[(channel, unit)] = weight

    def out_bias(self, channel: int, value) -> None:
        value = W(value)
        if not value.is_zero():
            self.b2[channel] = value


@dataclass
class SHead:
    dk: int = 1
    wq: dict = field(default_factory=dict)
    wk: dict = field(default_factory=dict)
    wv: dict = field(default_factory=dict)

    def is_null(self) -> bool:
        return not self.wv


@dataclass
class SLayer:
    heads: list[SHead] = field(default_factory=list)
    ffn: SFFN = field(default_factory=SFFN)


@dataclass
class Fragment:
    alphabet: Alphabet
    d: int
    we: dict[str, dict[int, WeightEntry]] = field(default_factory=dict)
    pe: dict[int, PEChannel] = field(default_factory=dict)
    layers: list[SLayer] = field(default_factory=list)

    @property
    def truth(self) -> int:
        return self.d - 1

    @property
    def depth(self) -> int:
        return len(self.layers)


def empty_fragment(alphabet: Alphabet, d: int = 0) -> Fragment:
    return Fragment(alphabet, d, {s: {} for s in [CLS, *alphabet]})


def relabel(frag: Fragment, mapping: dict[int, int], new_d: int) -> Fragment:
    """Move channel ``i`` to ``mapping[i]`` inside a fragment of width ``new_d``.

    Channels not in ``mapping`` keep their index.  Unused channels are zero
    and untouched by every layer.
    """
    def m(i):
        return mapping.get(i, i)

    if len({m(i) for i in range(frag.d)}) != frag.d or any(m(i) >= new_d for i in range(frag.d)):
        raise ValueError("relabel mapping must be injective and within the new width")
    out = Fragment(frag.alphabet, new_d,
                   {s: {m(i): v for i, v in e.items()} for s, e in frag.we.items()},
                   {m(i): c for i, c in frag.pe.items()})
    for layer in frag.layers:
        heads = [SHead(h.dk, {(r, m(i)): v for (r, i), v in h.wq.items()},
                       {(r, m(i)): v for (r, i), v in h.wk.items()},
                       {(m(i), m(j)): v for (i, j), v in h.wv.items()}) for h in layer.heads]
        f = layer.ffn
        ffn = SFFN(f.dff, {(h, m(i)): v for (h, i), v in f.w1.items()}, dict(f.b1),
                   {(m(i), h): v for (i, h), v in f.w2.items()}, {m(i): v for i, v in f.b2.items()})
        out.layers.append(SLayer(heads, ffn))
    return out


def shift(frag: Fragment, offset: int, new_d: int) -> Fragment:
    return relabel(frag, {i: i + offset for i in range(frag.d)}, new_d)


def _merge_layers(a: SLayer | None, b: SLayer | None) -> SLayer:
    """Block-diagonal union of two layers already living in the same width."""
    layers = [x for x in (a, b) if x is not None]
    heads = [h for x in layers for h in x.heads if not h.is_null()]
    ffn = SFFN()
    for x in layers:
        f = x.ffn
        base = ffn.dff
        ffn.w1.update({(h + base, i): v for (h, i), v in f.w1.items()})
        ffn.b1.update({h + base: v for h, v in f.b1.items()})
        ffn.w2.update({(i, h + base): v for (i, h), v in f.w2.items()})
        for i, v in f.b2.items():
            if i in ffn.b2:
                raise ValueError("overlapping output bias in block merge")
            ffn.b2[i] = v
        ffn.dff += f.dff
    return SLayer(heads, ffn)


def concat(f1: Fragment, f2: Fragment) -> Fragment:
    """``f1 ⊕ f2``: outputs stacked, f1 in the low channels.

    The shallower fragment is padded with identity layers at the top.
    """
    if tuple(f1.alphabet) != tuple(f2.alphabet):
        raise ValueError("cannot concatenate fragments over different alphabets")
    d = f1.d + f2.d
    a = relabel(f1, {}, d)
    b = shift(f2, f1.d, d)
    out = Fragment(f1.alphabet, d,
                   {s: {**a.we[s], **b.we[s]} for s in a.we},
                   {**a.pe, **b.pe})
    for i in range(max(a.depth, b.depth)):
        la = a.layers[i] if i < a.depth else None
        lb = b.layers[i] if i < b.depth else None
        out.layers.append(_merge_layers(la, lb))
    return out


def concat_all(frags: list[Fragment], alphabet: Alphabet) -> Fragment:
    out = empty_fragment(alphabet)
    for f in frags:
        out = concat(out, f)
    return out


def stack(lower: Fragment, upper_layers: list[SLayer]) -> Fragment:
    return Fragment(lower.alphabet, lower.d, lower.we, lower.pe, lower.layers + list(upper_layers))


def cancel_residual_sparse(ffn: SFFN, d: int) -> SFFN:
    """FFN ``f₋`` with ``f₋(x) + x = f(x)``, via ReLU(x) - ReLU(-x) = x."""
    out = SFFN(ffn.dff, dict(ffn.w1), dict(ffn.b1), dict(ffn.w2), dict(ffn.b2))
    for i in range(d):
        pos = out.unit({i: 1})
        neg = out.unit({i: -1})
        out.out(i, pos, -1)
        out.out(i, neg, 1)
    return out


def cancel_residual(ffn: FFN) -> FFN:
    """Dense version: stacks ``[W1; I; -I]`` and ``[W2, -I, I]``."""
    d = len(ffn.b2)
    w1 = [list(r) for r in ffn.w1]
    w1 += [[ONE if j == i else ZERO for j in range(d)] for i in range(d)]
    w1 += [[W(-1) if j == i else ZERO for j in range(d)] for i in range(d)]
    b1 = list(ffn.b1) + [ZERO] * (2 * d)
    w2 = [list(ffn.w2[i]) + [W(-1) if j == i else ZERO for j in range(d)]
          + [ONE if j == i else ZERO for j in range(d)] for i in range(d)]
    return FFN(w1, b1, w2, list(ffn.b2))


def identity_layer() -> SLayer:
    return SLayer([], SFFN())


def to_dense_layer(layer: SLayer, d: int) -> Layer:
    heads = []
    for h in layer.heads or [SHead()]:
        heads.append(Head(_dense(h.wq, h.dk, d), _dense(h.wk, h.dk, d), _dense(h.wv, d, d)))
    f = layer.ffn
    dff = max(f.dff, 1)
    ffn = FFN(_dense(f.w1, dff, d), _dense_vec(f.b1, dff), _dense(f.w2, d, dff), _dense_vec(f.b2, d))
    return Layer(heads, ffn)


def _dense(entries: dict, rows: int, cols: int):
    m = [[ZERO] * cols for _ in range(rows)]
    for (r, c), v in entries.items():
        m[r][c] = v
    return m


def _dense_vec(entries: dict, n: int):
    v = [ZERO] * n
    for i, x in entries.items():
        v[i] = x
    return v


def to_model(frag: Fragment, out_w: dict[int, object], out_b=0, meta: dict | None = None) -> TransformerModel:
    d = frag.d
    we = {s: _dense_vec(frag.we.get(s, {}), d) for s in [CLS, *frag.alphabet]}
    pe = [frag.pe.get(i, PEChannel("zero")) for i in range(d)]
    layers = [to_dense_layer(layer, d) for layer in frag.layers]
    return TransformerModel(frag.alphabet, d, we, pe, layers,
                            _dense_vec({i: W(v) for i, v in out_w.items()}, d), W(out_b), meta or {})
