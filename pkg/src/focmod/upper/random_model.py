"""Random small transformer classifiers for differential testing."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from ..logic.alphabet import BINARY, CLS, Alphabet
from ..transformer.model import FFN, Head, Layer, LayerNorm, PEChannel, TransformerModel
from ..transformer.weights import W


@dataclass
class ModelShape:
    d: int = 2
    layers: int = 1
    heads: int = 1
    d_k: int = 1
    d_ff: int = 2
    layer_norm: bool = False
    weight_den: int = 4  # weights are multiples of 1/weight_den
    weight_max: int = 2


def random_model(seed: int, shape: ModelShape | None = None, alphabet: Alphabet = BINARY) -> TransformerModel:
    shape = shape or ModelShape()
    rng = random.Random(seed)
    d = shape.d

    def wt():
        k = shape.weight_max * shape.weight_den
        return W(Fraction(rng.randint(-k, k), shape.weight_den)) if rng.random() < 0.7 else W(0)

    def mat(rows, cols):
        return [[wt() for _ in range(cols)] for _ in range(rows)]

    we = {s: [wt() for _ in range(d)] for s in [CLS, *alphabet]}
    pe = []
    for _ in range(d):
        kind = rng.choice(["zero", "sin", "cos"])
        pe.append(PEChannel("zero") if kind == "zero" else PEChannel(kind, Fraction(1, rng.choice([2, 3, 4]))))
    layers = []
    for _ in range(shape.layers):
        heads = [Head(mat(shape.d_k, d), mat(shape.d_k, d), mat(d, d)) for _ in range(shape.heads)]
        ffn = FFN(mat(shape.d_ff, d), [wt() for _ in range(shape.d_ff)], mat(d, shape.d_ff), [wt() for _ in range(d)])
        lns = [None, None]
        if shape.layer_norm:
            lns = [LayerNorm([W(1)] * d, [W(0)] * d, W(Fraction(1, 4))) if rng.random() < 0.5 else None
                   for _ in range(2)]
        layers.append(Layer(heads, ffn, *lns))
    return TransformerModel(alphabet, d, we, pe, layers, [wt() for _ in range(d)], wt(),
                            {"generator": "random", "seed": seed})
