from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from focmod.logic import BINARY, CLS
from focmod.transformer.executor import (ZeroVarianceError, apply_layer, classify, encode, feed_forward,
                                         input_matrix, self_attention)
from focmod.transformer.model import FFN, Head, Layer, LayerNorm, PEChannel, TransformerModel, sinusoidal
from focmod.transformer.weights import ONE, ZERO, W, WeightEntry


def zeros(r, c):
    return [[ZERO] * c for _ in range(r)]


def const_model(d=2, out_b=0, layers=None, pe=None):
    we = {s: [W(i + (1 if s == "1" else 0)) for i in range(d)] for s in ["0", "1", CLS]}
    return TransformerModel(BINARY, d, we, pe or [PEChannel("zero")] * d, layers or [], [ZERO] * d, W(out_b))


def rand_matrix(rng, r, c):
    return [[W(Fraction(int(x), 4)) for x in row] for row in rng.integers(-4, 5, size=(r, c))]


def test_weight_entries_exact_and_float():
    assert WeightEntry.q(Fraction(6, 8)).value == Fraction(3, 4)
    assert float(WeightEntry.sin(1, 4)) == 1.0
    assert WeightEntry.cos(1, 4).exact() == 0
    assert WeightEntry.cos(1, 5).exact() is None
    assert abs(float(WeightEntry.cos(1, 5)) - math.cos(2 * math.pi / 5)) < 1e-15
    assert WeightEntry.from_json(WeightEntry.sin(1, 5).to_json()) == WeightEntry.sin(1, 5)


def test_uniform_attention_is_mean():
    rng = np.random.default_rng(0)
    d = 3
    A = rng.normal(size=(d, 6))
    wv = rand_matrix(rng, d, d)
    head = Head(zeros(1, d), zeros(1, d), wv)
    out = self_attention(head, A)
    V = np.array([[float(x) for x in row] for row in wv]) @ A
    expect = V.mean(axis=1, keepdims=True)
    assert np.allclose(out, np.repeat(expect, 6, axis=1), rtol=1e-12, atol=1e-12)


def test_attention_null_value_and_single_position():
    rng = np.random.default_rng(1)
    d = 2
    A = rng.normal(size=(d, 4))
    head = Head(rand_matrix(rng, 1, d), rand_matrix(rng, 1, d), zeros(d, d))
    assert np.all(self_attention(head, A) == 0)
    wv = rand_matrix(rng, d, d)
    head = Head(rand_matrix(rng, 1, d), rand_matrix(rng, 1, d), wv)
    A1 = A[:, :1]
    V = np.array([[float(x) for x in row] for row in wv]) @ A1
    assert np.allclose(self_attention(head, A1), V, atol=1e-15)


def test_softmax_attention_matches_direct_formula():
    rng = np.random.default_rng(2)
    d, dk = 2, 2
    A = rng.normal(size=(d, 5))
    wq, wk, wv = rand_matrix(rng, dk, d), rand_matrix(rng, dk, d), rand_matrix(rng, d, d)
    out = self_attention(Head(wq, wk, wv), A)
    f = lambda m: np.array([[float(x) for x in row] for row in m])
    Q, K, V = f(wq) @ A, f(wk) @ A, f(wv) @ A
    for q in range(5):
        s = np.array([Q[:, q] @ K[:, p] / math.sqrt(d) for p in range(5)])
        a = np.exp(s) / np.exp(s).sum()
        assert np.allclose(out[:, q], V @ a, atol=1e-12)


def test_feed_forward_min_gadget():
    # residual plus FFN b - ReLU(b - a) gives min(a, b) in channel 1
    ffn = FFN([[W(-1), ONE]], [ZERO], [[ZERO], [W(-1)]], [ZERO, ZERO])
    A = np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 5.0]])
    out = A + feed_forward(ffn, A)
    assert list(out[1]) == [0.0, 0.0, 2.0]
    zero = FFN(zeros(2, 2), [ZERO] * 2, zeros(2, 2), [ZERO] * 2)
    assert np.all(feed_forward(zero, A) == 0)


def test_identity_layer_leaves_activations_unchanged():
    d = 3
    layer = Layer([Head(zeros(1, d), zeros(1, d), zeros(d, d))], FFN(zeros(1, d), [ZERO], zeros(d, 1), [ZERO] * d))
    A = np.random.default_rng(3).normal(size=(d, 4))
    assert np.array_equal(apply_layer(layer, A), A)


def test_layer_norm_zero_variance_and_bound():
    d = 2
    ln = LayerNorm([ONE] * d, [ZERO] * d, ZERO)
    layer = Layer([Head(zeros(1, d), zeros(1, d), zeros(d, d))], FFN(zeros(1, d), [ZERO], zeros(d, 1), [ZERO] * d),
                  ln1=ln)
    with pytest.raises(ZeroVarianceError):
        apply_layer(layer, np.ones((d, 3)))
    d = 4
    ln = LayerNorm([ONE] * d, [ZERO] * d, W(Fraction(1, 100)))
    layer = Layer([Head(zeros(1, d), zeros(1, d), zeros(d, d))], FFN(zeros(1, d), [ZERO], zeros(d, 1), [ZERO] * d),
                  ln1=ln)
    A = np.random.default_rng(4).normal(size=(d, 7)) * 10
    out = apply_layer(layer, A)
    assert np.all(np.abs(out) <= math.sqrt(d) + 1e-12)


def test_encode_without_layers_is_embedding():
    m = const_model(d=2)
    A = encode(m, "01")
    assert np.array_equal(A, input_matrix(m, "01"))
    assert A.shape == (2, 3)
    assert list(A[:, 1]) == [0.0, 1.0] and list(A[:, 2]) == [1.0, 2.0]


def test_positional_encoding_periodic_and_exact():
    m = TransformerModel(BINARY, 2, {s: [ZERO, ZERO] for s in ["0", "1", CLS]}, sinusoidal([Fraction(1, 5)]), [],
                         [ZERO, ZERO], ZERO)
    A = encode(m, "0" * 12)
    for p in range(13):
        assert abs(A[0, p] - math.sin(2 * math.pi * p / 5)) < 1e-14
        assert A[:, p].tolist() == A[:, p % 5].tolist()  # bit-exact periodicity
    z = TransformerModel(BINARY, 2, {s: [ZERO, ZERO] for s in ["0", "1", CLS]}, sinusoidal([0]), [],
                         [ZERO, ZERO], ZERO)
    assert encode(z, "01").tolist() == [[0.0] * 3, [1.0] * 3]


def test_classify_boundaries():
    c = classify(const_model(out_b=0), "01")
    assert c.accept and c.probability == 0.5 and c.margin == 0
    c = classify(const_model(out_b=1), "")
    assert c.accept and abs(c.probability - 1 / (1 + math.exp(-1))) < 1e-15


def test_model_json_round_trip():
    rng = np.random.default_rng(5)
    d = 2
    layer = Layer([Head(rand_matrix(rng, 1, d), rand_matrix(rng, 1, d), rand_matrix(rng, d, d))],
                  FFN(rand_matrix(rng, 3, d), [W(1)] * 3, rand_matrix(rng, d, 3), [ZERO] * d),
                  ln2=LayerNorm([ONE] * d, [ZERO] * d, W(Fraction(1, 8))))
    m = const_model(d=d, layers=[layer], pe=sinusoidal([Fraction(1, 3)]))
    text = m.dumps()
    assert '"focmod-model/1"' in text
    m2 = TransformerModel.loads(text)
    assert m2.dumps() == text
    for w in BINARY.strings(3):
        assert classify(m, w) == classify(m2, w)


def test_deterministic_activations():
    m = const_model(d=2, pe=sinusoidal([Fraction(1, 7)]))
    assert np.array_equal(encode(m, "0110"), encode(m, "0110"))
