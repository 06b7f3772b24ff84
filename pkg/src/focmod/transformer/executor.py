"""Double-precision forward pass for transformer classifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..logic.alphabet import CLS
from .model import FFN, Head, Layer, LayerNorm, TransformerModel, _check_shape


class NonFiniteActivation(ArithmeticError):
    pass


class ZeroVarianceError(ArithmeticError):
    pass


def _arr(m) -> np.ndarray:
    if not m:
        return np.zeros((0, 0))
    if isinstance(m[0], list):
        return np.array([[float(e) for e in row] for row in m], dtype=float).reshape(len(m), len(m[0]))
    return np.array([float(e) for e in m], dtype=float)


class _Numeric:
    """Float copies of a model's weights, built once per model."""

    def __init__(self, model: TransformerModel):
        d = model.d
        self.we = {s: _arr(v) for s, v in model.we.items()}
        self.layers = []
        for layer in model.layers:
            heads = [(_arr(h.wq).reshape(len(h.wq), d), _arr(h.wk).reshape(len(h.wk), d), _arr(h.wv))
                     for h in layer.heads]
            # a head with W_V = 0 contributes exactly zero
            heads = [h for h in heads if np.any(h[2])]
            f = layer.ffn
            dff = len(f.w1)
            ffn = (_arr(f.w1).reshape(dff, d), _arr(f.b1), _arr(f.w2).reshape(d, dff), _arr(f.b2))
            lns = [None if ln is None else (_arr(ln.gamma), _arr(ln.beta), float(ln.eps))
                   for ln in (layer.ln1, layer.ln2)]
            self.layers.append((heads, ffn, lns))
        self.out_w = _arr(model.out_w)
        self.out_b = float(model.out_b)


def _numeric(model: TransformerModel) -> _Numeric:
    cache = model.__dict__.get("_numeric_cache")
    if cache is None:
        cache = _Numeric(model)
        model.__dict__["_numeric_cache"] = cache
    return cache


def _check(A: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(A)):
        i, p = np.argwhere(~np.isfinite(A))[0]
        raise NonFiniteActivation(f"non-finite activation at {where}, position {p}, channel {i}")


def _attention(wq, wk, wv, A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    if not np.any(wq) or not np.any(wk):
        # constant scores: softmax is uniform, so every column gets the mean
        v = (wv @ A).mean(axis=1, keepdims=True)
        return np.repeat(v, A.shape[1], axis=1)
    q = wq @ A
    k = wk @ A
    s = (q.T @ k) / math.sqrt(d)  # s[q, p]
    if not np.all(np.isfinite(s)):
        raise NonFiniteActivation("non-finite attention logit")
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    alpha = e / e.sum(axis=1, keepdims=True)
    return (wv @ A) @ alpha.T


def _ffn(w1, b1, w2, b2, A: np.ndarray) -> np.ndarray:
    h = np.maximum(0.0, w1 @ A + b1[:, None])
    return w2 @ h + b2[:, None]


def _layer_norm(gamma, beta, eps, A: np.ndarray, where: str) -> np.ndarray:
    mean = A.mean(axis=0, keepdims=True)
    var = ((A - mean) ** 2).mean(axis=0, keepdims=True)
    if eps == 0 and np.any(var == 0):
        p = int(np.argwhere(var[0] == 0)[0][0])
        raise ZeroVarianceError(f"zero variance under eps=0 at {where}, position {p}")
    z = (A - mean) / np.sqrt(var + eps)
    return gamma[:, None] * z + beta[:, None]


def self_attention(head: Head, A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    _check_shape(head.wv, d, d, "W_V")
    return _attention(_arr(head.wq).reshape(len(head.wq), d), _arr(head.wk).reshape(len(head.wk), d),
                      _arr(head.wv), A)


def feed_forward(ffn: FFN, A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    dff = len(ffn.w1)
    return _ffn(_arr(ffn.w1).reshape(dff, d), _arr(ffn.b1), _arr(ffn.w2).reshape(d, dff), _arr(ffn.b2), A)


def layer_norm(ln: LayerNorm, A: np.ndarray) -> np.ndarray:
    return _layer_norm(_arr(ln.gamma), _arr(ln.beta), float(ln.eps), A, "layer norm")


def apply_layer(layer: Layer, A: np.ndarray, index: int = 1) -> np.ndarray:
    d = A.shape[0]
    heads = [(_arr(h.wq).reshape(len(h.wq), d), _arr(h.wk).reshape(len(h.wk), d), _arr(h.wv))
             for h in layer.heads]
    f = layer.ffn
    dff = len(f.w1)
    ffn = (_arr(f.w1).reshape(dff, d), _arr(f.b1), _arr(f.w2).reshape(d, dff), _arr(f.b2))
    lns = [None if ln is None else (_arr(ln.gamma), _arr(ln.beta), float(ln.eps)) for ln in (layer.ln1, layer.ln2)]
    return _apply(heads, ffn, lns, A, index)


def _apply(heads, ffn, lns, A: np.ndarray, index: int) -> np.ndarray:
    A1 = A
    for wq, wk, wv in heads:
        A1 = A1 + _attention(wq, wk, wv, A)
    _check(A1, f"layer {index} attention")
    if lns[0] is not None:
        A1 = _layer_norm(*lns[0], A1, f"layer {index} ln1")
    A2 = A1 + _ffn(*ffn, A1)
    _check(A2, f"layer {index} ffn")
    if lns[1] is not None:
        A2 = _layer_norm(*lns[1], A2, f"layer {index} ln2")
    return A2


def input_matrix(model: TransformerModel, w: Sequence[str]) -> np.ndarray:
    num = _numeric(model)
    syms = [CLS, *w]
    A = np.empty((model.d, len(syms)))
    for p, s in enumerate(syms):
        if s not in num.we:
            raise ValueError(f"symbol {s!r} not in the alphabet")
        A[:, p] = num.we[s] + np.array([c.value(p) for c in model.pe])
    return A


def encode(model: TransformerModel, w: Sequence[str], trace: list | None = None) -> np.ndarray:
    """Final activation matrix (d x n'); ``trace`` collects every layer's output."""
    num = _numeric(model)
    A = input_matrix(model, w)
    if trace is not None:
        trace.append(A)
    for i, (heads, ffn, lns) in enumerate(num.layers, 1):
        A = _apply(heads, ffn, lns, A, i)
        if trace is not None:
            trace.append(A)
    return A


@dataclass(frozen=True)
class Classification:
    accept: bool
    margin: float  # pre-sigmoid value
    probability: float


def classify(model: TransformerModel, w: Sequence[str]) -> Classification:
    num = _numeric(model)
    A = encode(model, w)
    pre = float(num.out_w @ A[:, 0] + num.out_b)
    prob = 1.0 / (1.0 + math.exp(-pre)) if pre > -700 else 0.0
    return Classification(pre >= 0, pre, prob)
