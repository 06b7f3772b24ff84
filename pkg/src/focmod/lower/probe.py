"""Numeric probes of fragments and gadgets, used by the checks and tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..transformer.executor import apply_layer, encode
from .fragments import Fragment, SFFN, SLayer, to_dense_layer, to_model


def run_fragment(frag: Fragment, w: Sequence[str]) -> np.ndarray:
    """Activations (d x n') of a fragment on ``w``."""
    return encode(to_model(frag, {}), w)


def run_layers(frag: Fragment, A: np.ndarray) -> np.ndarray:
    """Apply a fragment's layers to a given activation matrix (no embeddings)."""
    for i, layer in enumerate(frag.layers, 1):
        A = apply_layer(to_dense_layer(layer, frag.d), A, i)
    return A


def run_ffn(ffn: SFFN, d: int, A: np.ndarray) -> np.ndarray:
    """``A + ffn(A)``: one attention-free layer with its residual."""
    return apply_layer(to_dense_layer(SLayer([], ffn), d), A)


def count_inputs(xs: Sequence[int], alpha: float, d: int) -> np.ndarray:
    """Column ``(0, ..., alpha*x_1, ..., alpha*x_k, alpha)`` of height d."""
    col = np.zeros((d, 1))
    k = len(xs)
    for j, x in enumerate(xs):
        col[d - (k + 1) + j, 0] = alpha * x
    col[d - 1, 0] = alpha
    return col
