"""Transformer classifiers: model format, exact weights and a float64 executor."""

from __future__ import annotations

from .executor import (Classification, NonFiniteActivation, ZeroVarianceError, classify, encode,
                       feed_forward, input_matrix, layer_norm, self_attention)
from .model import FFN, SCHEMA, Head, Layer, LayerNorm, PEChannel, TransformerModel, sinusoidal
from .weights import ONE, ZERO, W, WeightEntry

__all__ = ["Classification", "NonFiniteActivation", "ZeroVarianceError", "classify", "encode",
           "feed_forward", "input_matrix", "layer_norm", "self_attention", "FFN", "SCHEMA", "Head",
           "Layer", "LayerNorm", "PEChannel", "TransformerModel", "sinusoidal", "ONE", "ZERO", "W",
           "WeightEntry"]
