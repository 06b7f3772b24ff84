"""Fixed-precision execution and the compiler from transformers to sentences."""

from __future__ import annotations

from .compiler import BitFamily, DagStats, ExtraFamily, UpperCompiler, compile_model, compile_model_with_stats
from .fixed import ExtraPrecision, FixedPoint, Ops, Precision, bit_of, round_to_fixed
from .fixed_exec import FixedRun, fixed_exec
from .lift import Lifter, lift_function
from .random_model import ModelShape, random_model

__all__ = ["BitFamily", "DagStats", "ExtraFamily", "UpperCompiler", "compile_model", "compile_model_with_stats",
           "ExtraPrecision", "FixedPoint", "Ops", "Precision", "bit_of", "round_to_fixed", "FixedRun",
           "fixed_exec", "Lifter", "lift_function", "ModelShape", "random_model"]
