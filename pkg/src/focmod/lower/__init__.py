"""Compiler from normal-form sentences to transformer classifiers."""

from __future__ import annotations

from .compiler import (ChannelMeta, CompileError, build_count_layer, compile_chi, compile_normal_form,
                       compile_psi, compile_sentence, integer_atom, mask_cls, psi_model)
from .fragments import Fragment, cancel_residual, concat, relabel, to_model

__all__ = ["ChannelMeta", "CompileError", "build_count_layer", "compile_chi", "compile_normal_form",
           "compile_psi", "compile_sentence", "integer_atom", "mask_cls", "psi_model", "Fragment",
           "cancel_residual", "concat", "relabel", "to_model"]
