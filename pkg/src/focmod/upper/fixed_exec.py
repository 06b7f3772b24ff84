"""Bit-exact fixed-precision execution of a transformer classifier."""

from __future__ import annotations

from dataclasses import dataclass

from ..transformer.model import TransformerModel
from .fixed import FixedPoint, Ops, Precision
from .pipeline import (IntBackend, RoundedModel, after_attention, floor_average, input_column, output,
                       pair_terms, projections, round_model, symbols)


@dataclass
class FixedRun:
    accept: bool
    output: FixedPoint
    trace: list[list[list[FixedPoint]]]  # per stage: d x n' activations

    def __iter__(self):
        # unpacks as (accept, trace)
        return iter((self.accept, self.trace))


_CACHE_KEY = "_fixed_cache"


def _rounded(model: TransformerModel, prec: Precision) -> tuple[RoundedModel, Ops]:
    cache = model.__dict__.setdefault(_CACHE_KEY, {})
    hit = cache.get(prec)
    if hit is None:
        hit = (round_model(model, prec), Ops(prec))
        cache[prec] = hit
    return hit


def fixed_exec(model: TransformerModel, w, r: int = 2, s: int = 2) -> FixedRun:
    prec = Precision(r, s)
    rm, ops = _rounded(model, prec)
    return run_rounded(rm, ops, w)


def run_rounded(rm: RoundedModel, ops: Ops, w) -> FixedRun:
    prec = rm.prec
    be = IntBackend(ops)
    syms = symbols(w, rm.alphabet)
    cols = [input_column(rm, ops, a, p) for p, a in enumerate(syms)]
    trace = [_snapshot(cols, prec)]
    for layer in rm.layers:
        proj = [[projections(be, h, x) for x in cols] for h in layer.heads]
        new_cols = []
        for q, x in enumerate(cols):
            contexts = []
            for hp in proj:
                qv = hp[q][0]
                es, nums = [], []
                for p in range(len(cols)):
                    e, num = pair_terms(be, rm.d, qv, hp[p][1], hp[p][2])
                    es.append(e)
                    nums.append(num)
                den = floor_average(es)
                ctx = [ops.div(floor_average([num[i] for num in nums]), den) for i in range(rm.d)]
                contexts.append(ctx)
            new_cols.append(after_attention(be, layer, x, contexts))
        cols = new_cols
        trace.append(_snapshot(cols, prec))
    pre = output(be, rm, cols[0])
    return FixedRun(pre >= 0, FixedPoint(prec.r, prec.s, pre), trace)


def _snapshot(cols: list[list[int]], prec: Precision) -> list[list[FixedPoint]]:
    d = len(cols[0])
    return [[FixedPoint(prec.r, prec.s, col[i]) for col in cols] for i in range(d)]
