"""Transformer classifier data model and its JSON file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from ..logic.alphabet import CLS, Alphabet
from ..logic.terms import format_rational
from .weights import ZERO, W, WeightEntry, trig_float

SCHEMA = "focmod-model/1"

Matrix = list[list[WeightEntry]]
Vector = list[WeightEntry]


def zeros(rows: int, cols: int) -> Matrix:
    return [[ZERO] * cols for _ in range(rows)]


def matrix(rows) -> Matrix:
    return [[W(x) for x in row] for row in rows]


def vector(xs) -> Vector:
    return [W(x) for x in xs]


@dataclass(frozen=True)
class PEChannel:
    """One positional-encoding row: sin(2π·xi·p), cos(2π·xi·p) or constant 0."""

    fn: str
    xi: Fraction = Fraction(0)

    def __post_init__(self):
        if self.fn not in ("sin", "cos", "zero"):
            raise ValueError(f"bad PE function {self.fn!r}")

    def turns(self, p: int) -> Fraction:
        # reduce mod 1 first: exact periodicity at any length
        return (self.xi * p) % 1

    def value(self, p: int) -> float:
        if self.fn == "zero":
            return 0.0
        return trig_float(self.fn, self.turns(p))

    def entry(self, p: int) -> WeightEntry:
        if self.fn == "zero":
            return ZERO
        t = self.turns(p)
        return WeightEntry(self.fn, t)

    def to_json(self):
        if self.fn == "zero":
            return {"fn": "zero"}
        return {"fn": self.fn, "xi": format_rational(self.xi)}

    @staticmethod
    def from_json(obj) -> PEChannel:
        return PEChannel(obj["fn"], Fraction(obj.get("xi", "0")))


def sinusoidal(xis) -> list[PEChannel]:
    """Standard sinusoidal PE: a (sin, cos) pair per frequency."""
    out = []
    for xi in xis:
        xi = Fraction(xi)
        out += [PEChannel("sin", xi), PEChannel("cos", xi)]
    return out


@dataclass
class Head:
    wq: Matrix  # d_K x d
    wk: Matrix  # d_K x d
    wv: Matrix  # d x d

    @property
    def d_k(self) -> int:
        return len(self.wq)


@dataclass
class FFN:
    w1: Matrix  # d_FF x d
    b1: Vector
    w2: Matrix  # d x d_FF
    b2: Vector

    @property
    def d_ff(self) -> int:
        return len(self.w1)


@dataclass
class LayerNorm:
    gamma: Vector
    beta: Vector
    eps: WeightEntry = ZERO


@dataclass
class Layer:
    heads: list[Head]
    ffn: FFN
    ln1: LayerNorm | None = None
    ln2: LayerNorm | None = None


@dataclass
class TransformerModel:
    alphabet: Alphabet
    d: int
    we: dict[str, Vector]
    pe: list[PEChannel]
    layers: list[Layer]
    out_w: Vector
    out_b: WeightEntry
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        d = self.d
        if set(self.we) != set(self.alphabet) | {CLS}:
            raise ValueError("word embedding must cover the alphabet and CLS")
        for s, v in self.we.items():
            _check_len(v, d, f"WE({s})")
        _check_len(self.pe, d, "PE")
        _check_len(self.out_w, d, "output W")
        for li, layer in enumerate(self.layers, 1):
            if not layer.heads:
                raise ValueError(f"layer {li} has no heads")
            for hi, h in enumerate(layer.heads, 1):
                tag = f"layer {li} head {hi}"
                if len(h.wk) != len(h.wq):
                    raise ValueError(f"{tag}: W_Q and W_K differ in d_K")
                for name, m, rows in (("W_Q", h.wq, len(h.wq)), ("W_K", h.wk, len(h.wq)), ("W_V", h.wv, d)):
                    _check_shape(m, rows, d, f"{tag} {name}")
            f = layer.ffn
            dff = len(f.w1)
            _check_shape(f.w1, dff, d, f"layer {li} W1")
            _check_len(f.b1, dff, f"layer {li} b1")
            _check_shape(f.w2, d, dff, f"layer {li} W2")
            _check_len(f.b2, d, f"layer {li} b2")
            for ln in (layer.ln1, layer.ln2):
                if ln is not None:
                    _check_len(ln.gamma, d, f"layer {li} LN gamma")
                    _check_len(ln.beta, d, f"layer {li} LN beta")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    # -- JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        def m(x):
            return [[e.to_json() for e in row] for row in x]

        def v(x):
            return [e.to_json() for e in x]

        layers = []
        for layer in self.layers:
            obj = {
                "heads": [{"wq": m(h.wq), "wk": m(h.wk), "wv": m(h.wv)} for h in layer.heads],
                "ffn": {"w1": m(layer.ffn.w1), "b1": v(layer.ffn.b1),
                        "w2": m(layer.ffn.w2), "b2": v(layer.ffn.b2)},
            }
            for name in ("ln1", "ln2"):
                ln = getattr(layer, name)
                if ln is not None:
                    obj[name] = {"gamma": v(ln.gamma), "beta": v(ln.beta), "eps": ln.eps.to_json()}
            layers.append(obj)
        return {
            "schema": SCHEMA,
            "alphabet": list(self.alphabet),
            "d": self.d,
            "pe": [c.to_json() for c in self.pe],
            "we": {s: v(self.we[s]) for s in [CLS, *self.alphabet]},
            "layers": layers,
            "output": {"w": v(self.out_w), "b": self.out_b.to_json()},
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=False) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @staticmethod
    def from_json(obj: dict) -> TransformerModel:
        if obj.get("schema") != SCHEMA:
            raise ValueError(f"unsupported model schema {obj.get('schema')!r}")

        def m(x):
            return [[WeightEntry.from_json(e) for e in row] for row in x]

        def v(x):
            return [WeightEntry.from_json(e) for e in x]

        d = int(obj["d"])
        pe = obj["pe"]
        if isinstance(pe, dict) and "xi" in pe:
            channels = sinusoidal(pe["xi"])
        else:
            channels = [PEChannel.from_json(c) for c in pe]
        layers = []
        for lo in obj["layers"]:
            heads = [Head(m(h["wq"]), m(h["wk"]), m(h["wv"])) for h in lo["heads"]]
            f = lo["ffn"]
            ffn = FFN(m(f["w1"]), v(f["b1"]), m(f["w2"]), v(f["b2"]))
            lns = []
            for name in ("ln1", "ln2"):
                ln = lo.get(name)
                lns.append(None if ln is None else
                           LayerNorm(v(ln["gamma"]), v(ln["beta"]), WeightEntry.from_json(ln.get("eps", "0"))))
            layers.append(Layer(heads, ffn, *lns))
        return TransformerModel(
            alphabet=Alphabet(obj["alphabet"]), d=d,
            we={s: v(e) for s, e in obj["we"].items()}, pe=channels, layers=layers,
            out_w=v(obj["output"]["w"]), out_b=WeightEntry.from_json(obj["output"]["b"]),
            meta=obj.get("meta", {}),
        )

    @staticmethod
    def loads(text: str) -> TransformerModel:
        return TransformerModel.from_json(json.loads(text))

    @staticmethod
    def load(path) -> TransformerModel:
        with open(path) as fh:
            return TransformerModel.loads(fh.read())


def _check_len(v, n, what):
    if len(v) != n:
        raise ValueError(f"{what}: expected length {n}, got {len(v)}")


def _check_shape(m, rows, cols, what):
    if len(m) != rows or any(len(r) != cols for r in m):
        got = f"{len(m)}x{len(m[0]) if m else 0}"
        raise ValueError(f"{what}: expected {rows}x{cols}, got {got}")
