from __future__ import annotations

from collections import Counter

from . import syntax as S
from .terms import render_term

_PREC = {S.IFF: 1, S.IMPLIES: 2, S.OR: 3, S.AND: 4}
_OPS = {S.IFF: "<->", S.IMPLIES: "->", S.OR: "|", S.AND: "&"}
UNARY = 5


def _prec(n: S.Node) -> int:
    return _PREC.get(n.kind, UNARY)


def render_formula(f: S.Node, refs: dict[int, str] | None = None) -> str:
    """Canonical text; ``parse_formula(render_formula(f)) is f``."""
    refs = refs or {}
    memo: dict[int, str] = {}

    def go(n: S.Node, top: bool = False) -> str:
        if not top and n.id in refs:
            return "@" + refs[n.id]
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == S.TRUE:
            out = "T"
        elif k == S.FALSE:
            out = "F"
        elif k == S.LETTER:
            out = f"Q_{n.args[0]}({n.args[1]})"
        elif k == S.MOD:
            out = f"MOD({n.args[0]},{n.args[1]},{n.args[2]})"
        elif k == S.CMP:
            out = f"{render_term(n.args[1])} {n.args[0]} {render_term(n.args[2])}"
        elif k == S.NOT:
            out = "!" + body(n.args[0])
        elif k in _PREC:
            p = _PREC[k]
            a, b = n.args
            left = go(a)
            if _prec(a) <= p and a.id not in refs:
                left = f"({left})"
            right = go(b)
            if _prec(b) < p and b.id not in refs:
                right = f"({right})"
            out = f"{left} {_OPS[k]} {right}"
        elif k == S.EXISTS:
            out = f"E {n.args[0]}. {body(n.args[1])}"
        elif k == S.FORALL:
            out = f"A {n.args[0]}. {body(n.args[1])}"
        elif k == S.EXISTS_POS:
            out = f"Ep {n.args[0]}. {body(n.args[1])}"
        elif k == S.FORALL_POS:
            out = f"Ap {n.args[0]}. {body(n.args[1])}"
        elif k == S.COUNT:
            out = f"#[{n.args[0]}] {n.args[1]}. {body(n.args[2])}"
        else:
            raise S.FormulaError(f"cannot render node kind {k}")
        memo[n.id] = out
        return out

    def body(n: S.Node) -> str:
        text = go(n)
        if _prec(n) < UNARY and n.id not in refs:
            return f"({text})"
        return text

    return S._deep(lambda x: go(x, top=True), f)


def render_sentence_file(alphabet, f: S.Node, share_threshold: int = 40) -> str:
    """Sentence file text; large shared subformulas become ``@name := ...`` lines."""
    parents: Counter[int] = Counter()
    nodes = sorted(S.iter_nodes(f), key=lambda n: n.id)
    for n in nodes:
        for c in n.children:
            parents[c.id] += 1
    size: dict[int, int] = {}
    refs: dict[int, str] = {}
    for n in nodes:
        size[n.id] = 1 + sum(1 if c.id in refs else size[c.id] for c in n.children)
        if n is not f and parents[n.id] > 1 and size[n.id] >= share_threshold:
            refs[n.id] = f"n{n.id}"
    lines = ["alphabet: " + " ".join(alphabet)]
    for n in nodes:
        if n.id in refs:
            lines.append(f"@{refs[n.id]} := {render_formula(n, refs)}")
    lines.append(render_formula(f, refs))
    return "\n".join(lines) + "\n"
