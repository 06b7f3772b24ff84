"""Hash-consed formula DAG for FOC[+;MOD].

Every constructor returns the unique shared node for its structure, so
structural equality is pointer equality (``a is b``).  Node ids increase in
construction order and are used wherever a deterministic order is needed.
"""

from __future__ import annotations

import sys
import threading
from fractions import Fraction
from typing import Iterable, Iterator

from .terms import IDENT_RE, CountTerm, as_fraction

# core constructors
TRUE = "T"
FALSE = "F"
LETTER = "Q"
MOD = "MOD"
CMP = "CMP"
NOT = "NOT"
AND = "AND"
OR = "OR"
EXISTS = "EX"
FORALL = "ALL"
COUNT = "CNT"
# sugar, removed by desugar()
IMPLIES = "IMP"
IFF = "IFF"
EXISTS_POS = "EXP"
FORALL_POS = "ALLP"

CORE_KINDS = frozenset({TRUE, FALSE, LETTER, MOD, CMP, NOT, AND, OR, EXISTS, FORALL, COUNT})
SUGAR_KINDS = frozenset({IMPLIES, IFF, EXISTS_POS, FORALL_POS})
RESERVED_WORDS = frozenset({"T", "F", "E", "A", "Ep", "Ap", "MOD", "def"})


class FormulaError(ValueError):
    pass


class Node:
    __slots__ = ("kind", "args", "id", "_hash", "_free", "__weakref__")

    def __init__(self, kind, args, ident):
        self.kind = kind
        self.args = args
        self.id = ident
        self._hash = hash((kind, ident))
        self._free = None

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __lt__(self, other):
        return self.id < other.id

    def __repr__(self):
        from .printer import render_formula

        text = render_formula(self)
        if len(text) > 120:
            text = text[:117] + "..."
        return f"<{self.kind}#{self.id} {text}>"

    def __reduce__(self):
        # re-intern on unpickle so identity-based equality survives worker processes
        return (_rebuild, (self.kind, self.args))

    @property
    def children(self) -> tuple[Node, ...]:
        k = self.kind
        if k in (NOT,):
            return (self.args[0],)
        if k in (AND, OR, IMPLIES, IFF):
            return self.args
        if k in (EXISTS, FORALL, EXISTS_POS, FORALL_POS):
            return (self.args[1],)
        if k == COUNT:
            return (self.args[2],)
        return ()

    # convenience accessors
    @property
    def left(self) -> Node:
        return self.args[0]

    @property
    def right(self) -> Node:
        return self.args[1]

    @property
    def child(self) -> Node:
        return self.children[0]

    @property
    def var(self) -> str:
        """Bound variable of a quantifier (count var for E/A/#, position var for Ep/Ap)."""
        return self.args[0]

    @property
    def pos_var(self) -> str:
        if self.kind == COUNT:
            return self.args[1]
        if self.kind in (LETTER,):
            return self.args[1]
        if self.kind == MOD:
            return self.args[2]
        if self.kind in (EXISTS_POS, FORALL_POS):
            return self.args[0]
        raise AttributeError(self.kind)

    def free_vars(self) -> tuple[frozenset[str], frozenset[str]]:
        return free_variables(self)


class _Table:
    def __init__(self):
        self.nodes: dict[tuple, Node] = {}
        self.lock = threading.Lock()
        self.next_id = 0


_TABLE = _Table()


def _intern(kind: str, args: tuple) -> Node:
    key = (kind, args)
    node = _TABLE.nodes.get(key)
    if node is not None:
        return node
    with _TABLE.lock:
        node = _TABLE.nodes.get(key)
        if node is None:
            node = Node(kind, args, _TABLE.next_id)
            _TABLE.next_id += 1
            _TABLE.nodes[key] = node
    return node


def _rebuild(kind, args):
    return _intern(kind, args)


def table_size() -> int:
    return len(_TABLE.nodes)


def _check_ident(name: str, what: str) -> str:
    if not isinstance(name, str) or not IDENT_RE.match(name) or name in RESERVED_WORDS:
        raise FormulaError(f"malformed {what} variable name {name!r}")
    return name


def _check_node(n) -> Node:
    if not isinstance(n, Node):
        raise TypeError(f"expected a formula node, got {type(n).__name__}")
    return n


# --- raw constructors: no simplification, exact structure -----------------

def true() -> Node:
    return _intern(TRUE, ())


def false() -> Node:
    return _intern(FALSE, ())


def letter(symbol: str, p: str) -> Node:
    return _intern(LETTER, (symbol, _check_ident(p, "position")))


def mod(r: int, m: int, p: str) -> Node:
    r, m = int(r), int(m)
    if m <= 0:
        raise FormulaError(f"modulus must be positive, got {m}")
    if r < 0:
        raise FormulaError(f"residue must be non-negative, got {r}")
    return _intern(MOD, (r % m, m, _check_ident(p, "position")))


def compare(lhs: CountTerm, op: str, rhs: CountTerm) -> Node:
    if op not in ("=", "<"):
        raise FormulaError(f"core comparison must be = or <, got {op!r}")
    if not isinstance(lhs, CountTerm):
        lhs = CountTerm(lhs)
    if not isinstance(rhs, CountTerm):
        rhs = CountTerm(rhs)
    return _intern(CMP, (op, lhs, rhs))


def not_(f: Node) -> Node:
    return _intern(NOT, (_check_node(f),))


def and_(a: Node, b: Node) -> Node:
    return _intern(AND, (_check_node(a), _check_node(b)))


def or_(a: Node, b: Node) -> Node:
    return _intern(OR, (_check_node(a), _check_node(b)))


def implies(a: Node, b: Node) -> Node:
    return _intern(IMPLIES, (_check_node(a), _check_node(b)))


def iff(a: Node, b: Node) -> Node:
    return _intern(IFF, (_check_node(a), _check_node(b)))


def exists(x: str, f: Node) -> Node:
    return _intern(EXISTS, (_check_ident(x, "count"), _check_node(f)))


def forall(x: str, f: Node) -> Node:
    return _intern(FORALL, (_check_ident(x, "count"), _check_node(f)))


def count_eq(x: str, p: str, f: Node) -> Node:
    return _intern(COUNT, (_check_ident(x, "count"), _check_ident(p, "position"), _check_node(f)))


def exists_pos(p: str, f: Node) -> Node:
    return _intern(EXISTS_POS, (_check_ident(p, "position"), _check_node(f)))


def forall_pos(p: str, f: Node) -> Node:
    return _intern(FORALL_POS, (_check_ident(p, "position"), _check_node(f)))


def rebuild(node: Node, children: tuple[Node, ...]) -> Node:
    """Same constructor as ``node`` with new children."""
    k = node.kind
    if k == NOT:
        return not_(children[0])
    if k in (AND, OR, IMPLIES, IFF):
        return _intern(k, (children[0], children[1]))
    if k in (EXISTS, FORALL, EXISTS_POS, FORALL_POS):
        return _intern(k, (node.args[0], children[0]))
    if k == COUNT:
        return count_eq(node.args[0], node.args[1], children[0])
    return node


# --- smart constructors: constant folding, used by the transformations -----

def neg(f: Node) -> Node:
    if f.kind == TRUE:
        return false()
    if f.kind == FALSE:
        return true()
    if f.kind == NOT:
        return f.args[0]
    return not_(f)


def conj(items: Iterable[Node]) -> Node:
    """Right-nested conjunction; drops ⊤, absorbs ⊥, removes duplicates."""
    seen: list[Node] = []
    ids = set()
    for f in _flatten(items, AND):
        if f.kind == FALSE:
            return false()
        if f.kind == TRUE or f.id in ids:
            continue
        ids.add(f.id)
        seen.append(f)
    for f in seen:
        if f.kind == NOT and f.args[0].id in ids:
            return false()
    if not seen:
        return true()
    out = seen[-1]
    for f in reversed(seen[:-1]):
        out = and_(f, out)
    return out


def disj(items: Iterable[Node]) -> Node:
    seen: list[Node] = []
    ids = set()
    for f in _flatten(items, OR):
        if f.kind == TRUE:
            return true()
        if f.kind == FALSE or f.id in ids:
            continue
        ids.add(f.id)
        seen.append(f)
    for f in seen:
        if f.kind == NOT and f.args[0].id in ids:
            return true()
    if not seen:
        return false()
    out = seen[-1]
    for f in reversed(seen[:-1]):
        out = or_(f, out)
    return out


def _flatten(items: Iterable[Node], kind: str) -> Iterator[Node]:
    for f in items:
        if f.kind == kind:
            stack = [f]
            while stack:
                g = stack.pop()
                if g.kind == kind:
                    stack.append(g.args[1])
                    stack.append(g.args[0])
                else:
                    yield g
        else:
            yield f


def conjuncts(f: Node) -> list[Node]:
    return list(_flatten([f], AND))


def disjuncts(f: Node) -> list[Node]:
    return list(_flatten([f], OR))


def ite(c: Node, a: Node, b: Node) -> Node:
    """(c ∧ a) ∨ (¬c ∧ b) with folding."""
    if c.kind == TRUE or a is b:
        return a
    if c.kind == FALSE:
        return b
    if a.kind == TRUE and b.kind == FALSE:
        return c
    if a.kind == FALSE and b.kind == TRUE:
        return neg(c)
    if a.kind == FALSE:
        return conj([neg(c), b])
    if b.kind == FALSE:
        return conj([c, a])
    if a.kind == TRUE:
        return disj([c, b])
    if b.kind == TRUE:
        return disj([neg(c), a])
    return or_(and_(c, a), and_(neg(c), b))


def eq_atom(lhs: CountTerm, rhs: CountTerm) -> Node:
    """``lhs = rhs``, folded to ⊤/⊥ when both sides are constant."""
    d = lhs - rhs
    if d.is_constant():
        return true() if d.constant == 0 else false()
    return compare(lhs, "=", rhs)


def lt_atom(lhs: CountTerm, rhs: CountTerm) -> Node:
    d = lhs - rhs
    if d.is_constant():
        return true() if d.constant < 0 else false()
    return compare(lhs, "<", rhs)


# --- structural queries ----------------------------------------------------

def free_variables(f: Node) -> tuple[frozenset[str], frozenset[str]]:
    """(free position variables, free count variables), cached per node."""
    if f._free is not None:
        return f._free
    # iterative post-order so deep DAGs do not hit the recursion limit
    stack = [f]
    while stack:
        n = stack[-1]
        if n._free is not None:
            stack.pop()
            continue
        pending = [c for c in n.children if c._free is None]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        n._free = _free_local(n)
    return f._free


_EMPTY = frozenset()


def _free_local(n: Node):
    k = n.kind
    if k in (TRUE, FALSE):
        return (_EMPTY, _EMPTY)
    if k == LETTER:
        return (frozenset([n.args[1]]), _EMPTY)
    if k == MOD:
        return (frozenset([n.args[2]]), _EMPTY)
    if k == CMP:
        return (_EMPTY, n.args[1].variables | n.args[2].variables)
    if k == NOT:
        return n.args[0]._free
    if k in (AND, OR, IMPLIES, IFF):
        a, b = n.args[0]._free, n.args[1]._free
        return (a[0] | b[0], a[1] | b[1])
    if k in (EXISTS, FORALL):
        p, c = n.args[1]._free
        return (p, c - {n.args[0]})
    if k in (EXISTS_POS, FORALL_POS):
        p, c = n.args[1]._free
        return (p - {n.args[0]}, c)
    if k == COUNT:
        p, c = n.args[2]._free
        return (p - {n.args[1]}, c | {n.args[0]})
    raise FormulaError(f"unknown node kind {k}")


def is_sentence(f: Node) -> bool:
    p, c = free_variables(f)
    return not p and not c


def iter_nodes(f: Node) -> Iterator[Node]:
    """Every distinct node reachable from ``f`` (each once)."""
    seen = set()
    stack = [f]
    while stack:
        n = stack.pop()
        if n.id in seen:
            continue
        seen.add(n.id)
        yield n
        stack.extend(n.children)


def dag_size(f: Node) -> int:
    return sum(1 for _ in iter_nodes(f))


def dag_depth(f: Node) -> int:
    depth: dict[int, int] = {}
    order = sorted(iter_nodes(f), key=lambda n: n.id)
    for n in order:  # children always have smaller ids than parents
        depth[n.id] = 1 + max((depth[c.id] for c in n.children), default=0)
    return depth[f.id]


def tree_size(f: Node) -> int:
    size: dict[int, int] = {}
    for n in sorted(iter_nodes(f), key=lambda n: n.id):
        size[n.id] = 1 + sum(size[c.id] for c in n.children)
    return size[f.id]


def is_quantifier_free(f: Node) -> bool:
    return not any(
        n.kind in (EXISTS, FORALL, COUNT, EXISTS_POS, FORALL_POS) for n in iter_nodes(f)
    )


def has_sugar(f: Node) -> bool:
    return any(n.kind in SUGAR_KINDS for n in iter_nodes(f))


def all_names(f: Node) -> set[str]:
    """Every variable name occurring in ``f`` (free or bound, either sort)."""
    names: set[str] = set()
    for n in iter_nodes(f):
        k = n.kind
        if k == LETTER:
            names.add(n.args[1])
        elif k == MOD:
            names.add(n.args[2])
        elif k == CMP:
            names |= n.args[1].variables | n.args[2].variables
        elif k in (EXISTS, FORALL, EXISTS_POS, FORALL_POS):
            names.add(n.args[0])
        elif k == COUNT:
            names.add(n.args[0])
            names.add(n.args[1])
    return names


def letters_used(f: Node) -> set[str]:
    return {n.args[0] for n in iter_nodes(f) if n.kind == LETTER}


def moduli_used(f: Node) -> set[int]:
    return {n.args[1] for n in iter_nodes(f) if n.kind == MOD}


# --- rewriting helpers -----------------------------------------------------

def transform(f: Node, fn, memo: dict | None = None) -> Node:
    """Bottom-up rewrite: ``fn(node, new_children) -> Node``; memoized per node."""
    memo = {} if memo is None else memo
    order = sorted(iter_nodes(f), key=lambda n: n.id)
    for n in order:
        if n.id in memo:
            continue
        kids = tuple(memo[c.id] for c in n.children)
        memo[n.id] = fn(n, kids)
    return memo[f.id]


def rename_free_pos(f: Node, old: str, new: str) -> Node:
    """Rename free occurrences of position variable ``old`` to ``new``.

    Raises if ``new`` would be captured by a binder inside ``f``.
    """
    memo: dict[int, Node] = {}

    def go(n: Node) -> Node:
        if old not in free_variables(n)[0]:
            return n
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == LETTER:
            out = letter(n.args[0], new)
        elif k == MOD:
            out = mod(n.args[0], n.args[1], new)
        elif k in (COUNT,) and n.args[1] == new or k in (EXISTS_POS, FORALL_POS) and n.args[0] == new:
            raise FormulaError(f"renaming {old}->{new} would be captured")
        else:
            out = rebuild(n, tuple(go(c) for c in n.children))
        memo[n.id] = out
        return out

    return _deep(go, f)


def rename_free_count(f: Node, old: str, new: str) -> Node:
    return substitute_count(f, old, CountTerm.var(new))


def substitute_count(f: Node, name: str, term: CountTerm, fold: bool = False) -> Node:
    """Replace free count variable ``name`` by ``term`` (capture-checked)."""
    memo: dict[int, Node] = {}
    danger = term.variables

    def go(n: Node) -> Node:
        if name not in free_variables(n)[1]:
            return n
        hit = memo.get(n.id)
        if hit is not None:
            return hit
        k = n.kind
        if k == CMP:
            op, lhs, rhs = n.args
            lhs, rhs = lhs.substitute(name, term), rhs.substitute(name, term)
            if fold:
                out = eq_atom(lhs, rhs) if op == "=" else lt_atom(lhs, rhs)
            else:
                out = compare(lhs, op, rhs)
        elif k in (EXISTS, FORALL) and n.args[0] in danger:
            raise FormulaError(f"substituting for {name} would capture {n.args[0]}")
        elif k == COUNT and n.args[0] == name:
            new = term.coeffs[0][0] if len(term.coeffs) == 1 and term.constant == 0 \
                and term.coeffs[0][1] == 1 else None
            if new is None:
                raise FormulaError(f"cannot substitute a compound term for counted variable {name}")
            out = count_eq(new, n.args[1], go(n.args[2]))
        elif fold and k == NOT:
            out = neg(go(n.args[0]))
        elif fold and k == AND:
            out = conj([go(n.args[0]), go(n.args[1])])
        elif fold and k == OR:
            out = disj([go(n.args[0]), go(n.args[1])])
        else:
            out = rebuild(n, tuple(go(c) for c in n.children))
        memo[n.id] = out
        return out

    return _deep(go, f)


_DEEP = threading.local()


def _deep(fn, arg):
    """Run a recursive ``fn(arg)`` on a thread with a large stack."""
    if getattr(_DEEP, "active", False):
        return fn(arg)
    if sys.getrecursionlimit() < 200000:
        sys.setrecursionlimit(200000)
    box: dict = {}

    def run():
        _DEEP.active = True
        try:
            box["out"] = fn(arg)
        except BaseException as e:  # re-raised in the caller
            box["err"] = e

    old = threading.stack_size()
    threading.stack_size(1 << 30)
    try:
        t = threading.Thread(target=run)
        t.start()
    finally:
        threading.stack_size(old)
    t.join()
    if "err" in box:
        raise box["err"]
    return box["out"]


def deep_call(fn, *args, **kwargs):
    return _deep(lambda _: fn(*args, **kwargs), None)


def fresh_namer(avoid: Iterable[str], prefix: str = "x"):
    """Deterministic gensym: ``prefix1, prefix2, ...`` skipping names in ``avoid``."""
    used = set(avoid)
    counter = [0]

    def fresh(hint: str | None = None) -> str:
        base = prefix if hint is None else hint
        while True:
            counter[0] += 1
            name = f"{base}{counter[0]}"
            if name not in used and name not in RESERVED_WORDS:
                used.add(name)
                return name

    return fresh


def rational(x) -> Fraction:
    return as_fraction(x)
