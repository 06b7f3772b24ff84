"""Concrete syntax for FOC[+;MOD] sentences.

Grammar (whitespace-insensitive)::

    formula := iff
    iff     := imp ("<->" iff)?
    imp     := or ("->" imp)?
    or      := and ("|" or)?
    and     := unary ("&" and)?
    unary   := "!" unary | "E" CVAR "." unary | "A" CVAR "." unary
             | "Ep" PVAR "." unary | "Ap" PVAR "." unary
             | "#[" CVAR "]" PVAR "." unary | atom
    atom    := "T" | "F" | "Q_" SYM "(" PVAR ")" | "MOD(" NAT "," NAT "," PVAR ")"
             | "(" formula ")" | "@" NAME | term CMP term
    term    := ["-"] tatom (("+" | "-") tatom)*
    tatom   := RATIONAL ["*" CVAR] | CVAR

Binary connectives associate to the right.  Quantifier bodies are unary
formulas, so ``Ap p. Q_0(p) | Ap p. Q_1(p)`` is a disjunction of two
universals; parenthesize to extend a body.

A sentence file starts with ``alphabet: a b ...``, may define shared
subformulas on lines ``@name := formula`` and ends with the main formula.
Lines starting with ``%`` are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import syntax as S
from .alphabet import Alphabet, DELIMITERS
from .terms import CountTerm

KEYWORDS = {"T", "F", "E", "A", "Ep", "Ap"}


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str  # punct, num, ident, letter, mod, ref, eof
    text: str
    pos: int


_PUNCT = ["<->", "->", "!=", "<=", ">=", "#[", "(", ")", "]", ".", ",", "*", "+", "-",
          "!", "&", "|", "=", "<", ">"]
_NUM_RE = re.compile(r"\d+(?:/\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Lexer:
    def __init__(self, text: str, base_line: int = 1):
        self.text = text
        self.base_line = base_line

    def where(self, pos: int) -> tuple[int, int]:
        before = self.text[:pos]
        line = before.count("\n") + self.base_line
        col = pos - (before.rfind("\n") + 1) + 1
        return line, col

    def error(self, msg: str, pos: int) -> ParseError:
        return ParseError(msg, *self.where(pos))

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        t, i, n = self.text, 0, len(self.text)
        while i < n:
            c = t[i]
            if c.isspace():
                i += 1
                continue
            if t.startswith("Q_", i):
                j = i + 2
                while j < n and t[j] != "(" and not t[j].isspace():
                    j += 1
                if j == i + 2:
                    raise self.error("empty symbol after Q_", i)
                out.append(Token("letter", t[i + 2:j], i))
                i = j
                continue
            if t.startswith("MOD(", i) or t.startswith("MOD", i) and not _ident_continues(t, i + 3):
                out.append(Token("mod", "MOD", i))
                i += 3
                continue
            if c == "@":
                m2 = re.compile(r"[A-Za-z0-9_]+").match(t, i + 1)
                if not m2:
                    raise self.error("expected a definition name after @", i)
                out.append(Token("ref", m2.group(0), i))
                i = m2.end()
                continue
            if c.isdigit():
                m = _NUM_RE.match(t, i)
                text = m.group(0)
                if m.end() < n and t[m.end()] == "/":
                    raise self.error("malformed rational", i)
                if "/" in text and int(text.split("/")[1]) == 0:
                    raise self.error("malformed rational (zero denominator)", i)
                out.append(Token("num", text, i))
                i = m.end()
                continue
            m = _IDENT_RE.match(t, i)
            if m:
                out.append(Token("ident", m.group(0), i))
                i = m.end()
                continue
            for p in _PUNCT:
                if t.startswith(p, i):
                    out.append(Token("punct", p, i))
                    i += len(p)
                    break
            else:
                raise self.error(f"unexpected character {c!r}", i)
        out.append(Token("eof", "", n))
        return out


def _ident_continues(t: str, j: int) -> bool:
    return j < len(t) and (t[j].isalnum() or t[j] == "_")


class _Parser:
    def __init__(self, text: str, alphabet: Alphabet | None, defs: dict | None, base_line: int = 1):
        self.lexer = _Lexer(text, base_line)
        self.toks = self.lexer.tokens()
        self.i = 0
        self.alphabet = alphabet
        self.defs = defs or {}

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return self.lexer.error(msg, tok.pos)

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            got = self.peek().text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")
        return self.next()

    def ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected a {what} variable")
        self.next()
        return tok.text

    # grammar
    def parse(self) -> S.Node:
        f = self.formula()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")
        return f

    def formula(self) -> S.Node:
        return self.iff()

    def iff(self) -> S.Node:
        left = self.imp()
        if self.at("<->"):
            self.next()
            return S.iff(left, self.iff())
        return left

    def imp(self) -> S.Node:
        left = self.or_()
        if self.at("->"):
            self.next()
            return S.implies(left, self.imp())
        return left

    def or_(self) -> S.Node:
        left = self.and_()
        if self.at("|"):
            self.next()
            return S.or_(left, self.or_())
        return left

    def and_(self) -> S.Node:
        left = self.unary()
        if self.at("&"):
            self.next()
            return S.and_(left, self.and_())
        return left

    def unary(self) -> S.Node:
        tok = self.peek()
        if self.at("!"):
            self.next()
            return S.not_(self.unary())
        if tok.kind == "ident" and tok.text in ("E", "A", "Ep", "Ap"):
            self.next()
            kind = "position" if tok.text in ("Ep", "Ap") else "count"
            var = self.ident(kind)
            self.expect(".")
            body = self.unary()
            try:
                return {
                    "E": S.exists, "A": S.forall, "Ep": S.exists_pos, "Ap": S.forall_pos
                }[tok.text](var, body)
            except S.FormulaError as e:
                raise self.error(str(e), tok) from None
        if self.at("#["):
            self.next()
            x = self.ident("count")
            self.expect("]")
            p = self.ident("position")
            self.expect(".")
            return S.count_eq(x, p, self.unary())
        return self.atom()

    def atom(self) -> S.Node:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "T":
            self.next()
            return S.true()
        if tok.kind == "ident" and tok.text == "F":
            self.next()
            return S.false()
        if tok.kind == "letter":
            self.next()
            sym = tok.text
            if self.alphabet is not None and sym not in self.alphabet:
                raise self.error(f"unknown symbol {sym!r} (alphabet: {' '.join(self.alphabet)})", tok)
            self.expect("(")
            p = self.ident("position")
            self.expect(")")
            return S.letter(sym, p)
        if tok.kind == "mod":
            self.next()
            self.expect("(")
            r = self.nat()
            self.expect(",")
            mtok = self.peek()
            m = self.nat()
            if m <= 0:
                raise self.error(f"modulus must be positive, got {m}", mtok)
            self.expect(",")
            p = self.ident("position")
            self.expect(")")
            return S.mod(r, m, p)
        if tok.kind == "ref":
            self.next()
            if tok.text not in self.defs:
                raise self.error(f"undefined reference @{tok.text}", tok)
            return self.defs[tok.text]
        if self.at("("):
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if tok.kind in ("num", "ident") or self.at("-"):
            return self.comparison()
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def nat(self) -> int:
        tok = self.peek()
        if tok.kind != "num" or "/" in tok.text:
            raise self.error("expected a natural number")
        self.next()
        return int(tok.text)

    def comparison(self) -> S.Node:
        lhs = self.term()
        tok = self.peek()
        if tok.kind != "punct" or tok.text not in ("=", "!=", "<", "<=", ">", ">="):
            raise self.error("expected a comparison operator")
        self.next()
        rhs = self.term()
        op = tok.text
        if op == "=":
            return S.compare(lhs, "=", rhs)
        if op == "<":
            return S.compare(lhs, "<", rhs)
        if op == ">":
            return S.compare(rhs, "<", lhs)
        if op == "!=":
            return S.not_(S.compare(lhs, "=", rhs))
        if op == "<=":
            return S.not_(S.compare(rhs, "<", lhs))
        return S.not_(S.compare(lhs, "<", rhs))  # >=

    def term(self) -> CountTerm:
        sign = 1
        if self.at("-"):
            self.next()
            sign = -1
        total = self.tatom().scale(sign)
        while self.at("+") or self.at("-"):
            op = self.next().text
            t = self.tatom()
            total = total + t if op == "+" else total - t
        return total

    def tatom(self) -> CountTerm:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            q = Fraction(tok.text)
            if self.at("*"):
                self.next()
                return CountTerm.var(self.ident("count"), q)
            return CountTerm.const(q)
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.next()
            return CountTerm.var(tok.text)
        raise self.error("expected a rational or a count variable")


def parse_formula(text: str, alphabet: Alphabet | None = None, defs: dict | None = None) -> S.Node:
    """Parse a single formula; symbols are checked against ``alphabet`` when given."""
    return _Parser(text, alphabet, defs).parse()


@dataclass
class SentenceFile:
    alphabet: Alphabet
    formula: S.Node


def parse_sentence_file(text: str, default_alphabet: Alphabet | None = None) -> SentenceFile:
    alphabet = default_alphabet
    defs: dict[str, S.Node] = {}
    body: list[str] = []
    body_start = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            body.append("")
            continue
        if line.startswith("alphabet:"):
            try:
                alphabet = Alphabet(line[len("alphabet:"):].split())
            except ValueError as e:
                raise ParseError(str(e), lineno, 1) from None
            body.append("")
            continue
        m = re.match(r"@([A-Za-z0-9_]+)\s*:=(.*)\Z", line)
        if m:
            name = m.group(1)
            if name in defs:
                raise ParseError(f"duplicate definition @{name}", lineno, 1)
            defs[name] = _Parser(m.group(2), alphabet, defs, lineno).parse()
            body.append("")
            continue
        if body_start is None:
            body_start = lineno
        body.append(raw)
    if alphabet is None:
        raise ParseError("missing 'alphabet:' header", 1, 1)
    main = "\n".join(body)
    if not main.strip():
        raise ParseError("no formula found", len(body) or 1, 1)
    f = _Parser(main, alphabet, defs).parse()
    return SentenceFile(alphabet, f)


__all__ = ["ParseError", "parse_formula", "parse_sentence_file", "SentenceFile", "DELIMITERS"]
