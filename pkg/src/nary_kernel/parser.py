"""Lexer and parser for the `.nry` surface language.

Declarations start in column 1; continuation lines are indented.  Grammar:

    decl  := name ':' expr
           | name pattern* '=' expr
           | 'postulate' name ':' expr
           | '#expect' ('ok' | 'unsolved' | 'typeerror')
    expr  := '\\' binder+ '.' expr
           | 'let' name (':' expr)? '=' expr 'in' expr
           | pi / sigma / application chains (see below)

`->` is right-associative and binds loosest; `*` (pairs/Sigma) binds tighter;
application tightest.  Numerals abbreviate suc-towers.  `{e}` passes an
implicit argument explicitly; `(e : T)` annotates; `(a , b , c)` builds a
right-nested tuple.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S


class ParseError(Exception):
    def __init__(self, line: int, col: int, expected: str):
        super().__init__(f"{line}:{col}: expected {expected}")
        self.line = line
        self.col = col
        self.expected = expected


KEYWORDS = {
    "Set", "Level", "lzero", "lsuc", "lmax", "Nat", "zero", "suc", "List",
    "nil", "cons", "Unit", "tt", "Empty", "absurd", "Id", "refl", "J",
    "Lift", "lift", "lower", "fst", "snd",
}
_RESERVED = KEYWORDS | {"let", "in", "postulate"}

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t]+)|(?P<comment>--[^\n]*)|(?P<nl>\n)|(?P<arrow>->)"
    r"|(?P<pragma>#expect)|(?P<num>[0-9]+)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<sym>[(){}:=,.*\\])"
)


@dataclass(frozen=True)
class Token:
    kind: str       # name num sym arrow pragma eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError(line, col, f"a token (found {src[i]!r})")
        i = m.end()
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            col = 1
            continue
        if kind in ("ws", "comment"):
            col += len(text)
            continue
        toks.append(Token(kind, text, line, col))
        col += len(text)
    toks.append(Token("eof", "", line, col))
    return toks


# -- surface AST -------------------------------------------------------------

@dataclass
class Expr:
    span: tuple[int, int] = field(default=(0, 0), kw_only=True)


@dataclass
class EName(Expr):
    name: str = ""


@dataclass
class ENum(Expr):
    value: int = 0


@dataclass
class EHole(Expr):
    pass


@dataclass
class EKw(Expr):
    kw: str = ""


@dataclass
class EApp(Expr):
    fn: Expr = None
    arg: Expr = None
    implicit: bool = False


@dataclass
class ELam(Expr):
    binders: list[tuple[str, bool]] = field(default_factory=list)
    body: Expr = None


@dataclass
class EPi(Expr):
    name: str = "_"
    implicit: bool = False
    dom: Expr = None
    cod: Expr = None


@dataclass
class ESigma(Expr):
    name: str = "_"
    fst: Expr = None
    snd: Expr = None


@dataclass
class EPair(Expr):
    fst: Expr = None
    snd: Expr = None


@dataclass
class EAnn(Expr):
    term: Expr = None
    ty: Expr = None


@dataclass
class ELet(Expr):
    name: str = ""
    ann: Optional[Expr] = None
    bound: Expr = None
    body: Expr = None


# -- declarations ------------------------------------------------------------

@dataclass
class Decl:
    span: tuple[int, int]


@dataclass
class DSig(Decl):
    name: str
    ty: Expr


@dataclass
class DClause(Decl):
    name: str
    patterns: list[S.Pattern]
    rhs: Expr


@dataclass
class DPostulate(Decl):
    name: str
    ty: Expr


@dataclass
class DPragma(Decl):
    tag: str     # ok | unsolved | typeerror


class _P:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text:
            raise ParseError(t.line, t.col, f"'{text}'")
        return self.next()

    def err(self, expected: str):
        t = self.peek()
        raise ParseError(t.line, t.col, expected)

    # -- expressions ---------------------------------------------------------

    def expr(self) -> Expr:
        t = self.peek()
        if t.text == "\\":
            self.next()
            binders: list[tuple[str, bool]] = []
            while True:
                b = self.peek()
                if b.text == "{":
                    self.next()
                    n = self._binder_name()
                    self.expect("}")
                    binders.append((n, True))
                elif b.kind == "name" and b.text not in _RESERVED or b.text == "_":
                    self.next()
                    binders.append((b.text, False))
                else:
                    break
            if not binders:
                self.err("a binder")
            self.expect(".")
            body = self.expr()
            return ELam(binders, body, span=(t.line, t.col))
        if t.text == "let":
            self.next()
            n = self._binder_name()
            ann = None
            if self.peek().text == ":":
                self.next()
                ann = self.expr()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return ELet(n, ann, bound, body, span=(t.line, t.col))
        return self.arrow()

    def _binder_name(self) -> str:
        t = self.peek()
        if t.kind == "name" and t.text not in _RESERVED:
            self.next()
            return t.text
        self.err("a binder name")

    def arrow(self) -> Expr:
        t = self.peek()
        # dependent binders
        if t.text == "(" and self._is_dependent_binder():
            self.next()
            n = self._binder_name()
            self.expect(":")
            dom = self.expr()
            self.expect(")")
            if self.peek().kind == "arrow":
                self.next()
                cod = self.arrow()
                return EPi(n, False, dom, cod, span=(t.line, t.col))
            self.expect("*")
            snd = self.sigma_tail()
            return ESigma(n, dom, snd, span=(t.line, t.col))
        if t.text == "{":
            self.next()
            n = self._binder_name()
            self.expect(":")
            dom = self.expr()
            self.expect("}")
            if self.peek().kind != "arrow":
                self.err("'->'")
            self.next()
            cod = self.arrow()
            return EPi(n, True, dom, cod, span=(t.line, t.col))
        lhs = self.sigma_tail()
        if self.peek().kind == "arrow":
            self.next()
            cod = self.arrow()
            return EPi("_", False, lhs, cod, span=(t.line, t.col))
        return lhs

    def _is_dependent_binder(self) -> bool:
        # '(' name ':' ... ')' followed by '->' or '*': scan to the matching paren
        if not (self.peek(1).kind == "name" and self.peek(1).text not in _RESERVED
                and self.peek(2).text == ":"):
            return False
        depth = 0
        j = self.i
        while j < len(self.toks):
            tx = self.toks[j].text
            if tx in "({":
                depth += 1
            elif tx in ")}":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[j + 1] if j + 1 < len(self.toks) else None
                    return nxt is not None and (nxt.kind == "arrow" or nxt.text == "*")
            j += 1
        return False

    def sigma_tail(self) -> Expr:
        t = self.peek()
        lhs = self.app()
        if self.peek().text == "*":
            self.next()
            rhs = self.sigma_tail()
            return ESigma("_", lhs, rhs, span=(t.line, t.col))
        return lhs

    def app(self) -> Expr:
        t = self.peek()
        fn = self.atom()
        while True:
            nt = self.peek()
            if nt.text == "{":
                # implicit argument `{e}` (a `{x : T} ->` binder never occurs
                # in argument position)
                self.next()
                arg = self.expr()
                self.expect("}")
                fn = EApp(fn, arg, True, span=(t.line, t.col))
                continue
            if self._starts_atom(nt):
                arg = self.atom()
                fn = EApp(fn, arg, False, span=(t.line, t.col))
                continue
            return fn

    def _starts_atom(self, t: Token) -> bool:
        if t.kind in ("name", "num"):
            return t.text not in ("let", "in", "postulate")
        return t.text == "("

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return ENum(int(t.text), span=(t.line, t.col))
        if t.kind == "name":
            if t.text == "_":
                self.next()
                return EHole(span=(t.line, t.col))
            if t.text in KEYWORDS:
                self.next()
                return EKw(t.text, span=(t.line, t.col))
            if t.text in ("let", "in", "postulate"):
                self.err("an expression")
            self.next()
            return EName(t.text, span=(t.line, t.col))
        if t.text == "(":
            self.next()
            e = self.expr()
            nt = self.peek()
            if nt.text == ",":
                items = [e]
                while self.peek().text == ",":
                    self.next()
                    items.append(self.expr())
                self.expect(")")
                out = items[-1]
                for item in reversed(items[:-1]):
                    out = EPair(item, out, span=(t.line, t.col))
                return out
            if nt.text == ":":
                self.next()
                ty = self.expr()
                self.expect(")")
                return EAnn(e, ty, span=(t.line, t.col))
            self.expect(")")
            return e
        self.err("an expression")

    # -- patterns --------------------------------------------------------------

    def pattern_atom(self) -> S.Pattern:
        t = self.peek()
        if t.kind == "num":
            self.next()
            p: S.Pattern = S.PZero()
            for _ in range(int(t.text)):
                p = S.PSuc(p)
            return p
        if t.text == "zero":
            self.next()
            return S.PZero()
        if t.text == "nil":
            self.next()
            return S.PNil()
        if t.kind == "name" and t.text not in _RESERVED:
            self.next()
            return S.PVar(t.text)
        if t.text == "(":
            self.next()
            p = self.pattern_inner()
            self.expect(")")
            return p
        self.err("a pattern")

    def pattern_inner(self) -> S.Pattern:
        t = self.peek()
        if t.text == "suc":
            self.next()
            return S.PSuc(self.pattern_atom())
        if t.text == "cons":
            self.next()
            h = self.pattern_atom()
            tl = self.pattern_atom()
            return S.PCons(h, tl)
        return self.pattern_atom()


def parse_expr(text: str) -> Expr:
    p = _P(tokenize(text))
    e = p.expr()
    if p.peek().kind != "eof":
        p.err("end of input")
    return e


def parse_file(text: str) -> list[Decl]:
    toks = tokenize(text)
    # split into declaration chunks at column-1 tokens
    chunks: list[list[Token]] = []
    for t in toks:
        if t.kind == "eof":
            break
        if t.col == 1 or not chunks:
            chunks.append([])
        chunks[-1].append(t)
    decls: list[Decl] = []
    for chunk in chunks:
        decls.append(_parse_decl(chunk))
    return decls


def _parse_decl(chunk: list[Token]) -> Decl:
    head = chunk[0]
    eof = Token("eof", "", chunk[-1].line, chunk[-1].col + len(chunk[-1].text))
    p = _P(chunk + [eof])
    span = (head.line, head.col)
    if head.kind == "pragma":
        p.next()
        tag = p.peek()
        if tag.text not in ("ok", "unsolved", "typeerror"):
            p.err("'ok', 'unsolved' or 'typeerror'")
        p.next()
        if p.peek().kind != "eof":
            p.err("end of pragma")
        return DPragma(span, tag.text)
    if head.text == "postulate":
        p.next()
        name = p.peek()
        if name.kind != "name" or name.text in _RESERVED:
            p.err("a name")
        p.next()
        p.expect(":")
        ty = p.expr()
        if p.peek().kind != "eof":
            p.err("end of declaration")
        return DPostulate(span, name.text, ty)
    if head.kind != "name" or (head.text in _RESERVED and head.text != "_"):
        p.err("a declaration")
    p.next()
    name = head.text
    if p.peek().text == ":":
        p.next()
        ty = p.expr()
        if p.peek().kind != "eof":
            p.err("end of declaration")
        return DSig(span, name, ty)
    patterns: list[S.Pattern] = []
    while p.peek().text != "=":
        if p.peek().kind == "eof":
            p.err("'=' or a pattern")
        patterns.append(p.pattern_atom())
    p.expect("=")
    rhs = p.expr()
    if p.peek().kind != "eof":
        p.err("end of declaration")
    return DClause(span, name, patterns, rhs)
