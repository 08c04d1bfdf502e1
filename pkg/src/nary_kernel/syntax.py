"""Core terms, clause-based global definitions, and the term printer.

Terms use de Bruijn indices; binder names are kept as printing hints only.
Pi and Sigma carry the universe levels of their components as level-valued
subterms filled in by the elaborator, so the unifier can equate levels
without re-synthesising types.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    ix: int


@dataclass(frozen=True)
class Top(Term):
    name: str


@dataclass(frozen=True)
class Meta(Term):
    mid: int


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term
    implicit: bool = False


@dataclass(frozen=True)
class Lam(Term):
    name: str
    body: Term
    implicit: bool = False


@dataclass(frozen=True)
class Pi(Term):
    name: str
    dom: Term
    cod: Term                      # under the binder
    implicit: bool = False
    dom_level: Optional[Term] = None
    cod_level: Optional[Term] = None   # under the binder


@dataclass(frozen=True)
class Sigma(Term):
    name: str
    fst_ty: Term
    snd_ty: Term                   # under the binder
    fst_level: Optional[Term] = None
    snd_level: Optional[Term] = None   # under the binder


@dataclass(frozen=True)
class Pair(Term):
    fst: Term
    snd: Term


@dataclass(frozen=True)
class Fst(Term):
    t: Term


@dataclass(frozen=True)
class Snd(Term):
    t: Term


@dataclass(frozen=True)
class UnitT(Term):
    pass


@dataclass(frozen=True)
class TT(Term):
    pass


@dataclass(frozen=True)
class EmptyT(Term):
    pass


@dataclass(frozen=True)
class Absurd(Term):
    motive: Term
    target: Term


@dataclass(frozen=True)
class NatT(Term):
    pass


@dataclass(frozen=True)
class Zero(Term):
    pass


@dataclass(frozen=True)
class Suc(Term):
    t: Term


@dataclass(frozen=True)
class ListT(Term):
    elem: Term


@dataclass(frozen=True)
class Nil(Term):
    pass


@dataclass(frozen=True)
class Cons(Term):
    head: Term
    tail: Term


@dataclass(frozen=True)
class IdT(Term):
    ty: Term
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Refl(Term):
    pass


@dataclass(frozen=True)
class J(Term):
    motive: Term
    refl_case: Term
    eq: Term


@dataclass(frozen=True)
class LiftT(Term):
    level: Term
    ty: Term


@dataclass(frozen=True)
class LiftV(Term):
    t: Term


@dataclass(frozen=True)
class Lower(Term):
    t: Term


@dataclass(frozen=True)
class Sort(Term):
    level: Term


@dataclass(frozen=True)
class SortOmega(Term):
    """Limit sort of level-open signatures; print-only, not parseable."""


@dataclass(frozen=True)
class LevelT(Term):
    pass


@dataclass(frozen=True)
class LZero(Term):
    pass


@dataclass(frozen=True)
class LSuc(Term):
    t: Term


@dataclass(frozen=True)
class LMax(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Let(Term):
    name: str
    ann: Optional[Term]
    bound: Term
    body: Term                     # under the binder


# ---------------------------------------------------------------------------
# Structural helpers.

def _parts(t: Term) -> Iterator[tuple[Term, int]]:
    """Immediate subterms with the number of binders crossed to reach them."""
    match t:
        case App(fn, arg, _):
            yield fn, 0
            yield arg, 0
        case Lam(_, body, _):
            yield body, 1
        case Pi(_, dom, cod, _, dl, cl):
            yield dom, 0
            yield cod, 1
            if dl is not None:
                yield dl, 0
            if cl is not None:
                yield cl, 1
        case Sigma(_, a, b, al, bl):
            yield a, 0
            yield b, 1
            if al is not None:
                yield al, 0
            if bl is not None:
                yield bl, 1
        case Pair(a, b) | LMax(a, b):
            yield a, 0
            yield b, 0
        case Fst(x) | Snd(x) | Suc(x) | ListT(x) | LiftV(x) | Lower(x) | Sort(x) | LSuc(x):
            yield x, 0
        case Absurd(m, tgt):
            yield m, 0
            yield tgt, 0
        case Cons(h, tl):
            yield h, 0
            yield tl, 0
        case IdT(ty, l, r):
            yield ty, 0
            yield l, 0
            yield r, 0
        case J(m, pr, e):
            yield m, 0
            yield pr, 0
            yield e, 0
        case LiftT(lv, ty):
            yield lv, 0
            yield ty, 0
        case Let(_, ann, bound, body):
            if ann is not None:
                yield ann, 0
            yield bound, 0
            yield body, 1


def _map_parts(t: Term, f) -> Term:
    """Rebuild t applying f(subterm, binders_crossed) to each immediate part."""
    match t:
        case Var(_) | Top(_) | Meta(_):
            return t
        case App(fn, arg, i):
            return App(f(fn, 0), f(arg, 0), i)
        case Lam(n, body, i):
            return Lam(n, f(body, 1), i)
        case Pi(n, dom, cod, i, dl, cl):
            return Pi(n, f(dom, 0), f(cod, 1), i,
                      None if dl is None else f(dl, 0),
                      None if cl is None else f(cl, 1))
        case Sigma(n, a, b, al, bl):
            return Sigma(n, f(a, 0), f(b, 1),
                         None if al is None else f(al, 0),
                         None if bl is None else f(bl, 1))
        case Pair(a, b):
            return Pair(f(a, 0), f(b, 0))
        case Fst(x):
            return Fst(f(x, 0))
        case Snd(x):
            return Snd(f(x, 0))
        case Absurd(m, tgt):
            return Absurd(f(m, 0), f(tgt, 0))
        case Suc(x):
            return Suc(f(x, 0))
        case ListT(x):
            return ListT(f(x, 0))
        case Cons(h, tl):
            return Cons(f(h, 0), f(tl, 0))
        case IdT(ty, l, r):
            return IdT(f(ty, 0), f(l, 0), f(r, 0))
        case J(m, pr, e):
            return J(f(m, 0), f(pr, 0), f(e, 0))
        case LiftT(lv, ty):
            return LiftT(f(lv, 0), f(ty, 0))
        case LiftV(x):
            return LiftV(f(x, 0))
        case Lower(x):
            return Lower(f(x, 0))
        case Sort(x):
            return Sort(f(x, 0))
        case LSuc(x):
            return LSuc(f(x, 0))
        case LMax(a, b):
            return LMax(f(a, 0), f(b, 0))
        case Let(n, ann, bound, body):
            return Let(n, None if ann is None else f(ann, 0), f(bound, 0), f(body, 1))
        case _:
            return t


def shift(t: Term, by: int, cutoff: int = 0) -> Term:
    if by == 0:
        return t
    match t:
        case Var(ix):
            return Var(ix + by) if ix >= cutoff else t
    return _map_parts(t, lambda s, b: shift(s, by, cutoff + b))


def subst(t: Term, repl: Term, target: int = 0) -> Term:
    """Substitute repl for Var(target), lowering indices above it."""
    match t:
        case Var(ix):
            if ix == target:
                return shift(repl, target)
            return Var(ix - 1) if ix > target else t
    return _map_parts(t, lambda s, b: subst(s, repl, target + b))


def well_scoped(t: Term, depth: int, globals_known=None, metas_known=None) -> bool:
    """All indices bounded by enclosing binders; referenced globals/metas exist."""
    match t:
        case Var(ix):
            return 0 <= ix < depth
        case Top(name):
            return globals_known is None or name in globals_known
        case Meta(mid):
            return metas_known is None or mid in metas_known
    return all(
        well_scoped(s, depth + b, globals_known, metas_known) for s, b in _parts(t)
    )


def free_in(t: Term, target: int = 0) -> bool:
    match t:
        case Var(ix):
            return ix == target
    return any(free_in(s, target + b) for s, b in _parts(t))


def metas_in(t: Term) -> set[int]:
    out: set[int] = set()

    def go(s: Term) -> None:
        if isinstance(s, Meta):
            out.add(s.mid)
        for sub, _ in _parts(s):
            go(sub)

    go(t)
    return out


def app_spine(t: Term) -> tuple[Term, list[tuple[Term, bool]]]:
    args: list[tuple[Term, bool]] = []
    while isinstance(t, App):
        args.append((t.arg, t.implicit))
        t = t.fn
    args.reverse()
    return t, args


# ---------------------------------------------------------------------------
# Patterns and clausal definitions.

class Pattern:
    __slots__ = ()


@dataclass(frozen=True)
class PVar(Pattern):
    name: str


@dataclass(frozen=True)
class PZero(Pattern):
    pass


@dataclass(frozen=True)
class PSuc(Pattern):
    arg: Pattern


@dataclass(frozen=True)
class PNil(Pattern):
    pass


@dataclass(frozen=True)
class PCons(Pattern):
    head: Pattern
    tail: Pattern


def pattern_vars(p: Pattern) -> list[str]:
    match p:
        case PVar(n):
            return [n]
        case PSuc(a):
            return pattern_vars(a)
        case PCons(h, t):
            return pattern_vars(h) + pattern_vars(t)
        case _:
            return []


def pattern_term(p: Pattern, base: int) -> tuple[Term, int]:
    """Render a pattern as a term whose variables are indices counting down
    from base; returns the term and the number of variables consumed."""
    match p:
        case PVar(_):
            return Var(base), 1
        case PZero():
            return Zero(), 0
        case PSuc(a):
            t, k = pattern_term(a, base)
            return Suc(t), k
        case PNil():
            return Nil(), 0
        case PCons(h, tl):
            th, kh = pattern_term(h, base)
            tt, kt = pattern_term(tl, base - kh)
            return Cons(th, tt), kh + kt


@dataclass
class Clause:
    patterns: list[Pattern]        # one per explicit argument
    rhs: Term                      # over signature binders + pattern variables
    span: tuple[int, int] = (0, 0)


@dataclass
class ClauseDef:
    name: str
    signature: Term                # closed Pi-chain
    binders: list[tuple[str, bool, Term]]  # consumed (name, implicit, type) prefix
    explicit_positions: list[int]  # indices into binders of the explicit ones
    matched: list[int]             # explicit argument indices with ctor patterns
    matched_types: dict[int, str]  # explicit index -> "nat" | "list"
    clauses: list[Clause]
    summary: list[Optional[str]] | None = None   # per-clause rigid head, None = flexible

    @property
    def arity(self) -> int:
        return len(self.explicit_positions)


class ClauseError(Exception):
    pass


class CoverageError(ClauseError):
    pass


class OverlapError(ClauseError):
    pass


class TerminationError(ClauseError):
    pass


def _overlap(p: Pattern, q: Pattern) -> bool:
    match (p, q):
        case (PVar(_), _) | (_, PVar(_)):
            return True
        case (PZero(), PZero()) | (PNil(), PNil()):
            return True
        case (PSuc(a), PSuc(b)):
            return _overlap(a, b)
        case (PCons(h1, t1), PCons(h2, t2)):
            return _overlap(h1, h2) and _overlap(t1, t2)
        case _:
            return False


_CTORS = {"nat": ("zero", "suc"), "list": ("nil", "cons")}


def _specialize(row: list[Pattern], ctor: str) -> Optional[list[Pattern]]:
    """Specialise a pattern row's first column by a constructor."""
    head, rest = row[0], row[1:]
    match (ctor, head):
        case ("zero", PZero()) | ("nil", PNil()):
            return rest
        case ("suc", PSuc(a)):
            return [a] + rest
        case ("cons", PCons(h, t)):
            return [h, t] + rest
        case (_, PVar(_)):
            if ctor == "suc":
                return [PVar("_")] + rest
            if ctor == "cons":
                return [PVar("_"), PVar("_")] + rest
            return rest
        case _:
            return None


def _column_type(p: Pattern) -> Optional[str]:
    match p:
        case PZero() | PSuc(_):
            return "nat"
        case PNil() | PCons(_, _):
            return "list"
        case _:
            return None


def _sub_column_types(ctor: str) -> list[Optional[str]]:
    if ctor == "suc":
        return ["nat"]
    if ctor == "cons":
        return [None, "list"]      # heads have arbitrary type; tails are lists
    return []


def _complete(matrix: list[list[Pattern]], col_types: list[Optional[str]]) -> bool:
    if not matrix:
        return False
    if not col_types:
        return True
    if all(_column_type(row[0]) is None for row in matrix):
        return _complete([row[1:] for row in matrix], col_types[1:])
    ty = col_types[0]
    if ty is None:
        ty = next(t for row in matrix if (t := _column_type(row[0])) is not None)
    for ctor in _CTORS[ty]:
        rows = [s for row in matrix if (s := _specialize(row, ctor)) is not None]
        if not _complete(rows, _sub_column_types(ctor) + col_types[1:]):
            return False
    return True


def _strict_subterms(p: Pattern, base: int) -> list[Term]:
    """Terms denoting the strict subpatterns of p, variables as indices from base."""
    out: list[Term] = []

    def emit(q: Pattern, b: int) -> int:
        t, k = pattern_term(q, b)
        out.append(t)
        sub(q, b)
        return k

    def sub(q: Pattern, b: int) -> None:
        match q:
            case PSuc(a):
                emit(a, b)
            case PCons(h, tl):
                kh = emit(h, b)
                emit(tl, b - kh)

    sub(p, base)
    return out


def _recursive_calls(name: str, t: Term, depth: int) -> Iterator[tuple[list[tuple[Term, bool]], int]]:
    head, args = app_spine(t)
    if isinstance(head, Top) and head.name == name:
        yield args, depth
    else:
        for s, b in _parts(head):
            yield from _recursive_calls(name, s, depth + b)
    for a, _ in args:
        yield from _recursive_calls(name, a, depth)


def check_clauses(d: ClauseDef) -> list[Optional[str]]:
    """Validate non-overlap, coverage and structural termination; returns the
    per-clause rigid-head summary (None marks a flexible right-hand side)."""
    if not d.clauses:
        raise CoverageError(f"{d.name}: no clauses")
    for c in d.clauses:
        if len(c.patterns) != d.arity:
            raise CoverageError(f"{d.name}: clause with {len(c.patterns)} patterns, expected {d.arity}")
        seen: set[str] = set()
        for p in c.patterns:
            for v in pattern_vars(p):
                if v != "_" and v in seen:
                    raise OverlapError(f"{d.name}: non-linear pattern variable {v}")
                seen.add(v)

    for i in range(len(d.clauses)):
        for j in range(i + 1, len(d.clauses)):
            pi, pj = d.clauses[i].patterns, d.clauses[j].patterns
            if all(_overlap(a, b) for a, b in zip(pi, pj)):
                raise OverlapError(f"{d.name}: clauses {i} and {j} overlap")

    matrix = [list(c.patterns) for c in d.clauses]
    col_types: list[Optional[str]] = [d.matched_types.get(k) for k in range(d.arity)]
    if not _complete(matrix, col_types):
        raise CoverageError(f"{d.name}: clauses are not exhaustive")

    _check_termination(d)

    summary: list[Optional[str]] = []
    for c in d.clauses:
        summary.append(_static_head(c.rhs))
    d.summary = summary
    return summary


def _check_termination(d: ClauseDef) -> None:
    calls_per_clause: list[list[tuple[list[tuple[Term, bool]], int]]] = []
    any_calls = False
    for c in d.clauses:
        calls = list(_recursive_calls(d.name, c.rhs, 0))
        calls_per_clause.append(calls)
        any_calls = any_calls or bool(calls)
    if not any_calls:
        return
    for pos_index in (d.matched or range(d.arity)):
        if _position_decreases(d, calls_per_clause, pos_index):
            return
    raise TerminationError(f"{d.name}: no argument position decreases structurally")


def _clause_scope_layout(d: ClauseDef, c: Clause) -> tuple[int, dict[int, int]]:
    """Size of the clause scope and, per explicit position, the de Bruijn
    index (in the right-hand side) of that pattern's first variable."""
    sizes: list[int] = []
    expl = 0
    for _, imp, _ in d.binders:
        if imp:
            sizes.append(1)
        else:
            sizes.append(len(pattern_vars(c.patterns[expl])))
            expl += 1
    total = sum(sizes)
    bases: dict[int, int] = {}
    bound = 0
    expl = 0
    for (_, imp, _), sz in zip(d.binders, sizes):
        if not imp:
            bases[expl] = total - 1 - bound
            expl += 1
        bound += sz
    return total, bases


def _position_decreases(d: ClauseDef, calls_per_clause, pos_index: int) -> bool:
    for c, calls in zip(d.clauses, calls_per_clause):
        if not calls:
            continue
        _, bases = _clause_scope_layout(d, c)
        allowed = _strict_subterms(c.patterns[pos_index], bases[pos_index])
        if not allowed:
            return False
        for args, depth in calls:
            explicit = [a for a, imp in args if not imp]
            if len(explicit) <= pos_index:
                return False
            arg = explicit[pos_index]
            if all(arg != shift(t, depth) for t in allowed):
                return False
    return True


def _static_head(t: Term) -> Optional[str]:
    match t:
        case Pi(_, _, _, _, _, _):
            return "Pi"
        case Sigma(_, _, _, _, _):
            return "Sigma"
        case Sort(_) | SortOmega():
            return "Sort"
        case NatT():
            return "Nat"
        case ListT(_):
            return "List"
        case UnitT():
            return "Unit"
        case EmptyT():
            return "Empty"
        case IdT(_, _, _):
            return "Id"
        case LiftT(_, _):
            return "Lift"
        case LevelT():
            return "Level"
        case Zero():
            return "zero"
        case Suc(_):
            return "suc"
        case Nil():
            return "nil"
        case Cons(_, _):
            return "cons"
        case TT():
            return "tt"
        case Refl():
            return "refl"
        case LiftV(_):
            return "lift"
        case Pair(_, _):
            return "pair"
        case _:
            return None


# ---------------------------------------------------------------------------
# Printing.  Output is parseable surface syntax.

_KEYWORDS = {
    "Set", "Level", "lzero", "lsuc", "lmax", "Nat", "zero", "suc", "List",
    "nil", "cons", "Unit", "tt", "Empty", "absurd", "Id", "refl", "J",
    "Lift", "lift", "lower", "let", "in", "postulate", "fst", "snd",
}


def _freshen(hint: str, used: list[str]) -> str:
    base = hint if hint and hint != "_" else "x"
    if base in _KEYWORDS:
        base = base + "'"
    name = base
    while name in used:
        name = name + "'"
    return name


def _nat_literal(t: Term) -> Optional[int]:
    n = 0
    while isinstance(t, Suc):
        n += 1
        t = t.t
    return n if isinstance(t, Zero) else None


def pretty(t: Term, names: Optional[list[str]] = None) -> str:
    return _pp(t, list(names or []), 0)


_ATOM, _APP, _SIGMA, _ARROW, _LAM = 4, 3, 2, 1, 0


def _pp(t: Term, names: list[str], prec: int) -> str:
    match t:
        case Var(ix):
            if ix < len(names):
                return names[len(names) - 1 - ix]
            return f"@{ix}"
        case Top(name):
            return name
        case Meta(mid):
            return f"?{mid}"
        case Sort(LZero()):
            return "Set"
        case Sort(lv):
            return _wrap(f"Set {_pp(lv, names, _ATOM)}", prec, _APP)
        case SortOmega():
            return "Setw"
        case LevelT():
            return "Level"
        case LZero():
            return "lzero"
        case LSuc(x):
            return _wrap(f"lsuc {_pp(x, names, _ATOM)}", prec, _APP)
        case LMax(a, b):
            return _wrap(f"lmax {_pp(a, names, _ATOM)} {_pp(b, names, _ATOM)}", prec, _APP)
        case NatT():
            return "Nat"
        case Zero():
            return "0"
        case Suc(_):
            n = _nat_literal(t)
            if n is not None:
                return str(n)
            return _wrap(f"suc {_pp(t.t, names, _ATOM)}", prec, _APP)
        case ListT(e):
            return _wrap(f"List {_pp(e, names, _ATOM)}", prec, _APP)
        case Nil():
            return "nil"
        case Cons(h, tl):
            return _wrap(f"cons {_pp(h, names, _ATOM)} {_pp(tl, names, _ATOM)}", prec, _APP)
        case UnitT():
            return "Unit"
        case TT():
            return "tt"
        case EmptyT():
            return "Empty"
        case Absurd(m, tgt):
            return _wrap(f"absurd {_pp(m, names, _ATOM)} {_pp(tgt, names, _ATOM)}", prec, _APP)
        case IdT(ty, l, r):
            return _wrap(
                f"Id {_pp(ty, names, _ATOM)} {_pp(l, names, _ATOM)} {_pp(r, names, _ATOM)}",
                prec, _APP)
        case Refl():
            return "refl"
        case J(m, pr, e):
            return _wrap(
                f"J {_pp(m, names, _ATOM)} {_pp(pr, names, _ATOM)} {_pp(e, names, _ATOM)}",
                prec, _APP)
        case LiftT(lv, ty):
            return _wrap(f"Lift {_pp(lv, names, _ATOM)} {_pp(ty, names, _ATOM)}", prec, _APP)
        case LiftV(x):
            return _wrap(f"lift {_pp(x, names, _ATOM)}", prec, _APP)
        case Lower(x):
            return _wrap(f"lower {_pp(x, names, _ATOM)}", prec, _APP)
        case Fst(x):
            return _wrap(f"fst {_pp(x, names, _ATOM)}", prec, _APP)
        case Snd(x):
            return _wrap(f"snd {_pp(x, names, _ATOM)}", prec, _APP)
        case App(_, _, _):
            head, args = app_spine(t)
            parts = [_pp(head, names, _ATOM)]
            for a, imp in args:
                parts.append("{" + _pp(a, names, _LAM) + "}" if imp else _pp(a, names, _ATOM))
            return _wrap(" ".join(parts), prec, _APP)
        case Pair(_, _):
            items = []
            cur: Term = t
            while isinstance(cur, Pair):
                items.append(_pp(cur.fst, names, _LAM))
                cur = cur.snd
            items.append(_pp(cur, names, _LAM))
            return "(" + " , ".join(items) + ")"
        case Lam(_, _, _):
            binders = []
            cur = t
            while isinstance(cur, Lam):
                n = _freshen(cur.name, names)
                binders.append("{" + n + "}" if cur.implicit else n)
                names.append(n)
                cur = cur.body
            body = _pp(cur, names, _LAM)
            for _ in binders:
                names.pop()
            return _wrap("\\" + " ".join(binders) + ". " + body, prec, _LAM)
        case Pi(nm, dom, cod, imp, _, _):
            if not imp and not free_in(cod, 0):
                lhs = _pp(dom, names, _SIGMA)
                names.append("_")
                rhs = _pp(cod, names, _ARROW)
                names.pop()
                return _wrap(f"{lhs} -> {rhs}", prec, _ARROW)
            n = _freshen(nm, names)
            lhs = _pp(dom, names, _LAM)
            names.append(n)
            rhs = _pp(cod, names, _ARROW)
            names.pop()
            br = "{" + f"{n} : {lhs}" + "}" if imp else f"({n} : {lhs})"
            return _wrap(f"{br} -> {rhs}", prec, _ARROW)
        case Sigma(nm, a, b, _, _):
            if not free_in(b, 0):
                lhs = _pp(a, names, _APP)
                names.append("_")
                rhs = _pp(b, names, _SIGMA)
                names.pop()
                return _wrap(f"{lhs} * {rhs}", prec, _SIGMA)
            n = _freshen(nm, names)
            lhs = _pp(a, names, _LAM)
            names.append(n)
            rhs = _pp(b, names, _SIGMA)
            names.pop()
            return _wrap(f"({n} : {lhs}) * {rhs}", prec, _SIGMA)
        case Let(nm, ann, bound, body):
            n = _freshen(nm, names)
            s_ann = "" if ann is None else f" : {_pp(ann, names, _LAM)}"
            s_bound = _pp(bound, names, _LAM)
            names.append(n)
            s_body = _pp(body, names, _LAM)
            names.pop()
            return _wrap(f"let {n}{s_ann} = {s_bound} in {s_body}", prec, _LAM)
        case _:
            raise AssertionError(f"unprintable term {t!r}")


def _wrap(s: str, prec: int, mine: int) -> str:
    return f"({s})" if prec > mine else s
