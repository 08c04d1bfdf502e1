"""Metavariable store, constraint queue, zonking, and unsolved reporting."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import syntax as S
from . import values as V


class Origin(Enum):
    IMPLICIT = "implicit argument"
    UNDERSCORE = "underscore"
    ETA_CHILD = "eta expansion"
    INVERSION_CHILD = "inversion"
    INTERNAL = "internal"


@dataclass
class TelescopeEntry:
    name: str
    implicit: bool
    ty_term: S.Term          # in the scope of the preceding entries
    defined: bool = False    # let-bound entries carry values, not variables


@dataclass
class MetaEntry:
    mid: int
    telescope: list[TelescopeEntry]
    env: tuple               # values of the telescope entries
    ty: V.Value              # type at depth len(telescope)
    hint: str
    origin: Origin
    span: tuple[int, int]
    solution: Optional[S.Term] = None     # closed, lambda-abstracted
    _solution_value: Optional[V.Value] = None


class CStatus(Enum):
    ACTIVE = "active"
    POSTPONED = "postponed"
    SOLVED = "solved"
    FAILED = "failed"


@dataclass
class ConstraintEntry:
    cid: int
    depth: int
    lhs: V.Value
    rhs: V.Value
    span: tuple[int, int]
    status: CStatus = CStatus.ACTIVE
    blockers: frozenset = frozenset()
    note: str = ""


@dataclass
class GlobalEntry:
    name: str
    signature: S.Term                     # closed type
    ty: V.Value
    clauses: Optional[S.ClauseDef]        # None: postulate or not-yet-finalized
    span: tuple[int, int] = (0, 0)


class UnifyFailed(Exception):
    pass


class OccursError(UnifyFailed):
    """The candidate solution mentions the meta being solved."""


class ScopeError(UnifyFailed):
    """The candidate solution mentions variables outside the meta's telescope."""


@dataclass
class InvertEvent:
    seq: int
    global_name: str
    meta: int
    chosen: int
    n_clauses: int
    span: tuple[int, int]


class State:
    """Session-local store: globals, metas, constraints, trace."""

    def __init__(self, trace: Optional[list[str]] = None,
                 invert_override: Optional[dict[int, int]] = None):
        self.globals: dict[str, GlobalEntry] = {}
        self.metas: dict[int, MetaEntry] = {}
        self.constraints: list[ConstraintEntry] = []
        self._next_meta = 0
        self._next_constraint = 0
        self.solved_metas: set[int] = set()
        self.sort_candidates: set[int] = set()
        self.singleton_hopeless: set[int] = set()
        self.trace = trace
        self.invert_events: list[InvertEvent] = []
        self.invert_override = invert_override or {}

    # -- metas -------------------------------------------------------------

    def fresh_meta(self, telescope: list[TelescopeEntry], env: tuple, ty: V.Value,
                   hint: str, origin: Origin, span: tuple[int, int]) -> S.Term:
        """Register a meta and return it applied to its telescope's variables
        (let-bound entries are skipped: their values are not variables)."""
        mid = self._next_meta
        self._next_meta += 1
        self.metas[mid] = MetaEntry(mid, list(telescope), env, ty, hint, origin, span)
        t: S.Term = S.Meta(mid)
        ix = len(telescope) - 1
        for entry in telescope:
            if not entry.defined:
                t = S.App(t, S.Var(ix))
            ix -= 1
        return t

    def spine_entries(self, mid: int) -> list[TelescopeEntry]:
        return [e for e in self.metas[mid].telescope if not e.defined]

    def occurs(self, mid: int, t: S.Term, _seen: Optional[set[int]] = None) -> bool:
        seen = _seen if _seen is not None else set()
        for m2 in S.metas_in(t):
            if m2 == mid:
                return True
            if m2 in seen:
                continue
            seen.add(m2)
            sol = self.metas[m2].solution if m2 in self.metas else None
            if sol is not None and self.occurs(mid, sol, seen):
                return True
        return False

    def solve_meta(self, mid: int, solution: S.Term) -> None:
        """Store a closed solution, re-validating the occurs and scope checks
        the callers are expected to have run."""
        entry = self.metas[mid]
        assert entry.solution is None, f"meta ?{mid} solved twice"
        if self.occurs(mid, solution):
            raise OccursError(f"occurs check: ?{mid} in {S.pretty(solution)}")
        if not S.well_scoped(solution, 0, None, None):
            raise ScopeError(f"solution for ?{mid} is not closed: {S.pretty(solution)}")
        entry.solution = solution
        self.solved_metas.add(mid)
        self.sort_candidates.add(mid)
        if self.trace is not None:
            self.trace.append(f"SOLVE ?{mid}({entry.hint}) := {S.pretty(solution)}")

    def solution_value(self, mid: int) -> Optional[V.Value]:
        entry = self.metas.get(mid)
        if entry is None or entry.solution is None:
            return None
        if entry._solution_value is None:
            entry._solution_value = V.eval_term(self, (), entry.solution)
        return entry._solution_value

    def unsolved_metas(self) -> list[MetaEntry]:
        return [m for m in self.metas.values() if m.solution is None]

    def unsolved_report(self) -> list[tuple[str, object]]:
        """Residual metas and constraints in deterministic source order."""
        items: list[tuple[tuple, str, object]] = []
        for m in self.unsolved_metas():
            items.append(((m.span, 0, m.mid), "meta", m))
        for c in self.constraints:
            if c.status in (CStatus.ACTIVE, CStatus.POSTPONED):
                items.append(((c.span, 1, c.cid), "constraint", c))
        return [(kind, obj) for _, kind, obj in sorted(items, key=lambda x: x[0])]

    # -- constraints ---------------------------------------------------------

    def new_constraint(self, depth: int, lhs: V.Value, rhs: V.Value,
                       span: tuple[int, int], note: str = "") -> ConstraintEntry:
        c = ConstraintEntry(self._next_constraint, depth, lhs, rhs, span, note=note)
        self._next_constraint += 1
        self.constraints.append(c)
        return c

    # -- zonking -------------------------------------------------------------

    def zonk(self, t: S.Term) -> S.Term:
        match t:
            case S.Meta(mid):
                sol = self.metas[mid].solution
                return self.zonk(sol) if sol is not None else t
            case S.App(_, _, _):
                head, args = S.app_spine(t)
                if isinstance(head, S.Meta) and self.metas[head.mid].solution is not None:
                    out = self.zonk(self.metas[head.mid].solution)
                    for a, imp in args:
                        az = self.zonk(a)
                        if isinstance(out, S.Lam):
                            out = S.subst(out.body, az)
                        else:
                            out = S.App(out, az, imp)
                    return out
                return S.App(self.zonk(t.fn), self.zonk(t.arg), t.implicit)
        return S._map_parts(t, lambda s, _b: self.zonk(s))


def strip_defined(t: S.Term, prefix_defined: list[bool], depth_extra: int = 0) -> S.Term:
    """Reindex a term from a scope with let-bound slots to one without them.

    `prefix_defined[i]` tells whether telescope slot i (a de Bruijn level) is
    let-bound.  Let-bound slots must not occur; values never quote to them.
    """
    full = len(prefix_defined)
    new_lvl = []
    n = 0
    for d in prefix_defined:
        new_lvl.append(None if d else n)
        if not d:
            n += 1
    kept = n

    def go(t: S.Term, inner: int) -> S.Term:
        match t:
            case S.Var(ix):
                if ix < inner:
                    return t
                lvl = full + depth_extra + inner - 1 - ix
                if lvl >= full:  # variable bound between the telescope and here
                    return S.Var(ix - (full - kept))
                nl = new_lvl[lvl]
                assert nl is not None, "let-bound slot occurs in a meta type"
                return S.Var(kept + depth_extra + inner - 1 - nl)
        return S._map_parts(t, lambda s, b: go(s, inner + b))

    return go(t, 0)


def meta_closed_type(state: State, m: MetaEntry) -> S.Term:
    """The meta's expected type as a closed Pi-tower over its telescope."""
    flags = [e.defined for e in m.telescope]
    out = strip_defined(state.zonk(V.quote(state, len(m.telescope), m.ty)), flags)
    for ix in range(len(m.telescope) - 1, -1, -1):
        entry = m.telescope[ix]
        if entry.defined:
            continue
        dom = strip_defined(state.zonk(entry.ty_term), flags[:ix])
        out = S.Pi(entry.name, dom, out, entry.implicit)
    return out
