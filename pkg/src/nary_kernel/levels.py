"""Canonical universe-level arithmetic.

A level expression built from lzero, lsuc, lmax, variables and metas is
normalised to "max of a constant and finitely many (head + offset) atoms".
lsuc distributes over lmax, and the ACI laws of lmax are quotiented away by
keeping at most one atom per head (with the maximal offset) and dropping the
constant whenever some atom's offset already dominates it.

This module is independent of the value layer: atom heads are opaque
hashable keys plus an uninterpreted payload the evaluator uses to quote the
head back into a term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional


@dataclass(frozen=True)
class LevelAtom:
    key: object                                  # hashable structural identity
    offset: int
    head: object = field(compare=False, default=None)  # payload (a Value), not compared


@dataclass(frozen=True)
class LevelNF:
    constant: int
    atoms: tuple[LevelAtom, ...]

    def is_closed(self) -> bool:
        return not self.atoms

    def atom_map(self) -> dict[object, LevelAtom]:
        return {a.key: a for a in self.atoms}

    def __repr__(self) -> str:
        parts = [f"{a.key}+{a.offset}" for a in self.atoms]
        parts.append(str(self.constant))
        return "{" + ", ".join(parts) + "}"


def _sort_key(atom: LevelAtom) -> str:
    return repr(atom.key)


def make_nf(constant: int, atoms: Iterable[LevelAtom]) -> LevelNF:
    """Smart constructor: one atom per head, subsumed constants dropped."""
    best: dict[object, LevelAtom] = {}
    for a in atoms:
        old = best.get(a.key)
        if old is None or a.offset > old.offset:
            best[a.key] = a
    chosen = tuple(sorted(best.values(), key=_sort_key))
    if chosen and any(a.offset >= constant for a in chosen):
        constant = 0
    return LevelNF(constant, chosen)


def closed(k: int) -> LevelNF:
    return LevelNF(k, ())


LZERO = closed(0)


def atom_nf(key: object, head: object, offset: int = 0) -> LevelNF:
    return LevelNF(0, (LevelAtom(key, offset, head),))


def nf_suc(x: LevelNF) -> LevelNF:
    return make_nf(x.constant + 1, (LevelAtom(a.key, a.offset + 1, a.head) for a in x.atoms))


def nf_shift(x: LevelNF, k: int) -> LevelNF:
    """Apply lsuc k times."""
    if k == 0:
        return x
    return make_nf(x.constant + k, (LevelAtom(a.key, a.offset + k, a.head) for a in x.atoms))


def nf_max(x: LevelNF, y: LevelNF) -> LevelNF:
    return make_nf(max(x.constant, y.constant), x.atoms + y.atoms)


def nf_equal(x: LevelNF, y: LevelNF) -> bool:
    return x.constant == y.constant and {(a.key, a.offset) for a in x.atoms} == {
        (a.key, a.offset) for a in y.atoms
    }


def mentions(x: LevelNF, key: object) -> bool:
    return any(a.key == key for a in x.atoms)


# ---------------------------------------------------------------------------
# Constraint solving on the single-meta-atom fragment.

@dataclass(frozen=True)
class Solved:
    assignments: tuple[tuple[object, LevelNF], ...]  # (meta key, solution)


@dataclass(frozen=True)
class Postponed:
    blockers: frozenset


@dataclass(frozen=True)
class Failed:
    reason: str


LevelResult = Solved | Postponed | Failed


def _subtract(x: LevelNF, k: int) -> Optional[LevelNF]:
    """x - k, defined when every atom offset and a kept constant admit it."""
    if any(a.offset < k for a in x.atoms):
        return None
    if x.constant and x.constant < k:
        return None
    if not x.atoms and x.constant < k:
        return None
    const = x.constant - k if x.constant >= k else 0
    return make_nf(const, (LevelAtom(a.key, a.offset - k, a.head) for a in x.atoms))


def solve_level(
    lhs: LevelNF,
    rhs: LevelNF,
    meta_key: Callable[[object], bool],
    scope_ok: Callable[[LevelNF], bool],
) -> LevelResult:
    """Decide lhs = rhs up to the fragment where one side is a lone meta atom.

    `meta_key` recognises atom keys that stand for instantiable (bare) metas;
    `scope_ok` approves a candidate solution's free heads.  Anything outside
    the fragment postpones on the metas involved; meta-free mismatches fail.
    """
    if nf_equal(lhs, rhs):
        return Solved(())

    for side, other in ((lhs, rhs), (rhs, lhs)):
        if side.constant == 0 and len(side.atoms) == 1 and meta_key(side.atoms[0].key):
            a = side.atoms[0]
            if mentions(other, a.key):
                return Postponed(frozenset([a.key]))
            residual = _subtract(other, a.offset)
            if residual is None:
                if _metas_of(other, meta_key):
                    return Postponed(_metas_of(other, meta_key))
                return Failed(f"no level solution for {side} = {other}")
            if not scope_ok(residual):
                if _metas_of(other, meta_key):
                    return Postponed(_metas_of(other, meta_key) | {a.key})
                return Failed(f"level solution for {side} escapes its scope")
            return Solved(((a.key, residual),))

    blockers = _metas_of(lhs, meta_key) | _metas_of(rhs, meta_key)
    if not blockers:
        return Failed(f"levels differ: {lhs} vs {rhs}")
    return Postponed(frozenset(blockers))


def _metas_of(x: LevelNF, meta_key: Callable[[object], bool]) -> frozenset:
    return frozenset(a.key for a in x.atoms if meta_key(a.key))
