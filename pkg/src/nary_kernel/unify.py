"""Constraint solving: pattern instantiation, rigid decomposition, eta rules,
level constraints, postponement, and inversion of stuck clausal definitions.

The solver drains a FIFO queue of constraints.  Each step either solves a
metavariable, decomposes into sub-constraints, postpones on a set of
blocking metas, or fails.  Postponed constraints wake when a blocker gets
solved; when nothing else moves, metas whose types are singleton records
(Unit, Lift of singleton, Sigma of singletons) are solved by eta-expansion.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from . import levels as L
from . import syntax as S
from . import values as V
from .meta import (ConstraintEntry, CStatus, InvertEvent, MetaEntry, Origin,
                   State, UnifyFailed, strip_defined)


class _Escape(Exception):
    def __init__(self, lvl: int):
        self.lvl = lvl


_RIGID_TAGS = {
    V.VPi: "Pi", V.VSigma: "Sigma", V.VSort: "Sort", V.VSortOmega: "Sort",
    V.VNat: "Nat", V.VList: "List", V.VUnit: "Unit", V.VEmpty: "Empty",
    V.VId: "Id", V.VLiftT: "Lift", V.VLevelT: "LevelT",
    V.VZero: "zero", V.VSuc: "suc", V.VNil: "nil", V.VCons: "cons",
    V.VTT: "tt", V.VRefl: "refl", V.VLift: "lift", V.VPair: "pair",
}


def rigid_tag(v: V.Value) -> Optional[str]:
    """Anti-unifiable head tag; None for anything that could still change or
    that we refuse to treat as a discriminating head (variables, lambdas,
    level expressions)."""
    return _RIGID_TAGS.get(type(v))


def _is_canonical(v: V.Value) -> bool:
    return not isinstance(v, (V.VRigid, V.VFlex, V.VTop))


class Solver:
    def __init__(self, state: State):
        self.state = state
        self.queue: deque[ConstraintEntry] = deque()
        self.postponed: list[ConstraintEntry] = []

    # -- queue management ----------------------------------------------------

    def push(self, depth: int, lhs: V.Value, rhs: V.Value, span, note: str = "") -> None:
        c = self.state.new_constraint(depth, lhs, rhs, span, note)
        self.queue.append(c)

    def requeue(self, c: ConstraintEntry) -> None:
        c.status = CStatus.ACTIVE
        self.queue.append(c)

    def solve_all(self) -> None:
        """Iterate to fixpoint; raises UnifyFailed on a definite mismatch."""
        st = self.state
        while True:
            while self.queue:
                c = self.queue.popleft()
                if c.status != CStatus.ACTIVE:
                    continue
                try:
                    self.step(c)
                except UnifyFailed as e:
                    c.status = CStatus.FAILED
                    c.note = str(e)
                    raise
                self._wake()
            if self._singleton_pass() or self._sort_pass():
                self._wake()
                continue
            break

    def _wake(self) -> None:
        woken = [p for p in self.postponed if p.blockers & self.state.solved_metas]
        if woken:
            self.postponed = [p for p in self.postponed if p not in woken]
            for p in woken:
                self.requeue(p)

    def _postpone(self, c: ConstraintEntry, blockers: set[int]) -> None:
        live = {m for m in blockers if self.state.metas[m].solution is None}
        assert live, "postponement must name an unsolved meta"
        c.status = CStatus.POSTPONED
        c.blockers = frozenset(live)
        self.postponed.append(c)
        self._trace("postpone", c, f"on {sorted(live)}")

    def _solved(self, c: ConstraintEntry, rule: str) -> None:
        c.status = CStatus.SOLVED
        self._trace(rule, c, "solved")

    def _trace(self, rule: str, c: ConstraintEntry, outcome: str) -> None:
        if self.state.trace is None:
            return
        l = S.pretty(V.quote(self.state, c.depth, c.lhs))
        r = S.pretty(V.quote(self.state, c.depth, c.rhs))
        self.state.trace.append(f"RULE {rule} | {l} ≈ {r} | {outcome}")

    # -- the dispatcher ------------------------------------------------------

    def step(self, c: ConstraintEntry) -> None:
        st = self.state
        l = V.force(st, c.lhs)
        r = V.force(st, c.rhs)
        c.lhs, c.rhs = l, r
        depth = c.depth

        if isinstance(l, V.VLevel) or isinstance(r, V.VLevel):
            self._level_step(c, l, r)
            return

        # Eta for functions and pairs: shape-directed expansion.
        if isinstance(l, V.VLam) or isinstance(r, V.VLam):
            if isinstance(l, V.VLam) and isinstance(r, V.VLam):
                fresh = V.fresh_var(st, depth)
                self.push(depth + 1, l.clo.apply(st, fresh), r.clo.apply(st, fresh), c.span)
            else:
                lam, other, flip = (l, r, False) if isinstance(l, V.VLam) else (r, l, True)
                if _is_canonical(other):
                    raise UnifyFailed(self._mismatch(c, l, r))
                fresh = V.fresh_var(st, depth)
                a = lam.clo.apply(st, fresh)
                b = V.apply_value(st, other, fresh, lam.implicit)
                self.push(depth + 1, *((a, b) if not flip else (b, a)), c.span)
            self._solved(c, "eta-fun")
            return

        if isinstance(l, V.VFlex) or isinstance(r, V.VFlex):
            self._flex_step(c, l, r)
            return

        if isinstance(l, V.VTop) or isinstance(r, V.VTop):
            self._top_step(c, l, r)
            return

        if isinstance(l, V.VRigid) or isinstance(r, V.VRigid):
            self._rigid_neutral_step(c, l, r)
            return

        self._canonical_step(c, l, r)

    # -- canonical vs canonical ----------------------------------------------

    def _canonical_step(self, c: ConstraintEntry, l: V.Value, r: V.Value) -> None:
        st, depth = self.state, c.depth
        match (l, r):
            case (V.VSort(a), V.VSort(b)):
                self._level_nf_step(c, a, b)
                return
            case (V.VSortOmega(), V.VSortOmega()):
                self._solved(c, "sort")
                return
            case (V.VPi(_, d1, c1, i1, dl1, cl1), V.VPi(_, d2, c2, i2, dl2, cl2)):
                if i1 != i2:
                    raise UnifyFailed(self._mismatch(c, l, r, "implicitness"))
                self.push(depth, d1, d2, c.span)
                if dl1 is not None and dl2 is not None:
                    self.push(depth, V.VLevel(dl1), V.VLevel(dl2), c.span)
                fresh = V.fresh_var(st, depth, d1)
                self.push(depth + 1, c1.apply(st, fresh), c2.apply(st, fresh), c.span)
                if cl1 is not None and cl2 is not None:
                    self.push(depth + 1, cl1.apply(st, fresh), cl2.apply(st, fresh), c.span)
                self._solved(c, "decompose")
                return
            case (V.VSigma(_, a1, b1, al1, bl1), V.VSigma(_, a2, b2, al2, bl2)):
                self.push(depth, a1, a2, c.span)
                if al1 is not None and al2 is not None:
                    self.push(depth, V.VLevel(al1), V.VLevel(al2), c.span)
                fresh = V.fresh_var(st, depth, a1)
                self.push(depth + 1, b1.apply(st, fresh), b2.apply(st, fresh), c.span)
                if bl1 is not None and bl2 is not None:
                    self.push(depth + 1, bl1.apply(st, fresh), bl2.apply(st, fresh), c.span)
                self._solved(c, "decompose")
                return
            case (V.VPair(a1, b1), V.VPair(a2, b2)):
                self.push(depth, a1, a2, c.span)
                self.push(depth, b1, b2, c.span)
                self._solved(c, "decompose")
                return
            case (V.VSuc(a), V.VSuc(b)) | (V.VList(a), V.VList(b)) | (V.VLift(a), V.VLift(b)):
                self.push(depth, a, b, c.span)
                self._solved(c, "decompose")
                return
            case (V.VCons(h1, t1), V.VCons(h2, t2)):
                self.push(depth, h1, h2, c.span)
                self.push(depth, t1, t2, c.span)
                self._solved(c, "decompose")
                return
            case (V.VId(ty1, x1, y1), V.VId(ty2, x2, y2)):
                self.push(depth, ty1, ty2, c.span)
                self.push(depth, x1, x2, c.span)
                self.push(depth, y1, y2, c.span)
                self._solved(c, "decompose")
                return
            case (V.VLiftT(lv1, t1), V.VLiftT(lv2, t2)):
                self.push(depth, V.VLevel(lv1), V.VLevel(lv2), c.span)
                self.push(depth, t1, t2, c.span)
                self._solved(c, "decompose")
                return
        if type(l) is type(r) and type(l) in (V.VNat, V.VUnit, V.VEmpty, V.VLevelT,
                                              V.VZero, V.VNil, V.VTT, V.VRefl):
            self._solved(c, "rigid")
            return
        raise UnifyFailed(self._mismatch(c, l, r))

    # -- rigid neutrals --------------------------------------------------------

    def _rigid_neutral_step(self, c: ConstraintEntry, l: V.Value, r: V.Value) -> None:
        if isinstance(l, V.VRigid) and isinstance(r, V.VRigid):
            if l.lvl != r.lvl:
                raise UnifyFailed(self._mismatch(c, l, r))
            self._spine_subs(c, l.spine, r.spine, l, r)
            self._solved(c, "spine")
            return
        neutral, other = (l, r) if isinstance(l, V.VRigid) else (r, l)
        if isinstance(other, V.VPair):
            st = self.state
            self.push(c.depth, V.do_fst(st, l), V.do_fst(st, r), c.span)
            self.push(c.depth, V.do_snd(st, l), V.do_snd(st, r), c.span)
            self._solved(c, "eta-pair")
            return
        if isinstance(other, V.VLift):
            self.push(c.depth, V.do_lower(self.state, l), V.do_lower(self.state, r), c.span)
            self._solved(c, "eta-lift")
            return
        if isinstance(other, V.VTT):
            self._solved(c, "eta-unit")
            return
        raise UnifyFailed(self._mismatch(c, l, r))

    def _spine_subs(self, c: ConstraintEntry, s1: tuple, s2: tuple,
                    l: V.Value, r: V.Value) -> None:
        if len(s1) != len(s2):
            raise UnifyFailed(self._mismatch(c, l, r, "spine length"))
        for e1, e2 in zip(s1, s2):
            match (e1, e2):
                case (V.EApp(a1, _), V.EApp(a2, _)):
                    self.push(c.depth, a1, a2, c.span)
                case (V.EFst(), V.EFst()) | (V.ESnd(), V.ESnd()) | (V.ELower(), V.ELower()):
                    pass
                case (V.EJ(m1, p1), V.EJ(m2, p2)):
                    self.push(c.depth, m1, m2, c.span)
                    self.push(c.depth, p1, p2, c.span)
                case (V.EAbsurd(m1), V.EAbsurd(m2)):
                    self.push(c.depth, m1, m2, c.span)
                case _:
                    raise UnifyFailed(self._mismatch(c, l, r, "spine shape"))

    # -- globals ---------------------------------------------------------------

    def _top_rigidity(self, v: V.VTop) -> set[int]:
        """Blocking metas; empty set means the neutral can never unfold here."""
        return V.blocking_metas(self.state, v)

    def _top_step(self, c: ConstraintEntry, l: V.Value, r: V.Value) -> None:
        st, depth = self.state, c.depth
        if isinstance(l, V.VTop) and isinstance(r, V.VTop) and l.name == r.name:
            if len(l.args) != len(r.args):
                raise UnifyFailed(self._mismatch(c, l, r, "argument count"))
            lb, rb = self._top_rigidity(l), self._top_rigidity(r)
            if lb and rb:
                self._postpone(c, lb | rb)
                return
            for (a1, _), (a2, _) in zip(l.args, r.args):
                self.push(depth, a1, a2, c.span)
            self._spine_subs(c, l.spine, r.spine, l, r)
            self._solved(c, "spine")
            return
        top, other, flip = (l, r, False) if isinstance(l, V.VTop) else (r, l, True)
        blockers = self._top_rigidity(top)
        if isinstance(other, V.VTop):
            ob = self._top_rigidity(other)
            if blockers or ob:
                self._postpone(c, blockers | ob)
                return
            raise UnifyFailed(self._mismatch(c, l, r))
        if blockers:
            out = self._invert(c, top, other)
            if out == "progress":
                self.requeue(c)
                return
            if out == "failed":
                raise UnifyFailed(self._mismatch(c, l, r, "no clause matches"))
            self._postpone(c, blockers)
            return
        # Rigidly stuck computation against a canonical form or variable.
        if isinstance(other, V.VPair):
            self.push(depth, V.do_fst(st, l), V.do_fst(st, r), c.span)
            self.push(depth, V.do_snd(st, l), V.do_snd(st, r), c.span)
            self._solved(c, "eta-pair")
            return
        if isinstance(other, V.VLift):
            self.push(depth, V.do_lower(st, l), V.do_lower(st, r), c.span)
            self._solved(c, "eta-lift")
            return
        if isinstance(other, V.VTT):
            self._solved(c, "eta-unit")
            return
        raise UnifyFailed(self._mismatch(c, l, r))

    # -- flexible sides ----------------------------------------------------------

    def _flex_step(self, c: ConstraintEntry, l: V.Value, r: V.Value) -> None:
        st, depth = self.state, c.depth
        if isinstance(l, V.VFlex) and isinstance(r, V.VFlex):
            if l.mid == r.mid:
                if V._spine_key(st, l.spine) == V._spine_key(st, r.spine):
                    self._solved(c, "flex-refl")
                    return
                self._postpone(c, {l.mid})
                return
            for side in (l, r):
                if self._eta_expand_meta(side.mid):
                    self.requeue(c)
                    return
            self._postpone(c, {l.mid, r.mid})
            return

        flex, other, flip = (l, r, False) if isinstance(l, V.VFlex) else (r, l, True)
        out = self._pattern_solve(c, flex, other)
        if out == "progress":
            self._solved(c, "instantiate")
            return
        if out == "retry":
            self.requeue(c)
            return
        assert isinstance(out, set)
        self._postpone(c, out | {flex.mid})

    def _pattern_solve(self, c: ConstraintEntry, flex: V.VFlex, rhs: V.Value):
        """Try Miller-pattern instantiation.  Returns "progress", "retry"
        (after eta-expanding the meta), or a set of extra blockers."""
        st = self.state
        mid = flex.mid
        spine_vars = self._classify_spine(flex.spine)
        if spine_vars is None:
            if self._eta_expand_meta(mid):
                return "retry"
            return set()
        rhs_term = V.quote(st, c.depth, rhs)
        occ = self._occurrence(mid, rhs_term)
        if occ == "rigid":
            raise UnifyFailed(
                f"occurs check: ?{mid} would be cyclic in {S.pretty(rhs_term)}")
        if occ == "flex":
            return {m for m in S.metas_in(rhs_term) if st.metas[m].solution is None} - {mid}
        entries = st.spine_entries(mid)
        try:
            body = _close_over(rhs_term, c.depth, spine_vars)
        except _Escape:
            blockers = {m for m in S.metas_in(rhs_term) if st.metas[m].solution is None}
            if blockers:
                return blockers
            raise UnifyFailed(
                f"solution for ?{mid} mentions variables outside its scope: "
                f"{S.pretty(rhs_term)}")
        sol = body
        binders: list[tuple[str, bool]] = []
        for i, e in enumerate(flex.spine):
            if i < len(entries):
                binders.append((entries[i].name, entries[i].implicit))
            else:
                assert isinstance(e, V.EApp)
                binders.append(("x", e.implicit))
        for name, imp in reversed(binders):
            sol = S.Lam(name, sol, imp)
        st.solve_meta(mid, sol)
        return "progress"

    def _classify_spine(self, spine: tuple) -> Optional[list[Optional[int]]]:
        """Distinct variables (eta-expanded forms included); None if non-Miller."""
        out: list[Optional[int]] = []
        seen: set[int] = set()
        for e in spine:
            if not isinstance(e, V.EApp):
                return None
            k = _eta_var_of(self.state, e.arg)
            if k == "any":
                out.append(None)
                continue
            if not isinstance(k, int) or k in seen:
                return None
            seen.add(k)
            out.append(k)
        return out

    def _occurrence(self, mid: int, t: S.Term, under_flex: bool = False) -> Optional[str]:
        """Does ?mid occur in t: None, "rigid", or only under stuck
        applications / other metas ("flex")."""
        st = self.state
        match t:
            case S.Meta(m):
                if m == mid:
                    return "flex" if under_flex else "rigid"
                sol = st.metas[m].solution if m in st.metas else None
                if sol is not None:
                    return self._occurrence(mid, sol, under_flex)
                return None
            case S.App(_, _, _):
                head, args = S.app_spine(t)
                res: Optional[str] = None
                flexy = under_flex or isinstance(head, (S.Meta, S.Top))
                h = self._occurrence(mid, head, under_flex)
                res = _worst(res, h)
                for a, _ in args:
                    res = _worst(res, self._occurrence(mid, a, flexy))
                return res
        res = None
        for sub, _ in S._parts(t):
            res = _worst(res, self._occurrence(mid, sub, under_flex))
        return res

    # -- eta expansion of record-typed metas -------------------------------------

    def _eta_expand_meta(self, mid: int) -> bool:
        st = self.state
        m = st.metas[mid]
        if m.solution is not None:
            return False
        ty = V.force(st, m.ty)
        match ty:
            case V.VUnit():
                sol: S.Term = S.TT()
            case V.VSigma(_, a, b, _, _):
                t1 = st.fresh_meta(m.telescope, m.env, a, m.hint + ".1",
                                   Origin.ETA_CHILD, m.span)
                v1 = V.eval_term(st, m.env, t1)
                t2 = st.fresh_meta(m.telescope, m.env, b.apply(st, v1),
                                   m.hint + ".2", Origin.ETA_CHILD, m.span)
                sol = S.Pair(t1, t2)
            case V.VLiftT(_, inner):
                t1 = st.fresh_meta(m.telescope, m.env, inner, m.hint + ".v",
                                   Origin.ETA_CHILD, m.span)
                sol = S.LiftV(t1)
            case _:
                return False
        flags = [e.defined for e in m.telescope]
        body = strip_defined(sol, flags)
        for e in reversed(st.spine_entries(mid)):
            body = S.Lam(e.name, body, e.implicit)
        st.solve_meta(mid, body)
        return True

    def _singleton_pass(self) -> bool:
        st = self.state
        changed = False
        for m in list(st.metas.values()):
            if m.solution is not None or m.mid in st.singleton_hopeless:
                continue
            ty = V.force(st, m.ty)
            s = self._singleton_value(ty)
            if s is None:
                if _is_canonical(ty) and not isinstance(
                        ty, (V.VSigma, V.VLiftT, V.VUnit)):
                    st.singleton_hopeless.add(m.mid)
                continue
            body = s
            for e in reversed(st.spine_entries(m.mid)):
                body = S.Lam(e.name, body, e.implicit)
            st.solve_meta(m.mid, body)
            changed = True
        return changed

    def _sort_pass(self) -> bool:
        """Discharge the typing constraint `Set ?l = sort of solution` for
        solved metas whose declared type is a universe at a flexible level.
        The sort of a type is definitionally unique, so this is forced."""
        from .checker import CoreTypeError, _core_sort
        st = self.state
        changed = False
        for mid_c in sorted(st.sort_candidates):
            m = st.metas[mid_c]
            if m.solution is None:
                st.sort_candidates.discard(mid_c)
                continue
            ty = V.force(st, m.ty)
            if not isinstance(ty, V.VSort):
                st.sort_candidates.discard(mid_c)
                continue
            nf = V.force_level(st, ty.level)
            if nf.constant != 0 or len(nf.atoms) != 1 or nf.atoms[0].offset != 0:
                st.sort_candidates.discard(mid_c)
                continue
            head = V.force(st, nf.atoms[0].head)
            if not isinstance(head, V.VFlex):
                st.sort_candidates.discard(mid_c)
                continue
            if st.metas[head.mid].solution is not None:
                st.sort_candidates.discard(mid_c)
                continue
            if any(not isinstance(e, V.EApp) for e in head.spine):
                # a projection off an unexpanded tuple of levels
                if self._eta_expand_meta(head.mid):
                    changed = True
                continue
            if self._classify_spine(head.spine) is None:
                continue
            from .meta import meta_closed_type
            body = st.zonk(m.solution)
            expected = V.eval_term(st, (), meta_closed_type(st, m))
            ctx: list[V.Value] = []
            env: tuple = ()
            while isinstance(body, S.Lam):
                expected = V.force(st, expected)
                if not isinstance(expected, V.VPi):
                    break
                fresh = V.fresh_var(st, len(ctx), expected.dom)
                ctx.append(expected.dom)
                env = env + (fresh,)
                expected = expected.cod.apply(st, fresh)
                body = body.body
            if isinstance(body, S.Lam):
                continue
            try:
                sort = _core_sort(st, ctx, env, body)
            except CoreTypeError:
                continue
            if sort == "omega":
                continue
            level_term = V.quote_level(st, len(ctx), sort)
            if not S.well_scoped(level_term, len(ctx)):
                continue
            entries = st.spine_entries(head.mid)
            if len(entries) != len(ctx):
                continue
            sol = level_term
            for e in reversed(entries):
                sol = S.Lam(e.name, sol, e.implicit)
            if st.occurs(head.mid, sol):
                continue
            st.solve_meta(head.mid, sol)
            changed = True
        return changed

    def _singleton_value(self, ty: V.Value) -> Optional[S.Term]:
        st = self.state
        ty = V.force(st, ty)
        match ty:
            case V.VUnit():
                return S.TT()
            case V.VLiftT(_, inner):
                s = self._singleton_value(inner)
                return None if s is None else S.LiftV(s)
            case V.VSigma(_, a, b, _, _):
                sa = self._singleton_value(a)
                if sa is None:
                    return None
                sb = self._singleton_value(b.apply(st, V.eval_term(st, (), sa)))
                return None if sb is None else S.Pair(sa, sb)
            case _:
                return None

    # -- levels -------------------------------------------------------------------

    def _level_step(self, c: ConstraintEntry, l: V.Value, r: V.Value) -> None:
        st = self.state
        self._level_nf_step(c, V.as_level(st, l), V.as_level(st, r))

    def _level_nf_step(self, c: ConstraintEntry, lnf: L.LevelNF, rnf: L.LevelNF) -> None:
        st = self.state
        lnf = V.force_level(st, lnf)
        rnf = V.force_level(st, rnf)

        def is_meta_key(key) -> bool:
            if not (isinstance(key, tuple) and key and key[0] == "meta"):
                return False
            mid = key[1]
            if st.metas[mid].solution is not None:
                return False
            return all(isinstance(e, tuple) and e and e[0] == "app" for e in key[2])

        res = L.solve_level(lnf, rnf, is_meta_key, lambda _nf: True)
        if isinstance(res, L.Solved):
            heads = {a.key: a.head for a in lnf.atoms + rnf.atoms}
            for key, residual in res.assignments:
                flex = V.force(st, heads[key])
                assert isinstance(flex, V.VFlex)
                out = self._pattern_solve(c, flex, V.VLevel(residual))
                if out == "retry":
                    self.requeue(c)
                    return
                if out != "progress":
                    assert isinstance(out, set)
                    self._postpone(c, out | {flex.mid})
                    return
            self._solved(c, "level")
            return
        # Stuck: try eta-expanding projected metas appearing as atom heads.
        for a in lnf.atoms + rnf.atoms:
            h = V.force(st, a.head)
            if isinstance(h, V.VFlex) and h.spine and any(
                    not isinstance(e, V.EApp) for e in h.spine):
                if self._eta_expand_meta(h.mid):
                    self.requeue(c)
                    return
        blockers = self._level_blockers(lnf) | self._level_blockers(rnf)
        if not blockers:
            raise UnifyFailed(f"level mismatch: {self._fmt_level(c, lnf)} vs "
                              f"{self._fmt_level(c, rnf)}")
        self._postpone(c, blockers)

    def _level_blockers(self, nf: L.LevelNF) -> set[int]:
        st = self.state
        out: set[int] = set()
        for a in nf.atoms:
            for m in _value_metas(st, a.head):
                if st.metas[m].solution is None:
                    out.add(m)
        return out

    def _fmt_level(self, c: ConstraintEntry, nf: L.LevelNF) -> str:
        return S.pretty(V.quote_level(self.state, c.depth, nf))

    # -- inversion of stuck clausal definitions -------------------------------------

    def _invert(self, c: ConstraintEntry, top: V.VTop, rhs: V.Value) -> str:
        """Attempt the constructor-headed inversion heuristic.  Returns
        "progress", "failed", or "no" (not applicable / postpone)."""
        st = self.state
        entry = st.globals[top.name]
        d = entry.clauses
        if d is None or len(d.matched) != 1 or top.spine or len(top.args) != len(d.binders):
            return "no"
        rhs_tag = rigid_tag(rhs)
        if rhs_tag is None or isinstance(rhs, (V.VLevel,)):
            return "no"
        scrut_binder = d.explicit_positions[d.matched[0]]
        scrut = V.force(st, top.args[scrut_binder][0])
        if not isinstance(scrut, V.VFlex):
            return "no"
        if self._classify_spine(scrut.spine) is None:
            return "no"

        tags: list[Optional[str]] = []
        pos_of = {k: pos for pos, k in enumerate(d.explicit_positions)}
        for clause in d.clauses:
            env: list[V.Value] = []
            lvl = c.depth
            for k in range(len(d.binders)):
                pos = pos_of.get(k)
                if pos == d.matched[0]:
                    pv, lvl = _pattern_value(clause.patterns[pos], lvl)
                    env.extend(pv)
                else:
                    env.append(top.args[k][0])
            head = V.force(st, V.eval_term(st, tuple(env), clause.rhs))
            tag = rigid_tag(head)
            if isinstance(head, (V.VLam, V.VLevel)):
                tag = None
            tags.append(tag)
        if any(t is None for t in tags) or len(set(tags)) != len(tags):
            return "no"

        candidates = [i for i, t in enumerate(tags) if t == rhs_tag]
        if not candidates:
            return "failed"
        seq = len(st.invert_events)
        chosen = st.invert_override.get(seq, candidates[0])
        st.invert_events.append(InvertEvent(seq, top.name, scrut.mid, chosen,
                                            len(d.clauses), c.span))

        m = st.metas[scrut.mid]
        scrut_ty = V.force(st, m.ty)
        flags = [e.defined for e in m.telescope]
        body = self._pattern_solution(d.clauses[chosen].patterns[d.matched[0]],
                                      scrut_ty, m, flags)
        for e in reversed(st.spine_entries(scrut.mid)):
            body = S.Lam(e.name, body, e.implicit)
        st.solve_meta(scrut.mid, body)
        if st.trace is not None:
            self._trace("invert", c, f"{top.name} clause {chosen}")
        return "progress"

    def _pattern_solution(self, p: S.Pattern, ty: V.Value, m: MetaEntry,
                          flags: list[bool]) -> S.Term:
        st = self.state
        match p:
            case S.PZero():
                return S.Zero()
            case S.PNil():
                return S.Nil()
            case S.PVar(name):
                t = st.fresh_meta(m.telescope, m.env, ty, name if name != "_" else m.hint,
                                  Origin.INVERSION_CHILD, m.span)
                return strip_defined(t, flags)
            case S.PSuc(q):
                return S.Suc(self._pattern_solution(q, V.VNat(), m, flags))
            case S.PCons(h, tl):
                ty = V.force(st, ty)
                elem = ty.elem if isinstance(ty, V.VList) else V.VNat()
                return S.Cons(self._pattern_solution(h, elem, m, flags),
                              self._pattern_solution(tl, ty, m, flags))
        raise AssertionError(f"bad pattern {p!r}")

    def _mismatch(self, c: ConstraintEntry, l: V.Value, r: V.Value, why: str = "") -> str:
        st = self.state
        ls = S.pretty(V.quote(st, c.depth, l))
        rs = S.pretty(V.quote(st, c.depth, r))
        extra = f" ({why})" if why else ""
        return f"cannot unify {ls} with {rs}{extra}"


# ---------------------------------------------------------------------------
# Helpers.

def _worst(a: Optional[str], b: Optional[str]) -> Optional[str]:
    if a == "rigid" or b == "rigid":
        return "rigid"
    if a == "flex" or b == "flex":
        return "flex"
    return None


def _eta_var_of(state, v: V.Value):
    """Level of the variable whose eta-expansion v is, "any" for tt, else None."""

    def go(v: V.Value, path: tuple):
        v = V.force(state, v)
        match v:
            case V.VTT():
                return "any"
            case V.VPair(a, b):
                la = go(a, path + ("fst",))
                lb = go(b, path + ("snd",))
                return _merge_eta(la, lb)
            case V.VLift(x):
                return go(x, path + ("lower",))
            case V.VRigid(lvl, spine):
                kinds = tuple(
                    "fst" if isinstance(e, V.EFst) else
                    "snd" if isinstance(e, V.ESnd) else
                    "lower" if isinstance(e, V.ELower) else "app"
                    for e in spine)
                return lvl if kinds == path else None
            case _:
                return None

    return go(v, ())


def _merge_eta(a, b):
    if a == "any":
        return b
    if b == "any":
        return a
    return a if a == b and a is not None else None


def _close_over(term: S.Term, depth: int, spine_vars: list[Optional[int]]) -> S.Term:
    """Abstract term (at `depth`) over the spine variables, in spine order."""
    n = len(spine_vars)
    slot_of = {lvl: i for i, lvl in enumerate(spine_vars) if lvl is not None}

    def go(t: S.Term, inner: int) -> S.Term:
        match t:
            case S.Var(ix):
                if ix < inner:
                    return t
                lvl = depth + inner - 1 - ix
                slot = slot_of.get(lvl)
                if slot is None:
                    raise _Escape(lvl)
                return S.Var(inner + n - 1 - slot)
        return S._map_parts(t, lambda s, b: go(s, inner + b))

    return go(term, 0)


def _value_metas(state, v: V.Value) -> set[int]:
    out: set[int] = set()

    def go(v: V.Value) -> None:
        v = V.force(state, v)
        match v:
            case V.VFlex(mid, spine):
                out.add(mid)
                for e in spine:
                    go_elim(e)
            case V.VRigid(_, spine):
                for e in spine:
                    go_elim(e)
            case V.VTop(_, args, spine, _):
                for a, _i in args:
                    go(a)
                for e in spine:
                    go_elim(e)
            case V.VPair(a, b) | V.VCons(a, b):
                go(a)
                go(b)
            case V.VSuc(x) | V.VList(x) | V.VLift(x):
                go(x)
            case V.VId(ty, l, r):
                go(ty)
                go(l)
                go(r)
            case V.VLiftT(_, ty):
                go(ty)
            case V.VLevel(nf):
                for a in nf.atoms:
                    go(a.head)
            case V.VSort(nf):
                for a in nf.atoms:
                    go(a.head)
            case _:
                pass

    def go_elim(e: V.Elim) -> None:
        match e:
            case V.EApp(arg, _):
                go(arg)
            case V.EJ(m, pr):
                go(m)
                go(pr)
            case V.EAbsurd(m):
                go(m)
            case _:
                pass

    go(v)
    return out


def _pattern_value(p: S.Pattern, lvl: int) -> tuple[list[V.Value], int]:
    """Pattern variables as fresh rigid values; returns (bindings order, next lvl)."""
    binds: list[V.Value] = []

    def build(p: S.Pattern, lvl: int) -> tuple[V.Value, int]:
        match p:
            case S.PVar(_):
                v = V.VRigid(lvl)
                binds.append(v)
                return v, lvl + 1
            case S.PZero():
                return V.VZero(), lvl
            case S.PSuc(q):
                v, lvl = build(q, lvl)
                return V.VSuc(v), lvl
            case S.PNil():
                return V.VNil(), lvl
            case S.PCons(h, t):
                vh, lvl = build(h, lvl)
                vt, lvl = build(t, lvl)
                return V.VCons(vh, vt), lvl
        raise AssertionError

    _, nxt = build(p, lvl)
    return binds, nxt
