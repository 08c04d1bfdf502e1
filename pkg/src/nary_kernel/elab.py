"""Bidirectional elaboration of surface syntax into core terms.

Implicit arguments are inserted eagerly under application heads and when
checking against explicit function types; `refl` checked against an
identity type emits the unification constraint between its endpoints.
Constraints are solved incrementally while elaborating, with a final
fixpoint (plus singleton-eta passes) per declaration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import parser as P
from . import syntax as S
from . import values as V
from .levels import LZERO, LevelNF, atom_nf, closed, nf_max, nf_suc
from .meta import (CStatus, GlobalEntry, Origin, State, TelescopeEntry,
                   UnifyFailed, meta_closed_type)
from .unify import Solver


class ElabError(Exception):
    def __init__(self, msg: str, span: tuple[int, int] = (0, 0)):
        super().__init__(f"{span[0]}:{span[1]}: {msg}" if span != (0, 0) else msg)
        self.msg = msg
        self.span = span


OMEGA = "omega"


@dataclass(frozen=True)
class CtxEntry:
    name: str
    ty: V.Value
    value: V.Value
    implicit: bool = False
    defined: bool = False
    ty_term: S.Term = None


class Ctx:
    def __init__(self, entries: Optional[list[CtxEntry]] = None):
        self.entries = entries or []

    @property
    def depth(self) -> int:
        return len(self.entries)

    @property
    def env(self) -> tuple:
        return tuple(e.value for e in self.entries)

    def lookup(self, name: str) -> Optional[tuple[int, CtxEntry]]:
        for ix, e in enumerate(reversed(self.entries)):
            if e.name == name:
                return ix, e
        return None

    def bind(self, state, name: str, ty: V.Value, implicit: bool = False) -> "Ctx":
        v = V.fresh_var(state, self.depth, ty)
        tt = V.quote(state, self.depth, ty)
        return Ctx(self.entries + [CtxEntry(name, ty, v, implicit, False, tt)])

    def define(self, state, name: str, ty: V.Value, value: V.Value) -> "Ctx":
        tt = V.quote(state, self.depth, ty)
        return Ctx(self.entries + [CtxEntry(name, ty, value, False, True, tt)])

    def telescope(self) -> list[TelescopeEntry]:
        return [TelescopeEntry(e.name, e.implicit, e.ty_term, e.defined)
                for e in self.entries]

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


class Elaborator:
    def __init__(self, state: State):
        self.state = state
        self.solver = Solver(state)

    # -- plumbing -------------------------------------------------------------

    def meta(self, ctx: Ctx, ty: V.Value, hint: str, origin: Origin, span) -> S.Term:
        return self.state.fresh_meta(ctx.telescope(), ctx.env, ty, hint, origin, span)

    def meta_value(self, ctx: Ctx, t: S.Term) -> V.Value:
        return V.eval_term(self.state, ctx.env, t)

    def level_meta(self, ctx: Ctx, hint: str, span) -> tuple[S.Term, LevelNF]:
        t = self.meta(ctx, V.VLevelT(), hint, Origin.IMPLICIT, span)
        return t, V.as_level(self.state, self.meta_value(ctx, t))

    def unify(self, ctx: Ctx, lhs: V.Value, rhs: V.Value, span) -> None:
        self.solver.push(ctx.depth, lhs, rhs, span)
        try:
            self.solver.solve_all()
        except UnifyFailed as e:
            raise ElabError(str(e), span) from e

    def eval(self, ctx: Ctx, t: S.Term) -> V.Value:
        return V.eval_term(self.state, ctx.env, t)

    # -- type refinement -------------------------------------------------------

    def _solve_by_shape(self, flex: V.VFlex, body: S.Term) -> V.Value:
        """Refine a metavariable to a shape built over its own telescope.
        Independent of the use-site spine, so non-linear spines are fine."""
        st = self.state
        m = st.metas[flex.mid]
        flags = [e.defined for e in m.telescope]
        from .meta import strip_defined
        sol = strip_defined(body, flags)
        for e in reversed(st.spine_entries(flex.mid)):
            sol = S.Lam(e.name, sol, e.implicit)
        st.solve_meta(flex.mid, sol)
        return V.force(st, flex)

    def _scoped_meta(self, tel, env, ty: V.Value, hint: str, span) -> tuple[S.Term, V.Value]:
        t = self.state.fresh_meta(tel, env, ty, hint, Origin.INTERNAL, span)
        return t, V.eval_term(self.state, env, t)

    def ensure_pi(self, ctx: Ctx, ty: V.Value, span, implicit: bool = False) -> V.VPi:
        st = self.state
        ty = V.force(st, ty)
        if isinstance(ty, V.VPi):
            return ty
        if isinstance(ty, V.VFlex):
            m = st.metas[ty.mid]
            tel, env = m.telescope, m.env
            la_t, la_v = self._scoped_meta(tel, env, V.VLevelT(), "l", span)
            dom_t, dom_v = self._scoped_meta(tel, env, V.VSort(V.as_level(st, la_v)),
                                             "D", span)
            tel2 = tel + [TelescopeEntry("x", False, dom_t)]
            env2 = env + (V.fresh_var(st, len(env), dom_v),)
            lb_t, lb_v = self._scoped_meta(tel2, env2, V.VLevelT(), "l", span)
            cod_t, _ = self._scoped_meta(tel2, env2, V.VSort(V.as_level(st, lb_v)),
                                         "C", span)
            out = self._solve_by_shape(
                ty, S.Pi("x", dom_t, cod_t, implicit, la_t, lb_t))
            assert isinstance(out, V.VPi)
            return out
        if isinstance(ty, V.VTop):
            # a blocked computation: state the equation and let the solver
            # (possibly by inversion) justify it
            _, la = self.level_meta(ctx, "l", span)
            dom_t = self.meta(ctx, V.VSort(la), "D", Origin.INTERNAL, span)
            dom = self.meta_value(ctx, dom_t)
            ctx2 = ctx.bind(st, "x", dom)
            _, lb = self.level_meta(ctx2, "l", span)
            cod_t = self.meta(ctx2, V.VSort(lb), "C", Origin.INTERNAL, span)
            pi = V.VPi("x", dom, V.Closure(ctx.env, cod_t), implicit, la,
                       V.Closure(ctx.env, V.quote_level(st, ctx2.depth, lb)))
            self.unify(ctx, ty, pi, span)
            return pi
        raise ElabError(f"expected a function type, got {self.fmt(ctx, ty)}", span)

    def ensure_sigma(self, ctx: Ctx, ty: V.Value, span) -> V.VSigma:
        st = self.state
        ty = V.force(st, ty)
        if isinstance(ty, V.VSigma):
            return ty
        if isinstance(ty, V.VFlex):
            m = st.metas[ty.mid]
            tel, env = m.telescope, m.env
            la_t, la_v = self._scoped_meta(tel, env, V.VLevelT(), "l", span)
            a_t, a_v = self._scoped_meta(tel, env, V.VSort(V.as_level(st, la_v)),
                                         "A", span)
            tel2 = tel + [TelescopeEntry("x", False, a_t)]
            env2 = env + (V.fresh_var(st, len(env), a_v),)
            lb_t, lb_v = self._scoped_meta(tel2, env2, V.VLevelT(), "l", span)
            b_t, _ = self._scoped_meta(tel2, env2, V.VSort(V.as_level(st, lb_v)),
                                       "B", span)
            out = self._solve_by_shape(ty, S.Sigma("x", a_t, b_t, la_t, lb_t))
            assert isinstance(out, V.VSigma)
            return out
        if isinstance(ty, V.VTop):
            _, la = self.level_meta(ctx, "l", span)
            a_t = self.meta(ctx, V.VSort(la), "A", Origin.INTERNAL, span)
            a = self.meta_value(ctx, a_t)
            ctx2 = ctx.bind(st, "x", a)
            _, lb = self.level_meta(ctx2, "l", span)
            b_t = self.meta(ctx2, V.VSort(lb), "B", Origin.INTERNAL, span)
            sg = V.VSigma("x", a, V.Closure(ctx.env, b_t), la,
                          V.Closure(ctx.env, V.quote_level(st, ctx2.depth, lb)))
            self.unify(ctx, ty, sg, span)
            return sg
        raise ElabError(f"expected a pair type, got {self.fmt(ctx, ty)}", span)

    def ensure_id(self, ctx: Ctx, ty: V.Value, span) -> V.VId:
        st = self.state
        ty = V.force(st, ty)
        if isinstance(ty, V.VId):
            return ty
        if isinstance(ty, V.VFlex):
            m = st.metas[ty.mid]
            tel, env = m.telescope, m.env
            la_t, la_v = self._scoped_meta(tel, env, V.VLevelT(), "l", span)
            a_t, a_v = self._scoped_meta(tel, env, V.VSort(V.as_level(st, la_v)),
                                         "A", span)
            x_t, _ = self._scoped_meta(tel, env, a_v, "x", span)
            y_t, _ = self._scoped_meta(tel, env, a_v, "y", span)
            out = self._solve_by_shape(ty, S.IdT(a_t, x_t, y_t))
            assert isinstance(out, V.VId)
            return out
        if isinstance(ty, V.VTop):
            _, la = self.level_meta(ctx, "l", span)
            a_t = self.meta(ctx, V.VSort(la), "A", Origin.INTERNAL, span)
            a = self.meta_value(ctx, a_t)
            x_t = self.meta(ctx, a, "x", Origin.INTERNAL, span)
            y_t = self.meta(ctx, a, "y", Origin.INTERNAL, span)
            idv = V.VId(a, self.meta_value(ctx, x_t), self.meta_value(ctx, y_t))
            self.unify(ctx, ty, idv, span)
            return idv
        raise ElabError(f"expected an identity type, got {self.fmt(ctx, ty)}", span)

    # -- sorts -----------------------------------------------------------------

    def infer_type(self, ctx: Ctx, e: P.Expr) -> tuple[S.Term, object]:
        """Elaborate e as a type; returns (term, LevelNF or OMEGA)."""
        t, ty = self.infer(ctx, e)
        ty = V.force(self.state, ty)
        if isinstance(ty, V.VSort):
            return t, V.force_level(self.state, ty.level)
        if isinstance(ty, V.VSortOmega):
            return t, OMEGA
        if isinstance(ty, V.VFlex):
            m = self.state.metas[ty.mid]
            l_t, l_v = self._scoped_meta(m.telescope, m.env, V.VLevelT(), "l", e.span)
            self._solve_by_shape(ty, S.Sort(l_t))
            return t, V.force_level(self.state, V.as_level(self.state, l_v))
        if isinstance(ty, V.VTop):
            _, l = self.level_meta(ctx, "l", e.span)
            self.unify(ctx, ty, V.VSort(l), e.span)
            return t, l
        raise ElabError(f"expected a type, got a term of type {self.fmt(ctx, ty)}", e.span)

    # -- inference ---------------------------------------------------------------

    def infer(self, ctx: Ctx, e: P.Expr) -> tuple[S.Term, V.Value]:
        st = self.state
        match e:
            case P.EName(name=name):
                hit = ctx.lookup(name)
                if hit is not None:
                    ix, entry = hit
                    return S.Var(ix), entry.ty
                if name in st.globals:
                    return S.Top(name), st.globals[name].ty
                raise ElabError(f"unbound name {name}", e.span)
            case P.ENum(value=n):
                t: S.Term = S.Zero()
                for _ in range(n):
                    t = S.Suc(t)
                return t, V.VNat()
            case P.EHole():
                _, l = self.level_meta(ctx, "l", e.span)
                ty_t = self.meta(ctx, V.VSort(l), "T", Origin.UNDERSCORE, e.span)
                ty = self.meta_value(ctx, ty_t)
                m = self.meta(ctx, ty, "_", Origin.UNDERSCORE, e.span)
                return m, ty
            case P.EKw(kw=kw):
                return self.builtin(ctx, kw, [], e.span)
            case P.EApp():
                head, args = _spine(e)
                if isinstance(head, P.EKw):
                    return self.builtin(ctx, head.kw, args, head.span)
                t, ty = self.infer(ctx, head)
                return self.apply_args(ctx, t, ty, args, e.span)
            case P.ELam(binders=binders, body=body):
                return self.infer_lam(ctx, binders, body, e.span)
            case P.EPi(name=n, implicit=imp, dom=dom, cod=cod):
                td, sa = self.infer_type(ctx, dom)
                ctx2 = ctx.bind(st, n, self.eval(ctx, td), imp)
                tc, sb = self.infer_type(ctx2, cod)
                return self.make_pi(ctx, n, imp, td, sa, tc, sb, e.span)
            case P.ESigma(name=n, fst=a, snd=b):
                ta, sa = self.infer_type(ctx, a)
                ctx2 = ctx.bind(st, n, self.eval(ctx, ta))
                tb, sb = self.infer_type(ctx2, b)
                if sa is OMEGA or sb is OMEGA:
                    raise ElabError("pair type components must live in some Set", e.span)
                al = V.quote_level(st, ctx.depth, sa)
                bl = V.quote_level(st, ctx2.depth, sb)
                if _escapes(bl):
                    raise ElabError("pair type level depends on its own binder", e.span)
                sort = V.VSort(nf_max(sa, _unshift_level(st, ctx2.depth, sb)))
                return S.Sigma(n, ta, tb, al, bl), sort
            case P.EPair(fst=a, snd=b):
                ta, tya = self.infer(ctx, a)
                tb, tyb = self.infer(ctx, b)
                qb = V.quote(st, ctx.depth, tyb)
                sig = V.VSigma("_", tya, V.Closure(ctx.env, S.shift(qb, 1)))
                return S.Pair(ta, tb), sig
            case P.EAnn(term=tm, ty=ty):
                tt, _sort = self.infer_type(ctx, ty)
                tyv = self.eval(ctx, tt)
                return self.check(ctx, tm, tyv), tyv
            case P.ELet():
                return self.infer_let(ctx, e)
        raise ElabError("cannot infer this expression", e.span)

    def infer_lam(self, ctx: Ctx, binders, body, span) -> tuple[S.Term, V.Value]:
        if not binders:
            return self.infer(ctx, body)
        (name, imp), rest = binders[0], binders[1:]
        _, l = self.level_meta(ctx, "l", span)
        dom_t = self.meta(ctx, V.VSort(l), "D", Origin.INTERNAL, span)
        dom = self.meta_value(ctx, dom_t)
        ctx2 = ctx.bind(self.state, name, dom)
        tb, tyb = self.infer_lam(ctx2, rest, body, span)
        qt = V.quote(self.state, ctx2.depth, tyb)
        pi = V.VPi(name, dom, V.Closure(ctx.env, qt), imp, l)
        return S.Lam(name, tb, imp), pi

    def infer_let(self, ctx: Ctx, e: P.ELet) -> tuple[S.Term, V.Value]:
        st = self.state
        if e.ann is not None:
            ta, _ = self.infer_type(ctx, e.ann)
            tyv = self.eval(ctx, ta)
            tb = self.check(ctx, e.bound, tyv)
        else:
            ta = None
            tb, tyv = self.infer(ctx, e.bound)
        ctx2 = ctx.define(st, e.name, tyv, self.eval(ctx, tb))
        tbody, tybody = self.infer(ctx2, e.body)
        return S.Let(e.name, ta, tb, tbody), tybody

    def make_pi(self, ctx: Ctx, name: str, imp: bool, td: S.Term, sa, tc: S.Term, sb,
                span=(0, 0)):
        st = self.state
        al = None if sa is OMEGA else V.quote_level(st, ctx.depth, sa)
        bl = None if sb is OMEGA else V.quote_level(st, ctx.depth + 1, sb)
        if sa is OMEGA or sb is OMEGA:
            return S.Pi(name, td, tc, imp, al, bl), V.VSortOmega()
        if _escapes(bl):
            if not S.metas_in(bl):
                # the codomain's level rigidly mentions the binder: the limit sort
                return S.Pi(name, td, tc, imp, al, bl), V.VSortOmega()
            # mentioned only through unsolved metas: defer the decision to a
            # binder-free level meta constrained to equal the codomain's level
            _, s = self.level_meta(ctx, "s", span)
            self.solver.push(ctx.depth + 1, V.VLevel(s), V.VLevel(sb), span)
            try:
                self.solver.solve_all()
            except UnifyFailed as e:
                raise ElabError(str(e), span) from e
            return S.Pi(name, td, tc, imp, al, bl), V.VSort(nf_max(sa, s))
        return S.Pi(name, td, tc, imp, al, bl), V.VSort(nf_max(sa, sb))

    def apply_args(self, ctx: Ctx, t: S.Term, ty: V.Value, args, span) -> tuple[S.Term, V.Value]:
        st = self.state
        for arg, is_implicit in args:
            ty = V.force(st, ty)
            if not is_implicit:
                t, ty = self.insert_implicits(ctx, t, ty, span)
                pi = self.ensure_pi(ctx, ty, arg.span)
                ta = self.check(ctx, arg, pi.dom)
                t = S.App(t, ta)
                ty = pi.cod.apply(st, self.eval(ctx, ta))
            else:
                ty = V.force(st, ty)
                if not (isinstance(ty, V.VPi) and ty.implicit):
                    raise ElabError("no implicit argument expected here", arg.span)
                ta = self.check(ctx, arg, ty.dom)
                t = S.App(t, ta, True)
                ty = ty.cod.apply(st, self.eval(ctx, ta))
        return t, ty

    def insert_implicits(self, ctx: Ctx, t: S.Term, ty: V.Value, span) -> tuple[S.Term, V.Value]:
        st = self.state
        ty = V.force(st, ty)
        while isinstance(ty, V.VPi) and ty.implicit:
            m = self.meta(ctx, ty.dom, ty.name, Origin.IMPLICIT, span)
            t = S.App(t, m, True)
            ty = V.force(st, ty.cod.apply(st, self.meta_value(ctx, m)))
        return t, ty

    # -- checking -------------------------------------------------------------------

    def check(self, ctx: Ctx, e: P.Expr, ty: V.Value) -> S.Term:
        st = self.state
        ty = V.force(st, ty)
        match e:
            case P.ELam(binders=binders, body=body) if binders:
                name, imp = binders[0]
                if isinstance(ty, (V.VFlex, V.VTop)):
                    ty = self.ensure_pi(ctx, ty, e.span, implicit=imp)
                if isinstance(ty, V.VPi) and ty.implicit == imp:
                    ctx2 = ctx.bind(st, name, ty.dom)
                    rest = (P.ELam(binders[1:], body, span=e.span)
                            if len(binders) > 1 else body)
                    var = ctx2.entries[-1].value
                    tb = self.check(ctx2, rest, ty.cod.apply(st, var))
                    return S.Lam(name, tb, imp)
                if isinstance(ty, V.VPi) and ty.implicit and not imp:
                    return self._insert_implicit_lambda(ctx, e, ty)
                raise ElabError(
                    f"lambda cannot have type {self.fmt(ctx, ty)}", e.span)
            case P.EPair(fst=a, snd=b):
                if isinstance(ty, (V.VFlex, V.VTop)):
                    ty = self.ensure_sigma(ctx, ty, e.span)
                if isinstance(ty, V.VSigma):
                    ta = self.check(ctx, a, ty.fst)
                    tb = self.check(ctx, b, ty.snd.apply(st, self.eval(ctx, ta)))
                    return S.Pair(ta, tb)
                raise ElabError(f"pair cannot have type {self.fmt(ctx, ty)}", e.span)
            case P.EKw(kw="refl"):
                idv = self.ensure_id(ctx, ty, e.span)
                self.solver.push(ctx.depth, idv.lhs, idv.rhs, e.span)
                try:
                    self.solver.solve_all()
                except UnifyFailed as err:
                    raise ElabError(str(err), e.span) from err
                return S.Refl()
            case P.EApp() if isinstance(ty, V.VLiftT):
                head, args = _spine(e)
                if isinstance(head, P.EKw) and head.kw == "lift" and len(args) == 1:
                    inner = self.check(ctx, args[0][0], ty.ty)
                    return S.LiftV(inner)
            case P.EHole():
                m = self.meta(ctx, ty, "_", Origin.UNDERSCORE, e.span)
                return m
            case P.ELet():
                t, ity = self.infer_let(ctx, e)
                self.unify(ctx, ity, ty, e.span)
                return t
        if isinstance(ty, V.VPi) and ty.implicit and not _is_implicit_lam(e):
            return self._insert_implicit_lambda(ctx, e, ty)
        t, ity = self.infer(ctx, e)
        if not (isinstance(ty, V.VPi) and ty.implicit):
            t, ity = self.insert_implicits(ctx, t, ity, e.span)
        self.unify(ctx, ity, ty, e.span)
        return t

    def _insert_implicit_lambda(self, ctx: Ctx, e: P.Expr, ty: V.VPi) -> S.Term:
        ctx2 = ctx.bind(self.state, ty.name, ty.dom, implicit=True)
        var = ctx2.entries[-1].value
        tb = self.check(ctx2, e, ty.cod.apply(self.state, var))
        return S.Lam(ty.name, tb, True)

    # -- builtins ----------------------------------------------------------------

    def builtin(self, ctx: Ctx, kw: str, args, span) -> tuple[S.Term, V.Value]:
        st = self.state
        take = len(args)

        def rest(t, ty, used):
            return self.apply_args(ctx, t, ty, args[used:], span)

        match kw:
            case "Nat":
                return rest(S.NatT(), V.VSort(LZERO), 0)
            case "Unit":
                return rest(S.UnitT(), V.VSort(LZERO), 0)
            case "Empty":
                return rest(S.EmptyT(), V.VSort(LZERO), 0)
            case "Level":
                return rest(S.LevelT(), V.VSort(LZERO), 0)
            case "lzero":
                return rest(S.LZero(), V.VLevelT(), 0)
            case "tt":
                return rest(S.TT(), V.VUnit(), 0)
            case "zero":
                return rest(S.Zero(), V.VNat(), 0)
            case "refl":
                _, l = self.level_meta(ctx, "l", span)
                a_t = self.meta(ctx, V.VSort(l), "A", Origin.INTERNAL, span)
                a = self.meta_value(ctx, a_t)
                x_t = self.meta(ctx, a, "x", Origin.INTERNAL, span)
                x = self.meta_value(ctx, x_t)
                return rest(S.Refl(), V.VId(a, x, x), 0)
            case "Set":
                if take >= 1 and not args[0][1]:
                    tl = self.check(ctx, args[0][0], V.VLevelT())
                    lv = V.as_level(st, self.eval(ctx, tl))
                    return rest(S.Sort(tl), V.VSort(nf_suc(lv)), 1)
                return rest(S.Sort(S.LZero()), V.VSort(nf_suc(LZERO)), 0)
            case "lsuc":
                if take >= 1 and not args[0][1]:
                    tl = self.check(ctx, args[0][0], V.VLevelT())
                    return rest(S.LSuc(tl), V.VLevelT(), 1)
                pi = V.VPi("l", V.VLevelT(), V.Closure((), S.LevelT()), False,
                           LZERO, V.Closure((), S.LZero()))
                return rest(S.Lam("l", S.LSuc(S.Var(0))), pi, 0)
            case "lmax":
                if take >= 2 and not args[0][1] and not args[1][1]:
                    ta = self.check(ctx, args[0][0], V.VLevelT())
                    tb = self.check(ctx, args[1][0], V.VLevelT())
                    return rest(S.LMax(ta, tb), V.VLevelT(), 2)
                raise ElabError("lmax expects two level arguments", span)
            case "suc":
                if take >= 1 and not args[0][1]:
                    ta = self.check(ctx, args[0][0], V.VNat())
                    return rest(S.Suc(ta), V.VNat(), 1)
                pi = V.VPi("n", V.VNat(), V.Closure((), S.NatT()), False,
                           LZERO, V.Closure((), S.LZero()))
                return rest(S.Lam("n", S.Suc(S.Var(0))), pi, 0)
            case "List":
                if take >= 1 and not args[0][1]:
                    ta, sa = self.infer_type(ctx, args[0][0])
                    if sa is OMEGA:
                        raise ElabError("List elements must live in some Set", span)
                    return rest(S.ListT(ta), V.VSort(sa), 1)
                _, l = self.level_meta(ctx, "l", span)
                ql = V.quote_level(st, ctx.depth, l)
                pi = V.VPi("A", V.VSort(l), V.Closure(ctx.env, S.Sort(S.shift(ql, 1))),
                           False, nf_suc(l), V.Closure(ctx.env, S.LSuc(S.shift(ql, 1))))
                return rest(S.Lam("A", S.ListT(S.Var(0))), pi, 0)
            case "nil":
                _, l = self.level_meta(ctx, "l", span)
                a_t = self.meta(ctx, V.VSort(l), "A", Origin.INTERNAL, span)
                return rest(S.Nil(), V.VList(self.meta_value(ctx, a_t)), 0)
            case "cons":
                if take >= 2 and not args[0][1] and not args[1][1]:
                    th, a = self.infer(ctx, args[0][0])
                    tl = self.check(ctx, args[1][0], V.VList(a))
                    return rest(S.Cons(th, tl), V.VList(a), 2)
                if take == 1 and not args[0][1]:
                    th, a = self.infer(ctx, args[0][0])
                    qa = V.quote(st, ctx.depth, V.VList(a))
                    pi = V.VPi("t", V.VList(a), V.Closure(ctx.env, S.shift(qa, 1)))
                    return S.Lam("t", S.Cons(S.shift(th, 1), S.Var(0))), pi
                _, l = self.level_meta(ctx, "l", span)
                a_t = self.meta(ctx, V.VSort(l), "A", Origin.INTERNAL, span)
                a = self.meta_value(ctx, a_t)
                qa = V.quote(st, ctx.depth, a)
                body = S.Lam("x", S.Lam("t", S.Cons(S.Var(1), S.Var(0))))
                pi = V.VPi("x", a, V.Closure(
                    ctx.env, S.Pi("t", S.ListT(S.shift(qa, 1)),
                                  S.ListT(S.shift(qa, 2)))))
                return rest(body, pi, 0)
            case "fst":
                if take < 1:
                    raise ElabError("fst expects an argument", span)
                tp, pty = self.infer(ctx, args[0][0])
                sg = self.ensure_sigma(ctx, pty, span)
                return rest(S.Fst(tp), sg.fst, 1)
            case "snd":
                if take < 1:
                    raise ElabError("snd expects an argument", span)
                tp, pty = self.infer(ctx, args[0][0])
                sg = self.ensure_sigma(ctx, pty, span)
                return rest(S.Snd(tp), sg.snd.apply(st, V.do_fst(st, self.eval(ctx, tp))), 1)
            case "Id":
                if take < 3:
                    raise ElabError("Id expects a type and two terms", span)
                ta, sa = self.infer_type(ctx, args[0][0])
                if sa is OMEGA:
                    raise ElabError("Id is for small types", span)
                av = self.eval(ctx, ta)
                tx = self.check(ctx, args[1][0], av)
                ty_ = self.check(ctx, args[2][0], av)
                return rest(S.IdT(ta, tx, ty_), V.VSort(sa), 3)
            case "J":
                if take < 3:
                    raise ElabError("J expects a motive, a base case and an equation", span)
                te, ety = self.infer(ctx, args[2][0])
                idv = self.ensure_id(ctx, ety, span)
                a, x, y = idv.ty, idv.lhs, idv.rhs
                _, lp = self.level_meta(ctx, "p", span)
                qa = V.quote(st, ctx.depth, a)
                qx = V.quote(st, ctx.depth, x)
                motive_ty = V.VPi(
                    "y", a,
                    V.Closure(ctx.env, S.Pi(
                        "e", S.IdT(S.shift(qa, 1), S.shift(qx, 1), S.Var(0)),
                        S.Sort(S.shift(V.quote_level(st, ctx.depth, lp), 2)))))
                tm = self.check(ctx, args[0][0], motive_ty)
                mv = self.eval(ctx, tm)
                base_ty = V.apply_value(st, V.apply_value(st, mv, x), V.VRefl())
                tb = self.check(ctx, args[1][0], base_ty)
                res = V.apply_value(st, V.apply_value(st, mv, y), self.eval(ctx, te))
                return rest(S.J(tm, tb, te), res, 3)
            case "absurd":
                if take < 2:
                    raise ElabError("absurd expects a motive type and a target", span)
                tm, _sa = self.infer_type(ctx, args[0][0])
                tt_ = self.check(ctx, args[1][0], V.VEmpty())
                return rest(S.Absurd(tm, tt_), self.eval(ctx, tm), 2)
            case "Lift":
                if take < 2:
                    raise ElabError("Lift expects a level and a type", span)
                tl = self.check(ctx, args[0][0], V.VLevelT())
                lv = V.as_level(st, self.eval(ctx, tl))
                ta, sa = self.infer_type(ctx, args[1][0])
                if sa is OMEGA:
                    raise ElabError("Lift is for small types", span)
                return rest(S.LiftT(tl, ta), V.VSort(nf_max(lv, sa)), 2)
            case "lift":
                if take < 1:
                    raise ElabError("lift expects an argument", span)
                tx, xty = self.infer(ctx, args[0][0])
                _, l = self.level_meta(ctx, "l", span)
                return rest(S.LiftV(tx), V.VLiftT(l, xty), 1)
            case "lower":
                if take < 1:
                    raise ElabError("lower expects an argument", span)
                tx, xty = self.infer(ctx, args[0][0])
                xty = V.force(st, xty)
                if not isinstance(xty, V.VLiftT):
                    raise ElabError(
                        f"lower expects a lifted value, got {self.fmt(ctx, xty)}", span)
                return rest(S.Lower(tx), xty.ty, 1)
        raise AssertionError(f"unknown builtin {kw}")

    def fmt(self, ctx: Ctx, v: V.Value) -> str:
        return S.pretty(self.state.zonk(V.quote(self.state, ctx.depth, v)),
                        ctx.names())


def _spine(e: P.Expr) -> tuple[P.Expr, list[tuple[P.Expr, bool]]]:
    args: list[tuple[P.Expr, bool]] = []
    while isinstance(e, P.EApp):
        args.append((e.arg, e.implicit))
        e = e.fn
    args.reverse()
    return e, args


def _is_implicit_lam(e: P.Expr) -> bool:
    return isinstance(e, P.ELam) and bool(e.binders) and e.binders[0][1]


def _escapes(level_term: S.Term) -> bool:
    return S.free_in(level_term, 0)


def _unshift_level(state, depth: int, nf: LevelNF) -> LevelNF:
    """A level under a binder whose atoms do not mention the binder is also a
    level outside it (values are level-indexed, so this is the identity)."""
    return nf
