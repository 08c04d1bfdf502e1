"""Declaration processing, soundness re-validation, and reports.

A session checks declarations in order.  A definition is a signature
followed by a contiguous run of clauses; it is validated (coverage,
overlap, termination), solved, re-verified by a meta-free conversion pass,
and only then installed as a global.  Failures abort the declaration but
later declarations still check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import parser as P
from . import syntax as S
from . import values as V
from .elab import Ctx, ElabError, Elaborator, OMEGA
from .levels import LZERO, nf_equal, nf_max, nf_suc
from .meta import (CStatus, GlobalEntry, MetaEntry, Origin, State,
                   UnifyFailed, meta_closed_type)


@dataclass
class Outcome:
    name: str
    status: str                  # ok | unsolved | typeerror
    metas: int = 0
    constraints: int = 0
    message: str = ""
    span: tuple[int, int] = (0, 0)
    report: str = ""

    def line(self) -> str:
        if self.status == "ok":
            return f"OK {self.name}"
        if self.status == "unsolved":
            return f"UNSOLVED {self.name}: {self.metas} metas, {self.constraints} constraints"
        return f"TYPEERROR {self.name}: {self.message}"


@dataclass
class Group:
    name: str
    display: str
    sig: Optional[P.DSig]
    clauses: list[P.DClause] = field(default_factory=list)
    postulate: Optional[P.DPostulate] = None
    pragma: Optional[str] = None
    span: tuple[int, int] = (0, 0)


def group_declarations(decls: list[P.Decl]) -> list[Group]:
    groups: list[Group] = []
    pragma: Optional[str] = None
    anon = 0
    i = 0
    while i < len(decls):
        d = decls[i]
        if isinstance(d, P.DPragma):
            pragma = d.tag
            i += 1
            continue
        if isinstance(d, P.DPostulate):
            groups.append(Group(d.name, d.name, None, [], d, pragma, d.span))
            pragma = None
            i += 1
            continue
        if isinstance(d, P.DSig):
            name = d.name
            display = name
            if name == "_":
                anon += 1
                name = f"_anon{anon}"
                display = "_"
            g = Group(name, display, d, [], None, pragma, d.span)
            pragma = None
            i += 1
            while i < len(decls) and isinstance(decls[i], P.DClause) \
                    and decls[i].name == d.name:
                g.clauses.append(decls[i])
                i += 1
                if d.name == "_":
                    break
            groups.append(g)
            continue
        if isinstance(d, P.DClause):
            raise ElabError(f"clause for {d.name} has no preceding signature "
                            "(clauses must directly follow their signature)", d.span)
        raise AssertionError(f"unknown declaration {d!r}")
    return groups


class Session:
    def __init__(self, trace: Optional[list[str]] = None, validate: bool = True,
                 invert_override: Optional[dict[int, int]] = None):
        self.state = State(trace=trace, invert_override=invert_override)
        self.elab = Elaborator(self.state)
        self.outcomes: list[Outcome] = []
        self.validate = validate
        self.validated_constraints = 0
        self.validated_solutions = 0
        self.validation_skipped = 0

    # -- entry points ----------------------------------------------------------

    def check_source(self, text: str) -> list[Outcome]:
        decls = P.parse_file(text)
        out = []
        for g in group_declarations(decls):
            out.append(self.check_group(g))
        return out

    def check_group(self, g: Group) -> Outcome:
        meta_floor = self.state._next_meta
        constraint_floor = self.state._next_constraint
        try:
            if g.postulate is not None:
                self._check_postulate(g)
            else:
                self._check_definition(g)
        except (ElabError, UnifyFailed, S.ClauseError) as e:
            self.state.globals.pop(g.name, None)
            oc = Outcome(g.display, "typeerror", message=str(e), span=g.span)
            self.outcomes.append(oc)
            return oc
        if self.validate:
            self._revalidate(meta_floor, constraint_floor)
        unsolved_m = [m for m in self.state.metas.values()
                      if m.mid >= meta_floor and m.solution is None]
        unsolved_c = [c for c in self.state.constraints
                      if c.cid >= constraint_floor and c.status != CStatus.SOLVED]
        if unsolved_m or unsolved_c:
            oc = Outcome(g.display, "unsolved", len(unsolved_m), len(unsolved_c),
                         span=g.span,
                         report=format_report(self.state, unsolved_m, unsolved_c))
        else:
            oc = Outcome(g.display, "ok", span=g.span)
        self.outcomes.append(oc)
        return oc

    # -- declaration kinds ------------------------------------------------------

    def _check_postulate(self, g: Group) -> None:
        d = g.postulate
        if d.name in self.state.globals:
            raise ElabError(f"{d.name} is already defined", d.span)
        t, _sort = self.elab.infer_type(Ctx(), d.ty)
        self.elab.solver.solve_all()
        t = self.state.zonk(t)
        self.state.globals[d.name] = GlobalEntry(
            d.name, t, V.eval_term(self.state, (), t), None, d.span)

    def _check_definition(self, g: Group) -> None:
        d = g.sig
        if g.name in self.state.globals:
            raise ElabError(f"{g.display} is already defined", d.span)
        if not g.clauses:
            raise ElabError(f"{g.display} has a signature but no clauses", d.span)
        sig_term, _sort = self.elab.infer_type(Ctx(), d.ty)
        sig_ty = V.eval_term(self.state, (), sig_term)
        self.state.globals[g.name] = GlobalEntry(g.name, sig_term, sig_ty, None, d.span)

        arity = len(g.clauses[0].patterns)
        for c in g.clauses:
            if len(c.patterns) != arity:
                raise ElabError(f"clause of {g.display} has {len(c.patterns)} patterns, "
                                f"expected {arity}", c.span)
        binders, explicit_positions, matched, matched_types = \
            self._signature_layout(g, sig_ty, arity)

        clause_def = S.ClauseDef(g.name, sig_term, binders, explicit_positions,
                                 matched, matched_types, [])
        for c in g.clauses:
            rhs = self._check_clause(g, sig_ty, c,
                                     explicit_positions, matched_types)
            clause_def.clauses.append(S.Clause(list(c.patterns), rhs, c.span))

        S.check_clauses(clause_def)
        self.elab.solver.solve_all()

        zonked_sig = self.state.zonk(sig_term)
        clause_def.signature = zonked_sig
        clause_def.binders = [(n, i, self.state.zonk(t)) for n, i, t in clause_def.binders]
        for c in clause_def.clauses:
            c.rhs = self.state.zonk(c.rhs)
        entry = self.state.globals[g.name]
        entry.signature = zonked_sig
        entry.ty = V.eval_term(self.state, (), zonked_sig)
        entry.clauses = clause_def

    def _signature_layout(self, g: Group, sig_ty: V.Value, arity: int):
        """Walk the signature's binders as far as the clauses consume them."""
        st = self.state
        binders: list[tuple[str, bool, S.Term]] = []
        explicit_positions: list[int] = []
        matched: list[int] = []
        matched_types: dict[int, str] = {}
        per_pos_patterns: list[list[S.Pattern]] = [
            [c.patterns[k] for c in g.clauses] for k in range(arity)]

        ty = V.force(st, sig_ty)
        depth = 0
        seen_explicit = 0
        while seen_explicit < arity:
            if not isinstance(ty, V.VPi):
                raise ElabError(
                    f"{g.display}: clauses have {arity} patterns but the signature "
                    f"provides only {seen_explicit} explicit arguments", g.span)
            binders.append((ty.name, ty.implicit, V.quote(st, depth, ty.dom)))
            if not ty.implicit:
                k = len(binders) - 1
                explicit_positions.append(k)
                pats = per_pos_patterns[seen_explicit]
                if any(not isinstance(p, S.PVar) for p in pats):
                    matched.append(seen_explicit)
                    dom = V.force(st, ty.dom)
                    if isinstance(dom, V.VNat):
                        matched_types[seen_explicit] = "nat"
                    elif isinstance(dom, V.VList):
                        matched_types[seen_explicit] = "list"
                    else:
                        raise ElabError(
                            f"{g.display}: can only match on Nat or List arguments",
                            g.span)
                seen_explicit += 1
            fresh = V.fresh_var(st, depth, ty.dom)
            ty = V.force(st, ty.cod.apply(st, fresh))
            depth += 1
        return binders, explicit_positions, matched, matched_types

    def _check_clause(self, g: Group, sig_ty: V.Value, c: P.DClause,
                      explicit_positions, matched_types) -> S.Term:
        st = self.state
        ctx = Ctx()
        ty = V.force(st, sig_ty)
        pats = list(c.patterns)
        pos = 0
        while pos < len(pats):
            if not isinstance(ty, V.VPi):
                raise ElabError(f"too many patterns for {g.display}", c.span)
            if ty.implicit:
                ctx = ctx.bind(st, ty.name, ty.dom, implicit=True)
                ty = V.force(st, ty.cod.apply(st, ctx.entries[-1].value))
                continue
            p = pats[pos]
            ctx, pv = self._bind_pattern(ctx, p, ty.dom, c.span)
            ty = V.force(st, ty.cod.apply(st, pv))
            pos += 1
        rhs = self.elab.check(ctx, c.rhs, ty)
        self.elab.solver.solve_all()
        return rhs

    def _bind_pattern(self, ctx: Ctx, p: S.Pattern, dom: V.Value,
                      span) -> tuple[Ctx, V.Value]:
        st = self.state
        match p:
            case S.PVar(name):
                ctx = ctx.bind(st, name, dom)
                return ctx, ctx.entries[-1].value
            case S.PZero():
                if not isinstance(V.force(st, dom), V.VNat):
                    raise ElabError("zero pattern against a non-Nat argument", span)
                return ctx, V.VZero()
            case S.PSuc(q):
                if not isinstance(V.force(st, dom), V.VNat):
                    raise ElabError("suc pattern against a non-Nat argument", span)
                ctx, v = self._bind_pattern(ctx, q, V.VNat(), span)
                return ctx, V.VSuc(v)
            case S.PNil():
                if not isinstance(V.force(st, dom), V.VList):
                    raise ElabError("nil pattern against a non-List argument", span)
                return ctx, V.VNil()
            case S.PCons(h, t):
                domf = V.force(st, dom)
                if not isinstance(domf, V.VList):
                    raise ElabError("cons pattern against a non-List argument", span)
                ctx, vh = self._bind_pattern(ctx, h, domf.elem, span)
                ctx, vt = self._bind_pattern(ctx, t, domf, span)
                return ctx, V.VCons(vh, vt)
        raise AssertionError

    # -- post-hoc soundness validation -------------------------------------------

    def _revalidate(self, meta_floor: int, constraint_floor: int) -> None:
        st = self.state

        def live(t: S.Term) -> bool:
            return any(st.metas[m].solution is None for m in S.metas_in(t))

        for c in st.constraints:
            if c.cid < constraint_floor or c.status != CStatus.SOLVED:
                continue
            lq = st.zonk(V.quote(st, c.depth, c.lhs))
            rq = st.zonk(V.quote(st, c.depth, c.rhs))
            if live(lq) or live(rq):
                self.validation_skipped += 1
                continue
            l = V.eval_term(st, _rigid_env(c.depth), lq)
            r = V.eval_term(st, _rigid_env(c.depth), rq)
            if not convert(st, c.depth, l, r):
                raise AssertionError(
                    f"soundness: solved constraint fails conversion: "
                    f"{S.pretty(lq)} vs {S.pretty(rq)}")
            self.validated_constraints += 1
        for m in st.metas.values():
            if m.mid < meta_floor or m.solution is None:
                continue
            ty_term = meta_closed_type(st, m)
            sol = st.zonk(m.solution)
            if live(ty_term) or live(sol):
                self.validation_skipped += 1
                continue
            core_check(st, [], (), sol, V.eval_term(st, (), ty_term))
            self.validated_solutions += 1

    def outcome_lines(self) -> list[str]:
        return [o.line() for o in self.outcomes]


def _rigid_env(depth: int) -> tuple:
    return tuple(V.VRigid(i) for i in range(depth))


def clause_context(state: State, entry: GlobalEntry, clause: S.Clause):
    """Rebuild a clause's typing context from a finalized definition:
    returns (binder types, environment, expected type of the right side)."""
    d = entry.clauses
    ty = V.force(state, entry.ty)
    ctx: list[V.Value] = []
    env: tuple = ()
    pats = list(clause.patterns)
    pos = 0

    def bind_pat(p: S.Pattern, dom: V.Value):
        nonlocal ctx, env
        match p:
            case S.PVar(_):
                v = V.fresh_var(state, len(ctx), dom)
                ctx.append(dom)
                env = env + (v,)
                return v
            case S.PZero():
                return V.VZero()
            case S.PSuc(q):
                return V.VSuc(bind_pat(q, V.VNat()))
            case S.PNil():
                return V.VNil()
            case S.PCons(h, t):
                domf = V.force(state, dom)
                vh = bind_pat(h, domf.elem)
                vt = bind_pat(t, domf)
                return V.VCons(vh, vt)
        raise AssertionError

    while pos < len(pats):
        assert isinstance(ty, V.VPi), "clause consumes more than the signature"
        if ty.implicit:
            v = V.fresh_var(state, len(ctx), ty.dom)
            ctx.append(ty.dom)
            env = env + (v,)
            ty = V.force(state, ty.cod.apply(state, v))
            continue
        pv = bind_pat(pats[pos], ty.dom)
        ty = V.force(state, ty.cod.apply(state, pv))
        pos += 1
    return ctx, env, ty


def validate_global(state: State, entry: GlobalEntry) -> None:
    """Stability oracle: a finalized definition re-checks, meta-free."""
    sort = core_infer(state, [], (), entry.signature)
    sort = V.force(state, sort)
    if not isinstance(sort, (V.VSort, V.VSortOmega)):
        raise CoreTypeError(f"{entry.name}: signature is not a type")
    if entry.clauses is None:
        return
    for clause in entry.clauses.clauses:
        ctx, env, expected = clause_context(state, entry, clause)
        core_check(state, ctx, env, clause.rhs, expected)


# ---------------------------------------------------------------------------
# Reports.


def format_report(state: State, metas: list[MetaEntry], constraints) -> str:
    lines: list[str] = []
    for m in sorted(metas, key=lambda m: (m.span, m.mid)):
        ty = S.pretty(state.zonk(V.quote(state, len(m.telescope), m.ty)),
                      [e.name for e in m.telescope])
        lines.append(f"  meta ?{m.hint}.{m.mid} : {ty}"
                     f" ({m.origin.value} at {m.span[0]}:{m.span[1]})")
    for c in sorted(constraints, key=lambda c: (c.span, c.cid)):
        l = S.pretty(state.zonk(V.quote(state, c.depth, c.lhs)))
        r = S.pretty(state.zonk(V.quote(state, c.depth, c.rhs)))
        lines.append(f"  constraint {l} =?= {r} (at {c.span[0]}:{c.span[1]})")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# The independent, meta-free conversion oracle and core re-checker.  These
# deliberately re-derive equality and typing without the solver: they are the
# artifact's second route for every solved constraint and meta solution.


def convert(state: State, depth: int, a: V.Value, b: V.Value) -> bool:
    a = V.force(state, a)
    b = V.force(state, b)
    if isinstance(a, V.VFlex) or isinstance(b, V.VFlex):
        if isinstance(a, V.VFlex) and isinstance(b, V.VFlex) and a.mid == b.mid:
            return _convert_spines(state, depth, a.spine, b.spine)
        raise AssertionError("metavariable reached the conversion oracle")
    match (a, b):
        case (V.VSort(x), V.VSort(y)):
            return nf_equal(V.force_level(state, x), V.force_level(state, y))
        case (V.VSortOmega(), V.VSortOmega()):
            return True
        case (V.VLevel(x), V.VLevel(y)):
            return nf_equal(V.force_level(state, x), V.force_level(state, y))
        case (V.VLevel(x), _) | (_, V.VLevel(x)):
            x2 = V.as_level(state, a), V.as_level(state, b)
            return nf_equal(V.force_level(state, x2[0]), V.force_level(state, x2[1]))
        case (V.VPi(_, d1, c1, i1, _, _), V.VPi(_, d2, c2, i2, _, _)):
            if i1 != i2 or not convert(state, depth, d1, d2):
                return False
            fresh = V.fresh_var(state, depth, d1)
            return convert(state, depth + 1, c1.apply(state, fresh), c2.apply(state, fresh))
        case (V.VSigma(_, a1, b1, _, _), V.VSigma(_, a2, b2, _, _)):
            if not convert(state, depth, a1, a2):
                return False
            fresh = V.fresh_var(state, depth, a1)
            return convert(state, depth + 1, b1.apply(state, fresh), b2.apply(state, fresh))
        case (V.VLam(_, _, _), _) | (_, V.VLam(_, _, _)):
            fresh = V.VRigid(depth)
            return convert(state, depth + 1,
                           _apply_any(state, a, fresh), _apply_any(state, b, fresh))
        case (V.VTT(), _) | (_, V.VTT()):
            return True
        case (V.VPair(_, _), _) | (_, V.VPair(_, _)):
            return (convert(state, depth, V.do_fst(state, a), V.do_fst(state, b))
                    and convert(state, depth, V.do_snd(state, a), V.do_snd(state, b)))
        case (V.VLift(_), _) | (_, V.VLift(_)):
            return convert(state, depth, V.do_lower(state, a), V.do_lower(state, b))
        case (V.VRigid(l1, s1), V.VRigid(l2, s2)):
            return l1 == l2 and _convert_spines(state, depth, s1, s2)
        case (V.VTop(n1, a1, s1, _), V.VTop(n2, a2, s2, _)):
            if n1 != n2 or len(a1) != len(a2):
                return False
            for (x, _), (y, _) in zip(a1, a2):
                if not convert(state, depth, x, y):
                    return False
            return _convert_spines(state, depth, s1, s2)
        case (V.VSuc(x), V.VSuc(y)) | (V.VList(x), V.VList(y)):
            return convert(state, depth, x, y)
        case (V.VCons(h1, t1), V.VCons(h2, t2)):
            return convert(state, depth, h1, h2) and convert(state, depth, t1, t2)
        case (V.VId(t1, x1, y1), V.VId(t2, x2, y2)):
            return (convert(state, depth, t1, t2) and convert(state, depth, x1, x2)
                    and convert(state, depth, y1, y2))
        case (V.VLiftT(l1, t1), V.VLiftT(l2, t2)):
            return (nf_equal(V.force_level(state, l1), V.force_level(state, l2))
                    and convert(state, depth, t1, t2))
    return type(a) is type(b) and type(a) in (
        V.VNat, V.VUnit, V.VEmpty, V.VLevelT, V.VZero, V.VNil, V.VRefl)


def _apply_any(state: State, v: V.Value, arg: V.Value) -> V.Value:
    return V.apply_value(state, v, arg)


def _convert_spines(state: State, depth: int, s1: tuple, s2: tuple) -> bool:
    if len(s1) != len(s2):
        return False
    for e1, e2 in zip(s1, s2):
        match (e1, e2):
            case (V.EApp(a1, _), V.EApp(a2, _)):
                if not convert(state, depth, a1, a2):
                    return False
            case (V.EFst(), V.EFst()) | (V.ESnd(), V.ESnd()) | (V.ELower(), V.ELower()):
                pass
            case (V.EJ(m1, p1), V.EJ(m2, p2)):
                if not (convert(state, depth, m1, m2) and convert(state, depth, p1, p2)):
                    return False
            case (V.EAbsurd(m1), V.EAbsurd(m2)):
                if not convert(state, depth, m1, m2):
                    return False
            case _:
                return False
    return True


class CoreTypeError(Exception):
    pass


def core_infer(state: State, ctx: list[V.Value], env: tuple, t: S.Term) -> V.Value:
    """Type inference over core terms; no metas may be created.  `ctx` holds
    the types of the binders, `env` their (eta-expanded) values."""
    depth = len(ctx)

    def ev(x: S.Term) -> V.Value:
        return V.eval_term(state, env, x)

    match t:
        case S.Var(ix):
            if not 0 <= ix < depth:
                raise CoreTypeError(f"variable out of scope: {ix}")
            return ctx[depth - 1 - ix]
        case S.Top(name):
            if name not in state.globals:
                raise CoreTypeError(f"unknown global {name}")
            return state.globals[name].ty
        case S.Meta(mid):
            m = state.metas[mid]
            if m.solution is not None:
                raise CoreTypeError("solved meta must be zonked away")
            return V.eval_term(state, (), meta_closed_type(state, m))
        case S.App(fn, arg, _):
            fty = V.force(state, core_infer(state, ctx, env, fn))
            if not isinstance(fty, V.VPi):
                raise CoreTypeError(f"application of a non-function: {S.pretty(fn)}")
            core_check(state, ctx, env, arg, fty.dom)
            return fty.cod.apply(state, ev(arg))
        case S.Pi(_, dom, cod, _, _, _):
            sa = _core_sort(state, ctx, env, dom)
            dv = ev(dom)
            sb = _core_sort(state, [*ctx, dv], env + (V.fresh_var(state, depth, dv),), cod)
            if sa is OMEGA or sb is OMEGA:
                return V.VSortOmega()
            if S.free_in(V.quote_level(state, depth + 1, sb), 0):
                return V.VSortOmega()
            return V.VSort(nf_max(sa, sb))
        case S.Sigma(_, a, b, _, _):
            sa = _core_sort(state, ctx, env, a)
            av = ev(a)
            sb = _core_sort(state, [*ctx, av], env + (V.fresh_var(state, depth, av),), b)
            if sa is OMEGA or sb is OMEGA:
                raise CoreTypeError("Sigma of large types")
            if S.free_in(V.quote_level(state, depth + 1, sb), 0):
                raise CoreTypeError("Sigma level depends on its binder")
            return V.VSort(nf_max(sa, sb))
        case S.Pair(a, b):
            ta = core_infer(state, ctx, env, a)
            tb = core_infer(state, ctx, env, b)
            qb = V.quote(state, depth, tb)
            return V.VSigma("_", ta, V.Closure(env, S.shift(qb, 1)))
        case S.Fst(x):
            xt = V.force(state, core_infer(state, ctx, env, x))
            if not isinstance(xt, V.VSigma):
                raise CoreTypeError("fst of a non-pair")
            return xt.fst
        case S.Snd(x):
            xt = V.force(state, core_infer(state, ctx, env, x))
            if not isinstance(xt, V.VSigma):
                raise CoreTypeError("snd of a non-pair")
            return xt.snd.apply(state, V.do_fst(state, ev(x)))
        case S.UnitT() | S.EmptyT() | S.NatT() | S.LevelT():
            return V.VSort(LZERO)
        case S.TT():
            return V.VUnit()
        case S.Zero():
            return V.VNat()
        case S.Suc(x):
            core_check(state, ctx, env, x, V.VNat())
            return V.VNat()
        case S.ListT(e):
            se = _core_sort(state, ctx, env, e)
            if se is OMEGA:
                raise CoreTypeError("List of a large type")
            return V.VSort(se)
        case S.Nil() | S.Cons(_, _):
            raise CoreTypeError("list constructors need a checking type")
        case S.Refl():
            raise CoreTypeError("refl needs a checking type")
        case S.IdT(ty, l, r):
            sa = _core_sort(state, ctx, env, ty)
            if sa is OMEGA:
                raise CoreTypeError("Id of a large type")
            tv = ev(ty)
            core_check(state, ctx, env, l, tv)
            core_check(state, ctx, env, r, tv)
            return V.VSort(sa)
        case S.J(motive, refl_case, eq):
            ety = V.force(state, core_infer(state, ctx, env, eq))
            if not isinstance(ety, V.VId):
                raise CoreTypeError("J on a non-equation")
            _check_motive(state, ctx, env, motive, ety.ty, ety.lhs)
            mv = ev(motive)
            core_check(state, ctx, env, refl_case,
                       V.apply_value(state, V.apply_value(state, mv, ety.lhs), V.VRefl()))
            return V.apply_value(state, V.apply_value(state, mv, ety.rhs), ev(eq))
        case S.Absurd(motive, target):
            _core_sort(state, ctx, env, motive)
            core_check(state, ctx, env, target, V.VEmpty())
            return ev(motive)
        case S.LiftT(lv, ty):
            core_check(state, ctx, env, lv, V.VLevelT())
            sa = _core_sort(state, ctx, env, ty)
            if sa is OMEGA:
                raise CoreTypeError("Lift of a large type")
            return V.VSort(nf_max(sa, V.as_level(state, ev(lv))))
        case S.LiftV(_):
            raise CoreTypeError("lift needs a checking type")
        case S.Lower(x):
            xt = V.force(state, core_infer(state, ctx, env, x))
            if not isinstance(xt, V.VLiftT):
                raise CoreTypeError("lower of a non-lifted value")
            return xt.ty
        case S.Sort(lv):
            core_check(state, ctx, env, lv, V.VLevelT())
            return V.VSort(nf_suc(V.as_level(state, ev(lv))))
        case S.SortOmega():
            raise CoreTypeError("the limit sort has no type")
        case S.LZero() | S.LSuc(_) | S.LMax(_, _):
            if isinstance(t, S.LSuc):
                core_check(state, ctx, env, t.t, V.VLevelT())
            if isinstance(t, S.LMax):
                core_check(state, ctx, env, t.lhs, V.VLevelT())
                core_check(state, ctx, env, t.rhs, V.VLevelT())
            return V.VLevelT()
        case S.Lam(_, _, _):
            raise CoreTypeError("lambda needs a checking type")
        case S.Let(_, _, bound, body):
            bty = core_infer(state, ctx, env, bound)
            return core_infer(state, [*ctx, bty], env + (ev(bound),), body)
    raise CoreTypeError(f"cannot infer {t!r}")


def core_check(state: State, ctx: list[V.Value], env: tuple, t: S.Term,
               ty: V.Value) -> None:
    ty = V.force(state, ty)
    depth = len(ctx)
    match (t, ty):
        case (S.Lam(_, body, imp), V.VPi(_, dom, cod, imp2, _, _)):
            if imp != imp2:
                raise CoreTypeError("implicitness mismatch in lambda")
            fresh = V.fresh_var(state, depth, dom)
            core_check(state, [*ctx, dom], env + (fresh,), body,
                       cod.apply(state, fresh))
            return
        case (S.Pair(a, b), V.VSigma(_, fa, sb, _, _)):
            core_check(state, ctx, env, a, fa)
            core_check(state, ctx, env, b,
                       sb.apply(state, V.eval_term(state, env, a)))
            return
        case (S.Refl(), V.VId(_, lhs, rhs)):
            if not convert(state, depth, lhs, rhs):
                raise CoreTypeError("refl between non-convertible endpoints")
            return
        case (S.Nil(), V.VList(_)):
            return
        case (S.Cons(h, tl), V.VList(e)):
            core_check(state, ctx, env, h, e)
            core_check(state, ctx, env, tl, ty)
            return
        case (S.LiftV(x), V.VLiftT(_, inner)):
            core_check(state, ctx, env, x, inner)
            return
        case (S.TT(), V.VUnit()):
            return
    got = core_infer(state, ctx, env, t)
    got_f = V.force(state, got)
    if isinstance(ty, V.VSortOmega) and isinstance(got_f, (V.VSort, V.VSortOmega)):
        return
    if not convert(state, depth, got, ty):
        raise CoreTypeError(
            f"type mismatch: {S.pretty(V.quote(state, depth, got))} vs "
            f"{S.pretty(V.quote(state, depth, ty))}")


def _core_sort(state: State, ctx: list[V.Value], env: tuple, t: S.Term):
    ty = V.force(state, core_infer(state, ctx, env, t))
    if isinstance(ty, V.VSort):
        return V.force_level(state, ty.level)
    if isinstance(ty, V.VSortOmega):
        return OMEGA
    raise CoreTypeError(f"expected a type, got {S.pretty(V.quote(state, len(ctx), ty))}")


def _check_motive(state: State, ctx: list[V.Value], env: tuple, motive: S.Term,
                  a: V.Value, x: V.Value) -> None:
    """A J motive must have type (y : A) -> Id A x y -> Set l for some l."""
    depth = len(ctx)
    vy = V.fresh_var(state, depth, a)
    idt = V.VId(a, x, vy)
    match motive:
        case S.Lam(_, S.Lam(_, body, _), _):
            _core_sort(state, [*ctx, a, idt], env + (vy, V.fresh_var(state, depth + 1, idt)),
                       body)
            return
        case S.Lam(_, body, _):
            inner = V.force(state, core_infer(state, [*ctx, a], env + (vy,), body))
            if not (isinstance(inner, V.VPi) and convert(state, depth + 1, inner.dom, idt)):
                raise CoreTypeError("J motive must abstract over the equation")
            ve = V.fresh_var(state, depth + 1, idt)
            out = V.force(state, inner.cod.apply(state, ve))
            if not isinstance(out, (V.VSort, V.VSortOmega)):
                raise CoreTypeError("J motive must target a Set")
            return
    mty = V.force(state, core_infer(state, ctx, env, motive))
    if not (isinstance(mty, V.VPi) and convert(state, depth, mty.dom, a)):
        raise CoreTypeError("J motive has the wrong domain")
    c1 = V.force(state, mty.cod.apply(state, vy))
    if not (isinstance(c1, V.VPi) and convert(state, depth + 1, c1.dom, idt)):
        raise CoreTypeError("J motive must abstract over the equation")
    ve = V.fresh_var(state, depth + 1, idt)
    out = V.force(state, c1.cod.apply(state, ve))
    if not isinstance(out, (V.VSort, V.VSortOmega)):
        raise CoreTypeError("J motive must target a Set")
