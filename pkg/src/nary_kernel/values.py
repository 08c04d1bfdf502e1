"""Normalization by evaluation: weak-head values, spines, read-back.

Terms evaluate against an environment of values; variables in values are
de Bruijn levels, so values float freely under binders.  Global clausal
definitions unfold as soon as every matched argument position is
constructor-headed; otherwise the application is parked as a blocked
neutral that `force` retries after metavariables get solved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S
from .levels import LZERO, LevelAtom, LevelNF, atom_nf, closed, make_nf, nf_max, nf_shift, nf_suc


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class Closure:
    env: tuple
    body: S.Term

    def apply(self, state, v: Value) -> Value:
        return eval_term(state, self.env + (v,), self.body)


# -- eliminations -----------------------------------------------------------

class Elim:
    __slots__ = ()


@dataclass(frozen=True)
class EApp(Elim):
    arg: Value
    implicit: bool = False


@dataclass(frozen=True)
class EFst(Elim):
    pass


@dataclass(frozen=True)
class ESnd(Elim):
    pass


@dataclass(frozen=True)
class EJ(Elim):
    motive: Value
    refl_case: Value


@dataclass(frozen=True)
class EAbsurd(Elim):
    motive: Value


@dataclass(frozen=True)
class ELower(Elim):
    pass


# -- canonical values -------------------------------------------------------

@dataclass(frozen=True)
class VSort(Value):
    level: LevelNF


@dataclass(frozen=True)
class VSortOmega(Value):
    pass


@dataclass(frozen=True)
class VLevel(Value):
    nf: LevelNF


@dataclass(frozen=True)
class VLevelT(Value):
    pass


@dataclass(frozen=True)
class VPi(Value):
    name: str
    dom: Value
    cod: Closure
    implicit: bool = False
    dom_level: Optional[LevelNF] = None
    cod_level: Optional[Closure] = None


@dataclass(frozen=True)
class VSigma(Value):
    name: str
    fst: Value
    snd: Closure
    fst_level: Optional[LevelNF] = None
    snd_level: Optional[Closure] = None


@dataclass(frozen=True)
class VLam(Value):
    name: str
    clo: Closure
    implicit: bool = False


@dataclass(frozen=True)
class VPair(Value):
    fst: Value
    snd: Value


@dataclass(frozen=True)
class VUnit(Value):
    pass


@dataclass(frozen=True)
class VTT(Value):
    pass


@dataclass(frozen=True)
class VEmpty(Value):
    pass


@dataclass(frozen=True)
class VNat(Value):
    pass


@dataclass(frozen=True)
class VZero(Value):
    pass


@dataclass(frozen=True)
class VSuc(Value):
    pred: Value


@dataclass(frozen=True)
class VList(Value):
    elem: Value


@dataclass(frozen=True)
class VNil(Value):
    pass


@dataclass(frozen=True)
class VCons(Value):
    head: Value
    tail: Value


@dataclass(frozen=True)
class VId(Value):
    ty: Value
    lhs: Value
    rhs: Value


@dataclass(frozen=True)
class VRefl(Value):
    pass


@dataclass(frozen=True)
class VLiftT(Value):
    level: LevelNF
    ty: Value


@dataclass(frozen=True)
class VLift(Value):
    inner: Value


# -- neutrals ---------------------------------------------------------------

@dataclass(frozen=True)
class VRigid(Value):
    lvl: int
    spine: tuple = ()


@dataclass(frozen=True)
class VFlex(Value):
    mid: int
    spine: tuple = ()


@dataclass(frozen=True)
class VTop(Value):
    """Application of a global.  `args` are the signature binders consumed so
    far; once saturated the definition either unfolds or blocks, recording the
    flexible scrutinee.  `spine` holds eliminations past saturation."""
    name: str
    args: tuple = ()               # of (Value, implicit)
    spine: tuple = ()
    blocked_on: Optional[Value] = field(compare=False, default=None)


# ---------------------------------------------------------------------------
# Evaluation.

def eval_term(state, env: tuple, t: S.Term) -> Value:
    match t:
        case S.Var(ix):
            return env[len(env) - 1 - ix]
        case S.Top(name):
            return make_top(state, name)
        case S.Meta(mid):
            return VFlex(mid)
        case S.App(fn, arg, imp):
            return apply_value(state, eval_term(state, env, fn), eval_term(state, env, arg), imp)
        case S.Lam(name, body, imp):
            return VLam(name, Closure(env, body), imp)
        case S.Pi(name, dom, cod, imp, dl, cl):
            return VPi(name, eval_term(state, env, dom), Closure(env, cod), imp,
                       None if dl is None else as_level(state, eval_term(state, env, dl)),
                       None if cl is None else Closure(env, cl))
        case S.Sigma(name, a, b, al, bl):
            return VSigma(name, eval_term(state, env, a), Closure(env, b),
                          None if al is None else as_level(state, eval_term(state, env, al)),
                          None if bl is None else Closure(env, bl))
        case S.Pair(a, b):
            return VPair(eval_term(state, env, a), eval_term(state, env, b))
        case S.Fst(x):
            return do_fst(state, eval_term(state, env, x))
        case S.Snd(x):
            return do_snd(state, eval_term(state, env, x))
        case S.UnitT():
            return VUnit()
        case S.TT():
            return VTT()
        case S.EmptyT():
            return VEmpty()
        case S.Absurd(m, tgt):
            return do_absurd(state, eval_term(state, env, m), eval_term(state, env, tgt))
        case S.NatT():
            return VNat()
        case S.Zero():
            return VZero()
        case S.Suc(x):
            return VSuc(eval_term(state, env, x))
        case S.ListT(e):
            return VList(eval_term(state, env, e))
        case S.Nil():
            return VNil()
        case S.Cons(h, tl):
            return VCons(eval_term(state, env, h), eval_term(state, env, tl))
        case S.IdT(ty, l, r):
            return VId(eval_term(state, env, ty), eval_term(state, env, l), eval_term(state, env, r))
        case S.Refl():
            return VRefl()
        case S.J(m, pr, e):
            return do_j(state, eval_term(state, env, m), eval_term(state, env, pr),
                        eval_term(state, env, e))
        case S.LiftT(lv, ty):
            return VLiftT(as_level(state, eval_term(state, env, lv)), eval_term(state, env, ty))
        case S.LiftV(x):
            return VLift(eval_term(state, env, x))
        case S.Lower(x):
            return do_lower(state, eval_term(state, env, x))
        case S.Sort(lv):
            return VSort(as_level(state, eval_term(state, env, lv)))
        case S.SortOmega():
            return VSortOmega()
        case S.LevelT():
            return VLevelT()
        case S.LZero():
            return VLevel(LZERO)
        case S.LSuc(x):
            return VLevel(nf_suc(as_level(state, eval_term(state, env, x))))
        case S.LMax(a, b):
            return VLevel(nf_max(as_level(state, eval_term(state, env, a)),
                                 as_level(state, eval_term(state, env, b))))
        case S.Let(_, _, bound, body):
            return eval_term(state, env + (eval_term(state, env, bound),), body)
        case _:
            raise AssertionError(f"cannot evaluate {t!r}")


def make_top(state, name: str) -> Value:
    entry = state.globals[name]
    if entry.clauses is not None and not entry.clauses.binders:
        out = try_unfold(state, entry.clauses, ())
        if out is not None:
            return out
    return VTop(name)


def apply_value(state, fn: Value, arg: Value, implicit: bool = False) -> Value:
    match fn:
        case VLam(_, clo, _):
            return clo.apply(state, arg)
        case VFlex(mid, spine):
            return VFlex(mid, spine + (EApp(arg, implicit),))
        case VRigid(lvl, spine):
            return VRigid(lvl, spine + (EApp(arg, implicit),))
        case VTop(name, args, spine, blocked):
            entry = state.globals[name]
            d = entry.clauses
            if d is not None and not spine and len(args) < len(d.binders):
                new_args = args + ((arg, implicit),)
                if len(new_args) == len(d.binders):
                    out = try_unfold(state, d, new_args)
                    if out is not None:
                        return out
                    return VTop(name, new_args, (), _blocker(state, d, new_args))
                return VTop(name, new_args)
            return VTop(name, args, spine + (EApp(arg, implicit),), blocked)
        case _:
            raise AssertionError(f"cannot apply non-function value {fn!r}")


def apply_spine(state, v: Value, spine: tuple) -> Value:
    for e in spine:
        match e:
            case EApp(arg, imp):
                v = apply_value(state, v, arg, imp)
            case EFst():
                v = do_fst(state, v)
            case ESnd():
                v = do_snd(state, v)
            case EJ(motive, refl_case):
                v = do_j(state, motive, refl_case, v)
            case EAbsurd(motive):
                v = do_absurd(state, motive, v)
            case ELower():
                v = do_lower(state, v)
    return v


def _spine_extend(v: Value, e: Elim) -> Optional[Value]:
    match v:
        case VFlex(mid, spine):
            return VFlex(mid, spine + (e,))
        case VRigid(lvl, spine):
            return VRigid(lvl, spine + (e,))
        case VTop(name, args, spine, blocked):
            return VTop(name, args, spine + (e,), blocked)
        case _:
            return None


def do_fst(state, v: Value) -> Value:
    if isinstance(v, VPair):
        return v.fst
    out = _spine_extend(v, EFst())
    if out is None:
        raise AssertionError(f"fst of non-pair {v!r}")
    return out


def do_snd(state, v: Value) -> Value:
    if isinstance(v, VPair):
        return v.snd
    out = _spine_extend(v, ESnd())
    if out is None:
        raise AssertionError(f"snd of non-pair {v!r}")
    return out


def do_j(state, motive: Value, refl_case: Value, eq: Value) -> Value:
    if isinstance(eq, VRefl):
        return refl_case
    out = _spine_extend(eq, EJ(motive, refl_case))
    if out is None:
        raise AssertionError(f"J on non-equation {eq!r}")
    return out


def do_absurd(state, motive: Value, target: Value) -> Value:
    out = _spine_extend(target, EAbsurd(motive))
    if out is None:
        raise AssertionError(f"absurd on canonical value {target!r}")
    return out


def do_lower(state, v: Value) -> Value:
    if isinstance(v, VLift):
        return v.inner
    out = _spine_extend(v, ELower())
    if out is None:
        raise AssertionError(f"lower of non-lift {v!r}")
    return out


# ---------------------------------------------------------------------------
# Clause matching.

_YES, _NO, _UNKNOWN = 0, 1, 2


def _match(state, p: S.Pattern, v: Value, out: list) -> int:
    if isinstance(p, S.PVar):
        out.append(v)
        return _YES
    v = force(state, v)
    match p:
        case S.PZero():
            if isinstance(v, VZero):
                return _YES
            return _NO if isinstance(v, VSuc) else _UNKNOWN
        case S.PSuc(q):
            if isinstance(v, VSuc):
                return _match(state, q, v.pred, out)
            return _NO if isinstance(v, VZero) else _UNKNOWN
        case S.PNil():
            if isinstance(v, VNil):
                return _YES
            return _NO if isinstance(v, VCons) else _UNKNOWN
        case S.PCons(ph, pt):
            if isinstance(v, VCons):
                r = _match(state, ph, v.head, out)
                if r != _YES:
                    return r
                return _match(state, pt, v.tail, out)
            return _NO if isinstance(v, VNil) else _UNKNOWN
    raise AssertionError(f"bad pattern {p!r}")


def try_unfold(state, d: S.ClauseDef, args: tuple) -> Optional[Value]:
    """Unfold a saturated clausal application, or None when blocked."""
    explicit = [args[i][0] for i in d.explicit_positions]
    pos_of = {k: pos for pos, k in enumerate(d.explicit_positions)}
    for clause in d.clauses:
        binds: list[Value] = []
        ok = True
        for pos, p in enumerate(clause.patterns):
            r = _match(state, p, explicit[pos], binds)
            if r == _NO:
                ok = False
                break
            if r == _UNKNOWN:
                return None
        if ok:
            env: list[Value] = []
            bind_ix = 0
            for k in range(len(d.binders)):
                pos = pos_of.get(k)
                if pos is None:
                    env.append(args[k][0])
                else:
                    nvars = len(S.pattern_vars(clause.patterns[pos]))
                    env.extend(binds[bind_ix:bind_ix + nvars])
                    bind_ix += nvars
            return eval_term(state, tuple(env), clause.rhs)
    raise AssertionError(f"{d.name}: no clause matched a saturated application")


def _blocker(state, d: S.ClauseDef, args: tuple) -> Optional[Value]:
    explicit = [args[i][0] for i in d.explicit_positions]
    for clause in d.clauses:
        for pos, p in enumerate(clause.patterns):
            binds: list[Value] = []
            r = _match(state, p, explicit[pos], binds)
            if r == _UNKNOWN:
                return force(state, explicit[pos])
            if r == _NO:
                break
    return None


# ---------------------------------------------------------------------------
# Forcing (resolving solved metas, retrying blocked unfoldings).

def force(state, v: Value) -> Value:
    while True:
        match v:
            case VFlex(mid, spine):
                sol = state.solution_value(mid)
                if sol is None:
                    return v
                v = apply_spine(state, sol, spine)
            case VTop(name, args, spine, blocked):
                entry = state.globals[name]
                d = entry.clauses
                if d is None or len(args) < len(d.binders):
                    return v
                if blocked is not None and _still_stuck(state, blocked):
                    return v
                out = try_unfold(state, d, args)
                if out is None:
                    return VTop(name, args, spine, _blocker(state, d, args))
                v = apply_spine(state, out, spine)
            case _:
                return v


def blocking_metas(state, v: Value) -> set[int]:
    """Unsolved metas whose solving might unstick v."""
    v = force(state, v)
    match v:
        case VFlex(mid, _):
            return {mid}
        case VTop(_, _, _, blocked):
            return blocking_metas(state, blocked) if blocked is not None else set()
        case _:
            return set()


def _still_stuck(state, blocked: Value) -> bool:
    """Fast path: a blocked unfolding cannot move while its recorded blocker
    is a rigid neutral or an unsolved meta."""
    f = force(state, blocked)
    match f:
        case VRigid(_, _):
            return True
        case VFlex(mid, _):
            return state.metas[mid].solution is None
        case VTop(_, _, _, inner):
            bm = blocking_metas(state, f)
            return not bm or all(state.metas[m].solution is None for m in bm)
        case _:
            return False


# ---------------------------------------------------------------------------
# Levels over values.

def as_level(state, v: Value) -> LevelNF:
    v = force(state, v)
    if isinstance(v, VLevel):
        return v.nf
    return atom_nf(value_key(state, v), v)


def normalize_level(state, env: tuple, t: S.Term) -> LevelNF:
    """Canonical form of a level-valued term (the input must have type Level;
    anything else is a caller bug)."""
    return force_level(state, as_level(state, eval_term(state, env, t)))


def apply_elim(state, v: Value, e: Elim) -> Value:
    """One beta/iota step: projections on pairs, application of closures,
    J on refl, lower after lift; eliminations on neutrals extend the spine."""
    return apply_spine(state, v, (e,))


def force_level(state, nf: LevelNF) -> LevelNF:
    out = closed(nf.constant)
    for a in nf.atoms:
        h = force(state, a.head)
        sub = nf_shift(as_level(state, h), a.offset)
        out = nf_max(out, sub)
    return out


def quote_level(state, depth: int, nf: LevelNF) -> S.Term:
    nf = force_level(state, nf)
    parts: list[S.Term] = []
    if nf.constant > 0 or not nf.atoms:
        t: S.Term = S.LZero()
        for _ in range(nf.constant):
            t = S.LSuc(t)
        parts.append(t)
    for a in sorted(nf.atoms, key=lambda a: repr(a.key)):
        t = quote(state, depth, a.head)
        for _ in range(a.offset):
            t = S.LSuc(t)
        parts.append(t)
    out = parts[0]
    for p in parts[1:]:
        out = S.LMax(out, p)
    return out


# ---------------------------------------------------------------------------
# Structural keys for neutral heads (used by the level algebra).

def value_key(state, v: Value):
    v = force(state, v)
    match v:
        case VRigid(lvl, spine):
            return ("var", lvl, _spine_key(state, spine))
        case VFlex(mid, spine):
            return ("meta", mid, _spine_key(state, spine))
        case VTop(name, args, spine, _):
            return ("top", name, tuple(value_key(state, a) for a, _ in args),
                    _spine_key(state, spine))
        case VSort(nf):
            return ("Sort", _level_key(state, nf))
        case VSortOmega():
            return ("SortOmega",)
        case VLevel(nf):
            return ("Level", _level_key(state, nf))
        case VLevelT():
            return ("LevelT",)
        case VPair(a, b):
            return ("pair", value_key(state, a), value_key(state, b))
        case VUnit():
            return ("Unit",)
        case VTT():
            return ("tt",)
        case VEmpty():
            return ("Empty",)
        case VNat():
            return ("Nat",)
        case VZero():
            return ("zero",)
        case VSuc(p):
            return ("suc", value_key(state, p))
        case VList(e):
            return ("List", value_key(state, e))
        case VNil():
            return ("nil",)
        case VCons(h, t):
            return ("cons", value_key(state, h), value_key(state, t))
        case VId(ty, l, r):
            return ("Id", value_key(state, ty), value_key(state, l), value_key(state, r))
        case VRefl():
            return ("refl",)
        case VLiftT(nf, ty):
            return ("Lift", _level_key(state, nf), value_key(state, ty))
        case VLift(x):
            return ("lift", value_key(state, x))
        case _:
            # Closure-carrying values; conservative identity key.
            return ("opaque", id(v))


def _level_key(state, nf: LevelNF):
    nf = force_level(state, nf)
    return (nf.constant, tuple(sorted((repr(a.key), a.offset) for a in nf.atoms)))


def _spine_key(state, spine: tuple):
    out = []
    for e in spine:
        match e:
            case EApp(arg, imp):
                out.append(("app", value_key(state, arg), imp))
            case EFst():
                out.append(("fst",))
            case ESnd():
                out.append(("snd",))
            case EJ(m, pr):
                out.append(("J", value_key(state, m), value_key(state, pr)))
            case EAbsurd(m):
                out.append(("absurd", value_key(state, m)))
            case ELower():
                out.append(("lower",))
    return tuple(out)


# ---------------------------------------------------------------------------
# Read-back.

def quote(state, depth: int, v: Value) -> S.Term:
    v = force(state, v)
    match v:
        case VRigid(lvl, spine):
            return _quote_spine(state, depth, S.Var(depth - 1 - lvl), spine)
        case VFlex(mid, spine):
            return _quote_spine(state, depth, S.Meta(mid), spine)
        case VTop(name, args, spine, _):
            t: S.Term = S.Top(name)
            for a, imp in args:
                t = S.App(t, quote(state, depth, a), imp)
            return _quote_spine(state, depth, t, spine)
        case VLam(name, clo, imp):
            return S.Lam(name, quote(state, depth + 1, clo.apply(state, VRigid(depth))), imp)
        case VPi(name, dom, cod, imp, dl, cl):
            fresh = VRigid(depth)
            return S.Pi(name, quote(state, depth, dom),
                        quote(state, depth + 1, cod.apply(state, fresh)), imp,
                        None if dl is None else quote_level(state, depth, dl),
                        None if cl is None else quote_level(
                            state, depth + 1, as_level(state, cl.apply(state, fresh))))
        case VSigma(name, a, b, al, bl):
            fresh = VRigid(depth)
            return S.Sigma(name, quote(state, depth, a),
                           quote(state, depth + 1, b.apply(state, fresh)),
                           None if al is None else quote_level(state, depth, al),
                           None if bl is None else quote_level(
                               state, depth + 1, as_level(state, bl.apply(state, fresh))))
        case VPair(a, b):
            return S.Pair(quote(state, depth, a), quote(state, depth, b))
        case VUnit():
            return S.UnitT()
        case VTT():
            return S.TT()
        case VEmpty():
            return S.EmptyT()
        case VNat():
            return S.NatT()
        case VZero():
            return S.Zero()
        case VSuc(p):
            return S.Suc(quote(state, depth, p))
        case VList(e):
            return S.ListT(quote(state, depth, e))
        case VNil():
            return S.Nil()
        case VCons(h, t):
            return S.Cons(quote(state, depth, h), quote(state, depth, t))
        case VId(ty, l, r):
            return S.IdT(quote(state, depth, ty), quote(state, depth, l), quote(state, depth, r))
        case VRefl():
            return S.Refl()
        case VLiftT(nf, ty):
            return S.LiftT(quote_level(state, depth, nf), quote(state, depth, ty))
        case VLift(x):
            return S.LiftV(quote(state, depth, x))
        case VSort(nf):
            return S.Sort(quote_level(state, depth, nf))
        case VSortOmega():
            return S.SortOmega()
        case VLevel(nf):
            return quote_level(state, depth, nf)
        case VLevelT():
            return S.LevelT()
        case _:
            raise AssertionError(f"cannot quote {v!r}")


def _quote_spine(state, depth: int, head: S.Term, spine: tuple) -> S.Term:
    t = head
    for e in spine:
        match e:
            case EApp(arg, imp):
                t = S.App(t, quote(state, depth, arg), imp)
            case EFst():
                t = S.Fst(t)
            case ESnd():
                t = S.Snd(t)
            case EJ(m, pr):
                t = S.J(quote(state, depth, m), quote(state, depth, pr), t)
            case EAbsurd(m):
                t = S.Absurd(quote(state, depth, m), t)
            case ELower():
                t = S.Lower(t)
    return t


def nf(state, env: tuple, t: S.Term) -> S.Term:
    """Full normal form: evaluate, then read back with metas zonked."""
    return quote(state, len(env), eval_term(state, env, t))


# ---------------------------------------------------------------------------
# Eta-expanded variables: binders of record-like type are introduced in
# expanded form so conversion never needs typed eta on rigid variables.

def var_eta(state, base: Value, ty: Optional[Value]) -> Value:
    if ty is None:
        return base
    ty = force(state, ty)
    match ty:
        case VUnit():
            return VTT()
        case VLiftT(_, inner):
            lowered = _spine_extend(base, ELower())
            return VLift(var_eta(state, lowered, inner))
        case VSigma(_, a, b, _, _):
            f = var_eta(state, _spine_extend(base, EFst()), a)
            s = var_eta(state, _spine_extend(base, ESnd()), b.apply(state, f))
            return VPair(f, s)
        case _:
            return base


def fresh_var(state, depth: int, ty: Optional[Value] = None) -> Value:
    return var_eta(state, VRigid(depth), ty)
