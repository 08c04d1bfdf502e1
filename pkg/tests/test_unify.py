"""Unifier tests: the paper-style scenario suite, pattern instantiation,
eta expansion, inversion, postponement honesty, and the trace format."""

import re
from pathlib import Path

import nary_kernel.syntax as S
import nary_kernel.values as V
from conftest import prelude_session
from nary_kernel.checker import Session
from nary_kernel.cli import corpus_path, new_session
from nary_kernel.meta import CStatus, Origin

NARY = """
nary : Nat -> Set lzero -> Set lzero
nary zero A = A
nary (suc n) A = Nat -> nary n A
"""


def outcomes(src, **kw):
    s = Session(**kw)
    return s, s.check_source(src)


def statuses(out):
    return [o.status for o in out]


# -- the unifier scenario suite -------------------------------------------------

def test_decomposition_solves_both_holes():
    s, out = outcomes("up : Id (Set lzero) (_ -> _) (Nat -> Nat)\nup = refl\n")
    assert statuses(out) == ["ok"]
    sols = {S.pretty(s.state.zonk(m.solution))
            for m in s.state.metas.values()
            if m.solution is not None and m.origin == Origin.UNDERSCORE}
    assert "Nat" in sols


def test_let_shares_one_meta():
    s, out = outcomes(
        "sh : let A : Set lzero = _ in Id (Set lzero) (A -> A) (Nat -> Nat)\n"
        "sh = refl\n")
    assert statuses(out) == ["ok"]
    holes = [m for m in s.state.metas.values() if m.origin == Origin.UNDERSCORE]
    assert len(holes) == 1
    assert S.pretty(s.state.zonk(holes[0].solution)) == "Nat"


def test_instantiation_to_whole_expression():
    s, out = outcomes("inst : Id (Set lzero) _ (Nat -> Nat)\ninst = refl\n")
    assert statuses(out) == ["ok"]
    holes = [m for m in s.state.metas.values() if m.origin == Origin.UNDERSCORE]
    assert S.pretty(s.state.zonk(holes[0].solution)) == "Nat -> Nat"


def test_nary_two_metas_unsolved():
    s, out = outcomes(NARY + "postulate A : Set lzero\n"
                      "uns : Id (Set lzero) (nary _ _) (Nat -> A)\nuns = refl\n")
    assert statuses(out) == ["ok", "ok", "unsolved"]
    assert out[2].metas == 2 and out[2].constraints == 1


def test_inversion_reconstructs_arity_one():
    s, out = outcomes(NARY + "inv : Id (Set lzero) (nary _ Nat) (Nat -> Nat)\n"
                      "inv = refl\n")
    assert statuses(out) == ["ok", "ok"]
    hole = next(m for m in s.state.metas.values()
                if m.origin == Origin.UNDERSCORE and m.hint == "_")
    assert S.pretty(s.state.zonk(hole.solution)) == "1"
    assert [e.global_name for e in s.state.invert_events] == ["nary", "nary"]


def test_colliding_heads_block_inversion():
    s, out = outcomes(NARY + "#expect unsolved\n"
                      "ninv : Id (Set lzero) (nary _ (Nat -> Nat)) (Nat -> Nat -> Nat)\n"
                      "ninv = refl\n")
    assert statuses(out) == ["ok", "unsolved"]
    assert not s.state.invert_events


def test_head_mismatch_during_inversion_fails():
    _, out = outcomes(NARY + "bad : Id (Set (lsuc lzero)) (nary _ Nat) (Set lzero)\n"
                      "bad = refl\n")
    assert statuses(out) == ["ok", "typeerror"]


def test_rigid_mismatch_is_a_type_error():
    _, out = outcomes("bad : Id (Set lzero) Nat Unit\nbad = refl\n")
    assert statuses(out) == ["typeerror"]


# -- pattern unification ----------------------------------------------------------

def test_miller_pattern_abstraction():
    # the hole is bound outside x and y, so its uses are Miller patterns
    s, out = outcomes("""
plus : Nat -> Nat -> Nat
plus zero n = n
plus (suc m) n = suc (plus m n)

ft : let F : Nat -> Nat -> Nat = _ in (x : Nat) -> (y : Nat) -> Id Nat (F x y) (plus x y)
ft = \\x y. refl
""")
    assert statuses(out) == ["ok", "ok"]
    expected = S.Lam("x", S.Lam("y", S.App(S.App(S.Top("plus"), S.Var(1)), S.Var(0))))

    def strip(t):
        t = S._map_parts(t, lambda s2, _b: strip(s2))
        return type(t)(**{**{f: getattr(t, f) for f in t.__dataclass_fields__},
                          "name": "_"}) if hasattr(t, "name") else t

    sols = [strip(s.state.zonk(m.solution))
            for m in s.state.metas.values() if m.solution is not None]
    assert strip(expected) in sols


def test_nonlinear_spine_postpones():
    s, out = outcomes(
        "nl : (x : Nat) -> Id Nat (_ x x) x\nnl = \\x. refl\n")
    assert statuses(out) == ["unsolved"]
    postponed = [c for c in s.state.constraints if c.status == CStatus.POSTPONED]
    assert postponed
    for c in postponed:
        assert any(s.state.metas[m].solution is None for m in c.blockers)


def test_occurs_check_fails():
    _, out = outcomes("oc : Id (Set lzero) _ (List _)\noc = refl\n")
    # ?A =?= List ?A after the two holes are forced together
    assert out[0].status in ("typeerror", "unsolved")


def test_scope_escape_fails():
    # the hole is bound outside the lambda, so it cannot mention A
    _, out = outcomes(
        "se : let B : Set lzero = _ in Id (Set lzero -> Set lzero) (\\A. B) (\\A. A)\n"
        "se = refl\n")
    assert out[0].status == "typeerror"


def test_flex_flex_postpones_then_resolves():
    _, out = outcomes("""
postulate R : Nat -> Nat -> Set lzero
postulate x : Nat
postulate y : Nat

both : Id (Set lzero) (R _ _) (R x y)
both = refl
""")
    assert statuses(out) == ["ok"] * 4


# -- eta rules ---------------------------------------------------------------------

def test_unit_typed_metas_solve_by_eta(psession):
    out = psession.check_source("""
e1 : Id Unit _ tt
e1 = refl

e2 : Id (Sets 0 tt) _ (lift tt)
e2 = refl
""")
    assert statuses(out) == ["ok", "ok"]


def test_sigma_typed_meta_expands_against_pair(psession):
    out = psession.check_source("""
postulate A : Set lzero

e : Id (Sets 1 (lzero , tt)) _ (A , lift tt)
e = refl
""")
    assert statuses(out) == ["ok", "ok"]


def test_function_eta():
    _, out = outcomes("""
postulate f : Nat -> Nat

e : Id (Nat -> Nat) f (\\x. f x)
e = refl
""")
    assert statuses(out) == ["ok", "ok"]


def test_pair_eta_against_variable():
    _, out = outcomes("""
e : (p : Nat * Nat) -> Id (Nat * Nat) p (fst p , snd p)
e = \\p. refl
""")
    assert statuses(out) == ["ok"]


# -- inversion uniqueness and overrides ----------------------------------------------

def test_forced_wrong_clause_fails():
    src = NARY + "inv : Id (Set lzero) (nary _ Nat) (Nat -> Nat)\ninv = refl\n"
    s = Session()
    out = s.check_source(src)
    assert [o.status for o in out] == ["ok", "ok"]
    events = list(s.state.invert_events)
    assert len(events) == 2
    for ev in events:
        for alt in range(ev.n_clauses):
            if alt == ev.chosen:
                continue
            s2 = Session(invert_override={ev.seq: alt}, validate=False)
            out2 = s2.check_source(src)
            assert any(o.status != "ok" for o in out2), (ev.seq, alt)


# -- levels through the unifier -------------------------------------------------------

def test_level_constraint_routed_and_solved():
    _, out = outcomes("""
postulate a : Level
lv : Id (Set (lsuc a)) (Set _) (Set a)
lv = refl
""")
    assert statuses(out) == ["ok", "ok"]


def test_postponed_level_constraint_reported():
    s, out = outcomes("""
postulate a : Level
amb : Id Level (lmax _ a) a
amb = refl
""")
    # both lzero and a solve it, so the checker must not pick one
    assert statuses(out) == ["ok", "unsolved"]
    assert "lmax" in out[1].report


def test_rigid_level_mismatch_fails():
    _, out = outcomes("""
postulate a : Level
postulate b : Level
bad : Id Level a b
bad = refl
""")
    assert statuses(out) == ["ok", "ok", "typeerror"]


# -- the trace format ------------------------------------------------------------------

def test_trace_lines_are_well_formed_and_deterministic():
    src = Path(corpus_path("unif_inverted.nry")).read_text()
    runs = []
    for _ in range(2):
        trace: list[str] = []
        s = Session(trace=trace)
        s.check_source(src)
        runs.append(list(trace))
    assert runs[0] == runs[1]
    rule_lines = [l for l in runs[0] if l.startswith("RULE")]
    assert rule_lines
    for line in rule_lines:
        assert re.fullmatch(r"RULE \S+ \| .+ ≈ .+ \| .+", line), line
    assert any("invert" in l for l in rule_lines)


# -- postponement honesty ----------------------------------------------------------------

def test_every_postponed_constraint_names_an_unsolved_meta():
    for src in [
        NARY + "u : Id (Set lzero) (nary _ _) (Nat -> Nat -> Nat)\nu = refl\n",
        "nl : (x : Nat) -> Id Nat (_ x x) x\nnl = \\x. refl\n",
    ]:
        s = Session()
        s.check_source(src)
        for c in s.state.constraints:
            if c.status == CStatus.POSTPONED:
                assert any(s.state.metas[m].solution is None for m in c.blockers)
