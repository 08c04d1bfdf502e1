"""Core-syntax tests: scoping, substitution, clause validation, printing."""

import pytest

import nary_kernel.syntax as S
from nary_kernel.checker import Session
from nary_kernel.cli import new_session
from conftest import prelude_session


def test_well_scoped_variable_bounds():
    assert S.well_scoped(S.Var(0), 1)
    assert not S.well_scoped(S.Var(0), 0)
    assert S.well_scoped(S.Lam("x", S.Var(0)), 0)
    assert not S.well_scoped(S.Lam("x", S.Var(1)), 0)


def test_well_scoped_checks_globals_and_metas():
    assert S.well_scoped(S.Top("f"), 0, {"f"}, set())
    assert not S.well_scoped(S.Top("g"), 0, {"f"}, set())
    assert not S.well_scoped(S.Meta(3), 0, {"f"}, set())
    assert S.well_scoped(S.Meta(3), 0, {"f"}, {3})


def test_shift_and_subst():
    t = S.Lam("x", S.App(S.Var(0), S.Var(1)))
    assert S.shift(t, 2) == S.Lam("x", S.App(S.Var(0), S.Var(3)))
    assert S.subst(t, S.Zero()) == S.Lam("x", S.App(S.Var(0), S.Zero()))


def test_free_in():
    assert S.free_in(S.Suc(S.Var(0)), 0)
    assert not S.free_in(S.Lam("x", S.Var(0)), 0)
    assert S.free_in(S.Lam("x", S.Var(1)), 0)


# -- clause validation ---------------------------------------------------------

def _plus_def():
    s = Session()
    s.check_source("""
plus : Nat -> Nat -> Nat
plus zero n = n
plus (suc m) n = suc (plus m n)
""")
    return s.state.globals["plus"].clauses


def test_check_clauses_accepts_plus():
    d = _plus_def()
    summary = S.check_clauses(d)
    assert len(summary) == 2


def test_deleted_clause_is_coverage_error():
    d = _plus_def()
    d.clauses = d.clauses[:1]
    with pytest.raises(S.CoverageError):
        S.check_clauses(d)


def test_duplicated_clause_is_overlap_error():
    d = _plus_def()
    d.clauses = d.clauses + [d.clauses[0]]
    with pytest.raises(S.OverlapError):
        S.check_clauses(d)


def test_var_clause_overlaps_constructor_clause():
    s = Session()
    out = s.check_source("""
bad : Nat -> Nat
bad zero = 0
bad n = n
""")
    assert out[0].status == "typeerror"
    assert "overlap" in out[0].message


def test_missing_list_case_is_coverage_error():
    s = Session()
    out = s.check_source("""
hd : List Nat -> Nat
hd (cons x xs) = x
""")
    assert out[0].status == "typeerror"
    assert "exhaustive" in out[0].message


def test_non_structural_recursion_is_termination_error():
    s = Session()
    out = s.check_source("""
loop : Nat -> Nat
loop zero = 0
loop (suc n) = loop (suc n)
""")
    assert out[0].status == "typeerror"
    assert "structurally" in out[0].message


def test_recursion_on_growing_argument_rejected():
    s = Session()
    out = s.check_source("""
grow : Nat -> Nat
grow zero = 0
grow (suc n) = grow (suc (suc n))
""")
    assert out[0].status == "typeerror"
    assert "structurally" in out[0].message


def test_nary_summary_flexible_then_pi():
    s = Session()
    s.check_source("""
nary : Nat -> Set lzero -> Set lzero
nary zero A = A
nary (suc n) A = Nat -> nary n A
""")
    d = s.state.globals["nary"].clauses
    assert d.summary == [None, "Pi"]


def test_zwaux_pattern_set_accepted():
    # patterns 0 / 1 / suc (suc n): disjoint, exhaustive, recursion on suc n
    s = prelude_session()
    d = s.state.globals["zwaux"].clauses
    pats = [c.patterns[0] for c in d.clauses]
    assert pats[0] == S.PZero()
    assert pats[1] == S.PSuc(S.PZero())
    assert isinstance(pats[2], S.PSuc) and isinstance(pats[2].arg, S.PSuc)
    S.check_clauses(d)


def test_arrows_summary_flexible_then_pi():
    s = prelude_session()
    d = s.state.globals["Arrows"].clauses
    assert d.summary == [None, "Pi"]


# -- printing -------------------------------------------------------------------

def test_pretty_pi_forms():
    t = S.Pi("x", S.NatT(), S.NatT())
    assert S.pretty(t) == "Nat -> Nat"
    dep = S.Pi("x", S.NatT(), S.IdT(S.NatT(), S.Var(0), S.Var(0)))
    assert S.pretty(dep) == "(x : Nat) -> Id Nat x x"
    imp = S.Pi("x", S.NatT(), S.NatT(), implicit=True)
    assert S.pretty(imp) == "{x : Nat} -> Nat"


def test_pretty_pairs_right_associated():
    t = S.Pair(S.Top("a"), S.Pair(S.Top("b"), S.TT()))
    assert S.pretty(t) == "(a , b , tt)"


def test_pretty_numerals():
    assert S.pretty(S.Suc(S.Suc(S.Suc(S.Zero())))) == "3"
    assert S.pretty(S.Suc(S.Var(0)), ["n"]) == "suc n"


def test_pretty_lambda_collapses_binders():
    t = S.Lam("x", S.Lam("y", S.App(S.Var(1), S.Var(0))))
    assert S.pretty(t) == "\\x y. x y"


def test_pretty_freshens_shadowed_names():
    t = S.Lam("x", S.Lam("x", S.Var(0)))
    assert S.pretty(t) == "\\x x'. x'"
