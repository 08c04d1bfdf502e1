"""Elaboration tests: insertion, checking rules, declaration processing,
error reporting, and the stability of accepted definitions."""

from pathlib import Path

import pytest

import nary_kernel.syntax as S
import nary_kernel.values as V
from conftest import prelude_session
from nary_kernel.checker import (CoreTypeError, Session, validate_global)
from nary_kernel.cli import corpus_names, corpus_path
from nary_kernel.meta import Origin


def statuses(out):
    return [o.status for o in out]


# -- implicit arguments ------------------------------------------------------

def test_underscore_gets_the_expected_type():
    s = Session()
    out = s.check_source("""
f : Nat -> Nat
f x = x

y : Nat
y = f _
""")
    assert statuses(out) == ["ok", "unsolved"]
    hole = next(m for m in s.state.metas.values() if m.origin == Origin.UNDERSCORE)
    assert S.pretty(s.state.zonk(V.quote(s.state, len(hole.telescope), hole.ty))) == "Nat"


def test_implicit_lambda_insertion():
    s = Session()
    out = s.check_source("""
idf : {A : Set lzero} -> A -> A
idf = \\x. x

use : Nat
use = idf 3
""")
    assert statuses(out) == ["ok", "ok"]
    entry = s.state.globals["idf"]
    d = entry.clauses
    rhs = d.clauses[0].rhs
    assert isinstance(rhs, S.Lam) and rhs.implicit
    assert isinstance(rhs.body, S.Lam) and not rhs.body.implicit


def test_explicit_implicit_argument():
    s = Session()
    out = s.check_source("""
idf : {A : Set lzero} -> A -> A
idf = \\x. x

use : Nat
use = idf {Nat} 3
""")
    assert statuses(out) == ["ok", "ok"]


def test_insertion_is_one_meta_per_implicit_pi():
    s = Session()
    out = s.check_source("""
k : {A : Set lzero} -> {B : Set lzero} -> A -> B -> A
k = \\x y. x

use : Nat
use = k 1 2
""")
    assert statuses(out) == ["ok", "ok"]
    inserted = [m for m in s.state.metas.values()
                if m.origin == Origin.IMPLICIT and m.hint in ("A", "B")]
    assert len(inserted) == 2


# -- errors -------------------------------------------------------------------

def test_unbound_name():
    out = Session().check_source("x : Nat\nx = missing\n")
    assert statuses(out) == ["typeerror"]
    assert "unbound name" in out[0].message


def test_not_a_function():
    out = Session().check_source("x : Nat\nx = tt 3\n")
    assert statuses(out) == ["typeerror"]
    assert "function" in out[0].message


def test_not_a_pair():
    out = Session().check_source("x : Nat\nx = fst 3\n")
    assert statuses(out) == ["typeerror"]
    assert "pair" in out[0].message


def test_error_recovery_at_declaration_granularity():
    out = Session().check_source("""
bad : Nat
bad = tt

good : Nat
good = 5
""")
    assert statuses(out) == ["typeerror", "ok"]


def test_duplicate_definition_rejected():
    out = Session().check_source("x : Nat\nx = 1\n\nx : Nat\nx = 2\n")
    assert statuses(out) == ["ok", "typeerror"]


def test_clause_without_signature_rejected():
    from nary_kernel.elab import ElabError
    s = Session()
    with pytest.raises(ElabError):
        s.check_source("x = 3\n")


def test_signature_without_clauses_rejected():
    out = Session().check_source("x : Nat\n")
    assert statuses(out) == ["typeerror"]


# -- checking rules -------------------------------------------------------------

def test_refl_emits_endpoint_constraint():
    out = Session().check_source("e : Id Nat 2 (plus 1 1)\ne = refl\n"
                                 .replace("plus 1 1", "2"))
    assert statuses(out) == ["ok"]
    bad = Session().check_source("e : Id Nat 2 3\ne = refl\n")
    assert statuses(bad) == ["typeerror"]


def test_let_in_definitions():
    out = Session().check_source("x : Nat\nx = let two : Nat = 2 in suc two\n")
    assert statuses(out) == ["ok"]


def test_lenient_signature_sorts(psession):
    # a signature whose codomain level mentions its own binders is accepted
    out = psession.check_source("""
Sets2 : (n : Nat) -> (ls : Levels n) -> Set (lsuc (sup n ls))
Sets2 n ls = Sets n ls
""")
    assert statuses(out) == ["ok"]


def test_large_domain_in_signature(psession):
    out = psession.check_source("""
apply0 : ({l : Level} -> Set l -> Set l) -> Set lzero -> Set lzero
apply0 F A = F A
""")
    assert statuses(out) == ["ok"]


def test_postulates_are_rigid():
    out = Session().check_source("""
postulate f : Nat -> Nat

e : Id Nat (f 1) (f 1)
e = refl

bad : Id Nat (f 1) (f 2)
bad = refl
""")
    assert statuses(out) == ["ok", "ok", "typeerror"]


# -- declaration independence and stability ---------------------------------------

def test_independent_declarations_commute():
    a = "x : Nat\nx = 2\n"
    b = "y : Id (Set lzero) _ Nat\ny = refl\n"
    out1 = Session().check_source(a + b)
    out2 = Session().check_source(b + a)
    lines1 = {o.line() for o in out1}
    lines2 = {o.line() for o in out2}
    assert lines1 == lines2


def test_stability_of_all_prelude_globals(psession):
    st = psession.state
    for entry in st.globals.values():
        validate_global(st, entry)


def test_stability_of_corpus_globals(psession):
    text = Path(corpus_path("reduction.nry")).read_text()
    out = psession.check_source(text)
    assert all(o.status == "ok" for o in out)
    st = psession.state
    for entry in st.globals.values():
        validate_global(st, entry)


def test_core_checker_rejects_ill_typed():
    s = Session()
    s.check_source("x : Nat\nx = 2\n")
    with pytest.raises(CoreTypeError):
        from nary_kernel.checker import core_check
        core_check(s.state, [], (), S.TT(), V.VNat())
