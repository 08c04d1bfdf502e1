"""Parser tests: grammar coverage, error positions, print/parse round trips."""

import pytest

import nary_kernel.parser as P
import nary_kernel.syntax as S
from nary_kernel.checker import Session, group_declarations
from nary_kernel.cli import corpus_names, corpus_path, new_session, prelude_source
from conftest import prelude_session
from pathlib import Path


def test_signature_and_clauses():
    decls = P.parse_file(
        "plus : Nat -> Nat -> Nat\n"
        "plus zero n = n\n"
        "plus (suc m) n = suc (plus m n)\n")
    assert isinstance(decls[0], P.DSig)
    assert isinstance(decls[1], P.DClause)
    assert decls[1].patterns == [S.PZero(), S.PVar("n")]
    assert decls[2].patterns[0] == S.PSuc(S.PVar("m"))


def test_anonymous_declarations():
    decls = P.parse_file(
        "_ : Id (Set lzero) (_ -> _) (Nat -> Nat)\n"
        "_ = refl\n")
    assert [d.name for d in decls] == ["_", "_"]
    groups = group_declarations(decls)
    assert len(groups) == 1 and groups[0].display == "_"


def test_pragma_binds_to_next_declaration():
    decls = P.parse_file("#expect unsolved\nx : Nat\nx = 3\n")
    groups = group_declarations(decls)
    assert groups[0].pragma == "unsolved"


def test_bad_pragma_tag():
    with pytest.raises(P.ParseError):
        P.parse_file("#expect maybe\n")


def test_postulate():
    decls = P.parse_file("postulate A : Set lzero\n")
    assert isinstance(decls[0], P.DPostulate) and decls[0].name == "A"


def test_numeral_patterns_expand():
    decls = P.parse_file("f : Nat -> Nat\nf 2 = 0\nf zero = 0\nf 1 = 0\nf (suc (suc (suc n))) = n\n")
    assert decls[1].patterns == [S.PSuc(S.PSuc(S.PZero()))]


def test_precedence_sigma_tighter_than_arrow():
    e = P.parse_expr("Nat * Nat -> Nat")
    assert isinstance(e, P.EPi) and isinstance(e.dom, P.ESigma)


def test_arrow_right_associative():
    e = P.parse_expr("Nat -> Nat -> Nat")
    assert isinstance(e, P.EPi) and isinstance(e.cod, P.EPi)


def test_dependent_binders():
    e = P.parse_expr("(x : Nat) -> Id Nat x x")
    assert isinstance(e, P.EPi) and e.name == "x" and not e.implicit
    e = P.parse_expr("{x : Nat} -> Id Nat x x")
    assert isinstance(e, P.EPi) and e.implicit
    e = P.parse_expr("(x : Nat) * Id Nat x x")
    assert isinstance(e, P.ESigma) and e.name == "x"


def test_annotation_vs_binder():
    e = P.parse_expr("(x : Nat)")
    assert isinstance(e, P.EAnn)


def test_tuples_right_nested():
    e = P.parse_expr("(a , b , tt)")
    assert isinstance(e, P.EPair) and isinstance(e.snd, P.EPair)


def test_implicit_argument_braces():
    e = P.parse_expr("congn 2 plus {2} {2} refl")
    head, args = [], e
    spine = []
    while isinstance(e, P.EApp):
        spine.append(e.implicit)
        e = e.fn
    assert spine[::-1] == [False, False, True, True, False]


def test_lambda_with_implicit_binders():
    e = P.parse_expr("\\{x} {y} e. e")
    assert isinstance(e, P.ELam)
    assert e.binders == [("x", True), ("y", True), ("e", False)]


def test_let_with_annotation():
    e = P.parse_expr("let A : Set lzero = Nat in A")
    assert isinstance(e, P.ELet) and e.ann is not None


def test_parse_error_position():
    with pytest.raises(P.ParseError) as exc:
        P.parse_file("x : (Nat ->\n")
    assert exc.value.line == 1


def test_comments_ignored():
    decls = P.parse_file("-- hello\nx : Nat -- trailing\nx = 3\n")
    assert len(decls) == 2


def test_indented_continuation_lines():
    decls = P.parse_file("x : Nat ->\n  Nat\nx n = n\n")
    assert len(decls) == 2 and isinstance(decls[0].ty, P.EPi)


# -- round trips ------------------------------------------------------------------

def _strip(t: S.Term) -> S.Term:
    """Alpha-normalise by erasing name hints."""
    out = S._map_parts(t, lambda s, _b: _strip(s))
    for field in ("name",):
        if hasattr(out, field):
            out = type(out)(**{**{f: getattr(out, f) for f in out.__dataclass_fields__},
                               field: "_"})
    return out


def test_signature_roundtrip_through_printer():
    """parse(pretty(core signature)) re-elaborates to an alpha-equal core."""
    s = prelude_session()
    outcomes = s.check_source(Path(corpus_path("reduction.nry")).read_text())
    assert all(o.status == "ok" for o in outcomes)
    from nary_kernel.elab import Ctx
    for name, entry in list(s.state.globals.items()):
        printed = S.pretty(entry.signature)
        reparsed = P.parse_expr(printed)
        t2, _sort = s.elab.infer_type(Ctx(), reparsed)
        s.elab.solver.solve_all()
        t2 = s.state.zonk(t2)
        assert _strip(t2) == _strip(entry.signature), name


def test_printer_parser_fixpoint_on_corpus():
    """Printing a parsed-and-printed declaration body is stable."""
    sess = prelude_session()
    for name in corpus_names():
        text = Path(corpus_path(name)).read_text()
        for d in P.parse_file(text):
            if isinstance(d, (P.DSig, P.DPostulate)):
                src = d.ty
            elif isinstance(d, P.DClause):
                src = d.rhs
            else:
                continue
            # surface AST -> surface AST via the expression grammar only
            assert P.parse_expr(_render(src)) is not None


def _render(e: P.Expr) -> str:
    """Render a surface expression back to text (used only by tests)."""
    match e:
        case P.EName(name=n):
            return n
        case P.ENum(value=v):
            return str(v)
        case P.EHole():
            return "_"
        case P.EKw(kw=k):
            return k
        case P.EApp(fn=f, arg=a, implicit=imp):
            inner = _render(a)
            return f"{_render(f)} " + ("{" + inner + "}" if imp else f"({inner})")
        case P.ELam(binders=bs, body=b):
            names = " ".join("{" + n + "}" if i else n for n, i in bs)
            return f"\\{names}. {_render(b)}"
        case P.EPi(name=n, implicit=imp, dom=d, cod=c):
            if imp:
                return "{" + f"{n} : {_render(d)}" + "}" + f" -> {_render(c)}"
            return f"(({n} : {_render(d)}) -> {_render(c)})" if n != "_" \
                else f"(({_render(d)}) -> {_render(c)})"
        case P.ESigma(name=n, fst=a, snd=b):
            if n != "_":
                return f"(({n} : {_render(a)}) * {_render(b)})"
            return f"(({_render(a)}) * ({_render(b)}))"
        case P.EPair(fst=a, snd=b):
            return f"({_render(a)} , {_render(b)})"
        case P.EAnn(term=t, ty=ty):
            return f"({_render(t)} : {_render(ty)})"
        case P.ELet(name=n, ann=an, bound=bo, body=bd):
            s_ann = f" : {_render(an)}" if an is not None else ""
            return f"let {n}{s_ann} = {_render(bo)} in {_render(bd)}"
    raise AssertionError(repr(e))


def test_prelude_parses_and_groups():
    decls = P.parse_file(prelude_source())
    groups = group_declarations(decls)
    assert len(groups) > 30
