"""Level-algebra unit tests: canonical forms, the ACI laws, the solver."""

import itertools

from nary_kernel.levels import (
    LZERO, Failed, LevelAtom, Postponed, Solved, atom_nf, closed, make_nf,
    mentions, nf_equal, nf_max, nf_shift, nf_suc, solve_level)


def atom(name, off=0):
    return atom_nf(name, None, off)


def nf(constant, **offsets):
    return make_nf(constant, (LevelAtom(k, o, None) for k, o in offsets.items()))


def shape(x):
    return (x.constant, {(a.key, a.offset) for a in x.atoms})


# -- canonical form ----------------------------------------------------------

def test_idempotence_of_max():
    assert shape(nf_max(atom("a"), atom("a"))) == (0, {("a", 0)})


def test_suc_distributes_then_subsumes():
    # lsuc (lmax a lzero): the distributed constant 1 is subsumed by a+1
    x = nf_suc(nf_max(atom("a"), LZERO))
    assert shape(x) == (0, {("a", 1)})


def test_closed_arithmetic():
    assert shape(nf_max(LZERO, nf_suc(LZERO))) == (1, set())


def test_max_of_two_heads():
    assert shape(nf_max(atom("a"), atom("b"))) == (0, {("a", 0), ("b", 0)})


def test_offset_subsumption():
    assert shape(nf_max(atom("a", 1), atom("a"))) == (0, {("a", 1)})


def test_constant_subsumed_by_offset():
    assert shape(nf_max(closed(2), atom("a", 3))) == (0, {("a", 3)})


def test_constant_kept_when_dominant():
    assert shape(nf_max(closed(2), atom("a", 0))) == (2, {("a", 0)})


def test_suc_shifts_everything():
    assert shape(nf_suc(closed(0))) == (1, set())
    x = nf_suc(nf(0, a=0, b=2))
    assert shape(x) == (0, {("a", 1), ("b", 3)})


def test_nf_shift_matches_iterated_suc():
    x = nf(1, a=0, b=2)
    assert nf_equal(nf_shift(x, 3), nf_suc(nf_suc(nf_suc(x))))


# -- equality ----------------------------------------------------------------

def test_equal_quotients_aci():
    l = nf_max(atom("a"), nf_max(atom("b"), atom("a")))
    r = nf_max(atom("b"), atom("a"))
    assert nf_equal(l, r)


def test_suc_vs_suc_of_max_zero():
    assert nf_equal(nf_suc(atom("a")), nf_suc(nf_max(atom("a"), LZERO)))


def test_not_equal_offset():
    assert not nf_equal(atom("a"), nf_suc(atom("a")))


# -- enumeration of the laws (small but exhaustive grids) ---------------------

def enumerate_nfs(heads=("a", "b", "c"), max_offset=3, max_const=3):
    """Every canonical normal form over the grid."""
    out = []
    per_head = [[None] + list(range(max_offset + 1))] * len(heads)
    for combo in itertools.product(*per_head):
        atoms = [LevelAtom(h, o, None) for h, o in zip(heads, combo) if o is not None]
        for const in range(max_const + 1):
            x = make_nf(const, atoms)
            if x not in out:
                out.append(x)
    seen = set()
    uniq = []
    for x in out:
        s = (x.constant, tuple(sorted((a.key, a.offset) for a in x.atoms)))
        if s not in seen:
            seen.add(s)
            uniq.append(x)
    return uniq


def test_commutativity_enumerated():
    forms = enumerate_nfs(max_offset=2, max_const=2)
    for x, y in itertools.product(forms, repeat=2):
        assert nf_equal(nf_max(x, y), nf_max(y, x))


def test_associativity_enumerated():
    forms = enumerate_nfs(heads=("a", "b"), max_offset=2, max_const=2)
    for x, y, z in itertools.product(forms, repeat=3):
        assert nf_equal(nf_max(nf_max(x, y), z), nf_max(x, nf_max(y, z)))


def test_idempotence_enumerated():
    for x in enumerate_nfs():
        assert nf_equal(nf_max(x, x), x)


def test_suc_distributes_over_max_enumerated():
    forms = enumerate_nfs(max_offset=2, max_const=2)
    for x, y in itertools.product(forms, repeat=2):
        assert nf_equal(nf_suc(nf_max(x, y)), nf_max(nf_suc(x), nf_suc(y)))


# -- the solver fragment -------------------------------------------------------

def is_meta(key):
    return isinstance(key, str) and key.startswith("?")


def any_scope(_nf):
    return True


def test_instantiation():
    res = solve_level(atom("?r"), nf(0, a=0, b=0), is_meta, any_scope)
    assert isinstance(res, Solved)
    [(key, sol)] = res.assignments
    assert key == "?r" and shape(sol) == (0, {("a", 0), ("b", 0)})


def test_closed_mismatch_fails():
    assert isinstance(solve_level(closed(0), closed(1), is_meta, any_scope), Failed)


def test_meta_not_alone_postpones():
    res = solve_level(nf(0, **{"?r": 0, "a": 0}), atom("a"), is_meta, any_scope)
    assert isinstance(res, Postponed)


def test_offset_subtraction():
    # the constant 2 is already subsumed by a+3 in the canonical input
    res = solve_level(atom("?r", 1), nf(2, a=3), is_meta, any_scope)
    assert isinstance(res, Solved)
    [(_, sol)] = res.assignments
    assert shape(sol) == (0, {("a", 2)})
    res = solve_level(atom("?r", 1), nf(4, a=3), is_meta, any_scope)
    assert isinstance(res, Solved)
    [(_, sol)] = res.assignments
    assert shape(sol) == (3, {("a", 2)})


def test_unsatisfiable_offset_fails():
    assert isinstance(solve_level(atom("?r", 1), closed(0), is_meta, any_scope), Failed)
    assert isinstance(solve_level(atom("?r", 1), atom("a", 0), is_meta, any_scope), Failed)


def test_occurs_postpones():
    res = solve_level(atom("?r"), nf(0, **{"?r": 0, "a": 0}), is_meta, any_scope)
    assert isinstance(res, Postponed)


def test_rigid_rigid_mismatch_fails():
    assert isinstance(solve_level(atom("a"), atom("b"), is_meta, any_scope), Failed)


def test_equal_solves_without_assignment():
    res = solve_level(nf(0, a=1, b=0), nf(0, b=0, a=1), is_meta, any_scope)
    assert isinstance(res, Solved) and res.assignments == ()


def test_solved_assignment_substitutes_back():
    """Any Solved assignment, substituted into the meta side, restores equality."""
    forms = enumerate_nfs(max_offset=2, max_const=2)
    checked = 0
    for other in forms:
        for k in range(3):
            res = solve_level(atom("?r", k), other, is_meta, any_scope)
            if not isinstance(res, Solved) or not res.assignments:
                continue
            [(_, sol)] = res.assignments
            assert nf_equal(nf_shift(sol, k), other)
            checked += 1
    assert checked > 50
