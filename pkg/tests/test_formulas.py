import random

import pytest

from mlpkit.formulas import (
    CapExceeded,
    Formula,
    ParseError,
    Qbf,
    and_,
    enumerate_small_formulas,
    eval_formula,
    lexmax_sat,
    not_,
    or_,
    parse_cnf,
    parse_qdimacs,
    qbf_lexmax,
    qbf_truth,
    random_cnf,
    var,
)


def test_eval_basics():
    f = Formula(1, not_(var(1)))
    assert eval_formula(f, (1,)) == 0
    f = Formula(2, or_(var(1), var(2)))
    assert eval_formula(f, (0, 1)) == 1
    f = Formula(1, and_(var(1), not_(var(1))))
    for s in ((0,), (1,)):
        assert eval_formula(f, s) == 0


def test_lexmax_sat():
    assert lexmax_sat(Formula(2, or_(var(1), var(2)))) == (1, 1)
    assert lexmax_sat(Formula(1, and_(var(1), not_(var(1))))) is None
    assert lexmax_sat(Formula(1, not_(var(1)))) == (0,)


def test_lexmax_is_lexicographic_maximum():
    rng = random.Random(5)
    for _ in range(40):
        n = rng.randint(1, 5)
        f = random_cnf(rng, n, rng.randint(1, 8))
        m = lexmax_sat(f)
        sats = [s for v in range(1 << n) for s in [tuple((v >> (n - 1 - i)) & 1 for i in range(n))] if eval_formula(f, s)]
        if m is None:
            assert not sats
        else:
            assert eval_formula(f, m) == 1
            assert m == max(sats)


def test_cap_refusal():
    f = Formula(30, var(1))
    with pytest.raises(CapExceeded):
        lexmax_sat(f)


def test_parse_cnf():
    f = parse_cnf("p cnf 1 1\n1 0\n")
    assert f.n == 1 and eval_formula(f, (1,)) == 1 and eval_formula(f, (0,)) == 0

    f = parse_cnf("c comment\np cnf 2 2\n1 2 0\n-1 0\n")
    assert eval_formula(f, (0, 1)) == 1
    assert eval_formula(f, (1, 1)) == 0

    with pytest.raises(ParseError):
        parse_cnf("p cnf 1 1\n2 0\n")
    with pytest.raises(ParseError):
        parse_cnf("p cnf 1 1\n1\n")  # unterminated clause
    with pytest.raises(ParseError):
        parse_cnf("p foo 1 1\n1 0\n")


def test_parse_qdimacs():
    h = parse_qdimacs("p cnf 2 1\ne 1 0\na 2 0\n1 2 0\n")
    assert h.k == 2
    assert h.blocks == ((1,), (2,))
    assert qbf_truth(h) == 1  # exists x forall y (x or y)

    with pytest.raises(ParseError):
        parse_qdimacs("p cnf 2 1\na 1 0\ne 2 0\n1 2 0\n")  # leading forall

    h = parse_qdimacs("p cnf 2 1\n1 2 0\n")  # no prefix: one exists block
    assert h.k == 1 and set(h.blocks[0]) == {1, 2}

    h = parse_qdimacs("p cnf 3 1\ne 1 0\ne 2 0\na 3 0\n1 2 3 0\n")  # merged e,e
    assert h.k == 2 and set(h.blocks[0]) == {1, 2}

    with pytest.raises(ParseError):
        parse_qdimacs("p cnf 2 1\ne 0\n1 2 0\n")  # empty block


def test_qbf_truth_and_lexmax():
    x_or_y = Formula(2, or_(var(1), var(2)))
    h = Qbf(blocks=((1,), (2,)), matrix=x_or_y)
    assert qbf_truth(h) == 1
    assert qbf_lexmax(h) == (1,)

    x_and_y = Formula(2, and_(var(1), var(2)))
    h = Qbf(blocks=((1,), (2,)), matrix=x_and_y)
    assert qbf_truth(h) == 0
    assert qbf_lexmax(h) is None

    taut = Formula(1, or_(var(1), not_(var(1))))
    h = Qbf(blocks=((1,),), matrix=taut)
    assert qbf_truth(h) == 1
    assert qbf_lexmax(h) == (1,)


def test_single_block_qbf_matches_lexmax_sat():
    rng = random.Random(9)
    for _ in range(30):
        n = rng.randint(1, 4)
        f = random_cnf(rng, n, rng.randint(1, 6))
        h = Qbf(blocks=(tuple(range(1, n + 1)),), matrix=f)
        assert qbf_lexmax(h) == lexmax_sat(f)
        assert (qbf_lexmax(h) is not None) == (qbf_truth(h) == 1)


def test_enumerate_small_formulas():
    fams = enumerate_small_formulas(2, 2)
    sexprs = {f.to_sexpr() for f in fams}
    assert len(sexprs) == len(fams)  # deduplicated
    assert "v1" in sexprs
    assert "(or v1 v1)" in sexprs  # repeated-leaf shapes are included
    # all of them evaluate without error
    for f in fams:
        eval_formula(f, tuple(0 for _ in range(f.n)))
    bigger = enumerate_small_formulas(3, 3)
    assert len(bigger) > len(fams)


def test_sexpr():
    f = Formula(2, and_(or_(var(1), var(2)), not_(var(1))))
    assert f.to_sexpr() == "(and (or v1 v2) (not v1))"
