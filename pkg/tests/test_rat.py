import math
import random

import pytest

from mlpkit.rat import (
    encoding_size_rat,
    format_rat,
    parse_rat,
    pow2,
    rat,
)


def test_canonical_form():
    x = rat(2, 4)
    assert x.numerator == 1 and x.denominator == 2
    y = rat(3, -7)
    assert y.numerator == -3 and y.denominator == 7


def test_exact_arithmetic():
    assert rat(1, 3) + rat(1, 6) == rat(1, 2)
    assert rat(1, 3) * 3 == 1
    assert rat(7, 2) / rat(7, 2) == 1
    assert rat(1, 10) + rat(2, 10) == rat(3, 10)  # no 0.30000000000000004 here


@pytest.mark.parametrize(
    "value,expected",
    [
        (rat(0), 3),  # 1 + 1 + 1
        (rat(3, 7), 6),  # 1 + 2 + 3
        (rat(-8), 6),  # 1 + 4 + 1
        (rat(1), 3),
    ],
)
def test_encoding_size_examples(value, expected):
    assert encoding_size_rat(value) == expected


def test_encoding_size_monotone_for_coprime_integer_multiples():
    rng = random.Random(7)
    for _ in range(500):
        p = rng.randint(1, 10**6)
        q = rng.randint(1, 10**6)
        r = rat(p, q)
        m = rng.randint(2, 97)
        if math.gcd(m, int(r.denominator)) != 1:
            continue
        assert encoding_size_rat(m * r) >= encoding_size_rat(r)


def test_parse_format_roundtrip():
    rng = random.Random(11)
    for _ in range(10_000):
        p = rng.randint(-10**9, 10**9)
        q = rng.randint(1, 10**9)
        r = rat(p, q)
        assert parse_rat(format_rat(r)) == r


def test_parse_rejects_noncanonical():
    with pytest.raises(ValueError):
        parse_rat("2/4")
    with pytest.raises(ValueError):
        parse_rat("3/-7")
    with pytest.raises(ValueError):
        parse_rat("5/1")
    assert parse_rat("-8") == -8
    assert parse_rat("3/7") == rat(3, 7)


def test_pow2():
    assert pow2(5) == 32
    assert pow2(-3) == rat(1, 8)
    assert pow2(0) == 1
