"""Exact rational scalars and their binary encoding size.

Every number that enters an instance, a solver, or a certificate is a
gmpy2.mpq.  There is deliberately no floating-point fallback: binary-search
termination and the uniqueness of bounded-size rationals in short intervals
are only valid with exact arithmetic.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpq, mpz

Rat = mpq  # canonical form (gcd-reduced, positive denominator) is automatic

ZERO = mpq(0)
ONE = mpq(1)
TWO = mpq(2)


def rat(p, q=1) -> Rat:
    """Build an exact rational; q must be nonzero."""
    return mpq(p, q)


def is_rat(x) -> bool:
    return isinstance(x, type(ZERO))


def is_integer(x: Rat) -> bool:
    return x.denominator == 1


def parse_rat(text: str) -> Rat:
    """Parse 'p' or 'p/q'; rejects non-canonical forms like 2/4 or 3/-7."""
    text = text.strip()
    if "/" in text:
        ps, qs = text.split("/", 1)
        p = int(ps)
        q = int(qs)
        if q <= 0:
            raise ValueError(f"denominator must be positive: {text!r}")
        if q == 1:
            raise ValueError(f"denominator 1 must be omitted: {text!r}")
        if gmpy2.gcd(mpz(abs(p)), mpz(q)) != 1:
            raise ValueError(f"rational not in canonical form: {text!r}")
        return mpq(p, q)
    return mpq(int(text))


def format_rat(x: Rat) -> str:
    """Serialize as p/q with q omitted when 1."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _int_bits(v) -> int:
    """Bit count of |v| with the at-least-one-digit convention: max(1, ceil(log2(|v|+1)))."""
    v = abs(int(v))
    if v <= 1:
        return 1
    return int(mpz(v).bit_length())


def encoding_size_rat(x: Rat) -> int:
    """sigma(p/q) = 1 + bits(p) + bits(q); a sign bit plus both numerals."""
    return 1 + _int_bits(x.numerator) + _int_bits(x.denominator)


def encoding_size_vec(v) -> int:
    """Vector size: a length header plus component sizes."""
    return _int_bits(len(v)) + sum(encoding_size_rat(x) for x in v)


def encoding_size_mat(rows) -> int:
    """Matrix size: both dimension headers plus entry sizes."""
    r = len(rows)
    c = len(rows[0]) if r else 0
    return _int_bits(r) + _int_bits(c) + sum(encoding_size_rat(x) for row in rows for x in row)


def floor_rat(x: Rat):
    return x.numerator // x.denominator


def pow2(e: int) -> Rat:
    """2**e as an exact rational, e may be negative."""
    if e >= 0:
        return mpq(mpz(1) << e)
    return mpq(1, mpz(1) << (-e))
