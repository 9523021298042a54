"""Small exact-rational linear algebra: Gaussian elimination, inverses, rank."""

from __future__ import annotations

from .rat import ZERO, ONE, mpq


def solve_square(A, rhs):
    """Solve A x = rhs exactly; returns None if A is singular."""
    n = len(A)
    M = [list(row) + [rhs[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        prow = M[col]
        inv = 1 / prow[col]
        if inv != 1:
            M[col] = prow = [v * inv for v in prow]
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if f:
                M[r] = [a - f * b for a, b in zip(M[r], prow)]
    return [M[r][n] for r in range(n)]


def invert(A):
    """Exact inverse of a square matrix; returns None if singular."""
    n = len(A)
    M = [list(row) + [ONE if j == i else ZERO for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        prow = M[col]
        inv = 1 / prow[col]
        if inv != 1:
            M[col] = prow = [v * inv for v in prow]
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if f:
                M[r] = [a - f * b for a, b in zip(M[r], prow)]
    return [row[n:] for row in M]


def rank(A) -> int:
    if not A:
        return 0
    M = [list(row) for row in A]
    rows, cols = len(M), len(M[0])
    r = 0
    for col in range(cols):
        piv = None
        for i in range(r, rows):
            if M[i][col] != 0:
                piv = i
                break
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        prow = M[r]
        for i in range(rows):
            if i != r and M[i][col]:
                f = M[i][col] / prow[col]
                M[i] = [a - f * b for a, b in zip(M[i], prow)]
        r += 1
        if r == rows:
            break
    return r


def mat_vec(A, x):
    return [sum((row[j] * x[j] for j in range(len(x)) if row[j]), ZERO) for row in A]


def dot(a, b):
    return sum((a[j] * b[j] for j in range(len(a)) if a[j] and b[j]), ZERO)
